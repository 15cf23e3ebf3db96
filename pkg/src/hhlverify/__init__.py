"""Verification toolkit for annotated hybrid programs.

Parse `.hhl` files, generate labeled verification conditions via a
weakest-precondition calculus with differential-equation proof rules,
discharge them through an SMT solver, and sanity-check specifications by
numeric simulation.
"""

from __future__ import annotations

__version__ = "0.1.0"

__all__ = ["__version__"]
