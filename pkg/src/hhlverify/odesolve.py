"""Closed-form polynomial solutions of ODE systems and Darboux cofactors.

`solve` integrates a linear system with nilpotent flow by Picard iteration,
returning each evolved variable as a polynomial in the elapsed time and the
variables' initial values.  `synthesize_cofactor` finds the polynomial g
with f' = g*f (+ nonnegative remainder) used by the Darboux proof rules.
"""

from __future__ import annotations

from fractions import Fraction

from .expr import (
    Monomial,
    OdeSystem,
    Polynomial,
    Term,
    is_linear_in,
    normalize,
    poly_div,
    term_from_polynomial,
)


class OdeSolveError(Exception):
    pass


class NotLinear(OdeSolveError):
    """A right-hand side is not affine in the evolved variables."""


class SolutionNotPolynomial(OdeSolveError):
    """Picard iteration did not reach a fixed point: the solution has no
    polynomial closed form (the system's linear part is not nilpotent)."""


class CofactorNotFound(OdeSolveError):
    """No polynomial cofactor makes the Darboux identity hold."""


def _integrate(poly: Polynomial, var: str) -> Polynomial:
    """Antiderivative in `var` with zero constant term."""
    out: dict[Monomial, Fraction] = {}
    for mono, coeff in poly.coeffs.items():
        entries = dict(mono)
        k = entries.get(var, 0)
        entries[var] = k + 1
        new_mono = tuple(sorted(entries.items()))
        out[new_mono] = coeff / (k + 1)
    return Polynomial(out)


def solve(system: OdeSystem, time_var: str = "t") -> dict[str, Term]:
    """Exact solution of the system as polynomials in `time_var` and the
    initial values (written with the evolved variables' own names).

    Raises NotLinear when a right-hand side is nonlinear in the evolved
    variables, and SolutionNotPolynomial when the iteration does not
    stabilize (solutions involving exponentials have no polynomial form).
    """
    if not is_linear_in(system):
        raise NotLinear(
            "system is not linear in its evolved variables: "
            + ", ".join(system.variables)
        )
    evolved = system.variables
    rhs_polys = {v: normalize(e) for v, e in system.equations}
    state: dict[str, Polynomial] = {v: Polynomial.variable(v) for v in evolved}
    # A nilpotent linear flow stabilizes within n iterations; one extra
    # iteration witnesses the fixed point.
    for _ in range(len(evolved) + 2):
        new_state = {
            v: Polynomial.variable(v) + _integrate(rhs_polys[v].substitute(state), time_var)
            for v in evolved
        }
        if new_state == state:
            return {v: term_from_polynomial(p) for v, p in state.items()}
        state = new_state
    raise SolutionNotPolynomial(
        "no polynomial closed form for the system: "
        + ", ".join(system.variables)
    )


def _is_syntactically_nonnegative(poly: Polynomial) -> bool:
    """True when every monomial has a nonnegative coefficient and only even
    exponents, which makes the polynomial pointwise nonnegative."""
    for mono, coeff in poly.coeffs.items():
        if coeff < 0:
            return False
        if any(exp % 2 != 0 for _, exp in mono):
            return False
    return True


def synthesize_cofactor(
    f: Term | Polynomial, f_dot: Term | Polynomial, equality: bool
) -> Term:
    """Cofactor g for the Darboux rules: for an equality invariant f == 0,
    g satisfies f' = g*f exactly; for an inequality invariant f >= 0 (or
    > 0), f' = g*f + r with a syntactically nonnegative remainder r.
    """
    f_poly = f if isinstance(f, Polynomial) else normalize(f)
    d_poly = f_dot if isinstance(f_dot, Polynomial) else normalize(f_dot)
    if f_poly.is_zero:
        raise CofactorNotFound("invariant polynomial is zero")
    quotient, remainder = poly_div(d_poly, f_poly)
    if equality:
        if not remainder.is_zero:
            raise CofactorNotFound(
                "no exact cofactor: division leaves a remainder"
            )
        return term_from_polynomial(quotient)
    if not _is_syntactically_nonnegative(remainder):
        raise CofactorNotFound(
            "no cofactor with a nonnegative remainder"
        )
    return term_from_polynomial(quotient)
