"""Shared test utilities: corpus loading and compact formula literals."""

from __future__ import annotations

from importlib import resources

from hhlverify.expr import Formula, Term
from hhlverify.parser import HoareFile, parse


def corpus_text(name: str) -> str:
    return (resources.files("hhlverify") / "corpus" / name).read_text(encoding="utf-8")


def corpus_file(name: str) -> HoareFile:
    return parse(corpus_text(name))


def corpus_names() -> list[str]:
    root = resources.files("hhlverify") / "corpus"
    return sorted(e.name for e in root.iterdir() if e.name.endswith(".hhl"))


def F(text: str) -> Formula:
    """Parse a bare formula via a minimal host program."""
    return parse(f"pre [{text}]; skip; post [true];").preconditions[0].formula


def T(text: str) -> Term:
    """Parse a bare term via a minimal host formula."""
    cmp = F(f"{text} == 0")
    return cmp.left


def span_of(source: str, fragment: str, occurrence: int = 0) -> tuple[int, int]:
    """Byte span of the nth occurrence of `fragment` in `source`."""
    at = -1
    for _ in range(occurrence + 1):
        at = source.index(fragment, at + 1)
    return (at, at + len(fragment))
