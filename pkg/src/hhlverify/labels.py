"""Verification-condition labels.

A label names one verification condition among those produced by a single
assertion. It has a category — empty, `init`, `init_all`, or `maintain` —
and a chain of branch atoms recording the execution path that reaches the
assertion: `skip` / `exec` for the domain-fails / domain-holds cases of an
ODE, and 1-based indices for if/choice branches, nested like `1(2.exec)`
when branching occurs inside a branch.

Rendered labels are `category SP atoms` with either part omitted when empty;
atoms join with `.`. The empty label is spelled `_` inside hint blocks.
"""

from __future__ import annotations

from dataclasses import dataclass

CATEGORIES = ("", "init", "init_all", "maintain")


@dataclass(frozen=True)
class SkipAtom:
    def render(self) -> str:
        return "skip"


@dataclass(frozen=True)
class ExecAtom:
    def render(self) -> str:
        return "exec"


@dataclass(frozen=True)
class IdxAtom:
    index: int
    nested: tuple["Atom", ...] = ()

    def render(self) -> str:
        if not self.nested:
            return str(self.index)
        return f"{self.index}({render_atoms(self.nested)})"


Atom = SkipAtom | ExecAtom | IdxAtom

SKIP = SkipAtom()
EXEC = ExecAtom()


def render_atoms(atoms: tuple[Atom, ...]) -> str:
    return ".".join(a.render() for a in atoms)


@dataclass(frozen=True)
class Label:
    category: str = ""  # one of CATEGORIES
    atoms: tuple[Atom, ...] = ()

    def __post_init__(self) -> None:
        if self.category not in CATEGORIES:
            raise ValueError(f"bad label category {self.category!r}")

    def render(self) -> str:
        parts = [p for p in (self.category, render_atoms(self.atoms)) if p]
        return " ".join(parts)

    def render_hint(self) -> str:
        """Hint-block spelling: the empty label is written `_`."""
        return self.render() or "_"

    def with_atom(self, atom: Atom) -> "Label":
        return Label(self.category, (atom,) + self.atoms)


class LabelSyntaxError(ValueError):
    pass


def _split_atoms(text: str) -> list[str]:
    """Split an atom chain on top-level dots (dots inside parens nest)."""
    parts: list[str] = []
    depth = 0
    current: list[str] = []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth < 0:
                raise LabelSyntaxError(f"unbalanced ')' in {text!r}")
        if ch == "." and depth == 0:
            parts.append("".join(current))
            current = []
        else:
            current.append(ch)
    if depth != 0:
        raise LabelSyntaxError(f"unbalanced '(' in {text!r}")
    parts.append("".join(current))
    return parts


def _parse_atom(text: str) -> Atom:
    text = text.strip()
    if text == "skip":
        return SKIP
    if text == "exec":
        return EXEC
    if text.isdigit():
        return IdxAtom(int(text))
    if "(" in text and text.endswith(")"):
        head, inner = text.split("(", 1)
        if not head.isdigit():
            raise LabelSyntaxError(f"bad branch atom {text!r}")
        nested = tuple(_parse_atom(p) for p in _split_atoms(inner[:-1]))
        return IdxAtom(int(head), nested)
    raise LabelSyntaxError(f"bad branch atom {text!r}")


def parse_label(text: str) -> Label:
    """Parse a rendered label; accepts `_` for the empty label."""
    text = " ".join(text.split())
    if text in ("", "_"):
        return Label()
    category = ""
    for word in ("init_all", "init", "maintain"):
        if text == word:
            return Label(word)
        if text.startswith(word + " "):
            category = word
            text = text[len(word) + 1 :]
            break
    atom_text = text.strip()
    if not atom_text:
        raise LabelSyntaxError("label has a trailing space but no atoms")
    atoms = tuple(_parse_atom(p) for p in _split_atoms(atom_text))
    return Label(category, atoms)
