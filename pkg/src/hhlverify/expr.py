"""Terms, formulas and exact polynomial arithmetic.

Terms are polynomial expressions over real-valued variables with exact
rational constants. Formulas are first-order assertions built from
polynomial comparisons. The canonical polynomial form (a monomial ->
coefficient map ordered graded-lexicographically) underlies equality
checking, Lie derivatives, polynomial division and cofactor synthesis.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence, Union

Number = Union[Fraction, float]


class ExprError(Exception):
    """Base class for term/formula construction errors."""


class NonConstantDivisor(ExprError):
    """A division node whose divisor does not normalize to a nonzero constant."""


class UnsupportedDomain(ExprError):
    """Domain constraint outside the supported fragment.

    Closure and boundary are defined only for conjunctions of strict
    polynomial inequalities and the literal ``true``.
    """


# ---------------------------------------------------------------------------
# Terms


@dataclass(frozen=True)
class Term:
    __slots__ = ()


@dataclass(frozen=True)
class Const(Term):
    value: Fraction

    def __post_init__(self) -> None:
        if not isinstance(self.value, Fraction):
            object.__setattr__(self, "value", Fraction(self.value))


@dataclass(frozen=True)
class Var(Term):
    name: str


@dataclass(frozen=True)
class Add(Term):
    left: Term
    right: Term


@dataclass(frozen=True)
class Sub(Term):
    left: Term
    right: Term


@dataclass(frozen=True)
class Mul(Term):
    left: Term
    right: Term


@dataclass(frozen=True)
class Div(Term):
    left: Term
    right: Term


@dataclass(frozen=True)
class Pow(Term):
    base: Term
    exp: int


@dataclass(frozen=True)
class Neg(Term):
    operand: Term


def const(value: int | str | Fraction) -> Const:
    return Const(Fraction(value))


ZERO = const(0)
ONE = const(1)


# ---------------------------------------------------------------------------
# Formulas


@dataclass(frozen=True)
class Formula:
    __slots__ = ()


@dataclass(frozen=True)
class BoolLit(Formula):
    value: bool


@dataclass(frozen=True)
class Cmp(Formula):
    op: str  # one of == != < <= > >=
    left: Term
    right: Term


@dataclass(frozen=True)
class Not(Formula):
    operand: Formula


@dataclass(frozen=True)
class And(Formula):
    items: tuple[Formula, ...]


@dataclass(frozen=True)
class Or(Formula):
    items: tuple[Formula, ...]


@dataclass(frozen=True)
class Implies(Formula):
    antecedent: Formula
    consequent: Formula


@dataclass(frozen=True)
class Exists(Formula):
    variables: tuple[str, ...]
    body: Formula


@dataclass(frozen=True)
class Forall(Formula):
    variables: tuple[str, ...]
    body: Formula


@dataclass(frozen=True)
class ForallRange(Formula):
    """Bounded quantifier ``forall lower <= var < upper . body``.

    Kept as a distinct node so printing and generation mirror the bounded
    form; it is lowered to a guarded ``forall`` only at SMT emission.
    """

    var: str
    lower: Term
    upper: Term
    body: Formula


TRUE = BoolLit(True)
FALSE = BoolLit(False)

CMP_OPS = ("==", "!=", "<", "<=", ">", ">=")
NEGATED_CMP = {"==": "!=", "!=": "==", "<": ">=", "<=": ">", ">": "<=", ">=": "<"}


def conj(items: Sequence[Formula]) -> Formula:
    """Conjunction collapsing the empty and singleton cases."""
    items = tuple(items)
    if not items:
        return TRUE
    if len(items) == 1:
        return items[0]
    return And(items)


def disj(items: Sequence[Formula]) -> Formula:
    items = tuple(items)
    if not items:
        return FALSE
    if len(items) == 1:
        return items[0]
    return Or(items)


# ---------------------------------------------------------------------------
# ODE systems


@dataclass(frozen=True)
class OdeSystem:
    """Simultaneous equations x_i' = e_i; variables not on a left-hand side
    are treated as constants of the evolution."""

    equations: tuple[tuple[str, Term], ...]

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(v for v, _ in self.equations)

    def rhs(self, var: str) -> Term:
        for v, e in self.equations:
            if v == var:
                return e
        raise KeyError(var)

    def extended(self, more: Iterable[tuple[str, Term]]) -> "OdeSystem":
        return OdeSystem(self.equations + tuple(more))


# ---------------------------------------------------------------------------
# Canonical polynomial form
#
# A monomial is a tuple of (variable, exponent) pairs sorted by variable
# name with positive exponents; a polynomial maps monomials to nonzero
# rational coefficients. Monomials are ordered graded-lexicographically:
# higher total degree first, ties broken lexicographically on the exponent
# vector over the alphabetically sorted variable universe.

Monomial = tuple[tuple[str, int], ...]


def _mono_mul(a: Monomial, b: Monomial) -> Monomial:
    exps: dict[str, int] = dict(a)
    for v, e in b:
        exps[v] = exps.get(v, 0) + e
    return tuple(sorted((v, e) for v, e in exps.items() if e))


def _mono_degree(m: Monomial) -> int:
    return sum(e for _, e in m)


def _mono_divides(a: Monomial, b: Monomial) -> bool:
    exps = dict(b)
    return all(exps.get(v, 0) >= e for v, e in a)


def _mono_div(a: Monomial, b: Monomial) -> Monomial:
    exps = dict(a)
    for v, e in b:
        exps[v] = exps.get(v, 0) - e
    return tuple(sorted((v, e) for v, e in exps.items() if e))


class Polynomial:
    """Immutable polynomial in canonical form."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Mapping[Monomial, Fraction] | None = None):
        cleaned = {m: c for m, c in (coeffs or {}).items() if c != 0}
        object.__setattr__(self, "coeffs", cleaned)

    def __setattr__(self, name: str, value: object) -> None:
        raise AttributeError("Polynomial is immutable")

    @staticmethod
    def constant(c: Fraction | int) -> "Polynomial":
        return Polynomial({(): Fraction(c)})

    @staticmethod
    def variable(name: str) -> "Polynomial":
        return Polynomial({((name, 1),): Fraction(1)})

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Polynomial) and self.coeffs == other.coeffs

    def __hash__(self) -> int:
        return hash(frozenset(self.coeffs.items()))

    def __repr__(self) -> str:
        return f"Polynomial({term_to_str(term_from_polynomial(self))})"

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    def is_constant(self) -> bool:
        return all(m == () for m in self.coeffs)

    def constant_value(self) -> Fraction:
        if not self.is_constant():
            raise ValueError("not a constant polynomial")
        return self.coeffs.get((), Fraction(0))

    def variables(self) -> set[str]:
        return {v for m in self.coeffs for v, _ in m}

    def __add__(self, other: "Polynomial") -> "Polynomial":
        out = dict(self.coeffs)
        for m, c in other.coeffs.items():
            out[m] = out.get(m, Fraction(0)) + c
        return Polynomial(out)

    def __neg__(self) -> "Polynomial":
        return Polynomial({m: -c for m, c in self.coeffs.items()})

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + (-other)

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        out: dict[Monomial, Fraction] = {}
        for m1, c1 in self.coeffs.items():
            for m2, c2 in other.coeffs.items():
                m = _mono_mul(m1, m2)
                out[m] = out.get(m, Fraction(0)) + c1 * c2
        return Polynomial(out)

    def scale(self, c: Fraction) -> "Polynomial":
        return Polynomial({m: k * c for m, k in self.coeffs.items()})

    def __pow__(self, n: int) -> "Polynomial":
        if n < 0:
            raise ValueError("negative exponent")
        result = Polynomial.constant(1)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def _order_key(self, mono: Monomial, universe: tuple[str, ...]):
        exps = dict(mono)
        return (_mono_degree(mono), tuple(exps.get(v, 0) for v in universe))

    def ordered_monomials(self) -> list[tuple[Monomial, Fraction]]:
        """Monomials in descending graded-lexicographic order."""
        universe = tuple(sorted(self.variables()))
        return sorted(
            self.coeffs.items(),
            key=lambda mc: self._order_key(mc[0], universe),
            reverse=True,
        )

    def leading(self) -> tuple[Monomial, Fraction]:
        if self.is_zero:
            raise ValueError("zero polynomial has no leading term")
        return self.ordered_monomials()[0]

    def diff(self, var: str) -> "Polynomial":
        out: dict[Monomial, Fraction] = {}
        for m, c in self.coeffs.items():
            exps = dict(m)
            e = exps.get(var, 0)
            if e == 0:
                continue
            exps[var] = e - 1
            dm = tuple(sorted((v, k) for v, k in exps.items() if k))
            out[dm] = out.get(dm, Fraction(0)) + c * e
        return Polynomial(out)

    def substitute(self, mapping: Mapping[str, "Polynomial"]) -> "Polynomial":
        result = Polynomial()
        for m, c in self.coeffs.items():
            part = Polynomial.constant(c)
            for v, e in m:
                factor = mapping.get(v, Polynomial.variable(v))
                part = part * factor**e
            result = result + part
        return result

    def evaluate(self, env: Mapping[str, Number]) -> Number:
        total: Number = Fraction(0)
        for m, c in self.coeffs.items():
            part: Number = c
            for v, e in m:
                part = part * env[v] ** e
            total = total + part
        return total


def normalize(term: Term) -> Polynomial:
    """Canonical polynomial form of a term.

    Raises NonConstantDivisor when a divisor does not normalize to a
    nonzero constant.
    """
    if isinstance(term, Const):
        return Polynomial.constant(term.value)
    if isinstance(term, Var):
        return Polynomial.variable(term.name)
    if isinstance(term, Add):
        return normalize(term.left) + normalize(term.right)
    if isinstance(term, Sub):
        return normalize(term.left) - normalize(term.right)
    if isinstance(term, Mul):
        return normalize(term.left) * normalize(term.right)
    if isinstance(term, Neg):
        return -normalize(term.operand)
    if isinstance(term, Pow):
        return normalize(term.base) ** term.exp
    if isinstance(term, Div):
        divisor = normalize(term.right)
        if not divisor.is_constant() or divisor.is_zero:
            raise NonConstantDivisor(f"divisor {term_to_str(term.right)} is not a nonzero constant")
        return normalize(term.left).scale(Fraction(1) / divisor.constant_value())
    raise TypeError(f"not a term: {term!r}")


def term_from_polynomial(poly: Polynomial) -> Term:
    """Render a canonical polynomial back into a term, monomials in
    descending graded-lex order."""
    if poly.is_zero:
        return ZERO

    def mono_term(m: Monomial, c: Fraction) -> Term:
        factors: list[Term] = []
        if abs(c) != 1 or not m:
            factors.append(Const(abs(c)))
        for v, e in m:
            factors.append(Var(v) if e == 1 else Pow(Var(v), e))
        acc = factors[0]
        for f in factors[1:]:
            acc = Mul(acc, f)
        return acc

    items = poly.ordered_monomials()
    first_m, first_c = items[0]
    acc = mono_term(first_m, first_c)
    if first_c < 0:
        acc = Neg(acc)
    for m, c in items[1:]:
        part = mono_term(m, c)
        acc = Sub(acc, part) if c < 0 else Add(acc, part)
    return acc


def poly_div(num: Polynomial, den: Polynomial) -> tuple[Polynomial, Polynomial]:
    """Multivariate polynomial division: num = q*den + r with no monomial of
    r divisible by the leading monomial of den (graded-lex)."""
    if den.is_zero:
        raise ZeroDivisionError("polynomial division by zero")
    lead_m, lead_c = den.leading()
    quotient = Polynomial()
    rest = num
    while not rest.is_zero:
        reduced = False
        for m, c in rest.ordered_monomials():
            if _mono_divides(lead_m, m):
                factor = Polynomial({_mono_div(m, lead_m): c / lead_c})
                quotient = quotient + factor
                rest = rest - factor * den
                reduced = True
                break
        if not reduced:
            break
    return quotient, rest


# ---------------------------------------------------------------------------
# Variable utilities


def term_variables(term: Term) -> set[str]:
    if isinstance(term, Const):
        return set()
    if isinstance(term, Var):
        return {term.name}
    if isinstance(term, (Add, Sub, Mul, Div)):
        return term_variables(term.left) | term_variables(term.right)
    if isinstance(term, Pow):
        return term_variables(term.base)
    if isinstance(term, Neg):
        return term_variables(term.operand)
    raise TypeError(f"not a term: {term!r}")


def formula_variables(formula: Formula) -> set[str]:
    """Free variables of a formula."""
    if isinstance(formula, BoolLit):
        return set()
    if isinstance(formula, Cmp):
        return term_variables(formula.left) | term_variables(formula.right)
    if isinstance(formula, Not):
        return formula_variables(formula.operand)
    if isinstance(formula, (And, Or)):
        out: set[str] = set()
        for item in formula.items:
            out |= formula_variables(item)
        return out
    if isinstance(formula, Implies):
        return formula_variables(formula.antecedent) | formula_variables(formula.consequent)
    if isinstance(formula, (Exists, Forall)):
        return formula_variables(formula.body) - set(formula.variables)
    if isinstance(formula, ForallRange):
        out = formula_variables(formula.body) - {formula.var}
        return out | term_variables(formula.lower) | term_variables(formula.upper)
    raise TypeError(f"not a formula: {formula!r}")


def fresh_name(base: str, used: set[str]) -> str:
    """base if unused, else base + smallest positive numeric suffix."""
    if base not in used:
        return base
    n = 1
    while f"{base}{n}" in used:
        n += 1
    return f"{base}{n}"


# ---------------------------------------------------------------------------
# Substitution


def substitute_term(term: Term, mapping: Mapping[str, Term]) -> Term:
    if isinstance(term, Const):
        return term
    if isinstance(term, Var):
        return mapping.get(term.name, term)
    if isinstance(term, Add):
        return Add(substitute_term(term.left, mapping), substitute_term(term.right, mapping))
    if isinstance(term, Sub):
        return Sub(substitute_term(term.left, mapping), substitute_term(term.right, mapping))
    if isinstance(term, Mul):
        return Mul(substitute_term(term.left, mapping), substitute_term(term.right, mapping))
    if isinstance(term, Div):
        return Div(substitute_term(term.left, mapping), substitute_term(term.right, mapping))
    if isinstance(term, Pow):
        return Pow(substitute_term(term.base, mapping), term.exp)
    if isinstance(term, Neg):
        return Neg(substitute_term(term.operand, mapping))
    raise TypeError(f"not a term: {term!r}")


def _subst_binder(
    variables: tuple[str, ...], body: Formula, mapping: Mapping[str, Term]
) -> tuple[tuple[str, ...], Formula]:
    inner = {v: t for v, t in mapping.items() if v not in variables}
    if not inner:
        return variables, body
    clashing = {v for v in variables if any(v in term_variables(t) for t in inner.values())}
    if clashing:
        used = formula_variables(body) | set(variables)
        for t in inner.values():
            used |= term_variables(t)
        renaming: dict[str, Term] = {}
        new_vars = []
        for v in variables:
            if v in clashing:
                nv = fresh_name(v, used)
                used.add(nv)
                renaming[v] = Var(nv)
                new_vars.append(nv)
            else:
                new_vars.append(v)
        body = substitute_formula(body, renaming)
        variables = tuple(new_vars)
    return variables, substitute_formula(body, inner)


def substitute_formula(formula: Formula, mapping: Mapping[str, Term]) -> Formula:
    """Capture-avoiding simultaneous substitution of terms for variables."""
    if not mapping:
        return formula
    if isinstance(formula, BoolLit):
        return formula
    if isinstance(formula, Cmp):
        return Cmp(formula.op, substitute_term(formula.left, mapping), substitute_term(formula.right, mapping))
    if isinstance(formula, Not):
        return Not(substitute_formula(formula.operand, mapping))
    if isinstance(formula, And):
        return And(tuple(substitute_formula(f, mapping) for f in formula.items))
    if isinstance(formula, Or):
        return Or(tuple(substitute_formula(f, mapping) for f in formula.items))
    if isinstance(formula, Implies):
        return Implies(
            substitute_formula(formula.antecedent, mapping),
            substitute_formula(formula.consequent, mapping),
        )
    if isinstance(formula, Exists):
        variables, body = _subst_binder(formula.variables, formula.body, mapping)
        return Exists(variables, body)
    if isinstance(formula, Forall):
        variables, body = _subst_binder(formula.variables, formula.body, mapping)
        return Forall(variables, body)
    if isinstance(formula, ForallRange):
        lower = substitute_term(formula.lower, mapping)
        upper = substitute_term(formula.upper, mapping)
        (var,), body = _subst_binder((formula.var,), formula.body, mapping)
        return ForallRange(var, lower, upper, body)
    raise TypeError(f"not a formula: {formula!r}")


# ---------------------------------------------------------------------------
# Differential operations


def lie_derivative(term: Term | Polynomial, system: OdeSystem) -> Term:
    """Derivative of a polynomial along the vector field of the system, in
    canonical form: sum over equations of (df/dx_i) * e_i."""
    poly = term if isinstance(term, Polynomial) else normalize(term)
    total = Polynomial()
    for var, rhs in system.equations:
        total = total + poly.diff(var) * normalize(rhs)
    return term_from_polynomial(total)


def is_linear_in(system: OdeSystem) -> bool:
    """True when every right-hand side is affine in the evolving variables;
    non-evolving variables count as constants."""
    evolving = set(system.variables)
    for _, rhs in system.equations:
        for mono, _ in normalize(rhs).coeffs.items():
            if sum(e for v, e in mono if v in evolving) > 1:
                return False
    return True


# ---------------------------------------------------------------------------
# Topological operations on domain constraints


def _strict_atoms(domain: Formula) -> list[Cmp]:
    if isinstance(domain, BoolLit) and domain.value:
        return []
    if isinstance(domain, Cmp):
        if domain.op in ("<", ">"):
            return [domain]
        raise UnsupportedDomain(f"domain atom must be a strict inequality: {formula_to_str(domain)}")
    if isinstance(domain, And):
        out: list[Cmp] = []
        for item in domain.items:
            out.extend(_strict_atoms(item))
        return out
    raise UnsupportedDomain(
        f"domain must be a conjunction of strict inequalities or true: {formula_to_str(domain)}"
    )


def closure(domain: Formula) -> Formula:
    """Topological closure: strict inequalities become non-strict."""
    atoms = _strict_atoms(domain)
    if not atoms:
        return TRUE
    weakened = [Cmp("<=" if a.op == "<" else ">=", a.left, a.right) for a in atoms]
    return conj(weakened)


def boundary(domain: Formula) -> Formula:
    """Topological boundary: closure(D) ∧ (some atom holds with equality)."""
    atoms = _strict_atoms(domain)
    if not atoms:
        return FALSE
    equalities = disj([Cmp("==", a.left, a.right) for a in atoms])
    if len(atoms) == 1:
        return equalities
    return conj([closure(domain), equalities])


# ---------------------------------------------------------------------------
# Evaluation (quantifier-free)


def evaluate_term(term: Term, env: Mapping[str, Number]) -> Number:
    if isinstance(term, Const):
        return term.value
    if isinstance(term, Var):
        return env[term.name]
    if isinstance(term, Add):
        return evaluate_term(term.left, env) + evaluate_term(term.right, env)
    if isinstance(term, Sub):
        return evaluate_term(term.left, env) - evaluate_term(term.right, env)
    if isinstance(term, Mul):
        return evaluate_term(term.left, env) * evaluate_term(term.right, env)
    if isinstance(term, Div):
        return evaluate_term(term.left, env) / evaluate_term(term.right, env)
    if isinstance(term, Pow):
        return evaluate_term(term.base, env) ** term.exp
    if isinstance(term, Neg):
        return -evaluate_term(term.operand, env)
    raise TypeError(f"not a term: {term!r}")


_CMP_FUNCS = {
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def evaluate_formula(formula: Formula, env: Mapping[str, Number]) -> bool:
    """Evaluate a quantifier-free formula at a point."""
    if isinstance(formula, BoolLit):
        return formula.value
    if isinstance(formula, Cmp):
        return _CMP_FUNCS[formula.op](evaluate_term(formula.left, env), evaluate_term(formula.right, env))
    if isinstance(formula, Not):
        return not evaluate_formula(formula.operand, env)
    if isinstance(formula, And):
        return all(evaluate_formula(f, env) for f in formula.items)
    if isinstance(formula, Or):
        return any(evaluate_formula(f, env) for f in formula.items)
    if isinstance(formula, Implies):
        return (not evaluate_formula(formula.antecedent, env)) or evaluate_formula(formula.consequent, env)
    raise ValueError("cannot evaluate quantified formula at a point")


# ---------------------------------------------------------------------------
# Printing


def format_fraction(value: Fraction) -> str:
    """Exact decimal when the denominator is 2^a * 5^b, else p/q."""
    if value.denominator == 1:
        return str(value.numerator)
    den = value.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        return f"{value.numerator}/{value.denominator}"
    shift = max(twos, fives)
    scaled = value.numerator * 10**shift // value.denominator
    sign = "-" if scaled < 0 else ""
    digits = str(abs(scaled)).rjust(shift + 1, "0")
    return f"{sign}{digits[:-shift]}.{digits[-shift:]}"


_TERM_PREC = {"add": 1, "mul": 2, "neg": 3, "pow": 4, "atom": 5}


def term_to_str(term: Term, parent_prec: int = 0) -> str:
    if isinstance(term, Const):
        text = format_fraction(term.value)
        prec = _TERM_PREC["neg"] if term.value < 0 else _TERM_PREC["atom"]
    elif isinstance(term, Var):
        text, prec = term.name, _TERM_PREC["atom"]
    elif isinstance(term, Add):
        prec = _TERM_PREC["add"]
        text = f"{term_to_str(term.left, prec)} + {term_to_str(term.right, prec + 1)}"
    elif isinstance(term, Sub):
        prec = _TERM_PREC["add"]
        text = f"{term_to_str(term.left, prec)} - {term_to_str(term.right, prec + 1)}"
    elif isinstance(term, Mul):
        prec = _TERM_PREC["mul"]
        text = f"{term_to_str(term.left, prec)} * {term_to_str(term.right, prec + 1)}"
    elif isinstance(term, Div):
        prec = _TERM_PREC["mul"]
        text = f"{term_to_str(term.left, prec)} / {term_to_str(term.right, prec + 1)}"
    elif isinstance(term, Neg):
        prec = _TERM_PREC["neg"]
        text = f"-{term_to_str(term.operand, prec)}"
    elif isinstance(term, Pow):
        prec = _TERM_PREC["pow"]
        text = f"{term_to_str(term.base, prec + 1)}^{term.exp}"
    else:
        raise TypeError(f"not a term: {term!r}")
    return f"({text})" if prec < parent_prec else text


_FORMULA_PREC = {"quant": 1, "implies": 2, "or": 3, "and": 4, "not": 5, "atom": 6}


def formula_to_str(formula: Formula, parent_prec: int = 0) -> str:
    if isinstance(formula, BoolLit):
        text, prec = ("true" if formula.value else "false"), _FORMULA_PREC["atom"]
    elif isinstance(formula, Cmp):
        prec = _FORMULA_PREC["atom"]
        text = f"{term_to_str(formula.left)} {formula.op} {term_to_str(formula.right)}"
    elif isinstance(formula, Not):
        prec = _FORMULA_PREC["not"]
        text = f"!{formula_to_str(formula.operand, prec + 1)}"
    elif isinstance(formula, And):
        prec = _FORMULA_PREC["and"]
        text = " && ".join(formula_to_str(f, prec + 1) for f in formula.items)
    elif isinstance(formula, Or):
        prec = _FORMULA_PREC["or"]
        text = " || ".join(formula_to_str(f, prec + 1) for f in formula.items)
    elif isinstance(formula, Implies):
        prec = _FORMULA_PREC["implies"]
        text = f"{formula_to_str(formula.antecedent, prec + 1)} -> {formula_to_str(formula.consequent, prec)}"
    elif isinstance(formula, Exists):
        prec = _FORMULA_PREC["quant"]
        text = f"exists {' '.join(formula.variables)}. {formula_to_str(formula.body, prec)}"
    elif isinstance(formula, Forall):
        prec = _FORMULA_PREC["quant"]
        text = f"forall {' '.join(formula.variables)}. {formula_to_str(formula.body, prec)}"
    elif isinstance(formula, ForallRange):
        prec = _FORMULA_PREC["quant"]
        text = (
            f"forall {term_to_str(formula.lower)} <= {formula.var} < {term_to_str(formula.upper)}."
            f" {formula_to_str(formula.body, prec)}"
        )
    else:
        raise TypeError(f"not a formula: {formula!r}")
    return f"({text})" if prec < parent_prec else text


# ---------------------------------------------------------------------------
# Canonical comparison
#
# Equality up to: polynomial canonical form of atoms, sign normalization of
# equations, associativity/commutativity/idempotence of ∧ and ∨, currying of
# implications (A -> B -> C equals A ∧ B -> C), negation pushed onto atoms,
# and alpha renaming of bound variables.


def _poly_key(poly: Polynomial) -> tuple:
    return tuple(sorted(poly.coeffs.items()))


def _sign_normalized(poly: Polynomial) -> Polynomial:
    if poly.is_zero:
        return poly
    _, lead_c = poly.leading()
    return -poly if lead_c < 0 else poly


def _canon_atom(op: str, diff: Polynomial) -> tuple:
    # diff is left - right; encode as relation against zero.
    if diff.is_constant():
        c = diff.constant_value()
        holds = _CMP_FUNCS[op](c, Fraction(0))
        return ("bool", holds)
    if op in ("==", "!="):
        return ("eq" if op == "==" else "ne", _poly_key(_sign_normalized(diff)))
    if op == "<":
        return ("lt", _poly_key(diff))
    if op == "<=":
        return ("le", _poly_key(diff))
    if op == ">":
        return ("lt", _poly_key(-diff))
    return ("le", _poly_key(-diff))


def _canon(formula: Formula, negate: bool, depth: int, rename: dict[str, str]) -> tuple:
    if isinstance(formula, BoolLit):
        return ("bool", formula.value != negate)
    if isinstance(formula, Cmp):
        op = NEGATED_CMP[formula.op] if negate else formula.op
        sub = {v: Polynomial.variable(n) for v, n in rename.items()}
        diff = (normalize(formula.left) - normalize(formula.right)).substitute(sub)
        return _canon_atom(op, diff)
    if isinstance(formula, Not):
        return _canon(formula.operand, not negate, depth, rename)
    if isinstance(formula, (And, Or)):
        is_and = isinstance(formula, And) != negate
        items: list[tuple] = []
        for f in formula.items:
            c = _canon(f, negate, depth, rename)
            if c[0] == "bool":
                if c[1] != is_and:
                    return ("bool", not is_and)
                continue
            if c[0] == ("and" if is_and else "or"):
                items.extend(c[1])
            else:
                items.append(c)
        items = sorted(set(items))
        if not items:
            return ("bool", is_and)
        if len(items) == 1:
            return items[0]
        return ("and" if is_and else "or", tuple(items))
    if isinstance(formula, Implies):
        if negate:
            # ¬(A -> B) = A ∧ ¬B
            return _canon(And((formula.antecedent, Not(formula.consequent))), False, depth, rename)
        ante = _canon(formula.antecedent, False, depth, rename)
        cons = _canon(formula.consequent, False, depth, rename)
        antecedents: list[tuple] = []
        if ante[0] == "and":
            antecedents.extend(ante[1])
        elif ante[0] == "bool":
            if not ante[1]:
                return ("bool", True)
        else:
            antecedents.append(ante)
        if cons[0] == "implies":
            antecedents.extend(cons[1])
            cons = cons[2]
        if cons[0] == "bool":
            if cons[1]:
                return ("bool", True)
            # A -> false is ¬A
            return _canon(Not(formula.antecedent), False, depth, rename)
        antecedents = sorted(set(antecedents))
        if not antecedents:
            return cons
        return ("implies", tuple(antecedents), cons)
    if isinstance(formula, (Exists, Forall)):
        is_exists = isinstance(formula, Exists) != negate
        inner = dict(rename)
        for i, v in enumerate(formula.variables):
            inner[v] = f"@{depth + i}"
        body = _canon(formula.body, negate, depth + len(formula.variables), inner)
        return ("exists" if is_exists else "forall", len(formula.variables), body)
    if isinstance(formula, ForallRange):
        sub = {v: Polynomial.variable(n) for v, n in rename.items()}
        lower = _poly_key(normalize(formula.lower).substitute(sub))
        upper = _poly_key(normalize(formula.upper).substitute(sub))
        inner = dict(rename)
        inner[formula.var] = f"@{depth}"
        body = _canon(formula.body, negate, depth + 1, inner)
        kind = "exrange" if negate else "farange"
        return (kind, lower, upper, body)
    raise TypeError(f"not a formula: {formula!r}")


def canonical_formula(formula: Formula) -> tuple:
    """Hashable canonical form used for semantic-equality checks in tests
    and for stable deduplication."""
    return _canon(formula, False, 0, {})


def formulas_equal(a: Formula, b: Formula) -> bool:
    return canonical_formula(a) == canonical_formula(b)


def terms_equal(a: Term, b: Term) -> bool:
    return normalize(a) == normalize(b)
