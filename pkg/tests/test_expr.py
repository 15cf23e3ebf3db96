"""Expression layer: exact arithmetic, polynomial algebra, Lie derivatives,
domain closure/boundary, and canonical formula comparison.

Symbolic results are cross-checked against sympy (an independent
implementation) and against finite differences; polynomial division is
checked by reconstruction.
"""

from __future__ import annotations

from fractions import Fraction

import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from hhlverify.expr import (
    And,
    Cmp,
    Exists,
    NonConstantDivisor,
    OdeSystem,
    Polynomial,
    UnsupportedDomain,
    boundary,
    canonical_formula,
    closure,
    evaluate_formula,
    evaluate_term,
    format_fraction,
    formula_variables,
    formulas_equal,
    fresh_name,
    is_linear_in,
    lie_derivative,
    normalize,
    poly_div,
    substitute_formula,
    substitute_term,
    term_from_polynomial,
    term_to_str,
    term_variables,
    terms_equal,
)
from helpers import F, T

# ---------------------------------------------------------------------------
# Exact evaluation


def test_evaluate_term_is_exact():
    term = T("(1/3) * x + 2/5")
    value = evaluate_term(term, {"x": Fraction(1, 7)})
    assert value == Fraction(1, 3) * Fraction(1, 7) + Fraction(2, 5)
    assert isinstance(value, Fraction)


def test_evaluate_term_power_and_negation():
    assert evaluate_term(T("-x^3"), {"x": Fraction(2)}) == Fraction(-8)
    assert evaluate_term(T("x^0"), {"x": Fraction(5)}) == 1


def test_decimal_literals_are_exact_rationals():
    assert evaluate_term(T("0.198"), {}) == Fraction(99, 500)
    assert evaluate_term(T("49.084"), {}) == Fraction(49084, 1000)


def test_evaluate_formula_on_points():
    f = F("x^2 + y^2 <= 1 && x != y")
    assert evaluate_formula(f, {"x": Fraction(1, 2), "y": Fraction(0)})
    assert not evaluate_formula(f, {"x": Fraction(1), "y": Fraction(1)})


def test_evaluate_formula_rejects_quantifiers():
    with pytest.raises(ValueError):
        evaluate_formula(Exists(("y",), F("y > 0")), {})


def test_division_by_nonconstant_rejected_in_normalization():
    with pytest.raises(NonConstantDivisor):
        normalize(T("x / y"))


def test_division_by_constant_normalizes():
    assert terms_equal(T("x / 4"), T("0.25 * x"))


# ---------------------------------------------------------------------------
# Substitution and fresh names


def test_substitute_term():
    out = substitute_term(T("x + y * x"), {"x": T("z + 1")})
    assert terms_equal(out, T("(z + 1) + y * (z + 1)"))


def test_substitute_formula_avoids_capture():
    # Substituting x := y under a binder for y must not capture.
    f = Exists(("y",), F("x + y > 0"))
    out = substitute_formula(f, {"x": T("y")})
    assert isinstance(out, Exists)
    inner = out.body
    assert isinstance(inner, Cmp)
    free = formula_variables(out)
    assert free == {"y"}
    # The binder variable was renamed away from the substituted y.
    assert out.variables != ("y",)


def test_fresh_name_picks_smallest_unused_suffix():
    assert fresh_name("t", set()) == "t"
    assert fresh_name("t", {"t"}) == "t1"
    assert fresh_name("t", {"t", "t1", "t3"}) == "t2"


# ---------------------------------------------------------------------------
# Variables


def test_term_variables():
    assert term_variables(T("x * y + z^2")) == {"x", "y", "z"}


def test_formula_variables_are_free_variables():
    assert formula_variables(Exists(("y",), F("x + y > 0"))) == {"x"}
    assert formula_variables(F("x > 0 && y <= 2")) == {"x", "y"}


# ---------------------------------------------------------------------------
# Closure and boundary of ODE domains


def test_closure_of_strict_conjunction():
    assert formulas_equal(closure(F("x < 5 && y < 3")), F("x <= 5 && y <= 3"))
    assert formulas_equal(closure(F("x > 0")), F("x >= 0"))


def test_boundary_single_atom_is_equality():
    assert formulas_equal(boundary(F("x < 5")), F("x == 5"))


def test_boundary_multi_atom():
    expected = F("x <= 5 && y <= 3 && (x == 5 || y == 3)")
    assert formulas_equal(boundary(F("x < 5 && y < 3")), expected)


def test_nonstrict_domain_atom_rejected():
    with pytest.raises(UnsupportedDomain):
        closure(F("x <= 5"))
    with pytest.raises(UnsupportedDomain):
        boundary(F("x >= 0 && y < 1"))


_rational = st.fractions(
    min_value=Fraction(-10), max_value=Fraction(10), max_denominator=8
)


@given(x=_rational, y=_rational)
def test_boundary_point_lies_in_closure_outside_domain(x, y):
    domain = F("x < 5 && y < 3")
    env = {"x": x, "y": y}
    if evaluate_formula(boundary(domain), env):
        assert evaluate_formula(closure(domain), env)
        assert not evaluate_formula(domain, env)


# ---------------------------------------------------------------------------
# Polynomials


def _sympy_of(term, names=("x", "y", "z", "t")):
    syms = {n: sympy.Symbol(n) for n in names}
    return sympy.sympify(term_to_str(term).replace("^", "**"), locals=syms), syms


def test_normalize_roundtrip_golden():
    poly = normalize(T("(x + y)^2 - x^2 - 2*x*y"))
    assert terms_equal(term_from_polynomial(poly), T("y^2"))


_small_coeff = st.integers(min_value=-4, max_value=4)


def _poly_strategy(vars_=("x", "y")):
    monomial = st.tuples(
        _small_coeff,
        st.integers(min_value=0, max_value=2),
        st.integers(min_value=0, max_value=2),
    )
    def build(monos):
        p = Polynomial.constant(Fraction(0))
        for c, i, j in monos:
            term = Polynomial.constant(Fraction(c))
            for _ in range(i):
                term = term * Polynomial.variable(vars_[0])
            for _ in range(j):
                term = term * Polynomial.variable(vars_[1])
            p = p + term
        return p
    return st.lists(monomial, min_size=1, max_size=4).map(build)


@given(num=_poly_strategy(), den=_poly_strategy())
@settings(max_examples=60)
def test_poly_div_reconstructs(num, den):
    if den.is_zero:
        return
    q, r = poly_div(num, den)
    assert q * den + r == num


@given(p=_poly_strategy())
@settings(max_examples=60)
def test_term_from_polynomial_roundtrip(p):
    assert normalize(term_from_polynomial(p)) == p


# ---------------------------------------------------------------------------
# Lie derivatives


def test_lie_derivative_rotation_invariant():
    system = OdeSystem(((("x"), T("y")), (("y"), T("-x"))))
    assert terms_equal(lie_derivative(T("x^2 + y^2"), system), T("0"))


def test_lie_derivative_golden():
    system = OdeSystem((("x", T("x + 1")),))
    assert terms_equal(lie_derivative(T("x^2"), system), T("2*x^2 + 2*x"))


@given(
    fc=st.lists(st.tuples(_small_coeff, st.integers(0, 2), st.integers(0, 2)), min_size=1, max_size=3),
    e1=st.lists(st.tuples(_small_coeff, st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=2),
    e2=st.lists(st.tuples(_small_coeff, st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=2),
)
@settings(max_examples=40, deadline=None)
def test_lie_derivative_matches_sympy(fc, e1, e2):
    def to_term(monos):
        parts = []
        for c, i, j in monos:
            parts.append(f"{c} * x^{i} * y^{j}")
        return T(" + ".join(parts))

    f, ex, ey = to_term(fc), to_term(e1), to_term(e2)
    system = OdeSystem((("x", ex), ("y", ey)))
    ours, syms = _sympy_of(lie_derivative(f, system))
    sf, _ = _sympy_of(f)
    sex, _ = _sympy_of(ex)
    sey, _ = _sympy_of(ey)
    theirs = sympy.diff(sf, syms["x"]) * sex + sympy.diff(sf, syms["y"]) * sey
    assert sympy.simplify(ours - theirs) == 0


@given(x0=_rational, y0=_rational)
@settings(max_examples=30, deadline=None)
def test_lie_derivative_matches_finite_difference(x0, y0):
    # d/dt f(s(t)) at t=0 equals the Lie derivative at s(0).
    f = T("x^2 * y + 3 * y")
    system = OdeSystem((("x", T("y + 1")), ("y", T("x - y"))))
    lie = lie_derivative(f, system)
    env = {"x": float(x0), "y": float(y0)}
    h = 1e-6
    moved = {
        "x": env["x"] + h * evaluate_term(T("y + 1"), env),
        "y": env["y"] + h * evaluate_term(T("x - y"), env),
    }
    diff = (evaluate_term(f, moved) - evaluate_term(f, env)) / h
    scale = 1.0 + abs(evaluate_term(lie, env))
    assert abs(diff - evaluate_term(lie, env)) <= 1e-3 * scale


def test_is_linear_in():
    assert is_linear_in(OdeSystem((("x", T("2*x + y + 1")), ("y", T("3")))))
    assert not is_linear_in(OdeSystem((("x", T("x^2")),)))
    assert not is_linear_in(OdeSystem((("x", T("x * y")), ("y", T("1")))))


# ---------------------------------------------------------------------------
# Formatting and canonical forms


def test_format_fraction():
    assert format_fraction(Fraction(1, 2)) == "0.5"
    assert format_fraction(Fraction(-7, 20)) == "-0.35"
    assert format_fraction(Fraction(1, 3)) == "1/3"
    assert format_fraction(Fraction(5)) == "5"
    assert format_fraction(Fraction(99, 500)) == "0.198"


def test_canonical_form_identities():
    assert formulas_equal(F("x + 1 >= 1"), F("x >= 0"))
    assert formulas_equal(F("x >= 0"), F("0 <= x"))
    assert formulas_equal(F("!(x < 0)"), F("x >= 0"))
    assert formulas_equal(F("a > 0 -> (b > 0 -> c > 0)"), F("a > 0 && b > 0 -> c > 0"))
    assert formulas_equal(F("x > 0 && y > 0"), F("y > 0 && x > 0"))
    assert not formulas_equal(F("x > 0"), F("x >= 0"))


def test_canonical_form_handles_quantifier_alpha_equivalence():
    a = Exists(("u",), F("u > x"))
    b = Exists(("w",), F("w > x"))
    assert canonical_formula(a) == canonical_formula(b)
