"""Deterministic simulation oracle for annotated hybrid programs.

Runs a program from a concrete state: discrete statements execute over
exact rationals, and once an ODE actually evolves the state switches to
floating point with RK4 integration (fixed step, boundary crossing located
by bisection).  Nondeterminism — random assignment, choice, loop iteration
count — is resolved by a seeded generator, so runs are reproducible.

The oracle is a falsifier, not a prover: postcondition checks in numeric
mode allow a small slack so integration error cannot produce false alarms.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

from .expr import (
    Add,
    And,
    BoolLit,
    Cmp,
    Const,
    Div,
    Formula,
    Implies,
    Mul,
    Neg,
    Not,
    Or,
    Pow,
    Sub,
    Term,
    Var,
    NEGATED_CMP,
    evaluate_formula,
    evaluate_term,
    formula_variables,
    term_variables,
)
from .parser import (
    Assign,
    Choice,
    Cond,
    HoareFile,
    Loop,
    Ode,
    RandomAssign,
    Seq,
    Skip,
    Stmt,
    stmt_variables,
)

ODE_STEP = 1e-3
BOUNDARY_TOLERANCE = 1e-9
POST_SLACK = 1e-6
RANDOM_ASSIGN_TRIES = 1000
SAMPLE_TRIES = 1000

Number = Fraction | float
State = dict[str, Number]


class BudgetExceeded(Exception):
    """The run used more simulated ODE time than the budget allows."""


@dataclass(frozen=True)
class Budget:
    max_loop_iters: int = 10
    max_time: float = 100.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_loop_iters < 0 or self.max_time <= 0:
            raise ValueError("budget must allow some work")


@dataclass(frozen=True)
class Nontermination:
    reason: str


# ---------------------------------------------------------------------------
# Compiled term evaluation (the RK4 inner loop is too hot for tree walking)


def _pyexpr(term: Term) -> str:
    if isinstance(term, Const):
        v = term.value
        return f"({v.numerator}/{v.denominator})" if v.denominator != 1 else f"{v.numerator}.0"
    if isinstance(term, Var):
        return f"s[{term.name!r}]"
    if isinstance(term, Add):
        return f"({_pyexpr(term.left)}+{_pyexpr(term.right)})"
    if isinstance(term, Sub):
        return f"({_pyexpr(term.left)}-{_pyexpr(term.right)})"
    if isinstance(term, Mul):
        return f"({_pyexpr(term.left)}*{_pyexpr(term.right)})"
    if isinstance(term, Div):
        return f"({_pyexpr(term.left)}/{_pyexpr(term.right)})"
    if isinstance(term, Neg):
        return f"(-{_pyexpr(term.operand)})"
    if isinstance(term, Pow):
        return f"({_pyexpr(term.base)}**{term.exp})"
    raise TypeError(f"not a term: {term!r}")


def _compile_term(term: Term) -> Callable[[Mapping[str, float]], float]:
    return eval(f"lambda s: {_pyexpr(term)}", {"__builtins__": {}})


# ---------------------------------------------------------------------------
# Formula checks


def _check(formula: Formula, state: Mapping[str, Number], slack: float, negate: bool = False) -> bool:
    """Truth of `formula` at `state` with `slack` loosening every atom.

    The formula is negation-normalized on the fly so slack consistently
    favours "holds" — the falsifier only reports clear violations.
    """
    if isinstance(formula, BoolLit):
        return formula.value != negate
    if isinstance(formula, Not):
        return _check(formula.operand, state, slack, not negate)
    if isinstance(formula, Implies):
        if negate:
            return _check(formula.antecedent, state, slack) and _check(
                formula.consequent, state, slack, True
            )
        return not _check(formula.antecedent, state, 0.0) or _check(
            formula.consequent, state, slack
        )
    if isinstance(formula, (And, Or)):
        conjunctive = isinstance(formula, And) != negate
        op = all if conjunctive else any
        return op(_check(f, state, slack, negate) for f in formula.items)
    if isinstance(formula, Cmp):
        op = NEGATED_CMP[formula.op] if negate else formula.op
        d = evaluate_term(formula.left, state) - evaluate_term(formula.right, state)
        if op == "==":
            return abs(d) <= slack
        if op == "!=":
            return d != 0  # a tiny true difference must not be flagged
        if op == ">=":
            return d >= -slack
        if op == ">":
            return d > -slack
        if op == "<=":
            return d <= slack
        return d < slack
    raise ValueError("cannot check a quantified formula at a point")


def holds(formula: Formula, state: Mapping[str, Number], slack: float = 0.0) -> bool:
    if slack == 0.0 and all(isinstance(v, Fraction) for v in state.values()):
        return evaluate_formula(formula, state)
    return _check(formula, state, slack)


# ---------------------------------------------------------------------------
# Execution


class _Runner:
    def __init__(self, budget: Budget, rng: random.Random):
        self.budget = budget
        self.rng = rng
        self.numeric = False
        self.time_used = 0.0

    def run(self, stmt: Stmt, state: State) -> State | Nontermination:
        if isinstance(stmt, Skip):
            return state
        if isinstance(stmt, Assign):
            state[stmt.var] = evaluate_term(stmt.expr, state)
            return state
        if isinstance(stmt, RandomAssign):
            for _ in range(RANDOM_ASSIGN_TRIES):
                value: Number = self.rng.uniform(-10.0, 10.0)
                if not self.numeric:
                    value = Fraction(value)
                candidate = {**state, stmt.var: value}
                if holds(stmt.constraint, candidate):
                    state[stmt.var] = value
                    return state
            return Nontermination(
                f"no sample in [-10, 10] satisfied the constraint on {stmt.var}"
            )
        if isinstance(stmt, Seq):
            for item in stmt.items:
                result = self.run(item, state)
                if isinstance(result, Nontermination):
                    return result
                state = result
            return state
        if isinstance(stmt, Cond):
            for guard, body in stmt.arms:
                if holds(guard, state):
                    return self.run(body, state)
            if stmt.else_body is not None:
                return self.run(stmt.else_body, state)
            return state
        if isinstance(stmt, Choice):
            picked = self.rng.randrange(len(stmt.options))
            return self.run(stmt.options[picked], state)
        if isinstance(stmt, Loop):
            count = self.rng.randint(0, self.budget.max_loop_iters)
            for _ in range(count):
                result = self.run(stmt.body, state)
                if isinstance(result, Nontermination):
                    return result
                state = result
            return state
        if isinstance(stmt, Ode):
            return self._run_ode(stmt, state)
        raise TypeError(f"not a statement: {stmt!r}")

    def _run_ode(self, ode: Ode, state: State) -> State | Nontermination:
        if not holds(ode.domain, state):
            return state  # starts outside the domain: no evolution at all
        if not self.numeric:
            state = {k: float(v) for k, v in state.items()}
            self.numeric = True
        names = [var for var, _ in ode.equations]
        fs = [_compile_term(rhs) for _, rhs in ode.equations]

        def step(s: State, h: float) -> State:
            k1 = [f(s) for f in fs]
            s2 = {**s, **{n: s[n] + 0.5 * h * k for n, k in zip(names, k1)}}
            k2 = [f(s2) for f in fs]
            s3 = {**s, **{n: s[n] + 0.5 * h * k for n, k in zip(names, k2)}}
            k3 = [f(s3) for f in fs]
            s4 = {**s, **{n: s[n] + h * k for n, k in zip(names, k3)}}
            k4 = [f(s4) for f in fs]
            return {
                **s,
                **{
                    n: s[n] + h / 6.0 * (a + 2.0 * b + 2.0 * c + d)
                    for n, a, b, c, d in zip(names, k1, k2, k3, k4)
                },
            }

        blown_up = Nontermination("number range exceeded while integrating the ODE")
        try:
            while True:
                if self.time_used + ODE_STEP > self.budget.max_time:
                    raise BudgetExceeded(
                        f"simulated time limit {self.budget.max_time} reached inside an ODE"
                    )
                after = step(state, ODE_STEP)
                self.time_used += ODE_STEP
                if holds(ode.domain, after):
                    state = after
                    continue
                # The domain failed within this step: bisect the crossing time.
                lo, hi = 0.0, ODE_STEP
                while hi - lo > BOUNDARY_TOLERANCE:
                    mid = 0.5 * (lo + hi)
                    if holds(ode.domain, step(state, mid)):
                        lo = mid
                    else:
                        hi = mid
                final = step(state, hi)
                break
        except OverflowError:
            # finite-time blow-up: the trajectory left the representable range
            return blown_up
        if any(not math.isfinite(v) for v in final.values()):
            return blown_up
        return final


def run(program: HoareFile | Stmt, s0: Mapping[str, Number], budget: Budget) -> State | Nontermination:
    """Execute the program from state `s0`; nondeterminism is resolved by
    the budget's seed, so equal inputs give equal outputs."""
    stmt = program.body if isinstance(program, HoareFile) else program
    return _Runner(budget, random.Random(budget.seed)).run(stmt, dict(s0))


# ---------------------------------------------------------------------------
# Precondition-directed state sampling


def _ghost_names(stmt: Stmt) -> set[str]:
    out: set[str] = set()
    if isinstance(stmt, Seq):
        for s in stmt.items:
            out |= _ghost_names(s)
    elif isinstance(stmt, Cond):
        for _, body in stmt.arms:
            out |= _ghost_names(body)
        if stmt.else_body is not None:
            out |= _ghost_names(stmt.else_body)
    elif isinstance(stmt, Choice):
        for option in stmt.options:
            out |= _ghost_names(option)
    elif isinstance(stmt, Loop):
        out |= _ghost_names(stmt.body)
    elif isinstance(stmt, Ode):
        out |= {g.var for g in stmt.ghosts}
    return out


def program_variables(file: HoareFile) -> list[str]:
    """Runtime state variables: everything mentioned, minus ghosts."""
    names = stmt_variables(file.body)
    for a in file.preconditions + file.postconditions:
        names |= formula_variables(a.formula)
    return sorted(names - _ghost_names(file.body))


def _constant_of(term: Term) -> Fraction | None:
    if term_variables(term):
        return None
    try:
        return evaluate_term(term, {})
    except ZeroDivisionError:
        return None


def _collect_bounds(
    formula: Formula, pins: dict[str, Fraction], lows: dict[str, Fraction], highs: dict[str, Fraction]
) -> None:
    """Record variable pins and interval bounds from simple comparisons."""
    if isinstance(formula, And):
        for f in formula.items:
            _collect_bounds(f, pins, lows, highs)
        return
    if not isinstance(formula, Cmp):
        return
    var, op, const = None, formula.op, None
    if isinstance(formula.left, Var):
        var, const = formula.left.name, _constant_of(formula.right)
    elif isinstance(formula.right, Var):
        var, const = formula.right.name, _constant_of(formula.left)
        op = {"<": ">", "<=": ">=", ">": "<", ">=": "<="}.get(op, op)
    if var is None or const is None:
        return
    if op == "==":
        pins[var] = const
    elif op in (">", ">="):
        lows[var] = max(lows.get(var, const), const)
    elif op in ("<", "<="):
        highs[var] = min(highs.get(var, const), const)


def _equality_atoms(formula: Formula, out: list[tuple[Term, Term]]) -> None:
    if isinstance(formula, And):
        for f in formula.items:
            _equality_atoms(f, out)
    elif isinstance(formula, Cmp) and formula.op == "==":
        out.append((formula.left, formula.right))


def _sample_interval(
    name: str, lows: Mapping[str, Fraction], highs: Mapping[str, Fraction]
) -> tuple[Fraction, Fraction] | None:
    """Sampling interval for one variable: the default box is [-10, 10],
    shifted outward when a precondition bound lies outside it."""
    lo, hi = lows.get(name), highs.get(name)
    if lo is not None and hi is not None:
        return None if lo > hi else (lo, hi)
    if lo is not None:
        return lo, max(Fraction(10), lo + 20)
    if hi is not None:
        return min(Fraction(-10), hi - 20), hi
    return Fraction(-10), Fraction(10)


def _solve_equalities(
    state: State, equalities: Sequence[tuple[Term, Term]], pins: Mapping[str, Fraction]
) -> None:
    """Adjust one free variable per equality so `lhs == rhs` holds, when the
    residual is affine in that variable (verified by the exact re-check that
    follows, so a wrong guess only wastes one sampling round)."""
    adjusted: set[str] = set()
    for lhs, rhs in equalities:
        residual = Sub(lhs, rhs)
        candidates = sorted(
            v
            for v in term_variables(residual)
            if v in state and v not in pins and v not in adjusted
        )
        for name in reversed(candidates):
            try:
                at0 = evaluate_term(residual, {**state, name: Fraction(0)})
                at1 = evaluate_term(residual, {**state, name: Fraction(1)})
            except ZeroDivisionError:
                continue
            slope = at1 - at0
            if slope != 0:
                state[name] = -at0 / slope
                adjusted.add(name)
                break


def sample_state(file: HoareFile, rng: random.Random) -> State | None:
    """A rational state satisfying every precondition, or None if sampling
    keeps missing (preconditions are used as pins/bounds/linear equations
    where they are simple enough, and re-checked exactly in full)."""
    names = program_variables(file)
    pres = [a.formula for a in file.preconditions]
    pins: dict[str, Fraction] = {}
    lows: dict[str, Fraction] = {}
    highs: dict[str, Fraction] = {}
    equalities: list[tuple[Term, Term]] = []
    for f in pres:
        _collect_bounds(f, pins, lows, highs)
        _equality_atoms(f, equalities)
    relational = [
        (l, r) for l, r in equalities if len(term_variables(l) | term_variables(r)) > 1
    ]
    for _ in range(SAMPLE_TRIES):
        state: State = {}
        for name in names:
            if name in pins:
                state[name] = pins[name]
                continue
            interval = _sample_interval(name, lows, highs)
            if interval is None:
                return None  # contradictory bounds: unsatisfiable precondition
            state[name] = Fraction(rng.uniform(float(interval[0]), float(interval[1])))
        _solve_equalities(state, relational, pins)
        if all(holds(f, state) for f in pres):
            return state
    return None


# ---------------------------------------------------------------------------
# Soundness harness


@dataclass(frozen=True)
class Violation:
    seed: int
    initial: State
    final: State
    formula_text: str


@dataclass
class SimReport:
    runs: int = 0
    completed: int = 0
    nonterminating: int = 0
    unsampled: int = 0
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def simulate_runs(
    file: HoareFile,
    runs: int,
    seed: int,
    max_loop_iters: int = 10,
    max_time: float = 100.0,
) -> SimReport:
    """Run the program `runs` times from sampled precondition states and
    check every postcondition on each terminating run."""
    report = SimReport()
    posts = [
        (a.formula, file.source[a.span[0] : a.span[1]]) for a in file.postconditions
    ]
    for k in range(runs):
        report.runs += 1
        run_seed = seed + k
        rng = random.Random(run_seed)
        state = sample_state(file, rng)
        if state is None:
            report.unsampled += 1
            continue
        budget = Budget(max_loop_iters=max_loop_iters, max_time=max_time, seed=run_seed)
        try:
            final = run(file, state, budget)
        except BudgetExceeded:
            report.nonterminating += 1
            continue
        if isinstance(final, Nontermination):
            report.nonterminating += 1
            continue
        report.completed += 1
        slack = 0.0 if all(isinstance(v, Fraction) for v in final.values()) else POST_SLACK
        for formula, text in posts:
            if not holds(formula, final, slack):
                report.violations.append(Violation(run_seed, state, final, text))
    return report
