"""Verification-condition generation.

`generate` turns a parsed file into a deterministic list of labeled,
span-annotated verification conditions by a backward weakest-precondition
pass (`pre`) plus a side-condition pass (`vc`) that collects the proof
obligations of loops and ODEs.  Each condition remembers the assertion it
ultimately proves (its origin), the branch path that reaches it (its
label), and the source spans that participated in it (for highlighting).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Mapping, Sequence

from .expr import (
    And,
    BoolLit,
    Cmp,
    Const,
    Exists,
    ExprError,
    Forall,
    ForallRange,
    Formula,
    Implies,
    Mul,
    Not,
    OdeSystem,
    Sub,
    Term,
    Var,
    boundary,
    closure,
    conj,
    disj,
    formula_to_str,
    formula_variables,
    fresh_name,
    lie_derivative,
    normalize,
    substitute_formula,
    substitute_term,
    term_from_polynomial,
)
from .labels import EXEC, SKIP, Atom, IdxAtom, Label
from .odesolve import OdeSolveError, solve, synthesize_cofactor
from .parser import (
    Assertion,
    Assign,
    Choice,
    Cond,
    HoareFile,
    Loop,
    Ode,
    RandomAssign,
    Seq,
    Skip,
    Span,
    Stmt,
    iter_assertions,
)


class VcgenError(Exception):
    def __init__(self, message: str, span: Span | None = None):
        super().__init__(message)
        self.message = message
        self.span = span


class UnannotatedLoop(VcgenError):
    """A loop with no invariant annotation cannot be verified."""


class BadRuleShape(VcgenError):
    """An ODE invariant's shape does not fit its proof rule."""


class NonAffineGhost(VcgenError):
    """A ghost derivative must be affine in the ghost variables."""


#: Every exception family that `generate` may raise for a malformed or
#: unprovable-by-construction document: condition-generation errors proper,
#: ODE solving/synthesis failures, and term normalization errors.
GENERATION_ERRORS: tuple[type[Exception], ...] = (VcgenError, OdeSolveError, ExprError)


# ---------------------------------------------------------------------------
# Origins and conditions


@dataclass(frozen=True)
class AssertionRef:
    """The assertion a condition ultimately proves."""

    kind: str  # postcondition | loop_invariant | ode_invariant | ode_invariants_joint
    path: str  # structural path, e.g. "post[0]" or "body[2].inv[1]"
    text: str  # display text
    span: Span  # bracket span in the source
    order: int  # source order of the assertion (for deterministic sorting)
    hint_path: str  # assertion whose hint block stores this origin's hints


class _Mark:
    """Sentinel prepended to a condition's atoms before descending into a
    branch; on return, atoms in front of the mark were created inside the
    branch and nest into its branch atom.  Compared by identity: each
    branch entry gets its own mark."""


ProofAtom = Atom | _Mark


@dataclass(frozen=True)
class Condition:
    """A formula to prove, with provenance.

    `spans` highlights the condition's own ingredients (origin bracket,
    traversed commands, domains); `assumption_spans` highlights assertions
    used as antecedents (preconditions and invariants assumed to hold).
    """

    formula: Formula
    origin: AssertionRef
    category: str  # "", "init", "maintain", "init_all"
    atoms: tuple[ProofAtom, ...]
    spans: frozenset[Span]
    assumption_spans: frozenset[Span] = frozenset()

    def map_formula(self, fn: Callable[[Formula], Formula]) -> "Condition":
        return replace(self, formula=fn(self.formula))

    def add_spans(self, *spans: Span) -> "Condition":
        return replace(self, spans=self.spans | set(spans))

    def add_assumption_spans(self, spans: Iterable[Span]) -> "Condition":
        return replace(self, assumption_spans=self.assumption_spans | set(spans))

    def prepend_atom(self, atom: ProofAtom) -> "Condition":
        return replace(self, atoms=(atom,) + self.atoms)

    def label(self) -> Label:
        atoms = tuple(self.atoms)
        assert not any(isinstance(a, _Mark) for a in atoms), "unresolved branch mark"
        return Label(self.category, atoms)


@dataclass(frozen=True)
class _Ctx:
    """Carries the file-wide variable set for fresh-name generation."""

    file_vars: frozenset[str]


def _is_true(f: Formula) -> bool:
    return isinstance(f, BoolLit) and f.value


def _is_false(f: Formula) -> bool:
    return isinstance(f, BoolLit) and not f.value


def assigned_variables(stmt: Stmt) -> set[str]:
    """Variables a statement can write: assignment targets, random
    assignment targets, ODE-evolved variables, and ghosts."""
    out: set[str] = set()
    if isinstance(stmt, Assign):
        out.add(stmt.var)
    elif isinstance(stmt, RandomAssign):
        out.add(stmt.var)
    elif isinstance(stmt, Seq):
        for item in stmt.items:
            out |= assigned_variables(item)
    elif isinstance(stmt, Cond):
        for _, body in stmt.arms:
            out |= assigned_variables(body)
        if stmt.else_body is not None:
            out |= assigned_variables(stmt.else_body)
    elif isinstance(stmt, Choice):
        for option in stmt.options:
            out |= assigned_variables(option)
    elif isinstance(stmt, Loop):
        out |= assigned_variables(stmt.body)
    elif isinstance(stmt, Ode):
        out |= {v for v, _ in stmt.equations}
        out |= {g.var for g in stmt.ghosts}
    return out


# ---------------------------------------------------------------------------
# Branch bookkeeping


def _enter_branch(conds: Sequence[Condition], mark: _Mark) -> list[Condition]:
    return [c.prepend_atom(mark) for c in conds]


def _leave_branch(conds: Iterable[Condition], mark: _Mark, index: int) -> list[Condition]:
    """Fold the atoms created inside branch `index` into its branch atom.

    Conditions still carrying `mark` split there: atoms in front were
    created inside the branch and nest; the rest came from the surrounding
    context.  Conditions without the mark were born inside the branch, so
    all their atoms nest.
    """
    out: list[Condition] = []
    for c in conds:
        atoms = list(c.atoms)
        if mark in atoms:
            at = atoms.index(mark)
            inside = tuple(atoms[:at])
            outside = tuple(atoms[at + 1 :])
        else:
            inside = tuple(atoms)
            outside = ()
        assert not any(isinstance(a, _Mark) for a in inside), "branch marks out of order"
        new_atoms = (IdxAtom(index, inside),) + outside
        out.append(replace(c, atoms=new_atoms))
    return out


def _cond_branches(stmt: Cond) -> list[tuple[Formula, Stmt | None]]:
    """Branches of an if-chain with their path formulas; a missing else is
    an implicit skip branch (body None)."""
    branches: list[tuple[Formula, Stmt | None]] = []
    seen: list[Formula] = []
    for guard, body in stmt.arms:
        if not seen:
            path: Formula = guard
        else:
            path = And((Not(disj(seen)), guard))
        branches.append((path, body))
        seen.append(guard)
    branches.append((Not(disj(seen)), stmt.else_body))
    return branches


# ---------------------------------------------------------------------------
# ODE helpers


def _check_ghosts(ode: Ode) -> None:
    ghost_vars = {g.var for g in ode.ghosts}
    for g in ode.ghosts:
        for mono, _ in normalize(g.rhs).coeffs.items():
            if sum(e for v, e in mono if v in ghost_vars) > 1:
                raise NonAffineGhost(
                    f"ghost derivative for {g.var} is not affine in the ghost variables",
                    g.span,
                )


def _extended_system(ode: Ode) -> OdeSystem:
    return OdeSystem(ode.equations).extended((g.var, g.rhs) for g in ode.ghosts)


def _oriented(inv: Assertion) -> tuple[Term, str]:
    """Left-minus-right polynomial of an atomic invariant and the kind of
    bound it asserts on it: "eq" (== 0), "ne" (!= 0), or "ge" (>= 0)."""
    f = inv.formula
    if not isinstance(f, Cmp):
        raise BadRuleShape(
            f"invariant must be a single comparison, got: {formula_to_str(f)}",
            inv.span,
        )
    if f.op == "==":
        return Sub(f.left, f.right), "eq"
    if f.op == "!=":
        return Sub(f.left, f.right), "ne"
    if f.op in (">", ">="):
        return Sub(f.left, f.right), "ge"
    return Sub(f.right, f.left), "ge"


def _rule_premises(inv: Assertion, system: OdeSystem, domain: Formula) -> list[Formula]:
    """Premise formulas of the proof rule attached to one ODE invariant
    (differential invariant when no rule is given)."""
    if isinstance(inv.formula, BoolLit):
        if inv.rule is not None:
            raise BadRuleShape(
                f"rule {inv.rule.kind} cannot apply to a boolean literal", inv.span
            )
        return []
    dbar = closure(domain)
    rule = inv.rule
    if rule is None:
        f, shape = _oriented(inv)
        lie = lie_derivative(f, system)
        op = "==" if shape in ("eq", "ne") else ">="
        return [Implies(dbar, Cmp(op, lie, Const(0)))]
    f, shape = _oriented(inv)
    f_term = term_from_polynomial(normalize(f))
    lie = lie_derivative(f, system)
    if rule.kind == "bc":
        if shape != "ge":
            raise BadRuleShape(
                "rule bc needs an inequality invariant", inv.span
            )
        antecedent = conj([dbar, Cmp("==", f_term, Const(0))])
        return [Implies(antecedent, Cmp(">", lie, Const(0)))]
    if rule.kind == "dbx":
        if shape == "ne":
            raise BadRuleShape(
                "rule dbx needs an equality or inequality invariant", inv.span
            )
        cofactor = rule.cofactor
        if cofactor is None:
            cofactor = synthesize_cofactor(f, lie, equality=shape == "eq")
        op = "==" if shape == "eq" else ">="
        return [Implies(dbar, Cmp(op, lie, Mul(cofactor, f_term)))]
    raise BadRuleShape(f"unknown rule {rule.kind}", inv.span)


# ---------------------------------------------------------------------------
# Origin construction


def _origin(kind: str, path: str, assertion: Assertion, order: Mapping[str, int]) -> AssertionRef:
    return AssertionRef(
        kind=kind,
        path=path,
        text=formula_to_str(assertion.formula),
        span=assertion.span,
        order=order[path],
        hint_path=path,
    )


class _Origins:
    """Constructs and caches assertion references against one file."""

    def __init__(self, file: HoareFile):
        self.paths: dict[int, str] = {}
        self.order: dict[str, int] = {}
        for i, (path, assertion) in enumerate(iter_assertions(file)):
            self.paths[id(assertion)] = path
            self.order[path] = i

    def path_of(self, assertion: Assertion) -> str:
        return self.paths[id(assertion)]

    def for_assertion(self, kind: str, assertion: Assertion) -> AssertionRef:
        path = self.path_of(assertion)
        return _origin(kind, path, assertion, self.order)

    def joint(self, ode: Ode) -> AssertionRef:
        """Shared origin of an ODE's invariants proved together under
        ghost quantification."""
        first, last = ode.invariants[0], ode.invariants[-1]
        first_path = self.path_of(first)
        base = first_path.rsplit("[", 1)[0]
        return AssertionRef(
            kind="ode_invariants_joint",
            path=f"{base}[*]",
            text="invariants",
            span=(first.span[0], last.span[1]),
            order=self.order[first_path],
            hint_path=first_path,
        )


# ---------------------------------------------------------------------------
# The backward pre pass


def _generator(file_vars: frozenset[str], origins: _Origins):
    ctx = _Ctx(file_vars)

    def pre_pass(stmt: Stmt, conds: list[Condition]) -> list[Condition]:
        if isinstance(stmt, Skip):
            return [c.add_spans(stmt.span) for c in conds]
        if isinstance(stmt, Assign):
            sub = {stmt.var: stmt.expr}
            return [
                c.map_formula(lambda f: substitute_formula(f, sub)).add_spans(stmt.span)
                for c in conds
            ]
        if isinstance(stmt, RandomAssign):
            out = []
            for c in conds:
                used = set(ctx.file_vars) | formula_variables(c.formula)
                y = fresh_name(stmt.var, used)
                sub = {stmt.var: Var(y)}
                bound = substitute_formula(stmt.constraint, sub)
                body = substitute_formula(c.formula, sub)
                out.append(
                    replace(c, formula=Implies(bound, body)).add_spans(stmt.span)
                )
            return out
        if isinstance(stmt, Seq):
            for item in reversed(stmt.items):
                conds = pre_pass(item, conds)
            return conds
        if isinstance(stmt, Cond):
            out: list[Condition] = []
            for i, (path, body) in enumerate(_cond_branches(stmt), start=1):
                mark = _Mark()
                inner = _enter_branch(conds, mark)
                if body is not None:
                    inner = pre_pass(body, inner)
                inner = _leave_branch(inner, mark, i)
                out.extend(
                    c.map_formula(lambda f, p=path: Implies(p, f)) for c in inner
                )
            return out
        if isinstance(stmt, Choice):
            out = []
            for i, option in enumerate(stmt.options, start=1):
                mark = _Mark()
                inner = pre_pass(option, _enter_branch(conds, mark))
                out.extend(_leave_branch(inner, mark, i))
            return out
        if isinstance(stmt, Loop):
            if not stmt.invariants:
                raise UnannotatedLoop("loop has no invariant annotation", stmt.span)
            return [
                Condition(
                    formula=inv.formula,
                    origin=origins.for_assertion("loop_invariant", inv),
                    category="init",
                    atoms=(),
                    spans=frozenset({inv.span}),
                )
                for inv in stmt.invariants
            ]
        if isinstance(stmt, Ode):
            return pre_ode(stmt, conds)
        raise TypeError(f"unknown statement {stmt!r}")

    def pre_ode(ode: Ode, conds: list[Condition]) -> list[Condition]:
        _check_ghosts(ode)
        domain = ode.domain
        out = [
            c.map_formula(lambda f: Implies(Not(domain), f))
            .add_spans(ode.domain_span)
            .prepend_atom(SKIP)
            for c in conds
        ]
        if ode.solution:
            out.extend(pre_solution(ode, conds))
            return out
        if ode.ghosts:
            ghost_vars = tuple(g.var for g in ode.ghosts)
            joint = Exists(ghost_vars, conj([inv.formula for inv in ode.invariants]))
            spans = {ode.domain_span} | {inv.span for inv in ode.invariants}
            out.append(
                Condition(
                    formula=Implies(domain, joint),
                    origin=origins.joint(ode),
                    category="init_all",
                    atoms=(),
                    spans=frozenset(spans),
                )
            )
            return out
        for inv in ode.invariants:
            if _is_true(inv.formula):
                continue
            out.append(
                Condition(
                    formula=Implies(domain, inv.formula),
                    origin=origins.for_assertion("ode_invariant", inv),
                    category="init",
                    atoms=(),
                    spans=frozenset({ode.domain_span, inv.span}),
                )
            )
        return out

    def pre_solution(ode: Ode, conds: list[Condition]) -> list[Condition]:
        domain = ode.domain
        used = set(ctx.file_vars)
        for c in conds:
            used |= formula_variables(c.formula)
        t = fresh_name("t", used)
        tau = fresh_name("tau", used | {t})
        flow = solve(OdeSystem(ode.equations), t)
        at_t: dict[str, Term] = dict(flow)
        at_tau = {v: substitute_term(e, {t: Var(tau)}) for v, e in flow.items()}
        domain_holds_until = ForallRange(
            tau, Const(0), Var(t), substitute_formula(domain, at_tau)
        )
        stops_at_t = Not(substitute_formula(domain, at_t))
        out = []
        for c in conds:
            post_at_t = substitute_formula(c.formula, at_t)
            run = Forall(
                (t,),
                Implies(
                    Cmp(">", Var(t), Const(0)),
                    Implies(And((domain_holds_until, stops_at_t)), post_at_t),
                ),
            )
            out.append(
                c.map_formula(lambda _f, r=run: Implies(domain, r))
                .add_spans(ode.domain_span, ode.braces_span)
                .prepend_atom(EXEC)
            )
        return out

    def vc_pass(stmt: Stmt, conds: list[Condition]) -> list[Condition]:
        if isinstance(stmt, (Skip, Assign, RandomAssign)):
            return []
        if isinstance(stmt, Seq):
            out: list[Condition] = []
            trailing = list(conds)
            for i, item in enumerate(stmt.items):
                rest = stmt.items[i + 1 :]
                post = trailing
                for later in reversed(rest):
                    post = pre_pass(later, post)
                out.extend(vc_pass(item, post))
            return out
        if isinstance(stmt, Cond):
            out = []
            for i, (_, body) in enumerate(_cond_branches(stmt), start=1):
                if body is None:
                    continue
                mark = _Mark()
                inner = vc_pass(body, _enter_branch(conds, mark))
                out.extend(_leave_branch(inner, mark, i))
            return out
        if isinstance(stmt, Choice):
            out = []
            for i, option in enumerate(stmt.options, start=1):
                mark = _Mark()
                inner = vc_pass(option, _enter_branch(conds, mark))
                out.extend(_leave_branch(inner, mark, i))
            return out
        if isinstance(stmt, Loop):
            return vc_loop(stmt, conds)
        if isinstance(stmt, Ode):
            return vc_ode(stmt, conds)
        raise TypeError(f"unknown statement {stmt!r}")

    def vc_loop(loop: Loop, conds: list[Condition]) -> list[Condition]:
        if not loop.invariants:
            raise UnannotatedLoop("loop has no invariant annotation", loop.span)
        inv_conds = [
            Condition(
                formula=inv.formula,
                origin=origins.for_assertion("loop_invariant", inv),
                category="maintain",
                atoms=(),
                spans=frozenset({inv.span}),
            )
            for inv in loop.invariants
        ]
        inv_conj = conj([inv.formula for inv in loop.invariants])
        inv_spans = [inv.span for inv in loop.invariants]
        out = vc_pass(loop.body, inv_conds)
        for q in conds:  # the invariants imply the continuation
            out.append(
                q.map_formula(lambda f: Implies(inv_conj, f)).add_assumption_spans(inv_spans)
            )
        for p in pre_pass(loop.body, inv_conds):  # one iteration re-establishes them
            out.append(
                p.map_formula(lambda f: Implies(inv_conj, f)).add_assumption_spans(inv_spans)
            )
        return out

    def vc_ode(ode: Ode, conds: list[Condition]) -> list[Condition]:
        if ode.solution:
            return []
        _check_ghosts(ode)
        out: list[Condition] = []
        invariants = list(ode.invariants)
        lone_false = len(invariants) == 1 and _is_false(invariants[0].formula)
        if not lone_false:
            carried = [inv for inv in invariants if not _is_true(inv.formula)]
            antecedent = conj(
                [inv.formula for inv in carried] + [boundary(ode.domain)]
            )
            for q in conds:
                out.append(
                    q.map_formula(lambda f: Implies(antecedent, f))
                    .add_spans(ode.domain_span)
                    .add_assumption_spans(inv.span for inv in carried)
                    .prepend_atom(EXEC)
                )
        system = _extended_system(ode)
        for j, inv in enumerate(invariants):
            for premise in _rule_premises(inv, system, ode.domain):
                formula = premise
                if j > 0:
                    formula = Implies(conj([e.formula for e in invariants[:j]]), premise)
                out.append(
                    Condition(
                        formula=formula,
                        origin=origins.for_assertion("ode_invariant", inv),
                        category="maintain",
                        atoms=(),
                        spans=frozenset({ode.braces_span, ode.domain_span, inv.span}),
                        assumption_spans=frozenset(e.span for e in invariants[:j]),
                    )
                )
        return out

    return pre_pass, vc_pass


def pre(stmt: Stmt, conditions: Sequence[Condition], file: HoareFile) -> list[Condition]:
    """Weakest-precondition conditions of `stmt` against `conditions`."""
    pre_pass, _ = _generator(frozenset(file.variables()), _Origins(file))
    return pre_pass(stmt, list(conditions))


def vc(stmt: Stmt, conditions: Sequence[Condition], file: HoareFile) -> list[Condition]:
    """Side conditions of `stmt` against `conditions`."""
    _, vc_pass = _generator(frozenset(file.variables()), _Origins(file))
    return vc_pass(stmt, list(conditions))


# ---------------------------------------------------------------------------
# Whole-file generation


@dataclass(frozen=True)
class VC:
    """One labeled verification condition."""

    id: str
    formula: Formula
    origin: AssertionRef
    label: Label
    spans: tuple[Span, ...]
    solver: str = "z3"

    @property
    def formula_text(self) -> str:
        return formula_to_str(self.formula)


def _vc_id(origin_path: str, label: Label) -> str:
    digest = hashlib.sha256(f"{origin_path}|{label.render()}".encode()).hexdigest()
    return digest[:16]


def _finish(condition: Condition) -> VC:
    label = condition.label()
    spans = tuple(sorted(condition.spans | condition.assumption_spans))
    return VC(
        id=_vc_id(condition.origin.path, label),
        formula=condition.formula,
        origin=condition.origin,
        label=label,
        spans=spans,
    )


def generate(file: HoareFile) -> list[VC]:
    """All verification conditions of a file, deterministically ordered by
    (origin's source position, label)."""
    origins = _Origins(file)
    pre_pass, vc_pass = _generator(frozenset(file.variables()), origins)

    posts = [
        Condition(
            formula=post.formula,
            origin=origins.for_assertion("postcondition", post),
            category="",
            atoms=(),
            spans=frozenset({post.span}),
        )
        for post in file.postconditions
    ]

    pre_formula = conj([p.formula for p in file.preconditions])
    pre_spans = [p.span for p in file.preconditions]
    conditions = [
        r.map_formula(lambda f: Implies(pre_formula, f)).add_assumption_spans(pre_spans)
        for r in pre_pass(file.body, list(posts))
    ]

    assigned = assigned_variables(file.body)
    stable = [
        p
        for p in file.preconditions
        if formula_variables(p.formula).isdisjoint(assigned)
    ]
    side = vc_pass(file.body, list(posts))
    if stable:
        stable_formula = conj([p.formula for p in stable])
        stable_spans = [p.span for p in stable]
        side = [
            r.map_formula(lambda f: Implies(stable_formula, f)).add_assumption_spans(
                stable_spans
            )
            for r in side
        ]
    conditions.extend(side)

    vcs = [_finish(c) for c in conditions]
    seen: dict[tuple[str, str], VC] = {}
    for v in vcs:
        key = (v.origin.path, v.label.render())
        assert key not in seen, f"duplicate verification condition {key}"
        seen[key] = v
    vcs.sort(
        key=lambda v: (
            v.origin.order,
            0 if v.origin.kind == "ode_invariants_joint" else 1,
            v.label.render(),
        )
    )
    return vcs


# ---------------------------------------------------------------------------
# Solver hints


def bind_solvers(file: HoareFile, vcs: Sequence[VC]) -> tuple[list[VC], list[str]]:
    """Apply the hint blocks of `file` to `vcs`, returning the updated list
    and warnings for hints that matched no condition."""
    assertions = dict(iter_assertions(file))
    bound: list[VC] = []
    used: set[tuple[str, str]] = set()
    for v in vcs:
        hints = dict(assertions[v.origin.hint_path].hints)
        key = v.label.render_hint()
        if key in hints:
            bound.append(replace(v, solver=hints[key]))
            used.add((v.origin.hint_path, key))
        else:
            bound.append(v)
    warnings = []
    for path, assertion in assertions.items():
        for label_text, solver in assertion.hints:
            if (path, label_text) not in used:
                warnings.append(
                    f"hint {label_text!r}: {solver} on {path} matches no verification condition"
                )
    return bound, warnings


# ---------------------------------------------------------------------------
# Serialization


def vc_to_record(v: VC, result: str | None = None) -> dict:
    """JSON-ready record of one verification condition."""
    return {
        "id": v.id,
        "formula": formula_to_str(v.formula),
        "origin": {"kind": v.origin.kind, "path": v.origin.path, "text": v.origin.text},
        "label": v.label.render(),
        "spans": [[s, e] for s, e in v.spans],
        "solver": v.solver,
        "result": result,
    }
