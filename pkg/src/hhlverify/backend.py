"""SMT backend: lower formulas to SMT-LIB 2 and discharge them through an
external solver process.

The default solver is z3, located through the HHL_Z3 environment variable,
the PATH, or the bundled `tools/z3wasm/z3` shim, and driven over stdin with
a hard per-condition timeout.  A counterexample model is only surfaced
after it has been re-checked against the formula by exact rational
evaluation.
"""

from __future__ import annotations

import os
import shutil
import subprocess
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Sequence

from .expr import (
    Add,
    And,
    BoolLit,
    Cmp,
    Const,
    Div,
    Exists,
    Forall,
    ForallRange,
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
    evaluate_formula,
    formula_variables,
)
from .vcgen import VC

DEFAULT_TIMEOUT_MS = 10000
DEFAULT_LOGIC = "NRA"

# Extra wall-clock seconds past the solver's own limit before the process
# is killed; covers interpreter startup for wrapper executables.
GRACE_SECONDS = 10


@dataclass(frozen=True)
class SolverConfig:
    solver: str = "z3"
    executable: str | None = None
    timeout_ms: int = DEFAULT_TIMEOUT_MS
    logic: str = DEFAULT_LOGIC

    def __post_init__(self) -> None:
        if self.timeout_ms <= 0:
            raise ValueError("timeout must be positive")


@dataclass(frozen=True)
class CheckResult:
    status: str  # Proved | Unproved | Timeout | SolverError
    model: dict[str, Fraction] | None = None
    detail: str = ""
    time_ms: int = 0

    @property
    def proved(self) -> bool:
        return self.status == "Proved"


def result_record(r: CheckResult) -> dict:
    """JSON-ready fields of a check result (shared by CLI and service)."""
    record: dict = {"result": r.status, "time_ms": r.time_ms}
    if r.model is not None:
        record["model"] = {k: str(v) for k, v in sorted(r.model.items())}
    if r.detail:
        record["detail"] = r.detail
    return record


# ---------------------------------------------------------------------------
# SMT-LIB emission


def _smt_fraction(value: Fraction) -> str:
    if value < 0:
        return f"(- {_smt_fraction(-value)})"
    if value.denominator == 1:
        return str(value.numerator)
    return f"(/ {value.numerator} {value.denominator})"


def _smt_term(term: Term) -> str:
    if isinstance(term, Const):
        return _smt_fraction(term.value)
    if isinstance(term, Var):
        return term.name
    if isinstance(term, Add):
        return f"(+ {_smt_term(term.left)} {_smt_term(term.right)})"
    if isinstance(term, Sub):
        return f"(- {_smt_term(term.left)} {_smt_term(term.right)})"
    if isinstance(term, Mul):
        return f"(* {_smt_term(term.left)} {_smt_term(term.right)})"
    if isinstance(term, Div):
        return f"(/ {_smt_term(term.left)} {_smt_term(term.right)})"
    if isinstance(term, Neg):
        return f"(- {_smt_term(term.operand)})"
    if isinstance(term, Pow):
        if term.exp == 0:
            return "1"
        base = _smt_term(term.base)
        if term.exp == 1:
            return base
        return "(* " + " ".join([base] * term.exp) + ")"
    raise TypeError(f"not a term: {term!r}")


def _smt_formula(formula: Formula) -> str:
    if isinstance(formula, BoolLit):
        return "true" if formula.value else "false"
    if isinstance(formula, Cmp):
        left, right = _smt_term(formula.left), _smt_term(formula.right)
        if formula.op == "==":
            return f"(= {left} {right})"
        if formula.op == "!=":
            return f"(not (= {left} {right}))"
        return f"({formula.op} {left} {right})"
    if isinstance(formula, Not):
        return f"(not {_smt_formula(formula.operand)})"
    if isinstance(formula, And):
        return "(and " + " ".join(_smt_formula(f) for f in formula.items) + ")"
    if isinstance(formula, Or):
        return "(or " + " ".join(_smt_formula(f) for f in formula.items) + ")"
    if isinstance(formula, Implies):
        return f"(=> {_smt_formula(formula.antecedent)} {_smt_formula(formula.consequent)})"
    if isinstance(formula, Exists):
        binders = " ".join(f"({v} Real)" for v in formula.variables)
        return f"(exists ({binders}) {_smt_formula(formula.body)})"
    if isinstance(formula, Forall):
        binders = " ".join(f"({v} Real)" for v in formula.variables)
        return f"(forall ({binders}) {_smt_formula(formula.body)})"
    if isinstance(formula, ForallRange):
        guard = (
            f"(and (<= {_smt_term(formula.lower)} {formula.var})"
            f" (< {formula.var} {_smt_term(formula.upper)}))"
        )
        return f"(forall (({formula.var} Real)) (=> {guard} {_smt_formula(formula.body)}))"
    raise TypeError(f"not a formula: {formula!r}")


def emit_smt(formula: Formula, logic: str = DEFAULT_LOGIC) -> str:
    """SMT-LIB 2 script asserting the negation of `formula`; `unsat` means
    the formula is valid over the reals."""
    lines = ["(set-option :produce-models true)", f"(set-logic {logic})"]
    for var in sorted(formula_variables(formula)):
        lines.append(f"(declare-const {var} Real)")
    lines.append(f"(assert (not {_smt_formula(formula)}))")
    lines.append("(check-sat)")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Solver registry


def _bundled_z3() -> str | None:
    shim = Path(__file__).resolve().parents[2] / "tools" / "z3wasm" / "z3"
    if shim.is_file() and os.access(shim, os.X_OK):
        return str(shim)
    return None


def find_solver(name: str) -> str | None:
    """Resolve a solver name to an executable path, or None."""
    if name == "z3":
        override = os.environ.get("HHL_Z3")
        if override:
            return override
        found = shutil.which("z3")
        if found:
            return found
        return _bundled_z3()
    if name == "wolfram":
        return os.environ.get("HHL_WOLFRAM") or None
    return None


def config_for(solver: str, timeout_ms: int = DEFAULT_TIMEOUT_MS) -> SolverConfig:
    return SolverConfig(
        solver=solver, executable=find_solver(solver), timeout_ms=timeout_ms
    )


# ---------------------------------------------------------------------------
# Model parsing and validation


def _sexprs(text: str) -> list:
    """All top-level s-expressions in `text` (atoms as strings)."""
    tokens: list[str] = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c in "()":
            tokens.append(c)
            i += 1
        elif c.isspace():
            i += 1
        elif c == '"':
            j = i + 1
            while j < n and text[j] != '"':
                j += 1
            tokens.append(text[i : j + 1])
            i = j + 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in "()":
                j += 1
            tokens.append(text[i:j])
            i = j
    out: list = []
    stack: list[list] = []
    for tok in tokens:
        if tok == "(":
            stack.append([])
        elif tok == ")":
            if not stack:
                return out  # malformed; salvage what we have
            done = stack.pop()
            if stack:
                stack[-1].append(done)
            else:
                out.append(done)
        elif stack:
            stack[-1].append(tok)
        else:
            out.append(tok)
    return out


def _value_of(expr) -> Fraction | None:
    if isinstance(expr, str):
        try:
            return Fraction(expr)
        except ValueError:
            return None
    if isinstance(expr, list) and expr:
        if expr[0] == "-" and len(expr) == 2:
            inner = _value_of(expr[1])
            return None if inner is None else -inner
        if expr[0] == "/" and len(expr) == 3:
            num, den = _value_of(expr[1]), _value_of(expr[2])
            if num is None or den is None or den == 0:
                return None
            return num / den
    return None  # algebraic numbers (root-obj …) have no exact rational form


def parse_model(text: str) -> dict[str, Fraction]:
    """Variable assignment from a solver's `(get-model)` output; entries
    with non-rational values are omitted."""
    model: dict[str, Fraction] = {}
    for node in _sexprs(text):
        entries = node if isinstance(node, list) else [node]
        if entries and entries[0] == "model":
            entries = entries[1:]
        for entry in entries:
            if (
                isinstance(entry, list)
                and len(entry) == 5
                and entry[0] == "define-fun"
                and entry[2] == []
                and entry[3] == "Real"
            ):
                value = _value_of(entry[4])
                if value is not None:
                    model[entry[1]] = value
    return model


def _validated_model(
    formula: Formula, model: Mapping[str, Fraction]
) -> dict[str, Fraction] | None:
    """Completed model if it exactly falsifies the formula, else None."""
    env = {v: Fraction(0) for v in formula_variables(formula)}
    env.update({k: v for k, v in model.items() if k in env})
    try:
        falsifies = not evaluate_formula(formula, env)
    except (ValueError, ZeroDivisionError):
        return None
    return env if falsifies else None


# ---------------------------------------------------------------------------
# Checking


def check(vc: VC, cfg: SolverConfig) -> CheckResult:
    """Discharge one verification condition through the configured solver."""
    if cfg.executable is None:
        return CheckResult("SolverError", detail=f"backend unavailable: {cfg.solver}")
    script = emit_smt(vc.formula, cfg.logic) + "(get-model)\n"
    timeout_s = max(1, -(-cfg.timeout_ms // 1000))  # ceiling, in whole seconds
    start = time.monotonic()

    def elapsed_ms() -> int:
        return int((time.monotonic() - start) * 1000)

    try:
        proc = subprocess.run(
            [cfg.executable, "-in", f"-T:{timeout_s}"],
            input=script,
            capture_output=True,
            text=True,
            timeout=timeout_s + GRACE_SECONDS,
        )
    except subprocess.TimeoutExpired:
        return CheckResult(
            "Timeout",
            detail=f"killed after {time.monotonic() - start:.1f}s",
            time_ms=elapsed_ms(),
        )
    except OSError as e:
        return CheckResult("SolverError", detail=f"cannot run {cfg.executable}: {e}")
    verdict = ""
    rest_index = 0
    for line in proc.stdout.split("\n"):
        rest_index += len(line) + 1
        stripped = line.strip()
        if stripped in ("sat", "unsat", "unknown", "timeout"):
            verdict = stripped
            break
        if stripped and not stripped.startswith("("):
            return CheckResult(
                "SolverError",
                detail=f"unexpected solver output: {stripped[:200]}",
                time_ms=elapsed_ms(),
            )
    if verdict == "unsat":
        return CheckResult("Proved", time_ms=elapsed_ms())
    if verdict == "sat":
        model = parse_model(proc.stdout[rest_index:])
        return CheckResult(
            "Unproved", model=_validated_model(vc.formula, model), time_ms=elapsed_ms()
        )
    if verdict == "unknown":
        return CheckResult("Unproved", detail="solver returned unknown", time_ms=elapsed_ms())
    if verdict == "timeout":
        return CheckResult(
            "Timeout", detail=f"solver timeout after {timeout_s}s", time_ms=elapsed_ms()
        )
    detail = (proc.stderr or proc.stdout).strip()[:200] or f"exit code {proc.returncode}"
    return CheckResult("SolverError", detail=detail, time_ms=elapsed_ms())


def check_all(
    vcs: Sequence[VC], cfg: SolverConfig, parallelism: int = 4
) -> list[CheckResult]:
    """Check many conditions concurrently; results match input positions.

    `cfg` supplies the timeout and logic; each condition runs on its own
    bound solver (`vc.solver`), resolved through the registry.
    """
    if not vcs:
        return []
    configs = {}
    for v in vcs:
        if v.solver not in configs:
            if v.solver == cfg.solver and cfg.executable is not None:
                configs[v.solver] = cfg
            else:
                configs[v.solver] = SolverConfig(
                    solver=v.solver,
                    executable=find_solver(v.solver),
                    timeout_ms=cfg.timeout_ms,
                    logic=cfg.logic,
                )
    with ThreadPoolExecutor(max_workers=max(1, parallelism)) as pool:
        return list(pool.map(lambda v: check(v, configs[v.solver]), vcs))
