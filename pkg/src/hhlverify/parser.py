"""Concrete syntax for annotated hybrid programs (`.hhl` files).

A file is `pre [P]...;` followed by a command sequence and `post [Q]...;`.
Commands: `skip;`, `x := e;`, `x := *(B);`, `if (B) {..} else {..}`,
`S1 ++ S2;` (nondeterministic choice), `{ S }* invariant [I]...;` (loop) and
`{x_dot = e, ... & D} invariant ...;` / `{... & D} solution;` (ODE).
Invariant and postcondition brackets may carry a proof-rule annotation
(`{dbx g}`, `{dbx}`, `{bc}`) and a solver-hint block (`{{label: solver}}`).
Every node records its source span as half-open offsets into the source.

Parsing tracks spans precisely enough that `rewrite_hint` can edit a hint
block in place without disturbing any other byte of the file.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterator

from .expr import (
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
    Add,
    formula_to_str,
    formula_variables,
    term_to_str,
    term_variables,
)

Span = tuple[int, int]


class ParseError(Exception):
    def __init__(self, message: str, span: Span):
        super().__init__(f"{message} (at {span[0]}..{span[1]})")
        self.message = message
        self.span = span


class UnknownAssertion(Exception):
    """An assertion path that does not resolve in the file."""


KEYWORDS = {
    "pre",
    "post",
    "skip",
    "if",
    "else",
    "invariant",
    "solution",
    "ghost",
    "true",
    "false",
    "exists",
    "forall",
}

_SYMBOLS = [
    ":=",
    "->",
    "++",
    "&&",
    "||",
    "==",
    "!=",
    "<=",
    ">=",
    "<",
    ">",
    "=",
    "!",
    "+",
    "-",
    "*",
    "/",
    "^",
    "(",
    ")",
    "[",
    "]",
    "{",
    "}",
    ",",
    ";",
    ":",
    ".",
    "&",
]


@dataclass(frozen=True)
class Token:
    kind: str  # symbol text, or one of: ident, number, eof
    text: str
    start: int
    end: int

    @property
    def span(self) -> Span:
        return (self.start, self.end)


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    i, n = 0, len(source)
    while i < n:
        ch = source[i]
        if ch in " \t\r\n":
            i += 1
            continue
        if ch == "#":
            while i < n and source[i] != "\n":
                i += 1
            continue
        if ch.isdigit():
            j = i
            while j < n and source[j].isdigit():
                j += 1
            if j < n and source[j] == "." and j + 1 < n and source[j + 1].isdigit():
                j += 1
                while j < n and source[j].isdigit():
                    j += 1
            tokens.append(Token("number", source[i:j], i, j))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            tokens.append(Token("ident", source[i:j], i, j))
            i = j
            continue
        for sym in _SYMBOLS:
            if source.startswith(sym, i):
                # Braces lex singly; the parser pairs adjacent ones into
                # hint-block delimiters.
                tokens.append(Token(sym, sym, i, i + len(sym)))
                i += len(sym)
                break
        else:
            raise ParseError(f"unexpected character {ch!r}", (i, i + 1))
    tokens.append(Token("eof", "", n, n))
    return tokens


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class RuleAnnotation:
    kind: str  # "dbx" or "bc"
    cofactor: Term | None
    span: Span


@dataclass(frozen=True)
class Assertion:
    """A bracketed assertion: precondition, postcondition, loop or ODE
    invariant. `rule` is only meaningful on ODE invariants."""

    formula: Formula
    span: Span  # includes the brackets
    rule: RuleAnnotation | None = None
    hints: tuple[tuple[str, str], ...] = ()
    hint_span: Span | None = None  # span of the existing {{...}} block

    def hint_map(self) -> dict[str, str]:
        return dict(self.hints)


@dataclass(frozen=True)
class GhostDecl:
    var: str
    rhs: Term
    span: Span


@dataclass(frozen=True)
class Stmt:
    __slots__ = ()


@dataclass(frozen=True)
class Skip(Stmt):
    span: Span


@dataclass(frozen=True)
class Assign(Stmt):
    var: str
    expr: Term
    span: Span


@dataclass(frozen=True)
class RandomAssign(Stmt):
    var: str
    constraint: Formula
    span: Span


@dataclass(frozen=True)
class Seq(Stmt):
    items: tuple[Stmt, ...]
    span: Span


@dataclass(frozen=True)
class Cond(Stmt):
    """if/else-if chain; `else_body` None means an implicit skip branch."""

    arms: tuple[tuple[Formula, Stmt], ...]
    else_body: Stmt | None
    span: Span


@dataclass(frozen=True)
class Choice(Stmt):
    options: tuple[Stmt, ...]
    span: Span


@dataclass(frozen=True)
class Loop(Stmt):
    body: Stmt
    invariants: tuple[Assertion, ...]
    span: Span


@dataclass(frozen=True)
class Ode(Stmt):
    equations: tuple[tuple[str, Term], ...]
    domain: Formula
    ghosts: tuple[GhostDecl, ...]
    invariants: tuple[Assertion, ...]
    solution: bool
    braces_span: Span  # the `{... & D}` segment
    domain_span: Span
    span: Span


@dataclass(frozen=True)
class HoareFile:
    preconditions: tuple[Assertion, ...]
    body: Seq
    postconditions: tuple[Assertion, ...]
    source: str

    def variables(self) -> set[str]:
        out: set[str] = set()
        for a in self.preconditions + self.postconditions:
            out |= formula_variables(a.formula)
        out |= stmt_variables(self.body)
        return out


def stmt_variables(stmt: Stmt) -> set[str]:
    """All variable names mentioned by a statement, including bound ones."""
    if isinstance(stmt, Skip):
        return set()
    if isinstance(stmt, Assign):
        return {stmt.var} | term_variables(stmt.expr)
    if isinstance(stmt, RandomAssign):
        return {stmt.var} | formula_variables(stmt.constraint)
    if isinstance(stmt, Seq):
        out: set[str] = set()
        for s in stmt.items:
            out |= stmt_variables(s)
        return out
    if isinstance(stmt, Cond):
        out = set()
        for guard, body in stmt.arms:
            out |= formula_variables(guard) | stmt_variables(body)
        if stmt.else_body is not None:
            out |= stmt_variables(stmt.else_body)
        return out
    if isinstance(stmt, Choice):
        out = set()
        for opt in stmt.options:
            out |= stmt_variables(opt)
        return out
    if isinstance(stmt, Loop):
        out = stmt_variables(stmt.body)
        for inv in stmt.invariants:
            out |= formula_variables(inv.formula)
        return out
    if isinstance(stmt, Ode):
        out = formula_variables(stmt.domain)
        for v, e in stmt.equations:
            out |= {v} | term_variables(e)
        for g in stmt.ghosts:
            out |= {g.var} | term_variables(g.rhs)
        for inv in stmt.invariants:
            out |= formula_variables(inv.formula)
            if inv.rule is not None and inv.rule.cofactor is not None:
                out |= term_variables(inv.rule.cofactor)
        return out
    raise TypeError(f"not a statement: {stmt!r}")


# ---------------------------------------------------------------------------
# Parser


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = tokenize(source)
        self.pos = 0

    # -- token plumbing

    def peek(self, offset: int = 0) -> Token:
        i = min(self.pos + offset, len(self.tokens) - 1)
        return self.tokens[i]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def check(self, kind: str, text: str | None = None) -> bool:
        tok = self.peek()
        return tok.kind == kind and (text is None or tok.text == text)

    def accept(self, kind: str, text: str | None = None) -> Token | None:
        if self.check(kind, text):
            return self.advance()
        return None

    def expect(self, kind: str, what: str | None = None) -> Token:
        tok = self.peek()
        if tok.kind != kind:
            raise ParseError(f"expected {what or kind}, found {tok.text or 'end of input'!r}", tok.span)
        return self.advance()

    def expect_keyword(self, word: str) -> Token:
        tok = self.peek()
        if tok.kind != "ident" or tok.text != word:
            raise ParseError(f"expected {word!r}, found {tok.text or 'end of input'!r}", tok.span)
        return self.advance()

    def check_keyword(self, word: str) -> bool:
        return self.peek().kind == "ident" and self.peek().text == word

    def ident(self, what: str = "identifier") -> Token:
        tok = self.expect("ident", what)
        if tok.text in KEYWORDS:
            raise ParseError(f"{tok.text!r} is a keyword, not a variable", tok.span)
        return tok

    def at_hint_open(self) -> bool:
        a, b = self.peek(), self.peek(1)
        return a.kind == "{" and b.kind == "{" and b.start == a.end

    def at_hint_close(self) -> bool:
        a, b = self.peek(), self.peek(1)
        return a.kind == "}" and b.kind == "}" and b.start == a.end

    # -- entry point

    def parse_file(self) -> HoareFile:
        pre = self.parse_assert_block("pre", hints_allowed=False)
        stmts: list[Stmt] = []
        while not self.check_keyword("post"):
            if self.check("eof"):
                raise ParseError("expected post block before end of input", self.peek().span)
            stmts.append(self.parse_statement())
        post = self.parse_assert_block("post", hints_allowed=True)
        self.expect("eof", "end of input")
        if stmts:
            body_span = (stmts[0].span[0], stmts[-1].span[1])
        else:
            body_span = (pre[-1].span[1], pre[-1].span[1])
        return HoareFile(tuple(pre), Seq(tuple(stmts), body_span), tuple(post), self.source)

    def parse_assert_block(self, keyword: str, hints_allowed: bool) -> list[Assertion]:
        self.expect_keyword(keyword)
        asserts: list[Assertion] = []
        while self.check("["):
            asserts.append(self.parse_assertion(rule_allowed=False, hints_allowed=hints_allowed))
        if not asserts:
            raise ParseError(f"{keyword} block needs at least one [assertion]", self.peek().span)
        self.expect(";", "';' after assertions")
        return asserts

    def parse_assertion(self, rule_allowed: bool, hints_allowed: bool) -> Assertion:
        open_tok = self.expect("[", "'['")
        formula = self.parse_formula()
        close_tok = self.expect("]", "']' after assertion")
        span = (open_tok.start, close_tok.end)
        rule: RuleAnnotation | None = None
        if rule_allowed and self.check("{") and not self.at_hint_open():
            rule = self.parse_rule_annotation()
        hints: tuple[tuple[str, str], ...] = ()
        hint_span: Span | None = None
        if hints_allowed and self.at_hint_open():
            hints, hint_span = self.parse_hint_block()
        return Assertion(formula, span, rule, hints, hint_span)

    def parse_rule_annotation(self) -> RuleAnnotation:
        open_tok = self.expect("{")
        name = self.expect("ident", "rule name")
        if name.text == "bc":
            close_tok = self.expect("}", "'}' after bc")
            return RuleAnnotation("bc", None, (open_tok.start, close_tok.end))
        if name.text == "dbx":
            cofactor = None if self.check("}") else self.parse_term()
            close_tok = self.expect("}", "'}' after dbx cofactor")
            return RuleAnnotation("dbx", cofactor, (open_tok.start, close_tok.end))
        raise ParseError(f"unknown rule annotation {name.text!r} (expected dbx or bc)", name.span)

    def parse_hint_block(self) -> tuple[tuple[tuple[str, str], ...], Span]:
        open_first = self.advance()  # {
        self.advance()  # {
        entries: list[tuple[str, str]] = []
        while not self.at_hint_close():
            if entries:
                self.expect(",", "',' between hints")
            label_start = self.peek()
            label_tokens: list[Token] = []
            while not self.check(":"):
                if self.check("eof") or self.at_hint_close():
                    raise ParseError("hint entry needs 'label: solver'", label_start.span)
                label_tokens.append(self.advance())
            self.advance()  # :
            if not label_tokens:
                raise ParseError("hint entry needs a label before ':'", label_start.span)
            raw = self.source[label_tokens[0].start : label_tokens[-1].end]
            label = " ".join(raw.split())
            solver = self.expect("ident", "solver name").text
            entries.append((label, solver))
        self.advance()  # }
        close_second = self.advance()  # }
        return tuple(entries), (open_first.start, close_second.end)

    # -- statements

    def parse_statement(self) -> Stmt:
        if self.check_keyword("if"):
            return self.parse_cond()
        first = self.parse_choice_operand()
        if self.check("++"):
            options = [first]
            while self.accept("++"):
                options.append(self.parse_choice_operand())
            last_brace = isinstance(options[-1], Seq)
            end = options[-1].span[1]
            if self.check(";"):
                self.advance()
            elif not last_brace:
                raise ParseError("expected ';' after choice", self.peek().span)
            return Choice(tuple(options), (first.span[0], end))
        return self.finish_single(first)

    def finish_single(self, stmt: Stmt) -> Stmt:
        """Attach the trailing `;` / `}*` structure to a statement parsed as a
        choice operand."""
        if isinstance(stmt, (Loop, Ode, Cond)):
            return stmt
        if isinstance(stmt, Seq):  # brace block used as a plain statement
            return stmt
        self.expect(";", "';' after statement")
        return stmt

    def parse_choice_operand(self) -> Stmt:
        if self.check_keyword("skip"):
            tok = self.advance()
            return Skip(tok.span)
        if self.check("{"):
            return self.parse_braced()
        if self.check("ident"):
            return self.parse_assignment()
        tok = self.peek()
        raise ParseError(f"expected a statement, found {tok.text or 'end of input'!r}", tok.span)

    def parse_assignment(self) -> Stmt:
        name = self.ident("assignment target")
        self.expect(":=", "':=' in assignment")
        if self.check("*"):
            self.advance()
            self.expect("(", "'(' after ':= *'")
            constraint = self.parse_formula()
            close = self.expect(")", "')' after constraint")
            return RandomAssign(name.text, constraint, (name.start, close.end))
        expr = self.parse_term()
        end = self.tokens[self.pos - 1].end
        return Assign(name.text, expr, (name.start, end))

    def parse_cond(self) -> Cond:
        start = self.expect_keyword("if")
        arms: list[tuple[Formula, Stmt]] = []
        else_body: Stmt | None = None
        end = start.end
        while True:
            self.expect("(", "'(' after if")
            guard = self.parse_formula()
            self.expect(")", "')' after condition")
            body = self.parse_block()
            arms.append((guard, body))
            end = body.span[1]
            if self.check_keyword("else"):
                self.advance()
                if self.check_keyword("if"):
                    self.advance()
                    continue
                else_body = self.parse_block()
                end = else_body.span[1]
            break
        return Cond(tuple(arms), else_body, (start.start, end))

    def parse_block(self) -> Seq:
        open_tok = self.expect("{", "'{'")
        stmts: list[Stmt] = []
        while not self.check("}"):
            if self.check("eof"):
                raise ParseError("unterminated block", open_tok.span)
            stmts.append(self.parse_statement())
        close_tok = self.advance()
        return Seq(tuple(stmts), (open_tok.start, close_tok.end))

    def parse_braced(self) -> Stmt:
        """Statement opening with `{`: an ODE, a loop, or a brace block."""
        nxt, after = self.peek(1), self.peek(2)
        if nxt.kind == "ident" and nxt.text.endswith("_dot") and after.kind == "=":
            return self.parse_ode()
        block = self.parse_block()
        if self.check("*"):
            star = self.advance()
            invariants: list[Assertion] = []
            end = star.end
            if self.check_keyword("invariant"):
                self.advance()
                while self.check("["):
                    invariants.append(self.parse_assertion(rule_allowed=False, hints_allowed=True))
                if not invariants:
                    raise ParseError("invariant keyword needs at least one [assertion]", self.peek().span)
                end = invariants[-1].hint_span[1] if invariants[-1].hint_span else invariants[-1].span[1]
            self.expect(";", "';' after loop")
            return Loop(block, tuple(invariants), (block.span[0], end))
        return block

    def parse_ode(self) -> Ode:
        open_tok = self.expect("{")
        equations: list[tuple[str, Term]] = []
        while True:
            name = self.expect("ident", "equation variable")
            if not name.text.endswith("_dot") or len(name.text) <= 4:
                raise ParseError("ODE equations are written 'x_dot = e'", name.span)
            var = name.text[:-4]
            self.expect("=", "'=' in ODE equation")
            rhs = self.parse_term()
            equations.append((var, rhs))
            if not self.accept(","):
                break
        self.expect("&", "'&' before the domain constraint")
        domain_start = self.peek().start
        domain = self.parse_formula()
        domain_end = self.tokens[self.pos - 1].end
        close_tok = self.expect("}", "'}' after domain")
        domain_span = (domain_start, domain_end)
        braces_span = (open_tok.start, close_tok.end)
        seen = set()
        for v, _ in equations:
            if v in seen:
                raise ParseError(f"duplicate equation for {v!r}", braces_span)
            seen.add(v)

        solution = False
        ghosts: list[GhostDecl] = []
        invariants: list[Assertion] = []
        end = close_tok.end
        if self.check_keyword("solution"):
            tok = self.advance()
            solution = True
            end = tok.end
        elif self.check_keyword("invariant"):
            self.advance()
            while self.check_keyword("ghost"):
                ghosts.append(self.parse_ghost())
            while self.check("["):
                inv = self.parse_assertion(rule_allowed=True, hints_allowed=True)
                invariants.append(inv)
                if inv.hint_span:
                    end = inv.hint_span[1]
                elif inv.rule:
                    end = inv.rule.span[1]
                else:
                    end = inv.span[1]
            if not invariants:
                raise ParseError("invariant keyword needs at least one [assertion]", self.peek().span)
        self.expect(";", "';' after ODE")
        return Ode(
            tuple(equations),
            domain,
            tuple(ghosts),
            tuple(invariants),
            solution,
            braces_span,
            domain_span,
            (open_tok.start, end),
        )

    def parse_ghost(self) -> GhostDecl:
        start = self.expect_keyword("ghost")
        name = self.ident("ghost variable")
        self.expect("(", "'(' after ghost variable")
        eq_name = self.expect("ident", "ghost equation")
        if eq_name.text != name.text + "_dot":
            raise ParseError(f"ghost equation must define {name.text}_dot", eq_name.span)
        self.expect("=", "'=' in ghost equation")
        rhs = self.parse_term()
        close = self.expect(")", "')' after ghost equation")
        return GhostDecl(name.text, rhs, (start.start, close.end))

    # -- formulas

    def parse_formula(self) -> Formula:
        return self.parse_implies()

    def parse_implies(self) -> Formula:
        left = self.parse_or()
        if self.accept("->"):
            return Implies(left, self.parse_implies())
        return left

    def parse_or(self) -> Formula:
        items = [self.parse_and()]
        while self.accept("||"):
            items.append(self.parse_and())
        return items[0] if len(items) == 1 else Or(tuple(items))

    def parse_and(self) -> Formula:
        items = [self.parse_not()]
        while self.accept("&&"):
            items.append(self.parse_not())
        return items[0] if len(items) == 1 else And(tuple(items))

    def parse_not(self) -> Formula:
        if self.accept("!"):
            return Not(self.parse_not())
        return self.parse_formula_atom()

    def parse_formula_atom(self) -> Formula:
        if self.check_keyword("true"):
            self.advance()
            return BoolLit(True)
        if self.check_keyword("false"):
            self.advance()
            return BoolLit(False)
        if self.check_keyword("exists") or self.check_keyword("forall"):
            return self.parse_quantifier()
        # Either `expr relop expr` or a parenthesized formula; try the
        # comparison first and fall back on failure.
        saved = self.pos
        try:
            left = self.parse_term()
            op_tok = self.peek()
            if op_tok.kind not in ("==", "!=", "<", "<=", ">", ">="):
                raise ParseError("expected comparison operator", op_tok.span)
            self.advance()
            right = self.parse_term()
            return Cmp(op_tok.kind, left, right)
        except ParseError as exc:
            cmp_err = exc
            cmp_pos = self.pos
            self.pos = saved
        if self.accept("("):
            inner = self.parse_formula()
            self.expect(")", "')'")
            return inner
        # Neither interpretation worked; report whichever got further.
        if cmp_pos > self.pos:
            raise cmp_err
        tok = self.peek()
        raise ParseError(f"expected a formula, found {tok.text or 'end of input'!r}", tok.span)

    def parse_quantifier(self) -> Formula:
        kind = self.advance().text
        if kind == "forall" and not (
            self.peek().kind == "ident"
            and self.peek().text not in KEYWORDS
            and self.peek(1).kind in ("ident", ".")
        ):
            lower = self.parse_term()
            self.expect("<=", "'<=' in bounded forall")
            var = self.ident("bound variable")
            self.expect("<", "'<' in bounded forall")
            upper = self.parse_term()
            self.expect(".", "'.' after quantifier")
            return ForallRange(var.text, lower, upper, self.parse_formula())
        names = [self.ident("bound variable").text]
        while self.peek().kind == "ident":
            names.append(self.ident("bound variable").text)
        self.expect(".", "'.' after quantifier")
        body = self.parse_formula()
        return Exists(tuple(names), body) if kind == "exists" else Forall(tuple(names), body)

    # -- terms

    def parse_term(self) -> Term:
        left = self.parse_term_mul()
        while True:
            if self.accept("+"):
                left = Add(left, self.parse_term_mul())
            elif self.accept("-"):
                left = Sub(left, self.parse_term_mul())
            else:
                return left

    def parse_term_mul(self) -> Term:
        left = self.parse_term_unary()
        while True:
            if self.accept("*"):
                left = Mul(left, self.parse_term_unary())
            elif self.accept("/"):
                left = Div(left, self.parse_term_unary())
            else:
                return left

    def parse_term_unary(self) -> Term:
        if self.accept("-"):
            return Neg(self.parse_term_unary())
        return self.parse_term_power()

    def parse_term_power(self) -> Term:
        base = self.parse_term_atom()
        if self.accept("^"):
            num = self.expect("number", "integer exponent")
            if "." in num.text:
                raise ParseError("exponent must be a nonnegative integer", num.span)
            return Pow(base, int(num.text))
        return base

    def parse_term_atom(self) -> Term:
        tok = self.peek()
        if tok.kind == "number":
            self.advance()
            return Const(Fraction(tok.text))
        if tok.kind == "ident":
            if tok.text in KEYWORDS:
                raise ParseError(f"{tok.text!r} is a keyword, not a variable", tok.span)
            self.advance()
            return Var(tok.text)
        if tok.kind == "(":
            self.advance()
            inner = self.parse_term()
            self.expect(")", "')'")
            return inner
        raise ParseError(f"expected a term, found {tok.text or 'end of input'!r}", tok.span)


def parse(source: str) -> HoareFile:
    """Parse a `.hhl` source string."""
    return _Parser(source).parse_file()


# ---------------------------------------------------------------------------
# Pretty printer


def _format_hints(hints: tuple[tuple[str, str], ...]) -> str:
    inner = ", ".join(f"{label}: {solver}" for label, solver in hints)
    return "{{" + inner + "}}"


def _format_assertion(a: Assertion) -> str:
    parts = [f"[{formula_to_str(a.formula)}]"]
    if a.rule is not None:
        if a.rule.kind == "bc":
            parts.append("{bc}")
        elif a.rule.cofactor is None:
            parts.append("{dbx}")
        else:
            parts.append(f"{{dbx {term_to_str(a.rule.cofactor)}}}")
    if a.hints:
        parts.append(_format_hints(a.hints))
    return " ".join(parts)


def _is_inline(stmt: Stmt) -> bool:
    return isinstance(stmt, (Skip, Assign, RandomAssign))


def _format_simple(stmt: Stmt) -> str:
    if isinstance(stmt, Skip):
        return "skip"
    if isinstance(stmt, Assign):
        return f"{stmt.var} := {term_to_str(stmt.expr)}"
    if isinstance(stmt, RandomAssign):
        return f"{stmt.var} := *({formula_to_str(stmt.constraint)})"
    raise TypeError(f"not a simple statement: {stmt!r}")


def _format_stmt(stmt: Stmt, indent: str, lines: list[str]) -> None:
    if _is_inline(stmt):
        lines.append(f"{indent}{_format_simple(stmt)};")
        return
    if isinstance(stmt, Seq):
        lines.append(f"{indent}{{")
        for item in stmt.items:
            _format_stmt(item, indent + "  ", lines)
        lines.append(f"{indent}}}")
        return
    if isinstance(stmt, Cond):
        for i, (guard, body) in enumerate(stmt.arms):
            head = "if" if i == 0 else "} else if"
            lines.append(f"{indent}{head} ({formula_to_str(guard)}) {{")
            for item in body.items:
                _format_stmt(item, indent + "  ", lines)
        if stmt.else_body is not None:
            lines.append(f"{indent}}} else {{")
            body = stmt.else_body
            items = body.items if isinstance(body, Seq) else (body,)
            for item in items:
                _format_stmt(item, indent + "  ", lines)
        lines.append(f"{indent}}}")
        return
    if isinstance(stmt, Choice):
        if all(_is_inline(opt) for opt in stmt.options):
            lines.append(f"{indent}{' ++ '.join(_format_simple(opt) for opt in stmt.options)};")
            return
        for i, opt in enumerate(stmt.options):
            items = opt.items if isinstance(opt, Seq) else (opt,)
            lines.append(f"{indent}{{" if i == 0 else f"{indent}}} ++ {{")
            for item in items:
                _format_stmt(item, indent + "  ", lines)
        lines.append(f"{indent}}};")
        return
    if isinstance(stmt, Loop):
        lines.append(f"{indent}{{")
        for item in stmt.body.items:
            _format_stmt(item, indent + "  ", lines)
        invs = " ".join(_format_assertion(a) for a in stmt.invariants)
        tail = f" invariant {invs}" if invs else ""
        lines.append(f"{indent}}}*{tail};")
        return
    if isinstance(stmt, Ode):
        eqs = ", ".join(f"{v}_dot = {term_to_str(e)}" for v, e in stmt.equations)
        head = f"{indent}{{{eqs} & {formula_to_str(stmt.domain)}}}"
        if stmt.solution:
            lines.append(f"{head} solution;")
            return
        if not stmt.invariants and not stmt.ghosts:
            lines.append(f"{head};")
            return
        ghosts = " ".join(f"ghost {g.var} ({g.var}_dot = {term_to_str(g.rhs)})" for g in stmt.ghosts)
        invs = " ".join(_format_assertion(a) for a in stmt.invariants)
        annot = " ".join(p for p in (ghosts, invs) if p)
        lines.append(f"{head} invariant {annot};")
        return
    raise TypeError(f"not a statement: {stmt!r}")


def print_file(file: HoareFile) -> str:
    """Render a file back to concrete syntax. Reparsing the output yields a
    structurally identical file (spans aside)."""
    lines = ["pre " + " ".join(f"[{formula_to_str(a.formula)}]" for a in file.preconditions) + ";"]
    for stmt in file.body.items:
        _format_stmt(stmt, "", lines)
    lines.append("post " + " ".join(_format_assertion(a) for a in file.postconditions) + ";")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Assertion paths and hint rewriting
#
# Assertions are addressed by structural paths such as "pre[0]", "post[1]",
# "body[2].inv[0]" or "body[1].arm[0].body[3].inv[2]". Paths are positional,
# so whitespace and expression edits that do not move the assertion keep its
# path stable.


def _stmt_children(stmt: Stmt) -> list[tuple[str, Stmt]]:
    if isinstance(stmt, Seq):
        return [(f"body[{i}]", s) for i, s in enumerate(stmt.items)]
    if isinstance(stmt, Cond):
        out = [(f"arm[{i}]", body) for i, (_, body) in enumerate(stmt.arms)]
        if stmt.else_body is not None:
            out.append(("else", stmt.else_body))
        return out
    if isinstance(stmt, Choice):
        return [(f"opt[{i}]", s) for i, s in enumerate(stmt.options)]
    if isinstance(stmt, Loop):
        return [("loop", stmt.body)]
    return []


def iter_assertions(file: HoareFile) -> Iterator[tuple[str, Assertion]]:
    """All assertions in source order with their structural paths."""
    for i, a in enumerate(file.preconditions):
        yield f"pre[{i}]", a

    def walk(prefix: str, stmt: Stmt) -> Iterator[tuple[str, Assertion]]:
        if isinstance(stmt, (Loop, Ode)):
            for j, inv in enumerate(stmt.invariants):
                yield f"{prefix}.inv[{j}]", inv
        for label, child in _stmt_children(stmt):
            yield from walk(f"{prefix}.{label}" if prefix else label, child)

    for label, child in _stmt_children(file.body):
        yield from walk(label, child)
    for i, a in enumerate(file.postconditions):
        yield f"post[{i}]", a


def find_assertion(file: HoareFile, path: str) -> Assertion:
    for p, a in iter_assertions(file):
        if p == path:
            return a
    raise UnknownAssertion(path)


def rewrite_hint(file: HoareFile, assertion_path: str, label: str, solver: str) -> str:
    """Return new source with the hint `label: solver` recorded on the given
    assertion, creating or updating its `{{...}}` block in place.

    Only the hint block's bytes change; the rest of the source is preserved
    verbatim.
    """
    target = find_assertion(file, assertion_path)
    hints = dict(target.hints)
    hints[label] = solver
    text = " " + _format_hints(tuple(hints.items()))
    if target.hint_span is not None:
        start, end = target.hint_span
        start -= 1 if file.source[start - 1 : start] == " " else 0
        return file.source[:start] + text + file.source[end:]
    anchor = target.rule.span[1] if target.rule is not None else target.span[1]
    return file.source[:anchor] + text + file.source[anchor:]
