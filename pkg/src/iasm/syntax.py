"""Program syntax: AST, concrete grammar, desugaring, and static validation.

The surface grammar (``.asm`` files)::

    program   := decl* "rule" rule
    decl      := ("static" | "dynamic") name "/" nat ["relational"]
               | "label" name ("," name)*
               | "external" name "/" nat "=" "[" [titem ("," titem)*] "]"
    titem     := name | "#" nat
    rule      := simple ("par" simple)*
    simple    := "fail" | "skip"
               | "issue" term
               | term ":=" term
               | "if" guard "then" rule ["else" rule] "endif"
               | "par" "{" [rule (";" rule)*] "}"
               | ("nlet" | "vlet") name "=" term ("," name "=" term)* "in" rule
    guard     := kand ("kor" kand)*
    kand      := knot ("kand" knot)*
    knot      := "knot" knot | atom
    atom      := "(" guard ")" | term [timing term]
    timing    := "preceq" | "prec" | "approx" | "succeq" | "succ"
    term      := postfix ["=" postfix]          -- "=" abbreviates Equal
    postfix   := primary "!"*                   -- "t!" abbreviates t = t
    primary   := name ["(" [term ("," term)*] ")"]

Nullary applications may be written ``c`` or ``c()``.  ``//`` starts a line
comment.  Identifiers bound by an enclosing ``nlet``/``vlet`` parse as
variables; desugaring substitutes them away.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from .model import (
    AsmError,
    ExternalVocabulary,
    SymbolInfo,
    Template,
    Vocabulary,
)


class ParseError(AsmError):
    def __init__(self, message: str, line: int, col: int, expected: str = ""):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col
        self.expected = expected


class UnboundVariable(AsmError):
    pass


Pos = Optional[tuple[int, int]]


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class App:
    head: str
    args: tuple["Term", ...] = ()
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class Var:
    name: str
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class Bang:
    """Sugar: ``t!`` stands for the Boolean term Equal(t, t)."""

    arg: "Term"
    pos: Pos = field(default=None, compare=False)


Term = Union[App, Var, Bang]


@dataclass(frozen=True)
class BoolTerm:
    term: Term
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class Timing:
    """Core timing guard: replies for ``s`` arrived no later than for ``t``."""

    s: Term
    t: Term
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class TimingOp:
    """Sugar forms prec / approx / succeq / succ over the core ordering."""

    op: str
    s: Term
    t: Term
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class KAnd:
    left: "Guard"
    right: "Guard"
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class KOr:
    left: "Guard"
    right: "Guard"
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class KNot:
    guard: "Guard"
    pos: Pos = field(default=None, compare=False)


Guard = Union[BoolTerm, Timing, TimingOp, KAnd, KOr, KNot]


@dataclass(frozen=True)
class Update:
    head: str
    args: tuple[Term, ...]
    rhs: Term
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class Issue:
    head: str
    args: tuple[Term, ...]
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class Fail:
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class Cond:
    guard: Guard
    then_rule: "Rule"
    else_rule: Optional["Rule"] = None  # None is if-without-else sugar
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class Par:
    rules: tuple["Rule", ...] = ()
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class Skip:
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class NLet:
    bindings: tuple[tuple[str, Term], ...]
    body: "Rule"
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class VLet:
    bindings: tuple[tuple[str, Term], ...]
    body: "Rule"
    pos: Pos = field(default=None, compare=False)


Rule = Union[Update, Issue, Fail, Cond, Par, Skip, NLet, VLet]

SUGAR_NODES = (Skip, NLet, VLet, Bang, TimingOp)


@dataclass(frozen=True)
class Program:
    vocabulary: Vocabulary
    labels: frozenset[str]
    external: ExternalVocabulary
    rule: Rule

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Program)
            and self.vocabulary == other.vocabulary
            and self.labels == other.labels
            and self.external == other.external
            and self.rule == other.rule
        )


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    code: str
    message: str
    line: int = 0
    col: int = 0

    def to_json(self) -> dict:
        return {
            "severity": self.severity,
            "code": self.code,
            "message": self.message,
            "line": self.line,
            "col": self.col,
        }


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

KEYWORDS = {
    "rule", "if", "then", "else", "endif", "par", "issue", "fail", "skip",
    "nlet", "vlet", "in", "kand", "kor", "knot",
    "preceq", "prec", "approx", "succeq", "succ",
    "static", "dynamic", "relational", "label", "external",
}

_SYMBOLS = {
    ":=": "ASSIGN", "(": "LPAREN", ")": "RPAREN", "{": "LBRACE", "}": "RBRACE",
    "[": "LBRACK", "]": "RBRACK", ",": "COMMA", ";": "SEMI", "/": "SLASH",
    "=": "EQ", "!": "BANG",
}


@dataclass(frozen=True)
class Token:
    type: str  # keyword name, IDENT, NAT, HASH, symbol name, EOF
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    toks: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if text.startswith("//", i):
            while i < n and text[i] != "\n":
                i += 1
            continue
        if text.startswith(":=", i):
            toks.append(Token("ASSIGN", ":=", line, col))
            i += 2
            col += 2
            continue
        if ch == "#":
            j = i + 1
            while j < n and text[j].isdigit():
                j += 1
            if j == i + 1:
                raise ParseError("'#' must be followed by a placeholder index", line, col)
            toks.append(Token("HASH", text[i + 1 : j], line, col))
            col += j - i
            i = j
            continue
        if ch in _SYMBOLS:
            toks.append(Token(_SYMBOLS[ch], ch, line, col))
            i += 1
            col += 1
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            toks.append(Token("NAT", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] in "_'"):
                j += 1
            word = text[i:j]
            toks.append(Token(word if word in KEYWORDS else "IDENT", word, line, col))
            col += j - i
            i = j
            continue
        raise ParseError(f"unexpected character {ch!r}", line, col)
    toks.append(Token("EOF", "", line, col))
    return toks


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_TIMING_OPS = {"preceq", "prec", "approx", "succeq", "succ"}


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0
        self.scopes: list[set[str]] = []

    def peek(self) -> Token:
        return self.toks[self.i]

    def next(self) -> Token:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def at(self, type_: str) -> bool:
        return self.peek().type == type_

    def accept(self, type_: str) -> Optional[Token]:
        if self.at(type_):
            return self.next()
        return None

    def expect(self, type_: str, what: str = "") -> Token:
        tok = self.peek()
        if tok.type != type_:
            raise ParseError(
                f"expected {what or type_}, found {tok.text or 'end of input'!r}",
                tok.line,
                tok.col,
                expected=what or type_,
            )
        return self.next()

    def in_scope(self, name: str) -> bool:
        return any(name in scope for scope in self.scopes)

    # -- declarations -------------------------------------------------------

    def parse_program(self) -> Program:
        symbols: list[SymbolInfo] = []
        labels: set[str] = set()
        externals: list[tuple[str, Template]] = []
        while True:
            tok = self.peek()
            if tok.type in ("static", "dynamic"):
                self.next()
                name, arity = self.parse_symref()
                relational = self.accept("relational") is not None
                symbols.append(SymbolInfo(name, arity, tok.type == "static", relational))
            elif tok.type == "label":
                self.next()
                labels.add(self.expect("IDENT", "label name").text)
                while self.accept("COMMA"):
                    labels.add(self.expect("IDENT", "label name").text)
            elif tok.type == "external":
                self.next()
                name, arity = self.parse_symref()
                self.expect("EQ", "'='")
                tpl = self.parse_template()
                if tpl.arity != arity:
                    raise ParseError(
                        f"template has {tpl.arity} placeholders, symbol arity is {arity}",
                        tok.line,
                        tok.col,
                    )
                externals.append((name, tpl))
            else:
                break
        self.expect("rule", "'rule'")
        rule = self.parse_rule()
        self.expect("EOF", "end of input")
        try:
            vocab = Vocabulary(symbols)
            ext = ExternalVocabulary(externals)
        except AsmError as exc:
            raise ParseError(str(exc), 1, 1) from exc
        return Program(vocab, frozenset(labels), ext, rule)

    def parse_symref(self) -> tuple[str, int]:
        name = self.expect("IDENT", "symbol name").text
        self.expect("SLASH", "'/'")
        arity = int(self.expect("NAT", "arity").text)
        return name, arity

    def parse_template(self) -> Template:
        self.expect("LBRACK", "'['")
        items: list[str] = []
        if not self.at("RBRACK"):
            items.append(self.parse_titem())
            while self.accept("COMMA"):
                items.append(self.parse_titem())
        self.expect("RBRACK", "']'")
        return Template.of(*items)

    def parse_titem(self) -> str:
        tok = self.peek()
        if tok.type == "HASH":
            self.next()
            return "#" + tok.text
        if tok.type == "IDENT":
            self.next()
            return tok.text
        raise ParseError("expected label or placeholder", tok.line, tok.col)

    # -- rules --------------------------------------------------------------

    def parse_rule(self) -> Rule:
        first = self.parse_simple_rule()
        if not self.at("par"):
            return first
        rules = [first]
        while self.accept("par"):
            rules.append(self.parse_simple_rule())
        return Par(tuple(rules), pos=_pos_of(first))

    def parse_simple_rule(self) -> Rule:
        tok = self.peek()
        pos = (tok.line, tok.col)
        if tok.type == "fail":
            self.next()
            return Fail(pos=pos)
        if tok.type == "skip":
            self.next()
            return Skip(pos=pos)
        if tok.type == "issue":
            self.next()
            term = self.parse_term()
            if not isinstance(term, App):
                raise ParseError("issue takes a function application", tok.line, tok.col)
            return Issue(term.head, term.args, pos=pos)
        if tok.type == "if":
            self.next()
            guard = self.parse_guard()
            self.expect("then", "'then'")
            then_rule = self.parse_rule()
            else_rule = self.parse_rule() if self.accept("else") else None
            self.expect("endif", "'endif'")
            return Cond(guard, then_rule, else_rule, pos=pos)
        if tok.type == "par":
            self.next()
            self.expect("LBRACE", "'{'")
            rules: list[Rule] = []
            if not self.at("RBRACE"):
                rules.append(self.parse_rule())
                while self.accept("SEMI"):
                    rules.append(self.parse_rule())
            self.expect("RBRACE", "'}'")
            return Par(tuple(rules), pos=pos)
        if tok.type in ("nlet", "vlet"):
            self.next()
            bindings: list[tuple[str, Term]] = []
            seen: set[str] = set()
            while True:
                name = self.expect("IDENT", "variable name").text
                if name in seen:
                    raise ParseError(f"duplicate let variable {name!r}", tok.line, tok.col)
                seen.add(name)
                self.expect("EQ", "'='")
                bindings.append((name, self.parse_term()))
                if not self.accept("COMMA"):
                    break
            self.expect("in", "'in'")
            self.scopes.append(seen)
            try:
                body = self.parse_rule()
            finally:
                self.scopes.pop()
            cls = NLet if tok.type == "nlet" else VLet
            return cls(tuple(bindings), body, pos=pos)
        lhs = self.parse_term()
        self.expect("ASSIGN", "':='")
        rhs = self.parse_term()
        if not isinstance(lhs, App):
            raise ParseError("update target must be a function application", tok.line, tok.col)
        return Update(lhs.head, lhs.args, rhs, pos=pos)

    # -- guards -------------------------------------------------------------

    def parse_guard(self) -> Guard:
        g = self.parse_kand()
        while self.at("kor"):
            tok = self.next()
            g = KOr(g, self.parse_kand(), pos=(tok.line, tok.col))
        return g

    def parse_kand(self) -> Guard:
        g = self.parse_knot()
        while self.at("kand"):
            tok = self.next()
            g = KAnd(g, self.parse_knot(), pos=(tok.line, tok.col))
        return g

    def parse_knot(self) -> Guard:
        if self.at("knot"):
            tok = self.next()
            return KNot(self.parse_knot(), pos=(tok.line, tok.col))
        return self.parse_guard_atom()

    def parse_guard_atom(self) -> Guard:
        tok = self.peek()
        if tok.type == "LPAREN":
            self.next()
            g = self.parse_guard()
            self.expect("RPAREN", "')'")
            return g
        term = self.parse_term()
        nxt = self.peek()
        if nxt.type in _TIMING_OPS:
            self.next()
            rhs = self.parse_term()
            if nxt.type == "preceq":
                return Timing(term, rhs, pos=(nxt.line, nxt.col))
            return TimingOp(nxt.type, term, rhs, pos=(nxt.line, nxt.col))
        return BoolTerm(term, pos=(tok.line, tok.col))

    # -- terms --------------------------------------------------------------

    def parse_term(self) -> Term:
        lhs = self.parse_postfix()
        if self.at("EQ"):
            tok = self.next()
            rhs = self.parse_postfix()
            return App("Equal", (lhs, rhs), pos=(tok.line, tok.col))
        return lhs

    def parse_postfix(self) -> Term:
        term = self.parse_primary()
        while self.at("BANG"):
            tok = self.next()
            term = Bang(term, pos=(tok.line, tok.col))
        return term

    def parse_primary(self) -> Term:
        tok = self.expect("IDENT", "a term")
        pos = (tok.line, tok.col)
        if self.at("LPAREN"):
            self.next()
            args: list[Term] = []
            if not self.at("RPAREN"):
                args.append(self.parse_term())
                while self.accept("COMMA"):
                    args.append(self.parse_term())
            self.expect("RPAREN", "')'")
            return App(tok.text, tuple(args), pos=pos)
        if self.in_scope(tok.text):
            return Var(tok.text, pos=pos)
        return App(tok.text, (), pos=pos)


def _pos_of(node) -> Pos:
    return getattr(node, "pos", None)


def parse_program(text: str) -> Program:
    """Parse a full ``.asm`` text into a (possibly sugared) program."""
    stripped = text.strip()
    if not stripped:
        raise ParseError("empty input", 1, 1, expected="'rule'")
    return _Parser(text).parse_program()


def parse_rule_text(text: str) -> Rule:
    """Parse just a rule body (no declarations)."""
    p = _Parser(text)
    rule = p.parse_rule()
    p.expect("EOF", "end of input")
    return rule


def parse_term_text(text: str, variables: set[str] | None = None) -> Term:
    """Parse a single term; ``variables`` names parse as variables."""
    p = _Parser(text)
    if variables:
        p.scopes.append(set(variables))
    term = p.parse_term()
    p.expect("EOF", "end of input")
    return term


# ---------------------------------------------------------------------------
# Desugaring
# ---------------------------------------------------------------------------

def substitute_term(term: Term, env: dict[str, Term]) -> Term:
    if isinstance(term, Var):
        return env.get(term.name, term)
    if isinstance(term, Bang):
        return Bang(substitute_term(term.arg, env), pos=term.pos)
    return App(term.head, tuple(substitute_term(a, env) for a in term.args), pos=term.pos)


def substitute_guard(g: Guard, env: dict[str, Term]) -> Guard:
    if isinstance(g, BoolTerm):
        return BoolTerm(substitute_term(g.term, env), pos=g.pos)
    if isinstance(g, Timing):
        return Timing(substitute_term(g.s, env), substitute_term(g.t, env), pos=g.pos)
    if isinstance(g, TimingOp):
        return TimingOp(g.op, substitute_term(g.s, env), substitute_term(g.t, env), pos=g.pos)
    if isinstance(g, KAnd):
        return KAnd(substitute_guard(g.left, env), substitute_guard(g.right, env), pos=g.pos)
    if isinstance(g, KOr):
        return KOr(substitute_guard(g.left, env), substitute_guard(g.right, env), pos=g.pos)
    return KNot(substitute_guard(g.guard, env), pos=g.pos)


def substitute_rule(rule: Rule, env: dict[str, Term]) -> Rule:
    if isinstance(rule, (Fail, Skip)):
        return rule
    if isinstance(rule, Update):
        return Update(
            rule.head,
            tuple(substitute_term(a, env) for a in rule.args),
            substitute_term(rule.rhs, env),
            pos=rule.pos,
        )
    if isinstance(rule, Issue):
        return Issue(rule.head, tuple(substitute_term(a, env) for a in rule.args), pos=rule.pos)
    if isinstance(rule, Cond):
        return Cond(
            substitute_guard(rule.guard, env),
            substitute_rule(rule.then_rule, env),
            substitute_rule(rule.else_rule, env) if rule.else_rule is not None else None,
            pos=rule.pos,
        )
    if isinstance(rule, Par):
        return Par(tuple(substitute_rule(r, env) for r in rule.rules), pos=rule.pos)
    if isinstance(rule, (NLet, VLet)):
        # Bindings are open to the outer scope; inner bindings shadow.
        new_bindings = tuple((v, substitute_term(t, env)) for v, t in rule.bindings)
        inner = {k: v for k, v in env.items() if k not in {v for v, _ in rule.bindings}}
        cls = type(rule)
        return cls(new_bindings, substitute_rule(rule.body, inner), pos=rule.pos)
    raise AsmError(f"unknown rule node {type(rule).__name__}")


def desugar_term(term: Term) -> Term:
    if isinstance(term, Var):
        return term
    if isinstance(term, Bang):
        inner = desugar_term(term.arg)
        return App("Equal", (inner, inner), pos=term.pos)
    return App(term.head, tuple(desugar_term(a) for a in term.args), pos=term.pos)


def desugar_guard(g: Guard) -> Guard:
    if isinstance(g, BoolTerm):
        return BoolTerm(desugar_term(g.term), pos=g.pos)
    if isinstance(g, Timing):
        return Timing(desugar_term(g.s), desugar_term(g.t), pos=g.pos)
    if isinstance(g, TimingOp):
        s, t = desugar_term(g.s), desugar_term(g.t)
        if g.op == "prec":
            return KNot(Timing(t, s), pos=g.pos)
        if g.op == "approx":
            return KAnd(Timing(s, t), Timing(t, s), pos=g.pos)
        if g.op == "succeq":
            return Timing(t, s, pos=g.pos)
        if g.op == "succ":
            return KNot(Timing(s, t), pos=g.pos)
        raise AsmError(f"unknown timing op {g.op}")
    if isinstance(g, KAnd):
        return KAnd(desugar_guard(g.left), desugar_guard(g.right), pos=g.pos)
    if isinstance(g, KOr):
        return KOr(desugar_guard(g.left), desugar_guard(g.right), pos=g.pos)
    return KNot(desugar_guard(g.guard), pos=g.pos)


def desugar(rule: Rule) -> Rule:
    """Expand all sugar: the result uses only update/issue/fail/if/par forms."""
    result = _desugar_rule(rule)
    leftover = _free_variables_rule(result)
    if leftover:
        raise UnboundVariable(f"unbound variables after desugaring: {sorted(leftover)}")
    return result


def _desugar_rule(rule: Rule) -> Rule:
    if isinstance(rule, Fail):
        return rule
    if isinstance(rule, Skip):
        return Par((), pos=rule.pos)
    if isinstance(rule, Update):
        return Update(
            rule.head,
            tuple(desugar_term(a) for a in rule.args),
            desugar_term(rule.rhs),
            pos=rule.pos,
        )
    if isinstance(rule, Issue):
        return Issue(rule.head, tuple(desugar_term(a) for a in rule.args), pos=rule.pos)
    if isinstance(rule, Cond):
        else_rule = rule.else_rule if rule.else_rule is not None else Skip()
        return Cond(
            desugar_guard(rule.guard),
            _desugar_rule(rule.then_rule),
            _desugar_rule(else_rule),
            pos=rule.pos,
        )
    if isinstance(rule, Par):
        return Par(tuple(_desugar_rule(r) for r in rule.rules), pos=rule.pos)
    if isinstance(rule, NLet):
        env = {v: t for v, t in rule.bindings}
        return _desugar_rule(substitute_rule(rule.body, env))
    if isinstance(rule, VLet):
        env = {v: t for v, t in rule.bindings}
        guard_term: Term = Bang(rule.bindings[0][1])
        for _v, t in rule.bindings[1:]:
            guard_term = App("And", (guard_term, Bang(t)))
        body = substitute_rule(rule.body, env)
        return _desugar_rule(Cond(BoolTerm(guard_term), body, None, pos=rule.pos))
    raise AsmError(f"unknown rule node {type(rule).__name__}")


def _free_variables_term(term: Term, acc: set[str]) -> None:
    if isinstance(term, Var):
        acc.add(term.name)
    elif isinstance(term, Bang):
        _free_variables_term(term.arg, acc)
    else:
        for a in term.args:
            _free_variables_term(a, acc)


def _free_variables_guard(g: Guard, acc: set[str]) -> None:
    if isinstance(g, BoolTerm):
        _free_variables_term(g.term, acc)
    elif isinstance(g, (Timing, TimingOp)):
        _free_variables_term(g.s, acc)
        _free_variables_term(g.t, acc)
    elif isinstance(g, (KAnd, KOr)):
        _free_variables_guard(g.left, acc)
        _free_variables_guard(g.right, acc)
    else:
        _free_variables_guard(g.guard, acc)


def _free_variables_rule(rule: Rule, acc: Optional[set[str]] = None) -> set[str]:
    if acc is None:
        acc = set()
    if isinstance(rule, Update):
        for a in rule.args:
            _free_variables_term(a, acc)
        _free_variables_term(rule.rhs, acc)
    elif isinstance(rule, Issue):
        for a in rule.args:
            _free_variables_term(a, acc)
    elif isinstance(rule, Cond):
        _free_variables_guard(rule.guard, acc)
        _free_variables_rule(rule.then_rule, acc)
        if rule.else_rule is not None:
            _free_variables_rule(rule.else_rule, acc)
    elif isinstance(rule, Par):
        for r in rule.rules:
            _free_variables_rule(r, acc)
    elif isinstance(rule, (NLet, VLet)):
        bound = {v for v, _ in rule.bindings}
        for _v, t in rule.bindings:
            _free_variables_term(t, acc)
        inner: set[str] = set()
        _free_variables_rule(rule.body, inner)
        acc |= inner - bound
    return acc


def is_core(rule: Rule) -> bool:
    """True iff the rule uses no sugar nodes and no variables."""
    if isinstance(rule, SUGAR_NODES):
        return False
    if _free_variables_rule(rule):
        return False
    return not _contains_sugar(rule)


def _contains_sugar(node) -> bool:
    if isinstance(node, SUGAR_NODES):
        return True
    if isinstance(node, (App,)):
        return any(_contains_sugar(a) for a in node.args)
    if isinstance(node, Var):
        return True
    if isinstance(node, BoolTerm):
        return _contains_sugar(node.term)
    if isinstance(node, Timing):
        return _contains_sugar(node.s) or _contains_sugar(node.t)
    if isinstance(node, (KAnd, KOr)):
        return _contains_sugar(node.left) or _contains_sugar(node.right)
    if isinstance(node, KNot):
        return _contains_sugar(node.guard)
    if isinstance(node, Update):
        return any(_contains_sugar(a) for a in node.args) or _contains_sugar(node.rhs)
    if isinstance(node, Issue):
        return any(_contains_sugar(a) for a in node.args)
    if isinstance(node, Fail):
        return False
    if isinstance(node, Cond):
        return (
            node.else_rule is None
            or _contains_sugar(node.guard)
            or _contains_sugar(node.then_rule)
            or _contains_sugar(node.else_rule)
        )
    if isinstance(node, Par):
        return any(_contains_sugar(r) for r in node.rules)
    return True


def desugar_program(program: Program) -> Program:
    return Program(program.vocabulary, program.labels, program.external, desugar(program.rule))


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def is_boolean_term(term: Term, vocab: Vocabulary) -> bool:
    """A term is Boolean iff its head is a relational state symbol."""
    if isinstance(term, Bang):
        return True
    if not isinstance(term, App):
        return False
    info = vocab.get(term.head, len(term.args))
    return info is not None and info.relational


def validate(program: Program) -> list[Diagnostic]:
    """Static well-formedness diagnostics; empty list means valid."""
    diags: list[Diagnostic] = []
    vocab, ext = program.vocabulary, program.external

    for name, _arity, tpl in ext.entries:
        if vocab.has_name(name):
            diags.append(
                Diagnostic(
                    "error",
                    "DuplicateSymbol",
                    f"{name} is declared both in the state vocabulary and externally",
                )
            )
        for lbl in tpl.labels():
            if lbl not in program.labels:
                diags.append(
                    Diagnostic("error", "UnknownLabel", f"template label {lbl!r} is not declared")
                )

    try:
        core = desugar(program.rule)
    except UnboundVariable as exc:
        return diags + [Diagnostic("error", "UnboundVariable", str(exc))]

    def where(node) -> tuple[int, int]:
        pos = getattr(node, "pos", None)
        return pos if pos else (0, 0)

    def check_term(term: Term) -> None:
        if isinstance(term, Var):
            line, col = where(term)
            diags.append(Diagnostic("error", "UnboundVariable", f"variable {term.name}", line, col))
            return
        assert isinstance(term, App)
        line, col = where(term)
        n = len(term.args)
        in_vocab = (term.head, n) in vocab
        in_ext = (term.head, n) in ext
        if not in_vocab and not in_ext:
            if vocab.has_name(term.head) or ext.has_name(term.head):
                diags.append(
                    Diagnostic(
                        "error", "ArityMismatch",
                        f"{term.head} is not declared with arity {n}", line, col,
                    )
                )
            else:
                diags.append(
                    Diagnostic("error", "UnknownSymbol", f"unknown symbol {term.head}/{n}", line, col)
                )
        for a in term.args:
            check_term(a)

    def check_guard(g: Guard) -> None:
        if isinstance(g, BoolTerm):
            check_term(g.term)
            if isinstance(g.term, App) and not is_boolean_term(g.term, vocab):
                line, col = where(g)
                diags.append(
                    Diagnostic(
                        "error", "NonBooleanGuard",
                        "guard terms must be headed by a relational symbol", line, col,
                    )
                )
        elif isinstance(g, Timing):
            check_term(g.s)
            check_term(g.t)
        elif isinstance(g, (KAnd, KOr)):
            check_guard(g.left)
            check_guard(g.right)
        elif isinstance(g, KNot):
            check_guard(g.guard)

    def check_rule(r: Rule) -> None:
        line, col = where(r)
        if isinstance(r, Update):
            n = len(r.args)
            info = vocab.get(r.head, n)
            if (r.head, n) in ext:
                diags.append(
                    Diagnostic("error", "UpdateToExternal",
                               f"cannot update external symbol {r.head}", line, col)
                )
            elif info is None:
                diags.append(
                    Diagnostic("error", "UnknownSymbol", f"unknown symbol {r.head}/{n}", line, col)
                )
            elif info.static:
                diags.append(
                    Diagnostic("error", "UpdateToStatic",
                               f"cannot update static symbol {r.head}", line, col)
                )
            elif info.relational and not is_boolean_term(r.rhs, vocab):
                diags.append(
                    Diagnostic("error", "NonBooleanRhs",
                               f"update of relational {r.head} needs a Boolean term", line, col)
                )
            for a in r.args:
                check_term(a)
            check_term(r.rhs)
        elif isinstance(r, Issue):
            n = len(r.args)
            if (r.head, n) not in ext:
                diags.append(
                    Diagnostic("error", "IssueNonExternal",
                               f"issue needs an external symbol, got {r.head}/{n}", line, col)
                )
            for a in r.args:
                check_term(a)
        elif isinstance(r, Cond):
            check_guard(r.guard)
            check_rule(r.then_rule)
            if r.else_rule is not None:
                check_rule(r.else_rule)
        elif isinstance(r, Par):
            for sub in r.rules:
                check_rule(sub)

    check_rule(core)
    return diags


# ---------------------------------------------------------------------------
# Pretty-printing (parseable output; pretty . parse == identity on ASTs)
# ---------------------------------------------------------------------------

def pretty_term(term: Term) -> str:
    if isinstance(term, Var):
        return term.name
    if isinstance(term, Bang):
        return pretty_term(term.arg) + "!"
    if not term.args:
        return term.head
    return f"{term.head}({', '.join(pretty_term(a) for a in term.args)})"


def pretty_guard(g: Guard) -> str:
    if isinstance(g, BoolTerm):
        return pretty_term(g.term)
    if isinstance(g, Timing):
        return f"({pretty_term(g.s)} preceq {pretty_term(g.t)})"
    if isinstance(g, TimingOp):
        return f"({pretty_term(g.s)} {g.op} {pretty_term(g.t)})"
    if isinstance(g, KAnd):
        return f"({pretty_guard(g.left)} kand {pretty_guard(g.right)})"
    if isinstance(g, KOr):
        return f"({pretty_guard(g.left)} kor {pretty_guard(g.right)})"
    return f"knot {pretty_guard(g.guard)}"


def pretty_rule(rule: Rule, indent: int = 0) -> str:
    pad = "  " * indent
    if isinstance(rule, Fail):
        return pad + "fail"
    if isinstance(rule, Skip):
        return pad + "skip"
    if isinstance(rule, Update):
        head = App(rule.head, rule.args)
        return f"{pad}{pretty_term(head)} := {pretty_term(rule.rhs)}"
    if isinstance(rule, Issue):
        return f"{pad}issue {pretty_term(App(rule.head, rule.args))}"
    if isinstance(rule, Cond):
        out = f"{pad}if {pretty_guard(rule.guard)} then\n"
        out += pretty_rule(rule.then_rule, indent + 1)
        if rule.else_rule is not None:
            out += f"\n{pad}else\n" + pretty_rule(rule.else_rule, indent + 1)
        return out + f"\n{pad}endif"
    if isinstance(rule, Par):
        if not rule.rules:
            return pad + "par { }"
        body = ";\n".join(pretty_rule(r, indent + 1) for r in rule.rules)
        return f"{pad}par {{\n{body}\n{pad}}}"
    if isinstance(rule, (NLet, VLet)):
        kw = "nlet" if isinstance(rule, NLet) else "vlet"
        binds = ", ".join(f"{v} = {pretty_term(t)}" for v, t in rule.bindings)
        return f"{pad}{kw} {binds} in\n" + pretty_rule(rule.body, indent + 1)
    raise AsmError(f"unknown rule node {type(rule).__name__}")


def pretty_program(program: Program) -> str:
    from .model import LOGIC_NAMES

    lines: list[str] = []
    for sym in program.vocabulary.symbols:
        if sym.name in LOGIC_NAMES:
            continue
        kind = "static" if sym.static else "dynamic"
        rel = " relational" if sym.relational else ""
        lines.append(f"{kind} {sym.name}/{sym.arity}{rel}")
    if program.labels:
        lines.append("label " + ", ".join(sorted(program.labels)))
    for name, _arity, tpl in program.external.entries:
        items = ", ".join(p if k == "l" else f"#{p}" for k, p in tpl.items)
        lines.append(f"external {name}/{tpl.arity} = [{items}]")
    lines.append("rule")
    lines.append(pretty_rule(program.rule))
    return "\n".join(lines) + "\n"
