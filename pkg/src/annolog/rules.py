"""Rule syntax: abstract syntax, the line-oriented rule language, and its printer.

One rule per line::

    [id ::] head(Args) : [lower, upper] <-dt clause, clause, ...

``lower``/``upper`` are numbers, annotation variables or calls such as
``avg(x)``, ``t_luk(x, y)``, ``kth(2, x)`` or ``scale(0.6, x)``.  A clause is::

    [forall | exists(k) | exists(f[%][, prev])] [~] pred(Args) : [l, u]
    [...] pred(Args) : [x, 1]        # binds the grounding's interval to x

Capitalised arguments are variables (primes allowed: ``S'``); anything else,
or a double-quoted string, is a constant.  Rule files start with the header
line ``# annolog-v1`` and may contain ``#`` comments.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property, lru_cache
from fractions import Fraction

from .errors import (
    ArityMismatch,
    DisconnectedRule,
    RuleSyntaxError,
    StaticHead,
    UnboundAnnotationVariable,
    UnknownPredicate,
)
from .lattice import FUNCTION_NAMES, AnnotationFn, Interval
from .model import FORMAT_HEADER, REL, PredicateRegistry, parse_facts  # noqa: F401  (re-exported)

PARAM_FUNCTIONS = {"kth", "scale"}
KEYWORDS = {"forall", "exists"}


@dataclass(frozen=True)
class Term:
    name: str
    var: bool

    def __str__(self):
        if self.var or _BARE_CONST.fullmatch(self.name):
            return self.name
        return '"' + self.name.replace("\\", "\\\\").replace('"', '\\"') + '"'


@lru_cache(maxsize=None)
def _fraction(value: float) -> Fraction:
    # exact decimal reading, so 0.3 * 10 is 3 and not 3.0000000000000004
    return Fraction(repr(value))


@dataclass(frozen=True)
class Threshold:
    """At-least quantifier on a clause: a count, or a fraction of a basis set.

    ``basis='all'`` measures against every candidate grounding of the clause
    (e.g. all neighbours); ``basis='prev'`` against the matches surviving the
    preceding clauses.
    """

    mode: str
    value: float
    basis: str = "all"

    def __post_init__(self):
        if self.mode == "count":
            if self.value != int(self.value) or self.value < 1:
                raise ValueError("count threshold must be an integer >= 1")
            if self.basis != "all":
                raise ValueError("count thresholds have no basis")
        elif self.mode == "fraction":
            if not 0.0 < self.value <= 1.0:
                raise ValueError("fraction threshold must lie in (0, 1]")
            if self.basis not in ("all", "prev"):
                raise ValueError(f"unknown threshold basis {self.basis!r}")
        else:
            raise ValueError(f"unknown threshold mode {self.mode!r}")

    def required(self, basis_size: int) -> int:
        """Matches needed; fractions round up and an empty basis never suffices."""
        if self.mode == "count":
            return int(self.value)
        f = _fraction(self.value)
        return max(1, -(-f.numerator * basis_size // f.denominator))

    def __str__(self):
        if self.mode == "count":
            return f"exists({int(self.value)})"
        if self.value == 1.0 and self.basis == "all":
            return "forall"
        suffix = ",prev" if self.basis == "prev" else ""
        return f"exists({_num(self.value)}{suffix})"


@dataclass(frozen=True)
class Clause:
    predicate: str
    args: tuple[Term, ...]
    bound: Interval | None = None
    binder: str | None = None
    negated: bool = False
    threshold: Threshold | None = None

    def __post_init__(self):
        if (self.bound is None) == (self.binder is None):
            raise ValueError("a clause needs exactly one of a required bound or a binder")

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(t.name for t in self.args if t.var)

    def __str__(self):
        parts = []
        if self.threshold is not None:
            parts.append(str(self.threshold) + " ")
        if self.negated:
            parts.append("~")
        args = ",".join(map(str, self.args))
        annot = f"[{self.binder},1]" if self.binder is not None else f"[{_num(self.bound.lower)},{_num(self.bound.upper)}]"
        parts.append(f"{self.predicate}({args}):{annot}")
        return "".join(parts)


@dataclass(frozen=True)
class BoundExpr:
    """One side of a head annotation: a constant, a copied variable, or a function call."""

    value: float | None = None
    fn: AnnotationFn | None = None
    args: tuple[str, ...] = ()

    @classmethod
    def const(cls, value: float) -> BoundExpr:
        return cls(value=float(value))

    def evaluate(self, captured: dict[str, list[float]]) -> float:
        if self.fn is None:
            return self.value
        values = [v for name in self.args for v in captured[name]]
        return self.fn.scalar(values)

    def __str__(self):
        if self.fn is None:
            return _num(self.value)
        if self.fn.name == "id":
            return self.args[0]
        head = [_num(self.fn.param)] if self.fn.name in PARAM_FUNCTIONS else []
        return f"{self.fn.name}({','.join(head + list(self.args))})"


@dataclass(frozen=True)
class Rule:
    id: str
    head_predicate: str
    head_args: tuple[Term, ...]
    lower: BoundExpr
    upper: BoundExpr
    delta_t: int
    clauses: tuple[Clause, ...]

    def __post_init__(self):
        if self.delta_t < 0:
            raise ValueError("delta_t must be >= 0")

    @property
    def head_variables(self) -> tuple[str, ...]:
        return tuple(t.name for t in self.head_args if t.var)

    @cached_property
    def constant_head(self) -> Interval | None:
        if self.lower.fn is None and self.upper.fn is None:
            return Interval(self.lower.value, self.upper.value)
        return None

    def __str__(self):
        return format_rule(self)


def _num(x: float) -> str:
    x = float(x)
    if x.is_integer():
        return str(int(x))
    return repr(x)


_BARE_CONST = re.compile(r"[a-z0-9][A-Za-z0-9_]*")


def format_rule(rule: Rule) -> str:
    head = f"{rule.head_predicate}({','.join(map(str, rule.head_args))})"
    body = ", ".join(map(str, rule.clauses))
    return f"{rule.id} :: {head} : [{rule.lower},{rule.upper}] <-{rule.delta_t} {body}"


# -- tokenizer ------------------------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<arrow><-)
  | (?P<dcolon>::)
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?(?![A-Za-z_]))
  | (?P<ident>[A-Za-z_0-9][A-Za-z0-9_]*'*)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<punct>[()\[\],:~%])
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str, line: int) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise RuleSyntaxError(f"unexpected character {text[pos]!r}", line, pos + 1)
        kind = m.lastgroup
        if kind != "ws":
            toks.append(_Tok(kind if kind != "punct" else m.group(), m.group(), line, pos + 1))
        pos = m.end()
    toks.append(_Tok("eof", "", line, len(text) + 1))
    return toks


class _Parser:
    def __init__(self, text: str, line: int):
        self.toks = _tokenize(text, line)
        self.i = 0

    def peek(self, offset=0) -> _Tok:
        return self.toks[min(self.i + offset, len(self.toks) - 1)]

    def next(self) -> _Tok:
        tok = self.toks[self.i]
        self.i = min(self.i + 1, len(self.toks) - 1)
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        return RuleSyntaxError(message, tok.line, tok.col)

    def expect(self, kind, what=None) -> _Tok:
        tok = self.peek()
        if tok.kind != kind:
            found = tok.text or "end of line"
            raise self.error(f"expected {what or kind!r}, found {found!r}")
        return self.next()

    def accept(self, kind) -> _Tok | None:
        if self.peek().kind == kind:
            return self.next()
        return None

    def number(self) -> float:
        tok = self.peek()
        if tok.kind != "number":
            raise self.error(f"expected a number, found {tok.text or 'end of line'!r}")
        self.next()
        return float(tok.text)

    # rule := [id ::] atom ':' annot '<-' [int] clause (',' clause)*
    def rule(self, default_id):
        rule_id = default_id
        if self.peek(1).kind == "dcolon" and self.peek().kind in ("ident", "number"):
            rule_id = self.next().text
            self.next()
        head_tok = self.peek()
        pred, args = self.atom()
        self.expect(":")
        lower, upper = self.head_annotation()
        self.expect("arrow", "<-")
        delta_t = 0
        if self.peek().kind == "number":
            tok = self.next()
            if not tok.text.isdigit():
                raise self.error("temporal delay must be a non-negative integer", tok)
            delta_t = int(tok.text)
        clauses = [self.clause()]
        while self.accept(","):
            clauses.append(self.clause())
        if self.peek().kind != "eof":
            raise self.error(f"unexpected {self.peek().text!r} after rule body")
        return rule_id, head_tok, pred, args, lower, upper, delta_t, clauses

    def atom(self):
        name = self.expect("ident", "predicate name")
        if name.text[0].isdigit() or name.text.endswith("'") or name.text in KEYWORDS:
            raise self.error(f"invalid predicate name {name.text!r}", name)
        self.expect("(")
        args = [self.term()]
        while self.accept(","):
            args.append(self.term())
        self.expect(")")
        if len(args) > 2:
            raise self.error(f"{name.text} has {len(args)} arguments; predicates are unary or binary", name)
        return name.text, tuple(args)

    def term(self) -> Term:
        tok = self.next()
        if tok.kind == "string":
            return Term(bytes(tok.text[1:-1], "utf-8").decode("unicode_escape"), False)
        if tok.kind == "number":
            return Term(tok.text, False)
        if tok.kind == "ident":
            return Term(tok.text, tok.text[0].isupper())
        raise self.error(f"expected a variable or constant, found {tok.text or 'end of line'!r}", tok)

    def head_annotation(self):
        self.expect("[")
        lower = self.bound_expr()
        self.expect(",")
        upper = self.bound_expr()
        self.expect("]")
        return lower, upper

    def bound_expr(self) -> BoundExpr:
        tok = self.peek()
        if tok.kind == "number":
            return BoundExpr.const(self.number())
        if tok.kind != "ident":
            raise self.error(f"expected a bound, found {tok.text or 'end of line'!r}")
        self.next()
        if not self.accept("("):
            return BoundExpr(fn=AnnotationFn("id"), args=(tok.text,))
        name = tok.text
        if name not in FUNCTION_NAMES or name in ("id", "constant"):
            raise self.error(f"unknown annotation function {name!r}", tok)
        param = None
        if name in PARAM_FUNCTIONS:
            param = self.number()
            self.expect(",")
        args = [self.expect("ident", "annotation variable").text]
        while self.accept(","):
            args.append(self.expect("ident", "annotation variable").text)
        self.expect(")")
        try:
            fn = AnnotationFn(name, param)
        except ValueError as exc:
            raise self.error(str(exc), tok) from None
        if fn.arity is not None and len(args) != fn.arity:
            raise ArityMismatch(f"{name} takes {fn.arity} argument(s), got {len(args)} (line {tok.line})")
        return BoundExpr(fn=fn, args=tuple(args))

    def threshold(self) -> Threshold | None:
        tok = self.peek()
        if tok.kind != "ident" or tok.text not in KEYWORDS:
            return None
        self.next()
        if tok.text == "forall":
            return Threshold("fraction", 1.0)
        self.expect("(")
        num = self.peek()
        value = self.number()
        basis = "all"
        if self.accept("%"):
            mode, value = "fraction", value / 100.0
        elif "." in num.text or "e" in num.text.lower():
            mode = "fraction"
        else:
            mode = "count"
        if self.accept(","):
            b = self.expect("ident", "basis")
            if b.text not in ("all", "prev"):
                raise self.error(f"unknown threshold basis {b.text!r}", b)
            basis = b.text
        self.expect(")")
        try:
            return Threshold(mode, value, basis)
        except ValueError as exc:
            raise self.error(str(exc), num) from None

    def clause(self) -> Clause:
        threshold = self.threshold()
        negated = bool(self.accept("~"))
        pred, args = self.atom()
        self.expect(":")
        self.expect("[")
        tok = self.peek()
        if tok.kind == "ident":
            binder = self.next().text
            self.expect(",")
            one = self.peek()
            if self.number() != 1.0:
                raise self.error("a binding annotation must have upper bound 1, as in [x,1]", one)
            self.expect("]")
            return Clause(pred, args, binder=binder, negated=negated, threshold=threshold)
        lo = self.number()
        self.expect(",")
        hi = self.number()
        self.expect("]")
        if not 0.0 <= lo <= hi <= 1.0:
            raise self.error(f"[{lo},{hi}] is not a subinterval of [0,1]", tok)
        return Clause(pred, args, bound=Interval(lo, hi), negated=negated, threshold=threshold)


def _check(rule: Rule, registry: PredicateRegistry | None, line: int) -> None:
    if registry is not None:
        atoms = [(rule.head_predicate, rule.head_args)] + [(c.predicate, c.args) for c in rule.clauses]
        for pred, args in atoms:
            if pred not in registry.predicates:
                raise UnknownPredicate(f"unknown predicate {pred!r} in rule {rule.id} (line {line})")
            if registry.arity(pred) != len(args):
                raise RuleSyntaxError(f"{pred} is {'unary' if registry.arity(pred) == 1 else 'binary'} "
                                      f"but used with {len(args)} argument(s)", line)
        if registry.is_static(rule.head_predicate):
            raise StaticHead(f"rule {rule.id} derives static predicate {rule.head_predicate!r} (line {line})")
    if rule.head_predicate == REL:
        raise StaticHead(f"rule {rule.id} derives the reserved predicate 'rel' (line {line})")

    produced: dict[str, int] = {}
    for i, c in enumerate(rule.clauses):
        if c.binder is not None:
            if c.binder in produced:
                raise RuleSyntaxError(f"annotation variable {c.binder!r} bound by two clauses", line)
            produced[c.binder] = i
    for expr in (rule.lower, rule.upper):
        for name in expr.args:
            if name not in produced:
                raise UnboundAnnotationVariable(
                    f"annotation variable {name!r} in the head of {rule.id} is not bound by any clause (line {line})")

    anchored = set(rule.head_variables)
    pending = list(rule.clauses)
    for c in pending:
        if any(not t.var for t in c.args):
            anchored |= set(c.variables)
    changed = True
    while changed:
        changed = False
        for c in pending:
            vs = set(c.variables)
            if vs & anchored and not vs <= anchored:
                anchored |= vs
                changed = True
    for c in rule.clauses:
        loose = set(c.variables) - anchored
        if loose:
            raise DisconnectedRule(
                f"variable(s) {sorted(loose)} in clause {c.predicate} of {rule.id} are not connected to the head",
                line)


def parse_rule(text: str, registry: PredicateRegistry | None = None, rule_id: str = "rule_1",
               line: int = 1) -> Rule:
    """Parse a single rule; ``rule_id`` is used when the text carries no ``id ::`` prefix."""
    p = _Parser(text, line)
    rid, head_tok, pred, args, lower, upper, delta_t, clauses = p.rule(rule_id)
    rule = Rule(rid, pred, args, lower, upper, delta_t, tuple(clauses))
    _check(rule, registry, line)
    return rule


def parse_rules(text: str, registry: PredicateRegistry | None = None, require_header: bool = True) -> list[Rule]:
    """Parse a rule file: header line, ``#`` comments, one rule per line."""
    rules = []
    seen_header = False
    ids = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped:
            continue
        if not seen_header and require_header:
            if stripped.lstrip("#").strip() != FORMAT_HEADER:
                raise RuleSyntaxError(f"missing '# {FORMAT_HEADER}' header line", lineno, 1)
            seen_header = True
            continue
        body = _strip_comment(raw)
        if not body.strip():
            continue
        rule = parse_rule(body, registry, rule_id=f"rule_{len(rules) + 1}", line=lineno)
        if rule.id in ids:
            raise RuleSyntaxError(f"duplicate rule id {rule.id!r}", lineno, 1)
        ids.add(rule.id)
        rules.append(rule)
    if require_header and not seen_header:
        raise RuleSyntaxError(f"missing '# {FORMAT_HEADER}' header line", 1, 1)
    return rules


def _strip_comment(line: str) -> str:
    in_string = False
    escaped = False
    for i, ch in enumerate(line):
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
        elif ch == '"':
            in_string = True
        elif ch == "#":
            return line[:i]
    return line


def format_rules(rules) -> str:
    return f"# {FORMAT_HEADER}\n" + "".join(format_rule(r) + "\n" for r in rules)
