"""First-order formulas in the benchmark's S-expression language.

Grammar (hypotheses)::

    alpha ::= atom
            | (not alpha)
            | (and alpha alpha+)
            | (or  alpha alpha+)
            | (forall var alpha)
            | (exists var alpha)
    atom  ::= (pred var) | (pred var var) | (= var var)
    pred  ::= P | Q | R | S          (plus Ab inside theory axioms)
    var   ::= x | y | z | w

Theory axioms additionally use ``(implies lhs rhs)``; the parser accepts it
only when ``allow_implies`` is set, and hypothesis validation always rejects
it.  All values here are immutable and all functions are pure.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

VARIABLE_NAMES = ("x", "y", "z", "w")

_CONSTANT_RE = re.compile(r"^a\d+$")


class FormulaError(ValueError):
    """Base error for this module."""


class FormulaSyntaxError(FormulaError):
    """The text is not a well-formed formula of the grammar."""


class HypothesisError(FormulaError):
    """A parsed formula violates the hypothesis (abnormality-rule) constraints."""


@dataclass(frozen=True)
class Variable:
    name: str

    def __post_init__(self):
        if self.name not in VARIABLE_NAMES:
            raise FormulaSyntaxError(
                f"variable token {self.name!r} outside {{x, y, z, w}}"
            )

    def __repr__(self):
        return self.name


@dataclass(frozen=True)
class PredicateSymbol:
    name: str
    arity: int


PREDICATES = {
    "P": PredicateSymbol("P", 1),
    "Q": PredicateSymbol("Q", 1),
    "R": PredicateSymbol("R", 2),
    "S": PredicateSymbol("S", 2),
    "Ab": PredicateSymbol("Ab", 1),
}

UNARY_PREDICATES = ("P", "Q", "Ab")
BINARY_PREDICATES = ("R", "S")


class Formula:
    """Marker base class for AST nodes."""

    __slots__ = ()

    def __repr__(self):
        return render_formula(self)


@dataclass(frozen=True, repr=False)
class Atom(Formula):
    pred: str
    args: tuple[Variable, ...]

    def __post_init__(self):
        sym = PREDICATES.get(self.pred)
        if sym is None:
            raise FormulaSyntaxError(f"unknown predicate {self.pred!r}")
        if len(self.args) != sym.arity:
            raise FormulaSyntaxError(
                f"{self.pred} takes {sym.arity} argument(s), got {len(self.args)}"
            )
        object.__setattr__(self, "args", tuple(self.args))


@dataclass(frozen=True, repr=False)
class Equal(Formula):
    left: Variable
    right: Variable


@dataclass(frozen=True, repr=False)
class Not(Formula):
    child: Formula


@dataclass(frozen=True, repr=False)
class And(Formula):
    children: tuple[Formula, ...]

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        if len(self.children) < 2:
            raise FormulaSyntaxError("and requires at least 2 arguments")


@dataclass(frozen=True, repr=False)
class Or(Formula):
    children: tuple[Formula, ...]

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        if len(self.children) < 2:
            raise FormulaSyntaxError("or requires at least 2 arguments")


@dataclass(frozen=True, repr=False)
class Implies(Formula):
    lhs: Formula
    rhs: Formula


@dataclass(frozen=True, repr=False)
class Forall(Formula):
    var: Variable
    body: Formula


@dataclass(frozen=True, repr=False)
class Exists(Formula):
    var: Variable
    body: Formula


@dataclass(frozen=True)
class FormulaMetrics:
    ast_size: int
    quantifier_depth: int


@dataclass(frozen=True)
class Hypothesis:
    """A validated abnormality rule: one free variable x, scoped predicates."""

    formula: Formula
    allowed: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "allowed", frozenset(self.allowed))


# ---------------------------------------------------------------------------
# Parsing


def _tokenize(text: str) -> list[str]:
    tokens = text.replace("(", " ( ").replace(")", " ) ").split()
    return tokens


class _TokenStream:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self):
        if self.pos >= len(self.tokens):
            raise FormulaSyntaxError("unexpected end of input (unbalanced parentheses?)")
        return self.tokens[self.pos]

    def next(self):
        tok = self.peek()
        self.pos += 1
        return tok

    def expect(self, tok):
        got = self.next()
        if got != tok:
            raise FormulaSyntaxError(f"expected {tok!r}, got {got!r}")

    def done(self):
        return self.pos >= len(self.tokens)


def _parse_variable(token: str) -> Variable:
    if token in VARIABLE_NAMES:
        return Variable(token)
    if _CONSTANT_RE.match(token):
        raise FormulaSyntaxError(
            f"object-constant token {token!r} in argument position; use variables only"
        )
    raise FormulaSyntaxError(f"variable token {token!r} outside {{x, y, z, w}}")


def _parse_expr(stream: _TokenStream, allow_implies: bool) -> Formula:
    tok = stream.next()
    if tok != "(":
        raise FormulaSyntaxError(f"expected '(', got {tok!r}")
    head = stream.next()
    if head in ("(", ")"):
        raise FormulaSyntaxError(f"expected operator or predicate, got {head!r}")

    if head in PREDICATES:
        args = []
        while stream.peek() != ")":
            args.append(_parse_variable(stream.next()))
        stream.expect(")")
        return Atom(head, tuple(args))

    if head == "=":
        left = _parse_variable(stream.next())
        right = _parse_variable(stream.next())
        stream.expect(")")
        return Equal(left, right)

    if head == "not":
        child = _parse_expr(stream, allow_implies)
        stream.expect(")")
        return Not(child)

    if head in ("and", "or"):
        children = []
        while stream.peek() != ")":
            children.append(_parse_expr(stream, allow_implies))
        stream.expect(")")
        if len(children) < 2:
            raise FormulaSyntaxError(f"{head} requires at least 2 arguments, got {len(children)}")
        return And(tuple(children)) if head == "and" else Or(tuple(children))

    if head == "implies":
        if not allow_implies:
            raise FormulaSyntaxError(
                "implies is not allowed here; encode A implies B as (or (not A) B)"
            )
        lhs = _parse_expr(stream, allow_implies)
        rhs = _parse_expr(stream, allow_implies)
        stream.expect(")")
        return Implies(lhs, rhs)

    if head in ("forall", "exists"):
        var = _parse_variable(stream.next())
        body = _parse_expr(stream, allow_implies)
        stream.expect(")")
        return Forall(var, body) if head == "forall" else Exists(var, body)

    raise FormulaSyntaxError(f"unknown operator token {head!r}")


def parse_formula(text: str, allow_implies: bool = False) -> Formula:
    """Parse a single S-expression into a Formula AST.

    ``allow_implies`` admits the ``(implies ...)`` node used by theory axioms;
    leave it off for hypotheses, whose grammar has no implication.
    """
    tokens = _tokenize(text)
    if not tokens:
        raise FormulaSyntaxError("empty input")
    stream = _TokenStream(tokens)
    formula = _parse_expr(stream, allow_implies)
    if not stream.done():
        raise FormulaSyntaxError(f"trailing tokens after formula: {' '.join(tokens[stream.pos:])!r}")
    return formula


# ---------------------------------------------------------------------------
# Rendering


def render_formula(f: Formula) -> str:
    """Canonical S-expression: lowercase operators, single spaces.

    ``parse_formula(render_formula(f))`` is structurally equal to ``f``.
    """
    if isinstance(f, Atom):
        return "(" + " ".join([f.pred] + [v.name for v in f.args]) + ")"
    if isinstance(f, Equal):
        return f"(= {f.left.name} {f.right.name})"
    if isinstance(f, Not):
        return f"(not {render_formula(f.child)})"
    if isinstance(f, And):
        return "(and " + " ".join(render_formula(c) for c in f.children) + ")"
    if isinstance(f, Or):
        return "(or " + " ".join(render_formula(c) for c in f.children) + ")"
    if isinstance(f, Implies):
        return f"(implies {render_formula(f.lhs)} {render_formula(f.rhs)})"
    if isinstance(f, Forall):
        return f"(forall {f.var.name} {render_formula(f.body)})"
    if isinstance(f, Exists):
        return f"(exists {f.var.name} {render_formula(f.body)})"
    raise TypeError(f"not a Formula: {f!r}")


# ---------------------------------------------------------------------------
# Measures and structural queries


def formula_metrics(f: Formula) -> FormulaMetrics:
    """AST size and quantifier depth.

    Size: an atom counts 1 plus one per argument, equality counts 3, negation
    1 + child, and/or/implies 1 + sum of children, a quantifier 2 + child.
    Depth: atoms 0, connectives take the max of their children, quantifiers
    add 1.
    """
    return FormulaMetrics(_ast_size(f), _quantifier_depth(f))


def _ast_size(f: Formula) -> int:
    if isinstance(f, Atom):
        return 1 + len(f.args)
    if isinstance(f, Equal):
        return 3
    if isinstance(f, Not):
        return 1 + _ast_size(f.child)
    if isinstance(f, (And, Or)):
        return 1 + sum(_ast_size(c) for c in f.children)
    if isinstance(f, Implies):
        return 1 + _ast_size(f.lhs) + _ast_size(f.rhs)
    if isinstance(f, (Forall, Exists)):
        return 2 + _ast_size(f.body)
    raise TypeError(f"not a Formula: {f!r}")


def _quantifier_depth(f: Formula) -> int:
    if isinstance(f, (Atom, Equal)):
        return 0
    if isinstance(f, Not):
        return _quantifier_depth(f.child)
    if isinstance(f, (And, Or)):
        return max(_quantifier_depth(c) for c in f.children)
    if isinstance(f, Implies):
        return max(_quantifier_depth(f.lhs), _quantifier_depth(f.rhs))
    if isinstance(f, (Forall, Exists)):
        return 1 + _quantifier_depth(f.body)
    raise TypeError(f"not a Formula: {f!r}")


def free_variables(f: Formula) -> frozenset[str]:
    """Free variable names; shadowed variables resolve to the innermost binder."""
    return frozenset(_free(f, frozenset()))


def _free(f: Formula, bound: frozenset[str]) -> set[str]:
    if isinstance(f, Atom):
        return {v.name for v in f.args if v.name not in bound}
    if isinstance(f, Equal):
        return {v.name for v in (f.left, f.right) if v.name not in bound}
    if isinstance(f, Not):
        return _free(f.child, bound)
    if isinstance(f, (And, Or)):
        out: set[str] = set()
        for c in f.children:
            out |= _free(c, bound)
        return out
    if isinstance(f, Implies):
        return _free(f.lhs, bound) | _free(f.rhs, bound)
    if isinstance(f, (Forall, Exists)):
        return _free(f.body, bound | {f.var.name})
    raise TypeError(f"not a Formula: {f!r}")


def predicates_used(f: Formula) -> frozenset[str]:
    out: set[str] = set()
    _collect_predicates(f, out)
    return frozenset(out)


def _collect_predicates(f: Formula, out: set[str]) -> None:
    if isinstance(f, Atom):
        out.add(f.pred)
    elif isinstance(f, Equal):
        pass
    elif isinstance(f, Not):
        _collect_predicates(f.child, out)
    elif isinstance(f, (And, Or)):
        for c in f.children:
            _collect_predicates(c, out)
    elif isinstance(f, Implies):
        _collect_predicates(f.lhs, out)
        _collect_predicates(f.rhs, out)
    elif isinstance(f, (Forall, Exists)):
        _collect_predicates(f.body, out)
    else:
        raise TypeError(f"not a Formula: {f!r}")


def contains_implies(f: Formula) -> bool:
    if isinstance(f, Implies):
        return True
    if isinstance(f, Not):
        return contains_implies(f.child)
    if isinstance(f, (And, Or)):
        return any(contains_implies(c) for c in f.children)
    if isinstance(f, (Forall, Exists)):
        return contains_implies(f.body)
    return False


# ---------------------------------------------------------------------------
# Hypothesis validation


def validate_hypothesis(
    f: Formula,
    allowed: frozenset[str] | set[str],
    forbidden: frozenset[str] | set[str] = frozenset(),
) -> Hypothesis:
    """Check the abnormality-rule constraints and wrap the formula.

    Raises HypothesisError naming the violated rule: Ab mentioned, forbidden
    predicate used, free-variable set != {x}, or implication present.
    """
    allowed = frozenset(allowed)
    forbidden = frozenset(forbidden)
    if contains_implies(f):
        raise HypothesisError("implication is not allowed in a hypothesis")
    used = predicates_used(f)
    if "Ab" in used:
        raise HypothesisError("hypothesis must not mention Ab (it defines Ab)")
    bad = sorted((used & forbidden) | (used - allowed))
    if bad:
        raise HypothesisError(f"forbidden predicate(s) used: {', '.join(bad)}")
    free = free_variables(f)
    if free != {"x"}:
        got = "{" + ", ".join(sorted(free)) + "}"
        raise HypothesisError(f"free-variable set must be exactly {{x}}, got {got}")
    return Hypothesis(f, allowed)


def parse_hypothesis(
    text: str,
    allowed: frozenset[str] | set[str],
    forbidden: frozenset[str] | set[str] = frozenset(),
) -> Hypothesis:
    """parse_formula (no implies) followed by validate_hypothesis."""
    return validate_hypothesis(parse_formula(text, allow_implies=False), allowed, forbidden)
