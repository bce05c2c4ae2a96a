"""PCTL over action atoms: AST, text grammar, derived-operator rewriting.

The grammar mirrors the surface syntax of common probabilistic model
checkers::

    state :=  "true" | ident | "!" state | state "&" state
            | state "|" state | state "->" state | "(" state ")"
            | "P" cmp number "[" path "]"
    path  :=  "X" state | state "U" ["<=" int] state
            | "F" ["<=" int] state | "G" ["<=" int] state

``ident`` atoms name actions; a state satisfies an atom iff the action is
enabled there.  ``|`` and ``->`` are parser sugar over ``!``/``&``; ``F``
and ``G`` are sugar eliminated by :func:`rewrite_derived`.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

INF = math.inf

COMPARATORS = ("<=", ">=", "<", ">")

_FLIP = {"<": ">", ">": "<", "<=": ">=", ">=": "<="}


class ParseError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class TrueFormula:
    pass


@dataclass(frozen=True)
class Atom:
    label: str


@dataclass(frozen=True)
class Not:
    sub: "StateFormula"


@dataclass(frozen=True)
class And:
    left: "StateFormula"
    right: "StateFormula"


@dataclass(frozen=True)
class ProbOp:
    comparator: str
    threshold: float
    path: "PathFormula"

    def __post_init__(self):
        if self.comparator not in COMPARATORS:
            raise ValueError(f"bad comparator {self.comparator!r}")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError(f"threshold {self.threshold} outside [0, 1]")


@dataclass(frozen=True)
class Next:
    sub: "StateFormula"


@dataclass(frozen=True)
class Until:
    left: "StateFormula"
    bound: float  # a nonnegative int, or math.inf for unbounded
    right: "StateFormula"


@dataclass(frozen=True)
class Eventually:  # sugar: F phi == true U phi
    bound: float
    sub: "StateFormula"


@dataclass(frozen=True)
class Always:  # sugar, eliminated through the eventually-dual
    bound: float
    sub: "StateFormula"


StateFormula = Union[TrueFormula, Atom, Not, And, ProbOp]
PathFormula = Union[Next, Until, Eventually, Always]


@dataclass(frozen=True)
class FormulaMetrics:
    length: int
    max_bound: float


# ---------------------------------------------------------------------------
# Parsing

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*|\.\d+|\d+)|(?P<op><=|>=|->|[<>!&|()\[\]])"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*))"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            raise ParseError(f"unexpected character {stripped[0]!r}", pos)
        if m.lastgroup or m.group().strip():
            for kind in ("num", "op", "ident"):
                val = m.group(kind)
                if val is not None:
                    tokens.append((kind, val, m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, pos = self.next()
        if val != value:
            raise ParseError(f"expected {value!r}, found {val or 'end of input'!r}", pos)

    def parse(self) -> StateFormula:
        phi = self.state_formula()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected trailing input {val!r}", pos)
        return phi

    # state := implies
    def state_formula(self) -> StateFormula:
        return self.implies()

    def implies(self) -> StateFormula:
        left = self.disjunction()
        if self.peek()[1] == "->":
            self.next()
            right = self.implies()
            # a -> b  ==  !(a & !b)
            return Not(And(left, Not(right)))
        return left

    def disjunction(self) -> StateFormula:
        phi = self.conjunction()
        while self.peek()[1] == "|":
            self.next()
            rhs = self.conjunction()
            phi = Not(And(Not(phi), Not(rhs)))
        return phi

    def conjunction(self) -> StateFormula:
        phi = self.unary()
        while self.peek()[1] == "&":
            self.next()
            phi = And(phi, self.unary())
        return phi

    def unary(self) -> StateFormula:
        kind, val, pos = self.peek()
        if val == "!":
            self.next()
            return Not(self.unary())
        return self.primary()

    def primary(self) -> StateFormula:
        kind, val, pos = self.next()
        if val == "(":
            phi = self.state_formula()
            self.expect(")")
            return phi
        if kind == "ident":
            if val == "true":
                return TrueFormula()
            if val == "P":
                return self.prob_operator(pos)
            if val in ("X", "U", "F", "G"):
                raise ParseError(f"path operator {val!r} outside P[...]", pos)
            return Atom(val)
        raise ParseError(f"expected a state formula, found {val or 'end of input'!r}", pos)

    def prob_operator(self, pos: int) -> ProbOp:
        kind, cmp, cpos = self.next()
        if cmp not in COMPARATORS:
            raise ParseError(f"expected comparator after P, found {cmp!r}", cpos)
        kind, num, npos = self.next()
        if kind != "num":
            raise ParseError(f"expected threshold after comparator, found {num!r}", npos)
        p = float(num)
        if not 0.0 <= p <= 1.0:
            raise ParseError(f"threshold {p} outside [0, 1]", npos)
        self.expect("[")
        path = self.path_formula()
        self.expect("]")
        return ProbOp(cmp, p, path)

    def bound(self) -> float:
        if self.peek()[1] == "<=":
            self.next()
            kind, num, pos = self.next()
            if kind != "num" or "." in num:
                raise ParseError(f"expected integer bound, found {num!r}", pos)
            return int(num)
        return INF

    def path_formula(self) -> PathFormula:
        kind, val, pos = self.peek()
        if kind == "ident" and val == "X":
            self.next()
            return Next(self.state_formula())
        if kind == "ident" and val == "F":
            self.next()
            return Eventually(self.bound(), self.state_formula())
        if kind == "ident" and val == "G":
            self.next()
            return Always(self.bound(), self.state_formula())
        left = self.state_formula()
        kind, val, pos = self.next()
        if val != "U":
            raise ParseError(f"expected 'U' in until formula, found {val!r}", pos)
        k = self.bound()
        right = self.state_formula()
        return Until(left, k, right)


def strip_comments(lines):
    """Yield formula texts from lines, dropping '#' comments and blanks."""
    for line in lines:
        text = line.split("#", 1)[0].strip()
        if text:
            yield text


def parse_formula(text: str) -> StateFormula:
    """Parse a formula and rewrite all sugar into core operators."""
    return rewrite_derived(_Parser(text).parse())


# ---------------------------------------------------------------------------
# Rewriting, printing, metrics


def rewrite_derived(phi: StateFormula) -> StateFormula:
    """Eliminate F/G sugar; the result contains only core variants.

    F^<=k phi becomes true U^<=k phi.  G under a probability operator is
    rewritten through its dual: P_cmp,p[G^<=k phi] holds iff
    P_flip(cmp),(1-p)[F^<=k !phi] holds.
    """
    if isinstance(phi, (TrueFormula, Atom)):
        return phi
    if isinstance(phi, Not):
        return Not(rewrite_derived(phi.sub))
    if isinstance(phi, And):
        return And(rewrite_derived(phi.left), rewrite_derived(phi.right))
    if isinstance(phi, ProbOp):
        path = phi.path
        if isinstance(path, Always):
            inner = ProbOp(
                _FLIP[phi.comparator],
                1.0 - phi.threshold,
                Eventually(path.bound, Not(path.sub)),
            )
            return rewrite_derived(inner)
        if isinstance(path, Eventually):
            path = Until(TrueFormula(), path.bound, path.sub)
        if isinstance(path, Next):
            path = Next(rewrite_derived(path.sub))
        elif isinstance(path, Until):
            path = Until(rewrite_derived(path.left), path.bound, rewrite_derived(path.right))
        return ProbOp(phi.comparator, phi.threshold, path)
    raise TypeError(f"not a state formula: {phi!r}")


def format_formula(phi) -> str:
    """Render a core formula; inverse of parse_formula on core ASTs."""
    if isinstance(phi, TrueFormula):
        return "true"
    if isinstance(phi, Atom):
        return phi.label
    if isinstance(phi, Not):
        return f"!{_atomic(phi.sub)}"
    if isinstance(phi, And):
        return f"{_atomic(phi.left)} & {_atomic(phi.right)}"
    if isinstance(phi, ProbOp):
        return f"P{phi.comparator}{phi.threshold!r} [ {format_formula(phi.path)} ]"
    if isinstance(phi, Next):
        return f"X {_atomic(phi.sub)}"
    if isinstance(phi, Until):
        u = "U" if phi.bound == INF else f"U<={int(phi.bound)}"
        return f"{_atomic(phi.left)} {u} {_atomic(phi.right)}"
    raise TypeError(f"cannot format {phi!r}")


def _atomic(phi) -> str:
    text = format_formula(phi)
    if isinstance(phi, (And,)):
        return f"({text})"
    return text


def formula_metrics(phi: StateFormula) -> FormulaMetrics:
    """Operator count and the largest bounded-until bound (1 if none)."""
    ops = 0
    max_bound = 0.0

    def walk(node):
        nonlocal ops, max_bound
        if isinstance(node, (TrueFormula, Atom)):
            return
        ops += 1
        if isinstance(node, Not):
            walk(node.sub)
        elif isinstance(node, And):
            walk(node.left)
            walk(node.right)
        elif isinstance(node, ProbOp):
            walk(node.path)
        elif isinstance(node, Next):
            walk(node.sub)
        elif isinstance(node, Until):
            if node.bound != INF:
                max_bound = max(max_bound, node.bound)
            walk(node.left)
            walk(node.right)
        else:
            raise TypeError(f"metrics need a core formula, found {node!r}")

    walk(phi)
    return FormulaMetrics(length=max(ops, 1), max_bound=max_bound if max_bound else 1)


def atoms_of(phi) -> set[str]:
    """All action labels occurring as atoms, across nested operators."""
    if isinstance(phi, TrueFormula):
        return set()
    if isinstance(phi, Atom):
        return {phi.label}
    if isinstance(phi, Not):
        return atoms_of(phi.sub)
    if isinstance(phi, And):
        return atoms_of(phi.left) | atoms_of(phi.right)
    if isinstance(phi, ProbOp):
        return atoms_of(phi.path)
    if isinstance(phi, Next):
        return atoms_of(phi.sub)
    if isinstance(phi, Until):
        return atoms_of(phi.left) | atoms_of(phi.right)
    if isinstance(phi, (Eventually, Always)):
        return atoms_of(phi.sub)
    raise TypeError(f"not a formula: {phi!r}")
