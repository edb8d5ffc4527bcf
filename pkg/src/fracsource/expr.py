"""One-variable math expressions for coefficient and data functions.

Problem data (diffusivity, potential, initial state, source profiles,
observations) can be supplied in configuration files either as expression
strings like ``"sin(pi*x) * (1 + x/2)"`` or as sampled tables with
piecewise-linear interpolation.

The grammar is fixed: ``+ - * / ^`` with the usual precedence (power binds
tighter than unary minus and is right-associative), parentheses, the constant
``pi``, the functions sin, cos, exp, sqrt, abs, log, and exactly one declared
variable. Parsed ASTs are immutable and evaluation is reentrant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import FracsourceError

__all__ = [
    "ExprError",
    "ParseError",
    "UnknownIdentifierError",
    "EvalDomainError",
    "Expression",
    "TabulatedFunction",
    "parse_expr",
    "eval_expr",
    "FUNCTIONS",
]

FUNCTIONS = ("sin", "cos", "exp", "sqrt", "abs", "log")


class ExprError(FracsourceError):
    pass


class ParseError(ExprError):
    """Syntax error; ``position`` is the 0-based offset into the source."""

    def __init__(self, message: str, position: int):
        self.position = position
        super().__init__(f"{message} (at position {position})")


class UnknownIdentifierError(ParseError):
    """Identifier that is neither the declared variable, pi, nor a function."""

    def __init__(self, name: str, position: int):
        self.name = name
        ParseError.__init__(self, f"unknown identifier {name!r}", position)


class EvalDomainError(ExprError):
    """Evaluation left the real domain (log of nonpositive, 1/0, ...)."""


# ---------------------------------------------------------------------------
# AST nodes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Const, Var, Neg, BinOp, Call]


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

_OPS = set("+-*/^()")


def _tokenize(source: str):
    """Yield (kind, text, position) triples; kind in {num, name, op}."""
    tokens = []
    i, n = 0, len(source)
    while i < n:
        c = source[i]
        if c.isspace():
            i += 1
            continue
        if c in _OPS:
            tokens.append(("op", c, i))
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and source[i + 1].isdigit()):
            j = i
            seen_dot = False
            while j < n and (source[j].isdigit() or (source[j] == "." and not seen_dot)):
                if source[j] == ".":
                    seen_dot = True
                j += 1
            if j < n and source[j] in "eE":
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k < n and source[k].isdigit():
                    j = k
                    while j < n and source[j].isdigit():
                        j += 1
            tokens.append(("num", source[i:j], i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            tokens.append(("name", source[i:j], i))
            i = j
            continue
        raise ParseError(f"unexpected character {c!r}", i)
    tokens.append(("end", "", n))
    return tokens


# ---------------------------------------------------------------------------
# Recursive-descent parser
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, tokens, variable: str):
        self.tokens = tokens
        self.pos = 0
        self.variable = variable

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, op: str):
        kind, text, at = self.peek()
        if kind != "op" or text != op:
            raise ParseError(f"expected {op!r}", at)
        return self.advance()

    def parse(self) -> Node:
        node = self.expr()
        kind, text, at = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected token {text!r}", at)
        return node

    def expr(self) -> Node:
        node = self.term()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "+-":
                self.advance()
                node = BinOp(text, node, self.term())
            else:
                return node

    def term(self) -> Node:
        node = self.unary()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "*/":
                self.advance()
                node = BinOp(text, node, self.unary())
            else:
                return node

    def unary(self) -> Node:
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.advance()
            return Neg(self.unary())
        if kind == "op" and text == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        kind, text, _ = self.peek()
        if kind == "op" and text == "^":
            self.advance()
            # right-associative; exponent may carry its own unary minus
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Node:
        kind, text, at = self.advance()
        if kind == "num":
            return Const(float(text))
        if kind == "name":
            if text == "pi":
                return Const(math.pi)
            if text in FUNCTIONS:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return Call(text, arg)
            if text == self.variable:
                return Var(text)
            raise UnknownIdentifierError(text, at)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ParseError(f"unexpected token {text!r}" if text else "unexpected end of input", at)


def parse_expr(source: str, variable: str) -> Node:
    """Parse ``source`` into an AST over the single declared ``variable``."""
    if not isinstance(source, str) or not source.strip():
        raise ParseError("empty expression", 0)
    return _Parser(_tokenize(source), variable).parse()


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def _check_finite(value, context: str):
    if np.isscalar(value):
        if not math.isfinite(value):
            raise EvalDomainError(f"non-finite result in {context}")
    elif not np.all(np.isfinite(value)):
        raise EvalDomainError(f"non-finite result in {context}")
    return value


def _as_bool(cond) -> bool:
    return bool(np.any(cond))


def eval_expr(ast: Node, value):
    """Evaluate an AST at a scalar or ndarray argument.

    Returns a float for scalar input, an ndarray otherwise. Raises
    EvalDomainError when the result would leave the finite reals.
    """
    scalar = np.isscalar(value)
    x = float(value) if scalar else np.asarray(value, dtype=float)
    out = _eval(ast, x)
    if scalar:
        out = float(out)
    else:
        out = np.asarray(out, dtype=float)
        if out.shape != np.shape(x):
            out = np.full(np.shape(x), float(out))
    return _check_finite(out, "expression")


def _eval(node: Node, x):
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return x
    if isinstance(node, Neg):
        return -_eval(node.operand, x)
    if isinstance(node, BinOp):
        a = _eval(node.left, x)
        b = _eval(node.right, x)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            if _as_bool(np.asarray(b) == 0.0):
                raise EvalDomainError("division by zero")
            return a / b
        # power
        a_arr = np.asarray(a, dtype=float)
        b_arr = np.asarray(b, dtype=float)
        if _as_bool((a_arr == 0.0) & (b_arr < 0.0)):
            raise EvalDomainError("zero raised to a negative power")
        if _as_bool((a_arr < 0.0) & (b_arr != np.floor(b_arr))):
            raise EvalDomainError("negative base with non-integer exponent")
        with np.errstate(over="ignore"):
            return np.power(a, b) if not np.isscalar(a) or not np.isscalar(b) else a ** b
    if isinstance(node, Call):
        v = _eval(node.arg, x)
        va = np.asarray(v, dtype=float)
        if node.func == "sin":
            return np.sin(v)
        if node.func == "cos":
            return np.cos(v)
        if node.func == "exp":
            with np.errstate(over="ignore"):
                return np.exp(v)
        if node.func == "sqrt":
            if _as_bool(va < 0.0):
                raise EvalDomainError("sqrt of a negative number")
            return np.sqrt(v)
        if node.func == "abs":
            return np.abs(v)
        if node.func == "log":
            if _as_bool(va <= 0.0):
                raise EvalDomainError("log of a nonpositive number")
            return np.log(v)
    raise TypeError(f"unknown AST node {node!r}")


# ---------------------------------------------------------------------------
# Pretty printing (round-trips through parse_expr)
# ---------------------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def format_expr(node: Node) -> str:
    return _fmt(node, 0)


def _fmt(node: Node, parent_prec: int) -> str:
    if isinstance(node, Const):
        if node.value == math.pi:
            return "pi"
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        inner = _fmt(node.operand, _PREC["neg"])
        s = f"-{inner}"
        return f"({s})" if parent_prec > _PREC["neg"] else s
    if isinstance(node, Call):
        return f"{node.func}({_fmt(node.arg, 0)})"
    prec = _PREC[node.op]
    # left operand of a right-associative ^ needs parens at equal precedence;
    # right operands of - and / likewise
    left = _fmt(node.left, prec + 1 if node.op == "^" else prec)
    right = _fmt(node.right, prec if node.op == "^" else prec + 1)
    s = f"{left} {node.op} {right}"
    return f"({s})" if parent_prec > prec else s


# ---------------------------------------------------------------------------
# Callable wrappers used by the solvers and the CLI
# ---------------------------------------------------------------------------

class Expression:
    """Parsed expression bound to its variable; callable on scalars/arrays."""

    def __init__(self, source: str, variable: str):
        self.source = source
        self.variable = variable
        self.ast = parse_expr(source, variable)

    def __call__(self, value):
        return eval_expr(self.ast, value)

    def describe(self) -> str:
        return self.source

    def __repr__(self):
        return f"Expression({self.source!r}, variable={self.variable!r})"


class TabulatedFunction:
    """Sampled function with piecewise-linear interpolation.

    Abscissae must be strictly increasing; querying outside the sampled
    range raises EvalDomainError (no extrapolation). A tiny relative slack
    at the ends absorbs round-off when grids are rebuilt from l, T.
    """

    def __init__(self, points, values, label: str = "table"):
        self.points = np.asarray(points, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.label = label
        if self.points.ndim != 1 or self.points.shape != self.values.shape:
            raise ExprError("table needs matching 1-D abscissae and values")
        if len(self.points) < 2:
            raise ExprError("table needs at least two samples")
        if not np.all(np.diff(self.points) > 0):
            raise ExprError("table abscissae must be strictly increasing")
        if not (np.all(np.isfinite(self.points)) and np.all(np.isfinite(self.values))):
            raise ExprError("table entries must be finite")

    def __call__(self, value):
        scalar = np.isscalar(value)
        x = np.atleast_1d(np.asarray(value, dtype=float))
        lo, hi = self.points[0], self.points[-1]
        slack = 1e-12 * max(abs(lo), abs(hi), 1.0)
        if np.any(x < lo - slack) or np.any(x > hi + slack):
            bad = x[(x < lo - slack) | (x > hi + slack)][0]
            raise EvalDomainError(
                f"{self.label}: argument {bad!r} outside tabulated range [{lo}, {hi}]"
            )
        out = np.interp(np.clip(x, lo, hi), self.points, self.values)
        return float(out[0]) if scalar else out

    def describe(self) -> str:
        return f"{self.label}[{len(self.points)} samples on [{self.points[0]}, {self.points[-1]}]]"

    def __repr__(self):
        return f"TabulatedFunction({self.describe()})"
