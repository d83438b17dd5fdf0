"""A small exact arithmetic expression language for utilities and speedups.

Expressions use Python syntax restricted to arithmetic, comparisons,
boolean logic, conditional expressions, indexing and a fixed set of helper
functions.  ``/`` is exact rational division and decimal literals are read
as exact fractions, so ``7/10`` and ``0.7`` denote the same number.

>>> Expr("3 * delta ** 2").evaluate(delta=Fraction(1, 2))
Fraction(3, 4)
"""

from __future__ import annotations

import ast
from fractions import Fraction
from functools import lru_cache

from .errors import ExpressionError


def _div(a, b):
    return Fraction(a) / Fraction(b)


def _num(s):
    """Decimal value of ``s`` or -1 if ``s`` is not a decimal numeral."""
    return int(s) if isinstance(s, str) and s.isdigit() else -1


def _bits(s):
    """Binary value of ``s`` or -1 if ``s`` is not a nonempty bit string."""
    if isinstance(s, str) and s and set(s) <= {"0", "1"}:
        return int(s, 2)
    return -1


def _isprime(n):
    n = int(n)
    if n < 2:
        return False
    d = 2
    while d * d <= n:
        if n % d == 0:
            return False
        d += 1
    return True


def _hamming(x, y):
    return sum(1 for p, q in zip(x, y) if p != q) + abs(len(x) - len(y))


def _agree(x, y):
    return sum(1 for p, q in zip(x, y) if p == q)


def _xorbits(x, y):
    """Positionwise XOR of two bit strings (truncated to the shorter)."""
    return "".join("1" if p != q else "0" for p, q in zip(x, y))


def _discounted(own, other, matrix, delta):
    """Discounted repeated-game payoff ``sum_m delta**m r_m``.

    ``own`` and ``other`` are move strings (``'0'`` row/column 0, ``'1'``
    row/column 1); round ``m`` counts from 1.
    """
    total = Fraction(0)
    delta = Fraction(delta)
    weight = Fraction(1)
    for mine, theirs in zip(own, other):
        weight *= delta
        total += weight * matrix[int(mine)][int(theirs)]
    return total


HELPERS = {
    "min": min,
    "max": max,
    "abs": abs,
    "len": len,
    "num": _num,
    "bits": _bits,
    "isprime": _isprime,
    "hamming": _hamming,
    "agree": _agree,
    "xorbits": _xorbits,
    "discounted": _discounted,
    "frac": _div,
}

_ALLOWED = (
    ast.Expression, ast.BinOp, ast.UnaryOp, ast.BoolOp, ast.Compare, ast.IfExp,
    ast.Call, ast.Name, ast.Constant, ast.Tuple, ast.List, ast.Subscript, ast.Slice,
    ast.Load, ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Mod, ast.FloorDiv, ast.Pow,
    ast.USub, ast.UAdd, ast.Not, ast.And, ast.Or, ast.Eq, ast.NotEq, ast.Lt,
    ast.LtE, ast.Gt, ast.GtE, ast.In, ast.NotIn,
)


class _Rewrite(ast.NodeTransformer):
    def visit_BinOp(self, node):
        self.generic_visit(node)
        if isinstance(node.op, ast.Div):
            return ast.copy_location(
                ast.Call(ast.Name("__div", ast.Load()), [node.left, node.right], []), node)
        return node

    def visit_Constant(self, node):
        if isinstance(node.value, float):
            return ast.copy_location(
                ast.Call(ast.Name("__frac", ast.Load()), [ast.Constant(repr(node.value))], []), node)
        return node


@lru_cache(maxsize=None)
def _compile(source: str):
    try:
        tree = ast.parse(source, mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {source!r}: {exc.msg}") from None
    names = set()
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED):
            raise ExpressionError(f"{type(node).__name__} not allowed in {source!r}")
        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in HELPERS:
                raise ExpressionError(f"unknown function in {source!r}")
            if node.keywords:
                raise ExpressionError("keyword arguments are not supported")
        if isinstance(node, ast.Name):
            if node.id.startswith("_"):
                raise ExpressionError(f"name {node.id!r} not allowed")
            names.add(node.id)
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float, str, bool)):
            raise ExpressionError(f"literal {node.value!r} not allowed")
    tree = ast.fix_missing_locations(_Rewrite().visit(tree))
    return compile(tree, "<expr>", "eval"), frozenset(names - set(HELPERS))


_GLOBALS = {"__builtins__": {}, "__div": _div, "__frac": Fraction, **HELPERS}


class Expr:
    """A compiled expression; equality and hashing go by source text."""

    __slots__ = ("source", "_code", "names")

    def __init__(self, source):
        if isinstance(source, Expr):
            source = source.source
        self.source = str(source).strip()
        self._code, self.names = _compile(self.source)

    def evaluate(self, env=None, **kwargs):
        scope = dict(env or {})
        scope.update(kwargs)
        missing = self.names - scope.keys()
        if missing:
            raise ExpressionError(f"unbound name(s) {sorted(missing)} in {self.source!r}")
        try:
            value = eval(self._code, _GLOBALS, scope)
        except ExpressionError:
            raise
        except Exception as exc:
            raise ExpressionError(f"evaluating {self.source!r}: {exc}") from None
        if isinstance(value, bool):
            return int(value)
        return value

    def __eq__(self, other):
        return isinstance(other, Expr) and other.source == self.source

    def __hash__(self):
        return hash(("Expr", self.source))

    def __repr__(self):
        return f"Expr({self.source!r})"


def parse_rational(text) -> Fraction:
    """Parse ``"p/q"``, an integer or a decimal string exactly."""
    if isinstance(text, Fraction):
        return text
    if isinstance(text, int) and not isinstance(text, bool):
        return Fraction(text)
    if isinstance(text, float):
        return Fraction(repr(text))
    try:
        return Fraction(str(text).strip())
    except (ValueError, ZeroDivisionError):
        raise ExpressionError(f"not a rational number: {text!r}") from None


def format_rational(value) -> str:
    """Render a rational as ``"p/q"`` (integers as ``"p/1"``)."""
    q = Fraction(value)
    return f"{q.numerator}/{q.denominator}"
