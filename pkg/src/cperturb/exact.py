"""Exact rational evaluation: the ground-truth oracle for signs and values."""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence, Union

from .expr import Abs, Add, Const, Div, Expr, Input, Max, Min, Mul, Sub

Rational = Fraction
Exact = Union[int, Fraction]


class ExactPole(ZeroDivisionError):
    """A divisor evaluated to exactly zero."""


def rat_eval(e: Expr, x: Sequence[Exact]) -> Fraction:
    """Exact value of the expression at the given rational assignment."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Input):
        return Fraction(x[e.index])
    if isinstance(e, Abs):
        return abs(rat_eval(e.operand, x))
    a = rat_eval(e.left, x)
    b = rat_eval(e.right, x)
    if isinstance(e, Add):
        return a + b
    if isinstance(e, Sub):
        return a - b
    if isinstance(e, Mul):
        return a * b
    if isinstance(e, Div):
        if b == 0:
            raise ExactPole("exact zero divisor")
        return a / b
    if isinstance(e, Min):
        return min(a, b)
    if isinstance(e, Max):
        return max(a, b)
    raise TypeError(f"unknown node {type(e).__name__}")


def rat_sign(e: Expr, x: Sequence[Exact]) -> int:
    """Sign of the exact value: -1, 0, or +1.  Raises ExactPole at poles."""
    v = rat_eval(e, x)
    return (v > 0) - (v < 0)
