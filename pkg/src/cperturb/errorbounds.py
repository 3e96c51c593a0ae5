"""Forward rounding-error analysis and guarded evaluation.

The annotation rules are the classical per-node (ind, sup) table: a bound of
ind_E * sup_E * 2^-L on |fl(E) - E| when every input is exactly representable
and each operation rounds with relative error at most 2^-L.

  node      sup                 ind
  x         |x|                 0 (grid inputs are exact)
  const c   max(|c|, |fl(c)|)   0 if representable, else 1
  E1 +- E2  sup1 + sup2         1 + max(ind1, ind2)
  E1 *  E2  sup1 * sup2         1 + ind1 + ind2
  |E|       sup                 ind
  min/max   max(sup1, sup2)     max(ind1, ind2)

Division never appears inside an annotated expression: rational predicates
put it at the root, where the guard is the conjunction of the numerator and
denominator guards and the quotient sign is the product of the certified
component signs.

Guarded evaluation splits at Min/Max/Abs/Div above the arithmetic: children
are guarded independently and the composite sign follows from the certified
child signs, which is exactly the shape the region analysis assumes (the
fp-safe set is the product of the children's safe sets).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence, Union

from .exact import Exact
from .expr import Abs, Add, Const, Div, Expr, Input, Max, Min, Mul, Sub
from .reals import ceil_log2
from .softfloat import (
    DivisionByZero,
    RangeError,
    SoftFloat,
    fl_abs,
    fl_binop,
    fl_cmp,
    fl_round,
    is_representable,
)


class UnsupportedNode(TypeError):
    """Division inside an annotated expression."""


@dataclass(frozen=True)
class AnnotatedExpr:
    """An expression node with its (ind, sup) error annotations."""

    node: Expr
    ind: int
    sup: Fraction
    children: tuple["AnnotatedExpr", ...]


@lru_cache(maxsize=8192)
def annotate(e: Expr, emax: int, prec: int | None = None) -> AnnotatedExpr:
    """Attach (ind, sup) to every node, for inputs bounded by 2^emax.

    When ``prec`` is given, constants exactly representable at that precision
    get ind 0; without it every nonzero constant conservatively counts one
    rounding, which keeps the resulting static bound valid for every L.
    Annotations are pure values, so results are memoized.
    """
    domain = Fraction(2) ** emax

    def walk(n: Expr) -> AnnotatedExpr:
        if isinstance(n, Const):
            c = n.value
            if c == 0:
                return AnnotatedExpr(n, 0, Fraction(0), ())
            if prec is not None:
                # K plays no role in representability away from the range ends;
                # a wide exponent field stands in for "some admissible K".
                exact = is_representable(c, prec, 64)
                ind = 0 if exact else 1
                sup = abs(c) if exact else max(abs(c), abs(fl_round(c, prec, 64).to_fraction()))
            else:
                ind, sup = 1, abs(c)
            return AnnotatedExpr(n, ind, sup, ())
        if isinstance(n, Input):
            return AnnotatedExpr(n, 0, domain, ())
        if isinstance(n, Abs):
            c = walk(n.operand)
            return AnnotatedExpr(n, c.ind, c.sup, (c,))
        if isinstance(n, Div):
            raise UnsupportedNode("division is handled at the guard level only")
        a, b = walk(n.left), walk(n.right)
        if isinstance(n, (Add, Sub)):
            return AnnotatedExpr(n, 1 + max(a.ind, b.ind), a.sup + b.sup, (a, b))
        if isinstance(n, Mul):
            return AnnotatedExpr(n, 1 + a.ind + b.ind, a.sup * b.sup, (a, b))
        if isinstance(n, (Min, Max)):
            return AnnotatedExpr(n, max(a.ind, b.ind), max(a.sup, b.sup), (a, b))
        raise TypeError(f"unknown node {type(n).__name__}")

    return walk(e)


def static_bound(ann: AnnotatedExpr, L: int) -> Fraction:
    """B_E(L) = ind_E * sup_E * 2^-L."""
    return ann.ind * ann.sup * Fraction(2) ** (-L)


@dataclass(frozen=True)
class _EvalInfo:
    value: SoftFloat
    dynsup: Fraction  # sup recursion seeded with the actual input magnitudes
    ind: int


def _eval_arithmetic(e: Expr, x: Sequence[SoftFloat], L: int, K: int) -> _EvalInfo:
    if isinstance(e, Const):
        v = fl_round(e.value, L, K, source_op="const")
        ind = 0 if v.to_fraction() == e.value else 1
        return _EvalInfo(v, max(abs(e.value), abs(v.to_fraction())), ind)
    if isinstance(e, Input):
        v = x[e.index]
        return _EvalInfo(v, abs(v.to_fraction()), 0)
    if isinstance(e, Abs):
        c = _eval_arithmetic(e.operand, x, L, K)
        return _EvalInfo(fl_abs(c.value), c.dynsup, c.ind)
    if isinstance(e, Div):
        raise UnsupportedNode("division below an arithmetic node")
    a = _eval_arithmetic(e.left, x, L, K)
    b = _eval_arithmetic(e.right, x, L, K)
    if isinstance(e, Add):
        return _EvalInfo(fl_binop("+", a.value, b.value), a.dynsup + b.dynsup, 1 + max(a.ind, b.ind))
    if isinstance(e, Sub):
        return _EvalInfo(fl_binop("-", a.value, b.value), a.dynsup + b.dynsup, 1 + max(a.ind, b.ind))
    if isinstance(e, Mul):
        return _EvalInfo(fl_binop("*", a.value, b.value), a.dynsup * b.dynsup, 1 + a.ind + b.ind)
    if isinstance(e, Min):
        pick = a if fl_cmp(a.value, b.value) <= 0 else b
        return _EvalInfo(pick.value, max(a.dynsup, b.dynsup), max(a.ind, b.ind))
    if isinstance(e, Max):
        pick = a if fl_cmp(a.value, b.value) >= 0 else b
        return _EvalInfo(pick.value, max(a.dynsup, b.dynsup), max(a.ind, b.ind))
    raise TypeError(f"unknown node {type(e).__name__}")


def dynamic_bound(e: Expr, x: Sequence[SoftFloat], L: int, K: int, emax: int) -> Fraction:
    """Input-dependent error bound; never exceeds the static bound."""
    info = _eval_arithmetic(e, x, L, K)
    ann = annotate(e, emax, prec=L)
    raw = info.ind * info.dynsup * Fraction(2) ** (-L)
    return min(raw, static_bound(ann, L))


# --- guard verdicts ---------------------------------------------------------


@dataclass(frozen=True)
class SignCertified:
    sign: int


@dataclass(frozen=True)
class GuardFailed:
    pass


@dataclass(frozen=True)
class RangeErrorVerdict:
    source_op: str = ""


GuardVerdict = Union[SignCertified, GuardFailed, RangeErrorVerdict]


def _coerce_inputs(x: Sequence[Union[SoftFloat, Exact]], L: int, K: int) -> list[SoftFloat]:
    out = []
    for v in x:
        if isinstance(v, SoftFloat):
            out.append(v)
        else:
            f = fl_round(Fraction(v), L, K, source_op="input")
            if f.to_fraction() != Fraction(v):
                raise ValueError(f"input {v} is not exactly representable in F_{{{L},{K}}}")
            out.append(f)
    return out


def guarded_eval(e: Expr, x: Sequence[Union[SoftFloat, Exact]], L: int, K: int, emax: int) -> GuardVerdict:
    """Evaluate with F_{L,K} arithmetic; certify the sign or fail safely.

    The certified sign always equals the exact rational sign; exact zeros can
    never be certified.  Overflow, inexact underflow and division by zero all
    surface as RangeErrorVerdict, the signal on which the perturbation loop
    grows K.
    """
    xs = _coerce_inputs(x, L, K)

    def guard(node: Expr) -> GuardVerdict:
        if isinstance(node, (Min, Max)):
            a = guard(node.left)
            if isinstance(a, RangeErrorVerdict):
                return a
            b = guard(node.right)
            if isinstance(b, RangeErrorVerdict):
                return b
            if isinstance(a, SignCertified) and isinstance(b, SignCertified):
                s = min(a.sign, b.sign) if isinstance(node, Min) else max(a.sign, b.sign)
                return SignCertified(s)
            return GuardFailed()
        if isinstance(node, Abs):
            inner = guard(node.operand)
            if isinstance(inner, SignCertified):
                return SignCertified(1)
            return inner
        if isinstance(node, Div):
            num = guard(node.left)
            if isinstance(num, RangeErrorVerdict):
                return num
            den = guard(node.right)
            if isinstance(den, RangeErrorVerdict):
                return den
            if isinstance(num, SignCertified) and isinstance(den, SignCertified):
                return SignCertified(num.sign * den.sign)
            return GuardFailed()
        # maximal arithmetic block
        try:
            info = _eval_arithmetic(node, xs, L, K)
        except DivisionByZero:
            return RangeErrorVerdict("/")
        except RangeError as exc:
            return RangeErrorVerdict(exc.source_op)
        ann = annotate(node, emax, prec=L)
        bound = min(info.ind * info.dynsup * Fraction(2) ** (-L), static_bound(ann, L))
        v = info.value.to_fraction()
        if abs(v) > bound:
            return SignCertified(1 if v > 0 else -1)
        return GuardFailed()

    return guard(e)


# --- closed-form fp-safety bounds -------------------------------------------


def safety_lower_univariate(d: int, coeffs: Sequence[Exact], emax: int, L: int) -> Fraction:
    """(d+2) * max_{1<=i<=d} |a_i| * 2^(emax*(d+1)+1-L) for a degree-d polynomial.

    ``coeffs`` is (a_0, ..., a_d); the constant coefficient does not enter the
    maximum, exactly as in the closed form.
    """
    if d < 1:
        raise ValueError("need degree >= 1")
    top = max(abs(Fraction(c)) for c in coeffs[1 : d + 1])
    return (d + 2) * top * Fraction(2) ** (emax * (d + 1) + 1 - L)


def safety_lower_multivariate(d: int, n_terms: int, maxcoeff: Exact, emax: int, L: int) -> Fraction:
    """(d+1+ceil(log2 N_T)) * N_T * maxcoeff * 2^(emax*d+1-L)."""
    if n_terms < 1:
        raise ValueError("need at least one term")
    log_term = ceil_log2(n_terms) if n_terms > 1 else 0
    return (d + 1 + log_term) * n_terms * abs(Fraction(maxcoeff)) * Fraction(2) ** (emax * d + 1 - L)


def safety_upper(K: int, s_inf_at_L: Exact) -> Fraction:
    """S_sup(K) = 2^(2^(K-1)) - S_inf(L): below it, evaluations stay in range."""
    if K > 16:
        raise ValueError("use the log-domain comparison for large K")
    s = Fraction(s_inf_at_L)
    if s < 0:
        raise ValueError("S_inf must be nonnegative")
    return Fraction(2) ** (1 << (K - 1)) - s


def value_quantum(e: Expr, emax: int, L: int) -> int:
    """Exponent q such that every subexpression value over grid inputs is an
    integer multiple of 2^q (inputs are multiples of tau = 2^(emax-L-1);
    constants contribute their own dyadic quantum after rounding to L bits).

    Any inexact intermediate is then at least 2^(L+1+q) in magnitude, which is
    what the exponent-width requirement uses to rule out inexact underflow.
    The returned q is the minimum over every node of the expression.
    """
    seen: list[int] = []

    def walk(n: Expr) -> int:
        if isinstance(n, Const):
            if n.value == 0:
                q = 0
            else:
                c = fl_round(n.value, L, 64).to_fraction()
                num = abs(c.numerator)
                q = (num & -num).bit_length() - 1 - (c.denominator.bit_length() - 1)
        elif isinstance(n, Input):
            q = emax - L - 1
        elif isinstance(n, Abs):
            q = walk(n.operand)
        elif isinstance(n, Div):
            raise UnsupportedNode("no quantum through division")
        else:
            a, b = walk(n.left), walk(n.right)
            q = a + b if isinstance(n, Mul) else min(a, b)
        seen.append(q)
        return q

    for root in _arith_roots(e):
        walk(root)
    return min(seen)


def _arith_roots(e: Expr) -> list[Expr]:
    """The maximal arithmetic blocks guarded_eval evaluates."""
    if isinstance(e, (Min, Max, Div)):
        return _arith_roots(e.left) + _arith_roots(e.right)
    if isinstance(e, Abs):
        return _arith_roots(e.operand)
    return [e]
