"""Bridge between expression trees and sympy.

Used where exact algebra is needed: rational degrees, readable
simplified forms, and closed-form antiderivatives.  Numerics never go
through sympy.
"""

from __future__ import annotations

import math
from fractions import Fraction

import sympy as sp

from . import fncore as fc
from .fncore import Expr

__all__ = ["t", "to_sympy", "from_sympy", "rational_degree", "rational_form", "simplified_text", "integrate"]

t = sp.Symbol("t", real=True)
_SNAP_DENOMINATOR = 10**6
_SNAP_TOL = 1e-14
_x = sp.Symbol("x", real=True)


def _num(v: float):
    if math.isinf(v):
        return sp.oo if v > 0 else -sp.oo
    if v == int(v):
        return sp.Integer(int(v))
    # snap round-off in small-denominator fractions (2/3 from 0.6666666666666667) so
    # common factors of iterated divided differences still cancel
    q = Fraction(v).limit_denominator(_SNAP_DENOMINATOR)
    if abs(float(q) - v) <= _SNAP_TOL * max(1.0, abs(v)):
        return sp.Rational(q.numerator, q.denominator)
    # exact decimal value of the shortest repr, not the binary expansion
    return sp.Rational(repr(v))


def to_sympy(f: Expr, var=t):
    if isinstance(f, fc.Const):
        return _num(f.value)
    if isinstance(f, fc.Var):
        return var
    if isinstance(f, fc.Add):
        return sp.Add(*(to_sympy(x, var) for x in f.terms))
    if isinstance(f, fc.Mul):
        return sp.Mul(*(to_sympy(x, var) for x in f.factors))
    if isinstance(f, fc.Div):
        return to_sympy(f.num, var) / to_sympy(f.den, var)
    if isinstance(f, fc.Neg):
        return -to_sympy(f.arg, var)
    if isinstance(f, fc.Pow):
        return to_sympy(f.base, var) ** _num(f.k)
    if isinstance(f, fc.Exp):
        return sp.exp(to_sympy(f.arg, var))
    if isinstance(f, fc.Log):
        return sp.log(to_sympy(f.arg, var))
    if isinstance(f, fc.TanPoly):
        u = sp.tan(to_sympy(f.arg, var))
        return sum((_num(c) * u**k for k, c in enumerate(f.coeffs) if c), sp.Integer(0))
    if isinstance(f, fc.Compose):
        return to_sympy(f.outer, _x).subs(_x, to_sympy(f.inner, var))
    if isinstance(f, fc.DivDiff):
        base = (to_sympy(f.f, var) - _num(f.ft0)) / (var - _num(f.t0))
        return sp.diff(base, var, f.order) if f.order else base
    if isinstance(f, fc.Integral):
        return sp.Integral(to_sympy(f.g, _x), (_x, _num(f.base), var))
    raise TypeError(f"no sympy form for {type(f).__name__}")


def from_sympy(e) -> Expr:
    """Convert back; raises ``ValueError`` for unsupported constructs."""
    if e == t:
        return fc.T
    if e.is_Number or (e.is_number and e.is_real):
        v = float(e)
        if not math.isfinite(v):
            raise ValueError(f"non-finite constant {e}")
        return fc.const(v)
    if isinstance(e, sp.Add):
        return fc.add(*(from_sympy(a) for a in e.args))
    if isinstance(e, sp.Mul):
        return fc.mul(*(from_sympy(a) for a in e.args))
    if isinstance(e, sp.Pow):
        b, k = e.args
        if not k.is_number:
            raise ValueError(f"non-constant exponent in {e}")
        return fc.pow_(from_sympy(b), float(k))
    if isinstance(e, sp.exp):
        return fc.exp(from_sympy(e.args[0]))
    if isinstance(e, sp.log):
        return fc.log(from_sympy(e.args[0]))
    if isinstance(e, sp.tan):
        return fc.tan(from_sympy(e.args[0]))
    raise ValueError(f"unsupported sympy construct {e.func.__name__}")


_RATIONAL_NODES = (fc.Const, fc.Var, fc.Add, fc.Mul, fc.Div, fc.Neg, fc.Pow)


def _structurally_rational(f: Expr) -> bool:
    for node in f.walk():
        if isinstance(node, fc.Pow) and not node.integer:
            return False
        if isinstance(node, fc.DivDiff):
            continue
        if not isinstance(node, _RATIONAL_NODES + (fc.DivDiff, fc.Compose)):
            return False
    return True


def _lowest_terms(f: Expr):
    if not _structurally_rational(f):
        return None
    e = sp.cancel(sp.together(to_sympy(f)))
    return e if e.is_rational_function(t) else None


def _degree_of(e) -> int:
    num, den = sp.fraction(e)
    return int(max(sp.degree(num, t) if num != 0 else 0, sp.degree(den, t)))


def rational_degree(f: Expr) -> int | None:
    """``max(deg numerator, deg denominator)`` in lowest terms, or ``None``.

    ``None`` means ``f`` is not a rational function of ``t``.
    """
    e = _lowest_terms(f)
    return None if e is None else _degree_of(e)


def rational_form(f: Expr) -> tuple[Expr, int] | None:
    """``f`` rebuilt from its lowest-terms quotient, with its degree.

    Returns ``None`` when ``f`` is not rational.  Rebuilding keeps iterated
    divided differences of rational functions exact and shallow.
    """
    e = _lowest_terms(f)
    if e is None:
        return None
    num, den = sp.fraction(e)
    lead = sp.Poly(den, t).LC()
    num, den = sp.expand(num / lead), sp.expand(den / lead)
    out = from_sympy(num) if den == 1 else fc.div(from_sympy(num), from_sympy(den))
    return out, _degree_of(e)


def simplified_text(f: Expr) -> str:
    """A readable closed form (``together`` + ``cancel``) of ``f``."""
    e = to_sympy(f)
    try:
        e = sp.cancel(sp.together(e))
    except (sp.PolynomialError, TypeError):
        pass
    return sp.sstr(e, order="rev-lex").replace("**", "^").replace(" ", "")


def integrate(g: Expr, base: float) -> Expr | None:
    """Closed form of ``t -> int_base^t g`` when sympy finds one, else ``None``.

    Only attempted for trees built from arithmetic and powers.
    """
    for node in g.walk():
        if not isinstance(node, _RATIONAL_NODES):
            return None
    expr = to_sympy(g, _x)
    try:
        res = sp.integrate(expr, (_x, _num(base), t))
    except (NotImplementedError, ValueError, TypeError):
        return None
    if res.has(sp.Integral) or res.has(sp.Piecewise) or res.has(sp.I):
        return None
    try:
        return from_sympy(sp.expand_log(res, force=True))
    except ValueError:
        return None
