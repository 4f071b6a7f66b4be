"""Real functions as expression trees, and the functional calculus f(A).

Every function handled by the package is an :class:`Expr` in the single
variable ``t``.  Trees are immutable after construction, evaluate
vectorised over numpy arrays, and differentiate symbolically to any order.
Two node kinds go beyond elementary calculus:

* :class:`DivDiff` -- the one-variable divided difference
  ``t -> (f(t) - f(t0)) / (t - t0)`` with its removable singularity filled
  in from Taylor data at ``t0`` (and its derivatives of every order).
* :class:`Integral` -- ``t -> int_base^t g`` by adaptive quadrature.

Build trees with the smart constructors (:func:`add`, :func:`mul`,
:func:`div`, :func:`pow_`, ...) or the arithmetic operators; they fold
constants and keep repeated differentiation compact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly

__all__ = [
    "DomainError",
    "SpectrumError",
    "Interval",
    "Expr",
    "Const",
    "Var",
    "Add",
    "Mul",
    "Div",
    "Neg",
    "Pow",
    "Exp",
    "Log",
    "TanPoly",
    "Compose",
    "DivDiff",
    "Integral",
    "const",
    "T",
    "add",
    "mul",
    "div",
    "neg",
    "pow_",
    "exp",
    "log",
    "tan",
    "sqrt",
    "compose",
    "evaluate",
    "differentiate",
    "as_affine",
    "validate_interval",
    "apply_to_matrix",
    "spectrum_in",
    "symmetrize",
    "fmt_number",
]


class DomainError(ValueError):
    """A function was evaluated outside its natural domain."""


class SpectrumError(ValueError):
    """A matrix spectrum is not contained in the required interval."""


def fmt_number(v: float) -> str:
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


# --------------------------------------------------------------------------
# Interval
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Interval:
    """A non-degenerate real interval, possibly unbounded.

    ``lo``/``hi`` may be ``-inf``/``inf``; closed endpoints must be finite.
    """

    lo: float
    hi: float
    lo_closed: bool = False
    hi_closed: bool = False

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if math.isnan(lo) or math.isnan(hi):
            raise ValueError("interval endpoints must not be NaN")
        if not lo < hi:
            raise ValueError(f"degenerate interval: lo={lo} >= hi={hi}")
        if self.lo_closed and math.isinf(lo):
            raise ValueError("a closed endpoint must be finite")
        if self.hi_closed and math.isinf(hi):
            raise ValueError("a closed endpoint must be finite")

    @classmethod
    def open(cls, lo, hi):
        return cls(lo, hi)

    @classmethod
    def closed(cls, lo, hi):
        return cls(lo, hi, True, True)

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.lo) and math.isfinite(self.hi)

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def __str__(self):
        left = "[" if self.lo_closed else "("
        right = "]" if self.hi_closed else ")"
        return f"{left}{fmt_number(self.lo)}, {fmt_number(self.hi)}{right}"

    def to_dict(self) -> dict:
        return {
            "lo": fmt_number(self.lo) if math.isinf(self.lo) else self.lo,
            "hi": fmt_number(self.hi) if math.isinf(self.hi) else self.hi,
            "lo_closed": self.lo_closed,
            "hi_closed": self.hi_closed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Interval":
        return cls(float(d["lo"]), float(d["hi"]), bool(d.get("lo_closed", False)),
                   bool(d.get("hi_closed", False)))

    def contains(self, t, tol: float = 0.0):
        """Membership test; ``tol`` widens closed endpoints only."""
        t = np.asarray(t, dtype=float)
        above = t >= self.lo - tol if self.lo_closed else t > self.lo
        below = t <= self.hi + tol if self.hi_closed else t < self.hi
        return above & below

    def in_closure(self, t: float, tol: float = 0.0) -> bool:
        return bool(self.lo - tol <= t <= self.hi + tol)

    def is_endpoint(self, t: float) -> bool:
        return t == self.lo or t == self.hi

    def default_retreat(self) -> float:
        return 1e-3 * self.length if self.bounded else 1e-3

    def core(self, eps: float | None = None, cap: float = 1e4) -> tuple[float, float]:
        """Compact core ``[lo + eps, hi - eps]``; unbounded sides capped at ``cap``.

        Raises ``ValueError`` when the retreat exhausts the interval.
        """
        if eps is None:
            eps = self.default_retreat()
        lo = self.lo + eps if math.isfinite(self.lo) else None
        hi = self.hi - eps if math.isfinite(self.hi) else None
        if lo is None and hi is None:
            lo, hi = -cap, cap
        elif lo is None:
            lo = self.hi - cap
        elif hi is None:
            hi = self.lo + cap
        if not lo < hi:
            raise ValueError(f"retreat {eps} exhausts {self}")
        return lo, hi

    def param(self, u, eps: float | None = None, cap: float = 1e4):
        """Map ``u`` in [0, 1] increasingly onto the core.

        Finite cores are mapped affinely; an unbounded side goes through a
        ``t = tan(theta)`` reparametrisation so that large magnitudes are
        sampled sparsely.
        """
        u = np.asarray(u, dtype=float)
        if eps is None:
            eps = self.default_retreat()
        lo, hi = self.core(eps, cap)
        if self.bounded:
            return lo + u * (hi - lo)
        if math.isfinite(self.lo):
            a, b = math.atan(eps), math.atan(cap)
            return self.lo + np.tan(a + u * (b - a))
        if math.isfinite(self.hi):
            a, b = math.atan(eps), math.atan(cap)
            return self.hi - np.tan(b - u * (b - a))
        b = math.atan(cap)
        return np.tan(-b + 2 * b * u)


# --------------------------------------------------------------------------
# Expression nodes
# --------------------------------------------------------------------------

_ATOM, _POW, _MUL, _ADD = 4, 3, 2, 1


def _wrap(text_prec, prec):
    text, p = text_prec
    return f"({text})" if p < prec else text


_MEMO: dict | None = None


class Expr:
    """Base class of expression nodes (function of the variable ``t``)."""

    __slots__ = ("_d",)

    def __init__(self):
        self._d = None

    # evaluation -----------------------------------------------------------
    def __call__(self, t):
        return evaluate(self, t)

    def _ev(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _val(self, t: np.ndarray) -> np.ndarray:
        """``_ev`` memoised per node and argument array for one top-level evaluation.

        Derivative trees share subtrees, so without this high-order
        derivatives of quotients cost exponential time.
        """
        global _MEMO
        top = _MEMO is None
        if top:
            _MEMO = {}
        try:
            key = (id(self), id(t))
            hit = _MEMO.get(key)
            if hit is not None:
                return hit[1]
            v = self._ev(t)
            # keep t alive so its id cannot be reused within this evaluation
            _MEMO[key] = (t, v)
            return v
        finally:
            if top:
                _MEMO = None

    # differentiation ------------------------------------------------------
    def diff(self) -> "Expr":
        if self._d is None:
            self._d = self._derivative()
        return self._d

    def _derivative(self) -> "Expr":
        raise NotImplementedError

    # structure ------------------------------------------------------------
    def children(self) -> tuple["Expr", ...]:
        return ()

    def _subs(self, inner: "Expr") -> "Expr":
        raise NotImplementedError

    def walk(self):
        yield self
        for c in self.children():
            yield from c.walk()

    @property
    def is_const(self) -> bool:
        return False

    # printing ---------------------------------------------------------------
    def _fmt(self, v: str) -> tuple[str, int]:
        raise NotImplementedError

    def text(self, var: str = "t") -> str:
        return self._fmt(var)[0]

    def __str__(self):
        return self.text()

    def __repr__(self):
        return f"Expr({self.text()!r})"

    # operators ------------------------------------------------------------
    def __add__(self, other):
        return add(self, _lift(other))

    def __radd__(self, other):
        return add(_lift(other), self)

    def __sub__(self, other):
        return add(self, neg(_lift(other)))

    def __rsub__(self, other):
        return add(_lift(other), neg(self))

    def __mul__(self, other):
        return mul(self, _lift(other))

    def __rmul__(self, other):
        return mul(_lift(other), self)

    def __truediv__(self, other):
        return div(self, _lift(other))

    def __rtruediv__(self, other):
        return div(_lift(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, k):
        return pow_(self, float(k))


def _lift(x) -> Expr:
    return x if isinstance(x, Expr) else Const(float(x))


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value: float):
        super().__init__()
        self.value = float(value)

    @property
    def is_const(self):
        return True

    def _ev(self, t):
        return np.full(np.shape(t), self.value)

    def _derivative(self):
        return ZERO

    def _subs(self, inner):
        return self

    def _fmt(self, v):
        s = fmt_number(self.value)
        return s, (_ADD if self.value < 0 else _ATOM)


class Var(Expr):
    __slots__ = ()

    def _ev(self, t):
        return t

    def _derivative(self):
        return ONE

    def _subs(self, inner):
        return inner

    def _fmt(self, v):
        return v, _ATOM


ZERO = Const(0.0)
ONE = Const(1.0)
T = Var()


class Add(Expr):
    __slots__ = ("terms",)

    def __init__(self, terms):
        super().__init__()
        self.terms = tuple(terms)

    def children(self):
        return self.terms

    def _ev(self, t):
        out = self.terms[0]._val(t)
        for term in self.terms[1:]:
            out = out + term._val(t)
        return out

    def _derivative(self):
        return add(*(x.diff() for x in self.terms))

    def _subs(self, inner):
        return add(*(x._subs(inner) for x in self.terms))

    def _fmt(self, v):
        parts = []
        for i, term in enumerate(self.terms):
            s = _wrap(term._fmt(v), _ADD)
            if i == 0:
                parts.append(s)
            elif s.startswith("-"):
                parts.append(" - " + s[1:])
            else:
                parts.append(" + " + s)
        return "".join(parts), _ADD


class Mul(Expr):
    __slots__ = ("factors",)

    def __init__(self, factors):
        super().__init__()
        self.factors = tuple(factors)

    def children(self):
        return self.factors

    def _ev(self, t):
        out = self.factors[0]._val(t)
        for f in self.factors[1:]:
            out = out * f._val(t)
        return out

    def _derivative(self):
        terms = []
        for i, f in enumerate(self.factors):
            d = f.diff()
            if d.is_const and d.value == 0:
                continue
            terms.append(mul(*self.factors[:i], d, *self.factors[i + 1:]))
        return add(*terms)

    def _subs(self, inner):
        return mul(*(x._subs(inner) for x in self.factors))

    def _fmt(self, v):
        coeff = 1.0
        num, den = [], []
        for f in self.factors:
            if f.is_const:
                coeff *= f.value
            elif isinstance(f, Pow) and f.k < 0:
                den.append(pow_(f.base, -f.k))
            else:
                num.append(f)
        sign = "-" if coeff < 0 else ""
        coeff = abs(coeff)
        ntext = [_wrap(f._fmt(v), _MUL) for f in num]
        if coeff != 1 or not ntext:
            ntext.insert(0, fmt_number(coeff))
        text = "*".join(ntext)
        if den:
            if len(den) == 1:
                dtext, prec = den[0]._fmt(v)
                if prec <= _MUL:
                    dtext = f"({dtext})"
            else:
                dtext = "(" + "*".join(_wrap(f._fmt(v), _MUL) for f in den) + ")"
            text = f"{text}/{dtext}"
        return sign + text, (_ADD if sign else _MUL)


class Div(Expr):
    __slots__ = ("num", "den")

    def __init__(self, num: Expr, den: Expr):
        super().__init__()
        self.num, self.den = num, den

    def children(self):
        return (self.num, self.den)

    def _ev(self, t):
        d = self.den._val(t)
        if np.any(d == 0):
            raise DomainError(f"division by zero in {self}")
        return self.num._val(t) / d

    def _derivative(self):
        a, b = self.num, self.den
        return add(div(a.diff(), b), neg(mul(a, b.diff(), pow_(b, -2.0))))

    def _subs(self, inner):
        return div(self.num._subs(inner), self.den._subs(inner))

    def _fmt(self, v):
        if isinstance(self.num, Neg):
            return "-" + Div(self.num.arg, self.den)._fmt(v)[0], _ADD
        n = _wrap(self.num._fmt(v), _MUL)
        dt = self.den._fmt(v)
        d = dt[0] if dt[1] > _MUL else f"({dt[0]})"
        return f"{n}/{d}", _MUL


class Neg(Expr):
    __slots__ = ("arg",)

    def __init__(self, arg: Expr):
        super().__init__()
        self.arg = arg

    def children(self):
        return (self.arg,)

    def _ev(self, t):
        return -self.arg._val(t)

    def _derivative(self):
        return neg(self.arg.diff())

    def _subs(self, inner):
        return neg(self.arg._subs(inner))

    def _fmt(self, v):
        return "-" + _wrap(self.arg._fmt(v), _MUL), _ADD


class Pow(Expr):
    """``base ** k`` for a real constant exponent ``k``."""

    __slots__ = ("base", "k")

    def __init__(self, base: Expr, k: float):
        super().__init__()
        self.base, self.k = base, float(k)

    def children(self):
        return (self.base,)

    @property
    def integer(self) -> bool:
        return self.k == int(self.k)

    def _ev(self, t):
        b = self.base._val(t)
        if self.k < 0 and np.any(b == 0):
            raise DomainError(f"zero base with negative exponent in {self}")
        if not self.integer and np.any(b < 0):
            raise DomainError(f"negative base with non-integer exponent in {self}")
        return np.power(b, self.k)

    def _derivative(self):
        return mul(Const(self.k), pow_(self.base, self.k - 1), self.base.diff())

    def _subs(self, inner):
        return pow_(self.base._subs(inner), self.k)

    def _fmt(self, v):
        if self.k == 0.5:
            return f"sqrt({self.base._fmt(v)[0]})", _ATOM
        if self.k < 0:
            inv = pow_(self.base, -self.k)
            return f"1/{_wrap(inv._fmt(v), _POW)}", _MUL
        b = _wrap(self.base._fmt(v), _ATOM)
        return f"{b}^{fmt_number(self.k)}", _POW


class Exp(Expr):
    __slots__ = ("arg",)

    def __init__(self, arg: Expr):
        super().__init__()
        self.arg = arg

    def children(self):
        return (self.arg,)

    def _ev(self, t):
        return np.exp(self.arg._val(t))

    def _derivative(self):
        return mul(self, self.arg.diff())

    def _subs(self, inner):
        return exp(self.arg._subs(inner))

    def _fmt(self, v):
        return f"exp({self.arg._fmt(v)[0]})", _ATOM


class Log(Expr):
    __slots__ = ("arg",)

    def __init__(self, arg: Expr):
        super().__init__()
        self.arg = arg

    def children(self):
        return (self.arg,)

    def _ev(self, t):
        u = self.arg._val(t)
        if np.any(u <= 0):
            raise DomainError(f"log of a non-positive value in {self}")
        return np.log(u)

    def _derivative(self):
        return div(self.arg.diff(), self.arg)

    def _subs(self, inner):
        return log(self.arg._subs(inner))

    def _fmt(self, v):
        return f"log({self.arg._fmt(v)[0]})", _ATOM


class TanPoly(Expr):
    """A polynomial in ``tan(arg)``; coefficients in increasing degree.

    The class is closed under differentiation since
    ``d/du P(tan u) = P'(tan u) (1 + tan(u)^2)``, which keeps high-order
    derivatives of ``tan`` compact.
    """

    __slots__ = ("coeffs", "arg")

    def __init__(self, coeffs, arg: Expr):
        super().__init__()
        self.coeffs = tuple(float(c) for c in coeffs)
        self.arg = arg

    def children(self):
        return (self.arg,)

    def _ev(self, t):
        u = self.arg._val(t)
        if np.any(np.abs(np.cos(u)) < 1e-14):
            raise DomainError(f"tan evaluated at a pole in {self}")
        return npoly.polyval(np.tan(u), self.coeffs)

    def _derivative(self):
        c = npoly.polymul(npoly.polyder(self.coeffs), [1.0, 0.0, 1.0])
        c = npoly.polytrim(c) if len(c) else [0.0]
        if len(c) == 1 and c[0] == 0:
            return ZERO
        return mul(TanPoly(c, self.arg), self.arg.diff())

    def _subs(self, inner):
        return TanPoly(self.coeffs, self.arg._subs(inner))

    def _fmt(self, v):
        tv = f"tan({self.arg._fmt(v)[0]})"
        if self.coeffs == (0.0, 1.0):
            return tv, _ATOM
        terms = []
        for k, c in enumerate(self.coeffs):
            if c == 0:
                continue
            base = ONE if k == 0 else (_Sym(tv) if k == 1 else pow_(_Sym(tv), k))
            terms.append(mul(Const(c), base))
        return add(*terms)._fmt(v) if terms else ("0", _ATOM)


class _Sym(Expr):
    """Printing-only leaf holding preformatted text."""

    __slots__ = ("s",)

    def __init__(self, s):
        super().__init__()
        self.s = s

    def _fmt(self, v):
        return self.s, _ATOM


class Compose(Expr):
    """``outer(inner(t))``; only used when ``outer`` cannot be substituted into."""

    __slots__ = ("outer", "inner")

    def __init__(self, outer: Expr, inner: Expr):
        super().__init__()
        self.outer, self.inner = outer, inner

    def children(self):
        return (self.outer, self.inner)

    def _ev(self, t):
        return self.outer._val(self.inner._val(t))

    def _derivative(self):
        return mul(compose(self.outer.diff(), self.inner), self.inner.diff())

    def _subs(self, inner):
        return compose(self.outer, self.inner._subs(inner))

    def _fmt(self, v):
        return self.outer._fmt(_wrap(self.inner._fmt(v), _ATOM))


_EPS = np.finfo(float).eps


class DivDiff(Expr):
    """``d^n/dt^n`` of ``K(t) = (f(t) - f(t0)) / (t - t0)``.

    ``ft0`` is the value used for ``f(t0)`` (a one-sided limit when ``t0``
    is an endpoint).  Away from ``t0`` the Leibniz expansion of
    ``(f - ft0) * (t - t0)^-1`` is used; close to ``t0`` the Taylor series
    ``K^(n)(t) = sum_j f^(n+j+1)(t0) h^j / ((n+j+1) j!)`` takes over.  For
    ``n = 0`` the switch happens at ``|h| < 1e-7 (1 + |t0|)`` with a
    first-order correction; for ``n >= 1`` four Taylor terms are used below
    ``eps^(1/(n+5)) (1 + |t0|)``, which balances cancellation error in the
    Leibniz sum against truncation error.
    """

    __slots__ = ("f", "t0", "ft0", "order", "_coef")

    def __init__(self, f: Expr, t0: float, ft0: float, order: int = 0):
        super().__init__()
        self.f, self.t0, self.ft0, self.order = f, float(t0), float(ft0), int(order)
        self._coef = None

    def children(self):
        return (self.f,)

    def threshold(self) -> float:
        scale = 1.0 + abs(self.t0)
        if self.order == 0:
            return 1e-7 * scale
        return _EPS ** (1.0 / (self.order + 5)) * scale

    def _taylor_terms(self) -> int:
        return 2 if self.order == 0 else 4

    def taylor_coefficients(self) -> np.ndarray | None:
        """``f^(n+j+1)(t0) / ((n+j+1) j!)``, or ``None`` if ``f`` is not smooth at ``t0``.

        Endpoint base points such as ``t0 = 0`` for ``sqrt`` have no
        expansion; the Leibniz form is then used all the way to ``t0``.
        """
        if self._coef is None:
            n, t0 = self.order, np.array([self.t0])
            try:
                with np.errstate(all="ignore"):
                    c = [differentiate(self.f, n + j + 1)._val(t0)[0] / ((n + j + 1) * math.factorial(j))
                         for j in range(self._taylor_terms())]
            except (DomainError, ZeroDivisionError, OverflowError):
                c = None
            if c is not None and not np.all(np.isfinite(c)):
                c = None
            self._coef = False if c is None else np.array(c)
        return None if self._coef is False else self._coef

    def _ev(self, t):
        t = np.asarray(t, dtype=float)
        h = t - self.t0
        near = np.abs(h) < self.threshold()
        coef = self.taylor_coefficients() if np.any(near) else None
        if coef is None:
            near = np.zeros(np.shape(h), bool)
        out = np.empty(np.shape(t))
        if np.any(~near):
            hf = h[~near]
            tf = t[~near]
            n = self.order
            total = np.zeros(hf.shape)
            for k in range(n + 1):
                g = self.f._val(tf) - self.ft0 if k == n else differentiate(self.f, n - k)._val(tf)
                total = total + math.comb(n, k) * g * ((-1) ** k * math.factorial(k)) / hf ** (k + 1)
            out[~near] = total
        if np.any(near):
            hn = h[near]
            out[near] = sum(c * hn ** j for j, c in enumerate(coef))
        return out

    def _derivative(self):
        return DivDiff(self.f, self.t0, self.ft0, self.order + 1)

    def _subs(self, inner):
        return compose(self, inner)

    def _fmt(self, v):
        if self.order:
            base = DivDiff(self.f, self.t0, self.ft0)._fmt("t")[0]
            return f"d{self.order}[{base}]({v})", _ATOM
        ftext = self.f._fmt(v)
        c = self.ft0
        if c == 0:
            num = ftext
        else:
            s = _wrap(ftext, _ADD)
            num = (f"{s} - {fmt_number(c)}" if c > 0 else f"{s} + {fmt_number(-c)}"), _ADD
        if self.t0 == 0:
            den = v
        else:
            t0 = self.t0
            den = f"({v} - {fmt_number(t0)})" if t0 > 0 else f"({v} + {fmt_number(-t0)})"
        return f"{_wrap(num, _MUL)}/{den}", _MUL


class Integral(Expr):
    """``t -> int_base^t g(x) dx`` by adaptive Gauss-Kronrod quadrature."""

    __slots__ = ("g", "base", "abstol")

    def __init__(self, g: Expr, base: float, abstol: float = 1e-10):
        super().__init__()
        self.g, self.base, self.abstol = g, float(base), abstol

    def children(self):
        return (self.g,)

    def _ev(self, t):
        from scipy import integrate

        t = np.asarray(t, dtype=float)
        out = np.empty(t.shape)
        gf = lambda x: float(self.g._val(np.array([x]))[0])  # noqa: E731
        for idx, x in np.ndenumerate(t):
            res = integrate.quad(gf, self.base, x, epsabs=self.abstol, epsrel=1e-12,
                                 limit=200, full_output=1)
            val, err = res[0], res[1]
            # a 4th element is QUADPACK's warning message
            if len(res) > 3 and err > 1e3 * self.abstol:
                raise QuadratureError(f"quadrature did not converge at t={x}: err={err}")
            out[idx] = val
        return out

    def _derivative(self):
        return self.g

    def _subs(self, inner):
        return compose(self, inner)

    def _fmt(self, v):
        return f"integral({self.g.text()}, {fmt_number(self.base)}, {v})", _ATOM


class QuadratureError(ArithmeticError):
    """Adaptive quadrature failed to reach its tolerance."""


# --------------------------------------------------------------------------
# Smart constructors
# --------------------------------------------------------------------------


def const(v: float) -> Const:
    return Const(v)


def add(*terms) -> Expr:
    flat: list[Expr] = []
    c = 0.0
    for x in map(_lift, terms):
        for y in (x.terms if isinstance(x, Add) else (x,)):
            if y.is_const:
                c += y.value
            else:
                flat.append(y)
    if c != 0:
        flat.append(Const(c))
    if not flat:
        return ZERO
    if len(flat) == 1:
        return flat[0]
    return Add(flat)


def mul(*factors) -> Expr:
    flat: list[Expr] = []
    c = 1.0
    for x in map(_lift, factors):
        if isinstance(x, Neg):
            c = -c
            x = x.arg
        for y in (x.factors if isinstance(x, Mul) else (x,)):
            if y.is_const:
                c *= y.value
            elif isinstance(y, Neg):
                c = -c
                flat.append(y.arg)
            else:
                flat.append(y)
    if c == 0:
        return ZERO
    if not flat:
        return Const(c)
    if c == -1:
        return Neg(flat[0] if len(flat) == 1 else Mul(flat))
    if c != 1:
        flat.insert(0, Const(c))
    return flat[0] if len(flat) == 1 else Mul(flat)


def neg(x) -> Expr:
    x = _lift(x)
    if x.is_const:
        return Const(-x.value)
    if isinstance(x, Neg):
        return x.arg
    if isinstance(x, Mul) and x.factors[0].is_const:
        return mul(Const(-x.factors[0].value), *x.factors[1:])
    return Neg(x)


def div(a, b) -> Expr:
    a, b = _lift(a), _lift(b)
    if b.is_const:
        if b.value == 0:
            raise DomainError("division by the zero constant")
        return mul(Const(1.0 / b.value), a)
    if a.is_const:
        return mul(a, pow_(b, -1.0))
    if a is b:
        return ONE
    return Div(a, b)


def pow_(base, k: float) -> Expr:
    base = _lift(base)
    k = float(k)
    if k == 0:
        return ONE
    if k == 1:
        return base
    integer = k == int(k)
    if base.is_const:
        if base.value == 0 and k < 0:
            raise DomainError("zero to a negative power")
        if base.value < 0 and not integer:
            raise DomainError("negative constant to a non-integer power")
        return Const(base.value ** k)
    if integer:
        if isinstance(base, Pow):
            return pow_(base.base, base.k * k)
        if isinstance(base, Neg):
            return mul(Const((-1.0) ** k), pow_(base.arg, k))
        if isinstance(base, Mul):
            return mul(*(pow_(f, k) for f in base.factors))
        if isinstance(base, Div):
            if k < 0:
                return pow_(Div(base.den, base.num), -k)
            return div(pow_(base.num, k), pow_(base.den, k))
    return Pow(base, k)


def exp(x) -> Expr:
    x = _lift(x)
    return Const(math.exp(x.value)) if x.is_const else Exp(x)


def log(x) -> Expr:
    x = _lift(x)
    if x.is_const:
        if x.value <= 0:
            raise DomainError("log of a non-positive constant")
        return Const(math.log(x.value))
    return Log(x)


def tan(x) -> Expr:
    x = _lift(x)
    return Const(math.tan(x.value)) if x.is_const else TanPoly((0.0, 1.0), x)


def sqrt(x) -> Expr:
    return pow_(x, 0.5)


def compose(outer: Expr, inner: Expr) -> Expr:
    """``outer`` with its variable replaced by ``inner``."""
    if isinstance(inner, Var):
        return outer
    if isinstance(outer, (DivDiff, Integral)):
        return Const(outer(float(inner.value))) if inner.is_const else Compose(outer, inner)
    return outer._subs(inner)


# --------------------------------------------------------------------------
# Operations
# --------------------------------------------------------------------------


def evaluate(f: Expr, t):
    """Evaluate ``f`` at a scalar or array ``t``.

    Raises :class:`DomainError` on any domain violation or non-finite value.
    Scalars in give a Python float out.
    """
    scalar = np.ndim(t) == 0
    arr = np.atleast_1d(np.asarray(t, dtype=float))
    with np.errstate(all="ignore"):
        v = f._val(arr)
    v = np.broadcast_to(np.asarray(v, dtype=float), arr.shape)
    if not np.all(np.isfinite(v)):
        bad = arr[~np.isfinite(v)]
        raise DomainError(f"{f} is not finite at t={bad[0]!r}")
    return float(v[0]) if scalar else np.array(v)


def differentiate(f: Expr, order: int = 1) -> Expr:
    """Symbolic derivative of the given order (>= 0)."""
    if order < 0:
        raise ValueError("order must be non-negative")
    for _ in range(order):
        f = f.diff()
    return f


def as_affine(f: Expr) -> tuple[float, float] | None:
    """``(p, q)`` with ``f(t) = p t + q`` when ``f`` is structurally affine."""
    if f.is_const:
        return 0.0, f.value
    if isinstance(f, Var):
        return 1.0, 0.0
    if isinstance(f, Neg):
        r = as_affine(f.arg)
        return None if r is None else (-r[0], -r[1])
    if isinstance(f, Add):
        p = q = 0.0
        for term in f.terms:
            r = as_affine(term)
            if r is None:
                return None
            p, q = p + r[0], q + r[1]
        return p, q
    if isinstance(f, Mul):
        c = 1.0
        rest = None
        for x in f.factors:
            if x.is_const:
                c *= x.value
            elif rest is None:
                rest = as_affine(x)
                if rest is None:
                    return None
            else:
                return None
        if rest is None:
            return 0.0, c
        return c * rest[0], c * rest[1]
    return None


def validate_interval(f: Expr, J: Interval) -> None:
    """Reject intervals that straddle a pole of some ``tan`` node.

    Only ``tan`` of an affine argument is checked; the image of ``J`` must
    lie inside a single branch ``(k pi - pi/2, k pi + pi/2)``.
    """
    for node in f.walk():
        if isinstance(node, TanPoly):
            aff = as_affine(node.arg)
            if aff is None or aff[0] == 0:
                continue
            if not J.bounded:
                raise DomainError(f"tan({node.arg}) has poles on the unbounded interval {J}")
            ends = sorted((aff[0] * J.lo + aff[1], aff[0] * J.hi + aff[1]))
            k = math.floor((ends[0] + math.pi / 2) / math.pi)
            lo_b, hi_b = k * math.pi - math.pi / 2, k * math.pi + math.pi / 2
            if ends[0] < lo_b - 1e-12 or ends[1] > hi_b + 1e-12:
                raise DomainError(f"{J} is not contained in one branch of tan({node.arg})")


def symmetrize(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    return (M + M.T) / 2


def spectrum_in(A, J: Interval, tol: float = 0.0) -> bool:
    """True iff every eigenvalue of the symmetric ``A`` lies in ``J``.

    Closed endpoints get ``tol`` of slack; open endpoints stay strict.
    """
    w = np.linalg.eigvalsh(symmetrize(A))
    return bool(np.all(J.contains(w, tol)))


def apply_to_matrix(f: Expr, A, J: Interval | None = None, tol: float = 1e-12) -> np.ndarray:
    """``f(A) = Q diag(f(w)) Q^T`` from the eigendecomposition of ``A``.

    When ``J`` is given, raises :class:`SpectrumError` if the spectrum leaves
    ``J`` (``tol`` is scaled by ``max(1, |A|)``).
    """
    A = symmetrize(A)
    w, Q = np.linalg.eigh(A)
    if J is not None:
        scale = max(1.0, float(np.max(np.abs(w))) if w.size else 1.0)
        if not np.all(J.contains(w, tol * scale)):
            raise SpectrumError(f"spectrum [{w.min():.6g}, {w.max():.6g}] not inside {J}")
    fw = evaluate(f, w)
    return symmetrize((Q * fw) @ Q.T)
