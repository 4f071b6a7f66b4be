"""Functions built from integral representations with discrete measures.

With finitely many atoms every representation is a finite sum of
Moebius terms, so the built functions are closed-form expression trees and
all integrability conditions hold automatically.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from . import fncore as fc
from .fncore import DomainError, Expr, Interval

__all__ = [
    "InvalidRepr",
    "DivergentLimit",
    "DiscreteMeasure",
    "PickRepr",
    "SOCRepr",
    "build_pick",
    "build_soc",
    "build_halfline",
    "split_soc",
    "reciprocal_flip",
    "repr_to_dict",
    "repr_from_dict",
    "load_repr",
    "save_repr",
]


class InvalidRepr(ValueError):
    """Representation data violate their constraints."""


class DivergentLimit(ValueError):
    """The boundary limit needed for a reciprocal flip is not finite."""


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finitely many atoms ``(x, w)`` with ``w > 0`` and distinct ``x``."""

    atoms: tuple = ()

    def __post_init__(self):
        atoms = tuple((float(x), float(w)) for x, w in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        xs = [x for x, _ in atoms]
        if len(set(xs)) != len(xs):
            raise InvalidRepr("atom locations must be distinct")
        for x, w in atoms:
            if not (w > 0 and math.isfinite(w)):
                raise InvalidRepr(f"atom weight {w} at {x} must be positive and finite")
            if not math.isfinite(x):
                raise InvalidRepr("atom locations must be finite")

    def __len__(self):
        return len(self.atoms)

    def __iter__(self):
        return iter(self.atoms)

    def scaled(self, c: float) -> "DiscreteMeasure":
        return DiscreteMeasure(tuple((x, c * w) for x, w in self.atoms))

    def __add__(self, other: "DiscreteMeasure") -> "DiscreteMeasure":
        merged: dict[float, float] = {}
        for x, w in self.atoms + other.atoms:
            merged[x] = merged.get(x, 0.0) + w
        return DiscreteMeasure(tuple(sorted(merged.items())))

    def to_list(self) -> list:
        return [{"x": x, "w": w} for x, w in self.atoms]

    @classmethod
    def from_list(cls, items) -> "DiscreteMeasure":
        return cls(tuple((d["x"], d["w"]) for d in items or ()))


@dataclass(frozen=True)
class PickRepr:
    """``alpha + beta t + sum w (1/(x - t) - 1/(x - t0))`` with no atom inside ``J``."""

    alpha: float
    beta: float
    nu: DiscreteMeasure
    t0: float
    J: Interval

    def __post_init__(self):
        if self.beta < 0:
            raise InvalidRepr("beta must be non-negative")
        if not self.J.contains(self.t0):
            raise InvalidRepr(f"t0 = {self.t0} is not in {self.J}")
        for x, _ in self.nu:
            if self.J.contains(x):
                raise InvalidRepr(f"atom at {x} lies inside {self.J}")


@dataclass(frozen=True)
class SOCRepr:
    """``alpha + sum_- w/(t - x) + sum_+ w/(x - t)`` on ``J = (a, b)``.

    ``nu_minus`` lives in ``(-inf, a]`` and ``nu_plus`` in ``[b, inf)``.
    """

    alpha: float
    nu_minus: DiscreteMeasure = field(default_factory=DiscreteMeasure)
    nu_plus: DiscreteMeasure = field(default_factory=DiscreteMeasure)
    J: Interval = field(default_factory=lambda: Interval(0.0, math.inf))

    def __post_init__(self):
        if self.alpha < 0:
            raise InvalidRepr("alpha must be non-negative")
        for x, _ in self.nu_minus:
            if x > self.J.lo:
                raise InvalidRepr(f"nu_minus atom at {x} is right of a = {self.J.lo}")
        for x, _ in self.nu_plus:
            if x < self.J.hi:
                raise InvalidRepr(f"nu_plus atom at {x} is left of b = {self.J.hi}")

    def combine(self, other: "SOCRepr", s: float) -> "SOCRepr":
        """Convex combination ``s self + (1 - s) other`` on the common interval."""
        if not 0 <= s <= 1:
            raise ValueError("s must lie in [0, 1]")
        lo, hi = max(self.J.lo, other.J.lo), min(self.J.hi, other.J.hi)
        if lo >= hi:
            raise InvalidRepr("representations have disjoint intervals")
        parts = [(r, c) for r, c in ((self, s), (other, 1 - s)) if c > 0]
        nu_m = sum((r.nu_minus.scaled(c) for r, c in parts), DiscreteMeasure())
        nu_p = sum((r.nu_plus.scaled(c) for r, c in parts), DiscreteMeasure())
        return SOCRepr(s * self.alpha + (1 - s) * other.alpha, nu_m, nu_p, Interval(lo, hi))


def _recip(shift: float, sign: float, w: float) -> Expr:
    """``w / (sign (t - shift))``."""
    return fc.div(w, fc.mul(sign, fc.add(fc.T, -shift)))


def build_pick(r: PickRepr) -> Expr:
    """``alpha + beta t + sum w (1/(x - t) - 1/(x - t0))``."""
    const = r.alpha - sum(w / (x - r.t0) for x, w in r.nu)
    terms = [fc.const(const), fc.mul(r.beta, fc.T)]
    terms += [_recip(x, -1.0, w) for x, w in r.nu]
    return fc.add(*terms)


def _soc_parts(alpha: float, nu_minus: DiscreteMeasure, nu_plus: DiscreteMeasure) -> list:
    terms = [fc.const(alpha)]
    terms += [_recip(x, 1.0, w) for x, w in nu_minus]
    terms += [_recip(x, -1.0, w) for x, w in nu_plus]
    return terms


def build_soc(r: SOCRepr) -> Expr:
    return fc.add(*_soc_parts(r.alpha, r.nu_minus, r.nu_plus))


def build_halfline(r: SOCRepr, g_inf: float | None = None) -> Expr:
    """``g_inf + sum_- w/(t - x)`` on ``(a, inf)``; ``g_inf`` defaults to ``r.alpha``.

    The limit at infinity is checked at ``t = 1e6``.
    """
    if r.J.hi != math.inf:
        raise InvalidRepr("half-line representations need J = (a, inf)")
    if len(r.nu_plus):
        raise InvalidRepr("nu_plus must be empty on a right half-line")
    g_inf = r.alpha if g_inf is None else float(g_inf)
    if g_inf < 0:
        raise InvalidRepr("g(inf) must be non-negative")
    g = fc.add(*_soc_parts(g_inf, r.nu_minus, DiscreteMeasure()))
    far = fc.evaluate(g, 1e6)
    mass = sum(w for _, w in r.nu_minus)
    if abs(far - g_inf) > 1e-5 * (1 + mass + abs(g_inf)):
        raise InvalidRepr(f"g(1e6) = {far} does not approach g(inf) = {g_inf}")
    return g


def split_soc(r: SOCRepr) -> tuple[Expr, Expr]:
    """``(g_plus, g_minus)``: SOC on ``(a, inf)`` and on ``(-inf, b)``, summing to ``g``."""
    g_plus = fc.add(*_soc_parts(r.alpha, r.nu_minus, DiscreteMeasure()))
    g_minus = fc.add(*_soc_parts(0.0, DiscreteMeasure(), r.nu_plus))
    return g_plus, g_minus


def _boundary_limit(f: Expr, x: float, side: float) -> float:
    """Limit of ``f`` at ``x`` from ``side``; exact if ``f`` is defined there.

    Otherwise ``f(x + 1e-8)`` is used after checking it agrees with
    ``f(x + 1e-6)`` to 1% (relative to ``1 + |limit|``).
    """
    try:
        return fc.evaluate(f, x)
    except DomainError:
        pass
    try:
        near = fc.evaluate(f, x + side * 1e-8)
        far = fc.evaluate(f, x + side * 1e-6)
    except DomainError as err:
        raise DivergentLimit(str(err)) from None
    if abs(near - far) > 0.01 * (1 + abs(near)):
        raise DivergentLimit(f"{f} has no finite limit at {x} (f ~ {near:.4g} near it)")
    return near


def reciprocal_flip(f: Expr, mirrored: bool = False) -> tuple[Expr, float, Interval]:
    """``f(1/t) - lam`` on ``(0, inf)``, or ``f(-1/t) - lam`` on ``(-inf, 0)``.

    ``lam = f(0+)`` must be finite.  Returns the function, ``lam`` and its
    interval.  Class membership of ``f`` is the caller's to establish.
    """
    lam = _boundary_limit(f, 0.0, 1.0)
    sign = -1.0 if mirrored else 1.0
    g = fc.add(fc.compose(f, fc.div(sign, fc.T)), -lam)
    J = Interval(-math.inf, 0.0) if mirrored else Interval(0.0, math.inf)
    return g, lam, J


# --------------------------------------------------------------------------
# JSON
# --------------------------------------------------------------------------


def repr_to_dict(r) -> dict:
    if isinstance(r, PickRepr):
        return {"kind": "pick", "alpha": r.alpha, "beta": r.beta, "t0": r.t0,
                "interval": r.J.to_dict(), "nu": r.nu.to_list()}
    if isinstance(r, SOCRepr):
        return {"kind": "soc", "alpha": r.alpha, "interval": r.J.to_dict(),
                "nu_minus": r.nu_minus.to_list(), "nu_plus": r.nu_plus.to_list()}
    raise TypeError(f"not a representation: {type(r).__name__}")


def repr_from_dict(d: dict):
    """Inverse of :func:`repr_to_dict`; a ``beta`` or ``nu`` key means a Pick representation."""
    J = d["interval"]
    if isinstance(J, str):
        from .parsing import parse_interval

        J = parse_interval(J)
    else:
        J = Interval.from_dict(J)
    kind = d.get("kind") or ("pick" if "beta" in d or "nu" in d else "soc")
    if kind == "pick":
        return PickRepr(float(d.get("alpha", 0.0)), float(d.get("beta", 0.0)),
                        DiscreteMeasure.from_list(d.get("nu")), float(d["t0"]), J)
    return SOCRepr(float(d.get("alpha", 0.0)), DiscreteMeasure.from_list(d.get("nu_minus")),
                   DiscreteMeasure.from_list(d.get("nu_plus")), J)


def load_repr(path):
    with open(path) as fh:
        return repr_from_dict(json.load(fh))


def save_repr(r, path):
    with open(path, "w") as fh:
        json.dump(repr_to_dict(r), fh, indent=2)
