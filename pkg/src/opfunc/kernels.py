"""Loewner and C_g kernel matrices on grids, and the PSD decision."""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from . import fncore as fc
from .fncore import DomainError, Expr, Interval

__all__ = [
    "EmptyCore",
    "KernelMatrix",
    "PSDResult",
    "DEFAULT_PSD_TOL",
    "loewner_matrix",
    "divided_difference",
    "value_at",
    "cg_matrix",
    "psd_check",
    "make_grid",
    "kernel_to_csv",
]

DEFAULT_PSD_TOL = 1e-9


class EmptyCore(ValueError):
    """The endpoint retreat leaves nothing of the interval."""


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    points: np.ndarray
    values: np.ndarray
    label: str
    t0: float | None = None

    @property
    def n(self) -> int:
        return len(self.points)


@dataclass(frozen=True, eq=False)
class PSDResult:
    """Outcome of :func:`psd_check`; truthy when the matrix is PSD."""

    psd: bool
    min_eigenvalue: float
    vector: np.ndarray
    threshold: float

    def __bool__(self):
        return self.psd


def _check_points(points) -> np.ndarray:
    p = np.asarray(points, dtype=float).ravel()
    if p.size < 1:
        raise ValueError("empty grid")
    if len(np.unique(p)) != p.size:
        raise ValueError("grid points must be distinct")
    return p


def _divided_matrix(vals, diag, p) -> np.ndarray:
    dt = p[:, None] - p[None, :]
    np.fill_diagonal(dt, 1.0)
    K = (vals[:, None] - vals[None, :]) / dt
    np.fill_diagonal(K, diag)
    return fc.symmetrize(K)


def loewner_matrix(f: Expr, points) -> KernelMatrix:
    """``K[i, j] = (f(t_i) - f(t_j)) / (t_i - t_j)``, ``K[i, i] = f'(t_i)``."""
    p = _check_points(points)
    vals = fc.evaluate(f, p)
    diag = fc.evaluate(f.diff(), p)
    return KernelMatrix(p, _divided_matrix(vals, diag, p), "loewner")


def cg_matrix(g: Expr, t0: float, points) -> KernelMatrix:
    """Divided-difference kernel of ``(t - t0) g(t)``.

    Off the diagonal ``((t_i - t0) g_i - (t_j - t0) g_j) / (t_i - t_j)``;
    on it ``g_i + (t_i - t0) g'_i``.
    """
    p = _check_points(points)
    g_vals = fc.evaluate(g, p)
    vals = (p - t0) * g_vals
    diag = g_vals + (p - t0) * fc.evaluate(g.diff(), p)
    return KernelMatrix(p, _divided_matrix(vals, diag, p), "cg", float(t0))


def psd_check(M, tol: float = DEFAULT_PSD_TOL) -> PSDResult:
    """PSD iff the smallest eigenvalue is ``>= -tol * max(1, |M|_2)``."""
    A = M.values if isinstance(M, KernelMatrix) else np.asarray(M, dtype=float)
    A = fc.symmetrize(A)
    w, V = np.linalg.eigh(A)
    norm = float(np.max(np.abs(w))) if w.size else 0.0
    threshold = -tol * max(1.0, norm)
    return PSDResult(bool(w[0] >= threshold), float(w[0]), V[:, 0].copy(), threshold)


def make_grid(J: Interval, n: int, eps: float | None = None, cap: float = 1e4) -> np.ndarray:
    """``n`` Chebyshev-Lobatto points in the retreated core of ``J``.

    Unbounded sides are reached through a ``tan`` reparametrisation and
    capped at ``cap``.
    """
    if n < 2:
        raise ValueError("a grid needs at least two points")
    try:
        J.core(eps, cap)
    except ValueError as err:
        raise EmptyCore(str(err)) from None
    u = (1 - np.cos(np.pi * np.arange(n) / (n - 1))) / 2
    pts = np.asarray(J.param(u, eps, cap), dtype=float)
    if np.any(np.diff(pts) <= 0):
        raise EmptyCore(f"grid of {n} points collapses in {J}")
    return pts


def value_at(f: Expr, t0: float) -> float:
    """``f(t0)``, or its one-sided limit when ``t0`` is outside the domain.

    The limit is a linear Richardson extrapolation from ``t0 +- h``; it is
    accepted only if two step sizes agree.
    """
    try:
        return fc.evaluate(f, t0)
    except DomainError:
        pass
    scale = 1.0 + abs(t0)
    found = []
    for side in (1.0, -1.0):
        try:
            ests = []
            for h in (1e-5 * scale, 1e-6 * scale):
                a = fc.evaluate(f, t0 + side * h)
                b = fc.evaluate(f, t0 + side * h / 2)
                ests.append(2 * b - a)
        except DomainError:
            continue
        if abs(ests[0] - ests[1]) <= 1e-6 * (1 + abs(ests[1])):
            found.append(ests[1])
    if not found:
        raise DomainError(f"{f} has no finite limit at {t0}")
    if len(found) == 2 and abs(found[0] - found[1]) > 1e-6 * (1 + abs(found[0])):
        raise DomainError(f"one-sided limits of {f} at {t0} disagree")
    return found[0]


def _affine_at(aff, t0):
    return aff[0] * t0 + aff[1]


def _closed_divdiff(f: Expr, t0: float) -> Expr | None:
    """Exact divided difference for the structural cases that have one."""
    if f.is_const:
        return fc.ZERO
    aff = fc.as_affine(f)
    if aff is not None:
        return fc.const(aff[0])
    if isinstance(f, fc.Neg):
        k = _closed_divdiff(f.arg, t0)
        return None if k is None else fc.neg(k)
    if isinstance(f, fc.Mul) and f.factors[0].is_const and len(f.factors) == 2:
        k = _closed_divdiff(f.factors[1], t0)
        return None if k is None else fc.mul(f.factors[0], k)
    if isinstance(f, fc.Add):
        parts = [_closed_divdiff(x, t0) for x in f.terms]
        return None if any(p is None for p in parts) else fc.add(*parts)
    if isinstance(f, fc.Pow) and f.integer:
        aff = fc.as_affine(f.base)
        if aff is None:
            return None
        p, L, L0 = aff[0], f.base, _affine_at(aff, t0)
        m = int(abs(f.k))
        # L^m - L0^m = p (t - t0) sum_j L^j L0^(m-1-j)
        s = fc.add(*(fc.mul(L0 ** (m - 1 - j), fc.pow_(L, j)) for j in range(m)))
        if f.k > 0:
            return fc.mul(p, s)
        if L0 == 0:
            return None
        return fc.mul(-p / L0**m, s, fc.pow_(L, -m))
    if isinstance(f, fc.Div):
        a, c = fc.as_affine(f.num), fc.as_affine(f.den)
        if a is None or c is None:
            return None
        d0 = _affine_at(c, t0)
        if d0 == 0:
            return None
        # (a t + b)/(c t + d): K = (a d - b c) / ((c t + d)(c t0 + d))
        det = a[0] * c[1] - a[1] * c[0]
        return fc.mul(det / d0, fc.pow_(f.den, -1.0))
    return None


def divided_difference(f: Expr, t0: float) -> Expr:
    """The function ``t -> (f(t) - f(t0)) / (t - t0)``, equal to ``f'(t0)`` at ``t0``.

    Polynomial, affine-power and Moebius pieces get an exact closed form;
    everything else becomes a :class:`~opfunc.fncore.DivDiff` node.  An
    endpoint ``t0`` outside the natural domain of ``f`` uses the one-sided
    limit of ``f``.
    """
    t0 = float(t0)
    closed = _closed_divdiff(f, t0)
    if closed is not None:
        return closed
    return fc.DivDiff(f, t0, value_at(f, t0))


def kernel_to_csv(K: KernelMatrix) -> str:
    """Grid in the header row, dense kernel values below."""
    buf = io.StringIO()
    buf.write(",".join(repr(float(x)) for x in K.points) + "\n")
    for row in K.values:
        buf.write(",".join(repr(float(x)) for x in row) + "\n")
    return buf.getvalue()


def kernel_from_csv(text: str, label: str = "loewner") -> KernelMatrix:
    rows = [list(map(float, line.split(","))) for line in text.strip().splitlines()]
    return KernelMatrix(np.array(rows[0]), np.array(rows[1:]), label)
