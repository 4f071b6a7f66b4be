"""Randomised falsification of operator inequalities on finite matrices.

Every residual function returns a symmetric matrix that is PSD exactly
when the corresponding inequality holds for the given matrices.  A
matrix counterexample refutes class membership outright; passing many
random scenes is only evidence.

Compressions ``P g(PAP) P`` are computed on the range of ``P``: with
``V`` an orthonormal basis of ``ran P``, ``P g(PAP) P = V g(V^T A V) V^T``.
This is the value the inequality refers to (``g`` applied to the
compression of ``A`` to ``ran P``) and it never evaluates ``g`` outside
the spectrum hull of ``A``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import fncore as fc
from .fncore import DomainError, Expr, Interval, SpectrumError, apply_to_matrix, symmetrize

__all__ = [
    "SingularError",
    "PreconditionError",
    "SpectralScene",
    "Witness",
    "NoCounterexample",
    "FalsifyConfig",
    "CLAIMS",
    "haar_orthogonal",
    "sampling_window",
    "sample_scene",
    "residual_brown",
    "residual_davis",
    "residual_jensen",
    "residual_prop21_ii",
    "residual_prop21_iii",
    "residual_prop21_iv",
    "residual_monotone_pair",
    "monotone_pair",
    "eq2_sides",
    "verify_eq2_identity",
    "residual",
    "falsify",
    "replay",
]


class SingularError(ArithmeticError):
    """A resolvent factor is singular or too ill-conditioned to invert."""


class PreconditionError(ValueError):
    """Inputs violate the hypotheses of the inequality being tested."""


COND_LIMIT = 1e10


@dataclass(frozen=True, eq=False)
class SpectralScene:
    n: int
    A: np.ndarray
    B: np.ndarray
    P: np.ndarray
    S: np.ndarray
    s: float
    lam: float
    seed: list
    interval: Interval

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "A": self.A.tolist(),
            "B": self.B.tolist(),
            "P": self.P.tolist(),
            "S": self.S.tolist(),
            "s": self.s,
            "lam": self.lam,
            "seed": list(self.seed),
            "interval": self.interval.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SpectralScene":
        arr = lambda k: np.array(d[k], dtype=float).reshape(d["n"], d["n"])  # noqa: E731
        return cls(int(d["n"]), arr("A"), arr("B"), arr("P"), arr("S"), float(d["s"]),
                   float(d["lam"]), list(d["seed"]), Interval.from_dict(d["interval"]))


def haar_orthogonal(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix (QR of a Gaussian, signs fixed)."""
    Z = rng.standard_normal((n, n))
    Q, R = np.linalg.qr(Z)
    return Q * np.sign(np.diag(R))


def sampling_window(J: Interval, eps: float | None = None, cap: float = 10.0) -> tuple[float, float]:
    """Where scene eigenvalues live: the core of ``J`` shrunk by 5% of its length per side."""
    lo, hi = J.core(eps, cap)
    delta = 0.05 * (hi - lo)
    return lo + delta, hi - delta


def sample_scene(J: Interval, n: int, rng: np.random.Generator, seed=None,
                 cap: float = 10.0) -> SpectralScene:
    if n < 1:
        raise ValueError("dimension must be >= 1")
    lo, hi = sampling_window(J, cap=cap)

    def sym():
        Q = haar_orthogonal(n, rng)
        return symmetrize((Q * rng.uniform(lo, hi, n)) @ Q.T)

    A, B = sym(), sym()
    k = int(rng.integers(0, n + 1))
    U = haar_orthogonal(n, rng)
    P = symmetrize(U[:, :k] @ U[:, :k].T)
    sigma = rng.uniform(0.0, 1.0, n)
    S = (haar_orthogonal(n, rng) * sigma) @ haar_orthogonal(n, rng).T
    s = float(rng.uniform(0.05, 0.95))
    return SpectralScene(n, A, B, P, S, s, 0.0, list(seed) if seed is not None else [], J)


# --------------------------------------------------------------------------
# linear-algebra helpers
# --------------------------------------------------------------------------


def _range_basis(P) -> np.ndarray:
    w, Q = np.linalg.eigh(symmetrize(P))
    return Q[:, w > 0.5]


def _compress(g: Expr, A, P, J) -> np.ndarray:
    """``P g(PAP) P`` with ``g`` applied to the compression on ``ran P``."""
    V = _range_basis(P)
    n = A.shape[0]
    if V.shape[1] == 0:
        return np.zeros((n, n))
    return symmetrize(V @ apply_to_matrix(g, V.T @ A @ V, J) @ V.T)


def _psd_sqrt(M) -> np.ndarray:
    w, Q = np.linalg.eigh(symmetrize(M))
    return symmetrize((Q * np.sqrt(np.clip(w, 0.0, None))) @ Q.T)


def _inv_guarded(M) -> np.ndarray:
    """Inverse of a positive definite matrix, refusing ill-conditioned input."""
    w, Q = np.linalg.eigh(symmetrize(M))
    if w[0] <= 0 or w[-1] / w[0] > COND_LIMIT:
        raise SingularError(f"resolvent factor not safely invertible (eigenvalues {w[0]:.3g}..{w[-1]:.3g})")
    return symmetrize((Q / w) @ Q.T)


def _check_above(g: Expr, lam: float, *mats):
    for M in mats:
        vals = fc.evaluate(g, np.linalg.eigvalsh(symmetrize(M)))
        if np.any(vals <= lam):
            raise PreconditionError(f"g <= {lam} on the spectrum")


# --------------------------------------------------------------------------
# residuals
# --------------------------------------------------------------------------


def residual_brown(g: Expr, lam: float, scene: SpectralScene) -> np.ndarray:
    """``g(A) - P g(PAP) P - lam (I - P)``."""
    J, A, P = scene.interval, scene.A, scene.P
    n = scene.n
    return symmetrize(apply_to_matrix(g, A, J) - _compress(g, A, P, J) - lam * (np.eye(n) - P))


def residual_davis(g: Expr, scene: SpectralScene) -> np.ndarray:
    """``P g(A) P - P g(PAP) P``."""
    J, A, P = scene.interval, scene.A, scene.P
    return symmetrize(P @ apply_to_matrix(g, A, J) @ P - _compress(g, A, P, J))


def residual_jensen(g: Expr, s: float, A, B, J: Interval) -> np.ndarray:
    """``s g(A) + (1-s) g(B) - g(sA + (1-s)B)``."""
    gA, gB = apply_to_matrix(g, A, J), apply_to_matrix(g, B, J)
    return symmetrize(s * gA + (1 - s) * gB - apply_to_matrix(g, s * A + (1 - s) * B, J))


def residual_prop21_iii(g: Expr, lam: float, s: float, A, B, J: Interval) -> np.ndarray:
    """``s g(A) + (1-s) g(B) - g(sA + (1-s) B) - s(1-s) D M^-1 D``.

    ``D = g(A) - g(B)`` and ``M = s g(B) + (1-s) g(A) - lam I``.
    """
    if not 0 < s < 1:
        raise ValueError("s must lie in (0, 1)")
    _check_above(g, lam, A, B)
    A, B = symmetrize(A), symmetrize(B)
    gA, gB = apply_to_matrix(g, A, J), apply_to_matrix(g, B, J)
    D = gA - gB
    M = s * gB + (1 - s) * gA - lam * np.eye(A.shape[0])
    gap = s * gA + (1 - s) * gB - apply_to_matrix(g, s * A + (1 - s) * B, J)
    return symmetrize(gap - s * (1 - s) * D @ _inv_guarded(M) @ D)


def residual_prop21_ii(g: Expr, lam: float, A, B, J: Interval) -> np.ndarray:
    """Midpoint form: ``residual_prop21_iii`` at ``s = 1/2``."""
    return residual_prop21_iii(g, lam, 0.5, A, B, J)


def residual_prop21_iv(g: Expr, lam: float, scene: SpectralScene) -> np.ndarray:
    """Contraction form with ``S`` from the scene.

    LHS is ``S* g(A) S + R g(B) R - g(S* A S + R B R)`` with
    ``R = sqrt(I - S*S)``; the subtracted term is ``X M^-1 X*`` where
    ``X = S* g(A) R' - R g(B) S*``, ``R' = sqrt(I - SS*)`` and
    ``M = R' g(A) R' + S g(B) S* - lam I``.
    """
    J, A, B, S = scene.interval, scene.A, scene.B, scene.S
    _check_above(g, lam, A, B)
    n = scene.n
    I = np.eye(n)
    R = _psd_sqrt(I - S.T @ S)
    Rp = _psd_sqrt(I - S @ S.T)
    gA, gB = apply_to_matrix(g, A, J), apply_to_matrix(g, B, J)
    lhs = S.T @ gA @ S + R @ gB @ R - apply_to_matrix(g, S.T @ A @ S + R @ B @ R, J)
    X = S.T @ gA @ Rp - R @ gB @ S.T
    M = Rp @ gA @ Rp + S @ gB @ S.T - lam * I
    return symmetrize(lhs - X @ _inv_guarded(M) @ X.T)


def residual_monotone_pair(f: Expr, A, B, J: Interval, tol: float = 1e-12) -> np.ndarray:
    """``f(B) - f(A)`` for ``A <= B``."""
    A, B = symmetrize(A), symmetrize(B)
    gap = np.linalg.eigvalsh(B - A)
    if gap.size and gap[0] < -tol * max(1.0, float(np.max(np.abs(gap)))):
        raise PreconditionError("B - A is not positive semi-definite")
    return symmetrize(apply_to_matrix(f, B, J) - apply_to_matrix(f, A, J))


def monotone_pair(scene: SpectralScene, cap: float = 10.0) -> tuple[np.ndarray, np.ndarray]:
    """``(A, C)`` with ``C = A + c (B - lambda_min(B) I) >= A`` inside the window.

    ``c`` is the scene's ``s`` times the largest step keeping ``C`` in the
    sampling window.
    """
    _, hi = sampling_window(scene.interval, cap=cap)
    A, B = scene.A, scene.B
    wB = np.linalg.eigvalsh(B)
    H = B - wB[0] * np.eye(scene.n)
    spread = wB[-1] - wB[0]
    room = hi - np.linalg.eigvalsh(A)[-1]
    c = scene.s * room / spread if spread > 0 and room > 0 else 0.0
    return A, symmetrize(A + c * H)


def eq2_sides(A, B, s: float) -> tuple[np.ndarray, np.ndarray]:
    """Both sides of the harmonic-mean identity for ``A, B > 0``.

    LHS ``s A^-1 + (1-s) B^-1 - (sA + (1-s)B)^-1``; RHS
    ``s(1-s) (A^-1 - B^-1) ((1-s) A^-1 + s B^-1)^-1 (A^-1 - B^-1)``.
    """
    A, B = symmetrize(A), symmetrize(B)
    Ai, Bi = _inv_guarded(A), _inv_guarded(B)
    lhs = s * Ai + (1 - s) * Bi - _inv_guarded(s * A + (1 - s) * B)
    D = Ai - Bi
    rhs = s * (1 - s) * D @ _inv_guarded((1 - s) * Ai + s * Bi) @ D
    return symmetrize(lhs), symmetrize(rhs)


def verify_eq2_identity(A, B, s: float) -> float:
    """Spectral norm of LHS - RHS of the harmonic-mean identity."""
    lhs, rhs = eq2_sides(A, B, s)
    return float(np.linalg.norm(lhs - rhs, 2))


# --------------------------------------------------------------------------
# falsification driver
# --------------------------------------------------------------------------

CLAIMS = {
    "soc": ("brown", "ii", "iii", "iv"),
    "oc": ("davis", "jensen"),
    "om": ("monotone",),
}
_INEQUALITIES = ("brown", "davis", "jensen", "ii", "iii", "iv", "monotone")


def residual(g: Expr, inequality: str, scene: SpectralScene) -> np.ndarray:
    """Residual of the named inequality on a scene (uses its ``lam`` and ``s``)."""
    J, lam = scene.interval, scene.lam
    if inequality == "brown":
        return residual_brown(g, lam, scene)
    if inequality == "davis":
        return residual_davis(g, scene)
    if inequality == "jensen":
        return residual_jensen(g, scene.s, scene.A, scene.B, J)
    if inequality == "ii":
        return residual_prop21_ii(g, lam, scene.A, scene.B, J)
    if inequality == "iii":
        return residual_prop21_iii(g, lam, scene.s, scene.A, scene.B, J)
    if inequality == "iv":
        return residual_prop21_iv(g, lam, scene)
    if inequality == "monotone":
        A, C = monotone_pair(scene)
        return residual_monotone_pair(g, A, C, J)
    raise ValueError(f"unknown inequality {inequality!r}")


def scene_scale(g: Expr, scene: SpectralScene) -> float:
    """``max(1, |g(A)|, |g(B)|)``: the magnitude PSD margins are measured against."""
    vals = [np.abs(fc.evaluate(g, np.linalg.eigvalsh(M))).max() for M in (scene.A, scene.B)]
    return max(1.0, *map(float, vals))


@dataclass
class Witness:
    """A scene on which an inequality fails, with everything needed to replay it."""

    scene: SpectralScene
    inequality: str
    margin: float
    residual: np.ndarray
    function: str
    claim: str
    scale: float = 1.0
    tol: float = 1e-9
    trial: int | None = None

    def to_dict(self) -> dict:
        return {
            "kind": "witness",
            "function": self.function,
            "claim": self.claim,
            "inequality": self.inequality,
            "margin": self.margin,
            "scale": self.scale,
            "tol": self.tol,
            "trial": self.trial,
            "seed": list(self.scene.seed),
            "scene": self.scene.to_dict(),
            "residual": self.residual.tolist(),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "Witness":
        return cls(SpectralScene.from_dict(d["scene"]), d["inequality"], float(d["margin"]),
                   np.array(d["residual"], dtype=float), d["function"], d["claim"],
                   float(d.get("scale", 1.0)), float(d.get("tol", 1e-9)), d.get("trial"))


@dataclass
class NoCounterexample:
    function: str
    claim: str
    trials: int
    tested: dict = field(default_factory=dict)
    discarded: dict = field(default_factory=dict)
    min_margin: float = math.inf
    dims: list = field(default_factory=list)
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "kind": "no_counterexample",
            "function": self.function,
            "claim": self.claim,
            "trials": self.trials,
            "tested": self.tested,
            "discarded": self.discarded,
            "min_relative_margin": None if math.isinf(self.min_margin) else self.min_margin,
            "dims": self.dims,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class FalsifyConfig:
    trials: int = 1000
    maxdim: int = 6
    seed: int = 0
    lam: float = 0.0
    tol: float = 1e-9
    cap: float = 10.0

    def __post_init__(self):
        if self.trials < 1 or self.maxdim < 1:
            raise ValueError("trials and maxdim must be positive")


def _dim_schedule(i: int, cfg: FalsifyConfig) -> int:
    # ascending blocks: cheap dimensions first
    return 1 + (i * cfg.maxdim) // cfg.trials


def falsify(g: Expr, claim: str, J: Interval, cfg: FalsifyConfig | None = None):
    """Search random scenes for a violation of ``claim``.

    ``claim`` is a class id (``soc``, ``oc``, ``om``) or a single
    inequality id.  Trial ``i`` draws its scene from the seed stream
    ``(seed, i)`` and has dimension growing from 1 to ``maxdim``.  Returns
    the first :class:`Witness` whose margin is below ``-10 tol scale`` or a
    :class:`NoCounterexample` summary.  Scenes where a compression leaves
    ``J`` or a resolvent is ill-conditioned are discarded, not counted.
    """
    cfg = cfg or FalsifyConfig()
    forms = CLAIMS.get(claim, (claim,))
    for form in forms:
        if form not in _INEQUALITIES:
            raise ValueError(f"unknown claim {claim!r}")
    text = str(g)
    summary = NoCounterexample(text, claim, cfg.trials, {f: 0 for f in forms},
                               {f: 0 for f in forms}, dims=[1, cfg.maxdim], seed=cfg.seed)
    for i in range(cfg.trials):
        rng = np.random.default_rng([cfg.seed, i])
        scene = sample_scene(J, _dim_schedule(i, cfg), rng, seed=[cfg.seed, i], cap=cfg.cap)
        scene = replace(scene, lam=cfg.lam)
        try:
            scale = scene_scale(g, scene)
        except DomainError:
            summary.discarded[forms[0]] += 1
            continue
        for form in forms:
            try:
                R = residual(g, form, scene)
            except (SpectrumError, SingularError, PreconditionError, DomainError):
                summary.discarded[form] += 1
                continue
            summary.tested[form] += 1
            margin = float(np.linalg.eigvalsh(R)[0])
            summary.min_margin = min(summary.min_margin, margin / scale)
            if margin < -10 * cfg.tol * scale:
                return Witness(scene, form, margin, R, text, claim, scale, cfg.tol, i)
    return summary


def replay(witness: Witness | dict, g: Expr | None = None) -> float:
    """Recompute the margin of a witness; ``g`` defaults to the recorded text."""
    if isinstance(witness, dict):
        witness = Witness.from_dict(witness)
    if g is None:
        from .parsing import parse_function

        g = parse_function(witness.function)
    return float(np.linalg.eigvalsh(residual(g, witness.inequality, witness.scene))[0])
