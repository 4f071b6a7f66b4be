"""Class-membership certifiers.

Each certifier returns a :class:`Verdict`.  A *Certified* verdict means
every configured kernel test passed; it is numerical evidence and records
everything needed to replay the run.  A *Refuted* verdict carries a
witness (grid, kernel, offending eigenpair) that can be re-checked with
:func:`replay_kernel_witness`.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from . import fncore as fc
from .fncore import DomainError, Expr, Interval
from .kernels import (
    DEFAULT_PSD_TOL,
    EmptyCore,
    cg_matrix,
    divided_difference,
    loewner_matrix,
    make_grid,
    psd_check,
)

__all__ = [
    "CERTIFIED",
    "REFUTED",
    "INCONCLUSIVE",
    "CertifyConfig",
    "Verdict",
    "probe_points",
    "certify_operator_monotone",
    "certify_operator_convex",
    "certify_strongly_operator_convex",
    "soc_via_cg",
    "soc_via_reciprocal",
    "certify_completely_monotone",
    "certify_bernstein",
    "certify",
    "cross_validate_halfline",
    "replay_kernel_witness",
]

CERTIFIED = "certified"
REFUTED = "refuted"
INCONCLUSIVE = "inconclusive"

HALFLINE = Interval(0.0, math.inf)


@dataclass(frozen=True)
class CertifyConfig:
    grid_sizes: tuple[int, ...] = (4, 8, 12)
    eps: float | None = None
    psd_tol: float = DEFAULT_PSD_TOL
    n_probes: int = 5
    max_order: int = 8
    seed: int = 0
    cap: float = 1e4

    def __post_init__(self):
        object.__setattr__(self, "grid_sizes", tuple(sorted(int(n) for n in self.grid_sizes)))
        if not self.grid_sizes or min(self.grid_sizes) < 2:
            raise ValueError("grid sizes must all be >= 2")
        if self.max_order < 1:
            raise ValueError("max_order must be >= 1")
        if self.n_probes < 1:
            raise ValueError("n_probes must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["grid_sizes"] = list(self.grid_sizes)
        return d


@dataclass
class Verdict:
    status: str
    cls: str
    function: str
    interval: Interval | None = None
    evidence: dict | None = None
    witness: dict | None = None
    reason: str | None = None
    config: dict = field(default_factory=dict)

    @property
    def certified(self) -> bool:
        return self.status == CERTIFIED

    @property
    def refuted(self) -> bool:
        return self.status == REFUTED

    def to_dict(self) -> dict:
        return {
            "tool": "opfunc",
            "version": __version__,
            "status": self.status,
            "class": self.cls,
            "function": self.function,
            "interval": None if self.interval is None else self.interval.to_dict(),
            "evidence": self.evidence,
            "witness": self.witness,
            "reason": self.reason,
            "config": self.config,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), default=_jsonable, **kw)


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, Interval):
        return x.to_dict()
    raise TypeError(f"cannot serialise {type(x).__name__}")


def probe_points(J: Interval, cfg: CertifyConfig) -> np.ndarray:
    """Seeded interior base points, drawn uniformly in the grid parameter."""
    rng = np.random.default_rng(cfg.seed)
    u = rng.uniform(0.05, 0.95, cfg.n_probes)
    return np.asarray(J.param(u, cfg.eps, cfg.cap), dtype=float)


def _verdict(status, cls, f, J, cfg, **kw) -> Verdict:
    return Verdict(status, cls, str(f), J, config=cfg.to_dict() if cfg else {}, **kw)


def _kernel_witness(K, res, **extra) -> dict:
    w = {
        "kernel": K.label,
        "grid": K.points.tolist(),
        "t0": K.t0,
        "min_eigenvalue": res.min_eigenvalue,
        "threshold": res.threshold,
        "vector": res.vector.tolist(),
    }
    w.update(extra)
    return w


def _grid_evidence(cfg, J, kernel, min_eigs, **extra) -> dict:
    ev = {
        "kernel": kernel,
        "grid_sizes": list(cfg.grid_sizes),
        "eps": J.default_retreat() if cfg.eps is None else cfg.eps,
        "cap": cfg.cap,
        "psd_tol": cfg.psd_tol,
        "seed": cfg.seed,
        "min_eigenvalues": min_eigs,
        "note": "passed all kernel tests on these grids; numerical evidence, not proof",
    }
    ev.update(extra)
    return ev


def certify_operator_monotone(f: Expr, J: Interval, cfg: CertifyConfig | None = None) -> Verdict:
    """Loewner-kernel test on every configured grid size."""
    cfg = cfg or CertifyConfig()
    try:
        fc.validate_interval(f, J)
        min_eigs = []
        for n in cfg.grid_sizes:
            K = loewner_matrix(f, make_grid(J, n, cfg.eps, cfg.cap))
            res = psd_check(K, cfg.psd_tol)
            if not res:
                return _verdict(REFUTED, "om", f, J, cfg, witness=_kernel_witness(K, res, grid_size=n))
            min_eigs.append(res.min_eigenvalue)
    except (DomainError, EmptyCore) as err:
        return _verdict(INCONCLUSIVE, "om", f, J, cfg, reason=str(err))
    return _verdict(CERTIFIED, "om", f, J, cfg, evidence=_grid_evidence(cfg, J, "loewner", min_eigs))


def certify_operator_convex(g: Expr, J: Interval, cfg: CertifyConfig | None = None) -> Verdict:
    """Operator monotonicity of ``K_g(., t0)`` at every probe ``t0``.

    All probes must pass; the first failure (lowest grid size, then lowest
    probe index) is reported.
    """
    cfg = cfg or CertifyConfig()
    try:
        fc.validate_interval(g, J)
        probes = probe_points(J, cfg)
        kfuncs = [divided_difference(g, t0) for t0 in probes]
        min_eigs = []
        for n in cfg.grid_sizes:
            grid = make_grid(J, n, cfg.eps, cfg.cap)
            for i, (t0, k) in enumerate(zip(probes, kfuncs)):
                K = loewner_matrix(k, grid)
                res = psd_check(K, cfg.psd_tol)
                if not res:
                    w = _kernel_witness(K, res, grid_size=n, probe=i, base_point=float(t0),
                                        divided_difference=str(k))
                    return _verdict(REFUTED, "oc", g, J, cfg, witness=w)
                min_eigs.append(res.min_eigenvalue)
    except (DomainError, EmptyCore) as err:
        return _verdict(INCONCLUSIVE, "oc", g, J, cfg, reason=str(err))
    ev = _grid_evidence(cfg, J, "loewner of divided differences", min_eigs,
                        base_points=probes.tolist())
    return _verdict(CERTIFIED, "oc", g, J, cfg, evidence=ev)


def _is_zero(g: Expr, J: Interval, cfg: CertifyConfig) -> bool:
    vals = fc.evaluate(g, make_grid(J, 64, cfg.eps, cfg.cap))
    return bool(np.max(np.abs(vals)) < cfg.psd_tol)


def _cg_route(g, J, cfg):
    probes = probe_points(J, cfg)
    min_eigs = []
    for n in cfg.grid_sizes:
        grid = make_grid(J, n, cfg.eps, cfg.cap)
        for i, t0 in enumerate(probes):
            K = cg_matrix(g, t0, grid)
            res = psd_check(K, cfg.psd_tol)
            if not res:
                return False, _kernel_witness(K, res, grid_size=n, probe=i)
            min_eigs.append(res.min_eigenvalue)
    return True, {"min_eigenvalues": min_eigs, "base_points": probes.tolist()}


def _reciprocal_route(g, J, cfg) -> Verdict:
    """``g > 0`` on the grids and ``-1/g`` operator convex."""
    for n in cfg.grid_sizes:
        grid = make_grid(J, n, cfg.eps, cfg.cap)
        vals = fc.evaluate(g, grid)
        if np.any(vals <= 0):
            i = int(np.argmin(vals))
            return _verdict(REFUTED, "oc", g, J, cfg,
                            witness={"kernel": "positivity", "t": float(grid[i]), "value": float(vals[i])})
    return certify_operator_convex(fc.neg(fc.div(1.0, g)), J, cfg)


def soc_via_cg(g: Expr, J: Interval, cfg: CertifyConfig | None = None) -> Verdict:
    """SOC decided by the C_g kernel alone."""
    cfg = cfg or CertifyConfig()
    try:
        fc.validate_interval(g, J)
        ok, info = _cg_route(g, J, cfg)
    except (DomainError, EmptyCore) as err:
        return _verdict(INCONCLUSIVE, "soc", g, J, cfg, reason=str(err))
    if not ok:
        return _verdict(REFUTED, "soc", g, J, cfg, witness=info)
    ev = _grid_evidence(cfg, J, "cg", info["min_eigenvalues"], base_points=info["base_points"])
    return _verdict(CERTIFIED, "soc", g, J, cfg, evidence=ev)


def soc_via_reciprocal(g: Expr, J: Interval, cfg: CertifyConfig | None = None) -> Verdict:
    """SOC decided by ``g > 0`` and operator convexity of ``-1/g`` alone."""
    cfg = cfg or CertifyConfig()
    try:
        fc.validate_interval(g, J)
        v = _reciprocal_route(g, J, cfg)
    except (DomainError, EmptyCore) as err:
        return _verdict(INCONCLUSIVE, "soc", g, J, cfg, reason=str(err))
    return _verdict(v.status, "soc", g, J, cfg, evidence=v.evidence, witness=v.witness, reason=v.reason)


def certify_strongly_operator_convex(g: Expr, J: Interval, cfg: CertifyConfig | None = None) -> Verdict:
    """C_g kernel test, cross-checked against ``g > 0`` with ``-1/g`` convex.

    The kernel route alone can refute.  Certification needs both routes to
    pass; if they disagree the verdict is inconclusive.
    """
    cfg = cfg or CertifyConfig()
    try:
        fc.validate_interval(g, J)
        if _is_zero(g, J, cfg):
            ev = {"zero_function": True, "psd_tol": cfg.psd_tol, "grid_size": 64}
            return _verdict(CERTIFIED, "soc", g, J, cfg, evidence=ev)
        ok, info = _cg_route(g, J, cfg)
        if not ok:
            return _verdict(REFUTED, "soc", g, J, cfg, witness=info)
        recip = _reciprocal_route(g, J, cfg)
    except (DomainError, EmptyCore) as err:
        return _verdict(INCONCLUSIVE, "soc", g, J, cfg, reason=str(err))
    if recip.status != CERTIFIED:
        reason = (f"C_g kernel passed but the reciprocal route is {recip.status}: "
                  f"{recip.reason or recip.witness}")
        return _verdict(INCONCLUSIVE, "soc", g, J, cfg, reason=reason)
    ev = _grid_evidence(cfg, J, "cg", info["min_eigenvalues"], base_points=info["base_points"],
                        reciprocal_route=recip.evidence)
    return _verdict(CERTIFIED, "soc", g, J, cfg, evidence=ev)


def _sign_scan(h, grid, orders, sign, cls, tol):
    grid = make_grid(HALFLINE, 16) if grid is None else np.asarray(grid, dtype=float)
    try:
        for n in orders:
            vals = sign(n) * fc.evaluate(fc.differentiate(h, n), grid)
            bad = vals < -tol * np.maximum(1.0, np.abs(vals))
            if np.any(bad):
                i = int(np.argmax(bad))
                w = {"order": n, "t": float(grid[i]), "signed_derivative": float(vals[i])}
                return Verdict(REFUTED, cls, str(h), HALFLINE, witness=w)
    except DomainError as err:
        return Verdict(INCONCLUSIVE, cls, str(h), HALFLINE, reason=str(err))
    ev = {"grid": grid.tolist(), "max_order": max(orders), "tol": tol}
    return Verdict(CERTIFIED, cls, str(h), HALFLINE, evidence=ev)


def certify_completely_monotone(h: Expr, grid=None, N: int = 8, tol: float = DEFAULT_PSD_TOL) -> Verdict:
    """``(-1)^n h^(n)(t) >= 0`` for ``n = 0..N`` on a grid in ``(0, inf)``."""
    return _sign_scan(h, grid, range(N + 1), lambda n: (-1.0) ** n, "cm", tol)


def certify_bernstein(f: Expr, grid=None, N: int = 8, tol: float = DEFAULT_PSD_TOL) -> Verdict:
    """``(-1)^(n-1) f^(n)(t) >= 0`` for ``n = 1..N``; ``f >= 0`` is not required."""
    return _sign_scan(f, grid, range(1, N + 1), lambda n: (-1.0) ** (n - 1), "bernstein", tol)


_CERTIFIERS = {
    "om": certify_operator_monotone,
    "oc": certify_operator_convex,
    "soc": certify_strongly_operator_convex,
}


def certify(f: Expr, cls: str, J: Interval, cfg: CertifyConfig | None = None) -> Verdict:
    """Dispatch on a class id: ``om``, ``oc``, ``soc``, ``cm`` or ``bernstein``."""
    cfg = cfg or CertifyConfig()
    if cls in _CERTIFIERS:
        return _CERTIFIERS[cls](f, J, cfg)
    if cls in ("cm", "bernstein"):
        grid = make_grid(J, 16, cfg.eps, cfg.cap)
        fn = certify_completely_monotone if cls == "cm" else certify_bernstein
        v = fn(f, grid, cfg.max_order, cfg.psd_tol)
        v.interval, v.config = J, cfg.to_dict()
        return v
    raise ValueError(f"unknown class {cls!r}")


def _positive_decreasing(g, J, cfg) -> Verdict:
    try:
        for n in cfg.grid_sizes:
            grid = make_grid(J, n, cfg.eps, cfg.cap)
            vals = fc.evaluate(g, grid)
            if np.any(vals <= 0):
                i = int(np.argmin(vals))
                return _verdict(REFUTED, "positive_decreasing", g, J, cfg,
                                witness={"kernel": "positivity", "t": float(grid[i]),
                                         "value": float(vals[i])})
    except DomainError as err:
        return _verdict(INCONCLUSIVE, "positive_decreasing", g, J, cfg, reason=str(err))
    v = certify_operator_monotone(fc.neg(g), J, cfg)
    v.cls, v.function = "positive_decreasing", str(g)
    return v


def cross_validate_halfline(g: Expr, a: float, cfg: CertifyConfig | None = None) -> dict:
    """Three independent looks at ``g`` on ``(a, inf)``.

    SOC via C_g; ``g > 0`` and operator decreasing; and, for ``a = 0``,
    complete monotonicity.  The first two must agree for non-constant
    ``g``; SOC must imply CM.
    """
    cfg = cfg or CertifyConfig()
    J = Interval(a, math.inf)
    soc = certify_strongly_operator_convex(g, J, cfg)
    dec = _positive_decreasing(g, J, cfg)
    cm = None
    if a == 0:
        cm = certify_completely_monotone(g, make_grid(J, 16, cfg.eps, cfg.cap), cfg.max_order, cfg.psd_tol)
    report = {
        "function": str(g),
        "interval": J.to_dict(),
        "soc": soc.status,
        "positive_decreasing": dec.status,
        "cm": None if cm is None else cm.status,
        "equivalence_holds": soc.status == dec.status,
        "cm_implication_holds": cm is None or not (soc.certified and cm.refuted),
        "verdicts": {"soc": soc, "positive_decreasing": dec, "cm": cm},
    }
    return report


def replay_kernel_witness(f: Expr, witness: dict, cls: str) -> float:
    """Recompute the smallest eigenvalue at a kernel witness.

    ``cls`` selects how ``f`` enters: ``om`` uses its Loewner matrix,
    ``oc`` the Loewner matrix of its divided difference at the recorded
    base point, ``soc`` the C_g matrix.
    """
    grid = np.asarray(witness["grid"], dtype=float)
    if witness["kernel"] == "cg":
        K = cg_matrix(f, witness["t0"], grid)
    elif cls == "oc":
        K = loewner_matrix(divided_difference(f, witness["base_point"]), grid)
    else:
        K = loewner_matrix(f, grid)
    return psd_check(K).min_eigenvalue
