"""Transforms between the three classes and the iterated processes built from them.

The elementary moves are

* ``kf_transform``: OM ``f`` to the SOC divided difference ``K_f(., t0)``;
* ``neg_inv``: SOC ``g`` to the negative OC function ``-1/g`` and back;
* ``om_step``: OC ``g`` to the OM divided difference ``K_g(., t1)``;
* ``backward_step``: multiply by ``t - t0`` and shift, undoing a divided
  difference (OM to negative OC, SOC to OM).

Labels on :class:`LabeledFunc` record what the theory guarantees for the
output given a correctly labelled input; the test-suite checks them
independently with :mod:`opfunc.certify`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import fncore as fc
from . import symbolic
from .certify import CertifyConfig, certify
from .fncore import DomainError, Expr, Interval
from .kernels import divided_difference, make_grid, value_at

__all__ = [
    "OM", "OC", "SOC", "CM", "BERNSTEIN",
    "LabelError",
    "ZeroFunction",
    "EndpointRepetition",
    "Infeasible",
    "PreconditionError",
    "LabeledFunc",
    "ProcessTrace",
    "label_seed",
    "kf_transform",
    "neg_inv",
    "om_step",
    "backward_step",
    "forward_process",
    "star_process",
    "backward_process",
    "compose_om_soc",
    "compose_oc",
    "antiderivative",
    "soc_zoo",
    "is_zero",
]

OM, OC, SOC, CM, BERNSTEIN = "OM", "OC", "SOC", "CM", "Bernstein"
_CERTIFY_CLASS = {OM: "om", OC: "oc", SOC: "soc", CM: "cm", BERNSTEIN: "bernstein"}


class LabelError(ValueError):
    """The input does not carry the label a transform requires."""


class ZeroFunction(ValueError):
    """A reciprocal of an identically vanishing function was requested."""


class EndpointRepetition(ValueError):
    """An endpoint was used as base point twice in a row."""


class Infeasible(ValueError):
    """No shift constant makes the backward step strictly negative."""


class PreconditionError(ValueError):
    """Hypotheses of a composition or zoo construction fail."""


@dataclass(frozen=True, eq=False)
class LabeledFunc:
    expr: Expr
    interval: Interval
    label: str | None
    provenance: tuple = ()

    @property
    def last_point(self) -> float | None:
        for step in reversed(self.provenance):
            if "t" in step:
                return step["t"]
        return None

    def extend(self, expr: Expr, label: str | None, interval: Interval | None = None, **step) -> "LabeledFunc":
        return LabeledFunc(expr, interval or self.interval, label, self.provenance + (step,))

    def __str__(self):
        return f"{self.expr} [{self.label or 'unlabelled'} on {self.interval}]"


@dataclass
class ProcessTrace:
    kind: str
    steps: list = field(default_factory=list)
    terminated: bool = False
    reason: str | None = None
    error: str | None = None
    checks: list = field(default_factory=list)

    @property
    def final(self) -> LabeledFunc:
        return self.steps[-1]

    @property
    def labels(self) -> list:
        return [s.label for s in self.steps]

    def to_dict(self) -> dict:
        out = []
        for i, s in enumerate(self.steps):
            last = s.provenance[-1] if s.provenance else {}
            out.append({
                "index": i,
                "function": str(s.expr),
                "simplified": _safe_simplified(s.expr),
                "label": s.label,
                "interval": s.interval.to_dict(),
                "op": last.get("op", "seed"),
                "params": {k: v for k, v in last.items() if k not in ("op", "degree")},
                "degree": last.get("degree"),
                "check": self.checks[i] if i < len(self.checks) else None,
            })
        final = out[-1] if out else None
        return {
            "kind": self.kind,
            "steps": out,
            "terminated": self.terminated,
            "reason": self.reason,
            "error": self.error,
            "final": None if final is None else final["simplified"],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _safe_simplified(f: Expr) -> str:
    try:
        return symbolic.simplified_text(f)
    except (TypeError, ValueError):
        return str(f)


def _degree(f: Expr) -> int | None:
    try:
        return symbolic.rational_degree(f)
    except (TypeError, ValueError):
        return None


def _tidy(f: Expr) -> tuple[Expr, int | None]:
    """Rational iterates are replaced by their lowest-terms form."""
    try:
        res = symbolic.rational_form(f)
    except (TypeError, ValueError):
        return f, None
    return (f, None) if res is None else res


def _require(f: LabeledFunc, *labels):
    if f.label not in labels:
        raise LabelError(f"expected a function labelled {' or '.join(labels)}, got {f.label}")


def _grid_values(f: Expr, J: Interval, n: int = 64) -> np.ndarray:
    grid = make_grid(J, n)
    try:
        return fc.evaluate(f, grid)
    except DomainError:
        vals = []
        for x in grid:
            try:
                vals.append(fc.evaluate(f, x))
            except DomainError:
                pass
        return np.array(vals)


def is_zero(f: Expr, J: Interval, scale: float = 1.0) -> bool:
    """Identically zero: ``max |f| < 1e-12 * scale`` on a 64-point grid."""
    if f.is_const:
        return f.value == 0
    vals = _grid_values(f, J)
    return vals.size > 0 and float(np.max(np.abs(vals))) < 1e-12 * max(1.0, scale)


def _check_point(f: LabeledFunc, t: float):
    J = f.interval
    if not J.in_closure(t):
        raise DomainError(f"base point {t} is outside the closure of {J}")
    prev = f.last_point
    if prev is not None and prev == t and J.is_endpoint(t):
        raise EndpointRepetition(f"endpoint {t} cannot be used twice in a row")


def label_seed(expr: Expr, J: Interval, label: str = OM, cfg: CertifyConfig | None = None,
               check: bool = True) -> LabeledFunc:
    """Attach ``label`` to ``expr`` after certifying it (unless ``check`` is off)."""
    if check:
        v = certify(expr, _CERTIFY_CLASS[label], J, cfg)
        if not v.certified:
            raise PreconditionError(f"{expr} is not certified {label} on {J}: {v.status}")
    return LabeledFunc(expr, J, label, ({"op": "seed", "label": label, "degree": _degree(expr)},))


# --------------------------------------------------------------------------
# elementary transforms
# --------------------------------------------------------------------------


def kf_transform(f: LabeledFunc, t0: float) -> LabeledFunc:
    """``K_f(., t0)`` of an OM function; strongly operator convex."""
    _require(f, OM)
    _check_point(f, t0)
    k, deg = _tidy(divided_difference(f.expr, t0))
    return f.extend(k, SOC, op="kf", t=float(t0), degree=deg)


def _closure_extension(expr: Expr, J: Interval) -> Interval:
    """Close the finite endpoints of ``J`` at which ``expr`` has a finite value or limit."""
    lo_c, hi_c = J.lo_closed, J.hi_closed
    for side in ("lo", "hi"):
        x = getattr(J, side)
        if math.isfinite(x):
            try:
                value_at(expr, x)
            except DomainError:
                continue
            if side == "lo":
                lo_c = True
            else:
                hi_c = True
    return Interval(J.lo, J.hi, lo_c, hi_c)


def neg_inv(g: LabeledFunc) -> LabeledFunc:
    """``-1/g``: SOC to strictly negative OC, or strictly negative OC to SOC.

    For an SOC input the result is continued to finite endpoints where it
    has a finite value.
    """
    _require(g, SOC, OC)
    if is_zero(g.expr, g.interval):
        raise ZeroFunction(f"{g.expr} vanishes identically on {g.interval}")
    vals = _grid_values(g.expr, g.interval)
    h, deg = _tidy(fc.neg(fc.div(1.0, g.expr)))
    if g.label == SOC:
        if np.any(vals <= 0):
            raise PreconditionError("a nonzero SOC function must be strictly positive")
        return g.extend(h, OC, _closure_extension(h, g.interval), op="neg_inv", degree=deg)
    if np.any(vals >= 0):
        raise PreconditionError("-1/g is SOC only for strictly negative OC g")
    return g.extend(h, SOC, op="neg_inv", degree=deg)


def om_step(g: LabeledFunc, t1: float) -> LabeledFunc:
    """``K_g(., t1)`` of an OC function; operator monotone."""
    _require(g, OC)
    _check_point(g, t1)
    k, deg = _tidy(divided_difference(g.expr, t1))
    return g.extend(k, OM, op="om_step", t=float(t1), degree=deg)


def _sup_estimate(h: Expr, J: Interval) -> float:
    """Supremum of ``h`` over ``J``: grid maximum plus probes toward each end.

    Returns ``inf`` when the probes grow without bound.
    """
    vals = _grid_values(h, J)
    sup = float(np.max(vals)) if vals.size else -math.inf
    scale = max(1.0, float(np.max(np.abs(vals))) if vals.size else 1.0)
    for side in (-1, 1):
        end = J.lo if side < 0 else J.hi
        if math.isfinite(end):
            width = J.length if J.bounded else 1.0
            probes = [end - side * width * 10.0 ** -k for k in range(3, 9)]
        else:
            anchor = J.hi if side < 0 else J.lo
            anchor = anchor if math.isfinite(anchor) else 0.0
            probes = [anchor + side * 10.0 ** k for k in range(3, 9)]
        seq = []
        for x in probes:
            try:
                seq.append(fc.evaluate(h, x))
            except DomainError:
                break
        if not seq:
            continue
        if len(seq) >= 3 and seq[-1] > seq[-2] > seq[-3] and seq[-1] > 1e3 * scale:
            return math.inf
        sup = max(sup, max(seq))
    return sup


def backward_step(f: LabeledFunc, t0: float, c0: float | None = None) -> LabeledFunc:
    """``(t - t0) f(t) + c0``.

    From an OM ``f`` this is OC and ``c0`` must make it strictly negative;
    when omitted, ``c0 = -sup - 0.01 * scale``.  From an SOC ``f`` it is
    OM for every ``c0`` (default 0).
    """
    _require(f, OM, SOC)
    _check_point(f, t0)
    J = f.interval
    prod = fc.mul(fc.add(fc.T, -float(t0)), f.expr)
    if f.label == SOC:
        c = 0.0 if c0 is None else float(c0)
        h, deg = _tidy(fc.add(prod, c))
        return f.extend(h, OM, op="backward", t=float(t0), c=c, degree=deg,
                        **_measure_note(J, t0))
    sup = _sup_estimate(prod, J)
    if not math.isfinite(sup):
        raise Infeasible(f"(t - {fc.fmt_number(t0)}) f(t) is unbounded above on {J}; "
                         "restrict f to a smaller interval")
    vals = _grid_values(prod, J)
    scale = max(1.0, float(np.max(np.abs(vals))) if vals.size else 1.0)
    c = -sup - 0.01 * scale if c0 is None else float(c0)
    if sup + c >= 0:
        raise Infeasible(f"c0 = {c} leaves (t - t0) f(t) + c0 non-negative (sup ~ {sup + c:.3g})")
    h, deg = _tidy(fc.add(prod, c))
    return f.extend(h, OC, op="backward", t=float(t0), c=c, degree=deg, **_measure_note(J, t0))


def _measure_note(J: Interval, t0: float) -> dict:
    # endpoint base points need a measure-zero singleton, which closed forms cannot exhibit
    return {"measure_zero_unverified": True} if J.is_endpoint(t0) else {}


# --------------------------------------------------------------------------
# processes
# --------------------------------------------------------------------------


def _finish(trace: ProcessTrace, seed_rational: bool):
    trace.terminated = True
    trace.reason = "rational degree exhausted" if seed_rational else "constant reached"


def _verify(trace: ProcessTrace, cfg):
    for s in trace.steps:
        v = certify(s.expr, _CERTIFY_CLASS[s.label], s.interval, cfg)
        trace.checks.append(v.status)


def _run(kind: str, f0: Expr, J: Interval, moves, max_steps, cfg, check_seed, verify) -> ProcessTrace:
    trace = ProcessTrace(kind)
    cur = label_seed(f0, J, OM, cfg, check=check_seed)
    trace.steps.append(cur)
    rational = _degree(f0) is not None
    for n, move in enumerate(moves):
        if max_steps is not None and n >= max_steps:
            break
        try:
            nxt = move(cur)
        except (LabelError, ZeroFunction, EndpointRepetition, Infeasible, PreconditionError,
                DomainError) as err:
            trace.terminated = True
            trace.reason = "infeasible step"
            trace.error = f"{type(err).__name__}: {err}"
            break
        trace.steps.append(nxt)
        cur = nxt
        if is_zero(nxt.expr, nxt.interval):
            _finish(trace, rational)
            break
    if verify:
        _verify(trace, cfg)
    return trace


def forward_process(f0: Expr, J: Interval, points, max_steps: int | None = None,
                    cfg: CertifyConfig | None = None, check_seed: bool = True,
                    verify: bool = False) -> ProcessTrace:
    """``f0 -> K(., t0) -> -1/. -> K(., t1) -> ...`` with labels OM, SOC, OC, OM, ...

    Each divided difference consumes the next point; the run stops when the
    points are used up, after ``max_steps`` transforms, or when an iterate
    vanishes identically.
    """
    def moves():
        it = iter(points)
        while True:
            try:
                t0 = next(it)
            except StopIteration:
                return
            yield lambda f, t0=t0: kf_transform(f, t0)
            yield neg_inv
            try:
                t1 = next(it)
            except StopIteration:
                return
            yield lambda f, t1=t1: om_step(f, t1)

    return _run("forward", f0, J, moves(), max_steps, cfg, check_seed, verify)


def _star_move(f: LabeledFunc, t: float) -> LabeledFunc:
    _require(f, OM, SOC)
    _check_point(f, t)
    k, deg = _tidy(divided_difference(f.expr, t))
    return f.extend(k, SOC if f.label == OM else OM, op="star", t=float(t), degree=deg)


def star_process(f0: Expr, J: Interval, points, max_steps: int | None = None,
                 cfg: CertifyConfig | None = None, check_seed: bool = True,
                 verify: bool = False) -> ProcessTrace:
    """Repeated divided differences ``f*_{n+1} = K_{f*_n}(., t_n)``; labels alternate OM, SOC."""
    moves = (lambda f, t=t: _star_move(f, t) for t in points)
    return _run("star", f0, J, moves, max_steps, cfg, check_seed, verify)


def backward_process(f0: Expr, J: Interval, points, constants=None, max_steps: int | None = None,
                     cfg: CertifyConfig | None = None, check_seed: bool = True,
                     verify: bool = False) -> ProcessTrace:
    """``f0 -> (t - t0) f0 + c0 -> -1/. -> (t - t1) . + c1 -> ...``; labels OM, OC, SOC, OM, ..."""
    consts = list(constants) if constants is not None else [None] * len(points)
    if len(consts) != len(points):
        raise ValueError("need one shift constant per point")

    def moves():
        for i, (t, c) in enumerate(zip(points, consts)):
            yield lambda f, t=t, c=c: backward_step(f, t, c)
            if i % 2 == 0:
                yield neg_inv

    return _run("backward", f0, J, moves(), max_steps, cfg, check_seed, verify)


# --------------------------------------------------------------------------
# compositions, integration, and the half-line zoo
# --------------------------------------------------------------------------


def _range_inside(f: LabeledFunc, J_phi: Interval) -> bool:
    vals = _grid_values(f.expr, f.interval)
    return bool(np.all([J_phi.contains(v, 1e-12) for v in vals]))


def _certified(expr, cls, J, cfg) -> bool:
    return certify(expr, cls, J, cfg).certified


def compose_om_soc(phi: Expr, phi_interval: Interval, f: LabeledFunc,
                   cfg: CertifyConfig | None = None) -> LabeledFunc:
    """``phi o f`` for OM ``phi`` with ``phi(0) >= 0`` and SOC ``f``; SOC."""
    _require(f, SOC)
    if not phi_interval.in_closure(0.0):
        raise PreconditionError(f"0 is not in the domain {phi_interval} of phi")
    try:
        phi0 = value_at(phi, 0.0)
    except DomainError as err:
        raise PreconditionError(str(err)) from None
    if phi0 < 0:
        raise PreconditionError(f"phi(0) = {fc.fmt_number(phi0)} < 0")
    if not _range_inside(f, phi_interval):
        raise PreconditionError(f"range of {f.expr} leaves {phi_interval}")
    if not _certified(phi, "om", phi_interval, cfg):
        raise PreconditionError(f"{phi} is not certified OM on {phi_interval}")
    h = fc.compose(phi, f.expr)
    return f.extend(h, SOC, op="compose_om_soc", phi=str(phi), degree=_degree(h))


def compose_oc(phi: Expr, phi_interval: Interval, f: LabeledFunc,
               cfg: CertifyConfig | None = None) -> LabeledFunc:
    """``phi o f`` labelled OC.

    Two routes: ``phi`` OM and OC with OC ``f``; or ``phi`` OM with SOC
    ``f`` when 0 lies in the domain of ``phi`` or is its left endpoint.
    """
    _require(f, OC, SOC)
    if not _range_inside(f, phi_interval):
        raise PreconditionError(f"range of {f.expr} leaves {phi_interval}")
    if not _certified(phi, "om", phi_interval, cfg):
        raise PreconditionError(f"{phi} is not certified OM on {phi_interval}")
    if f.label == OC:
        if not _certified(phi, "oc", phi_interval, cfg):
            raise PreconditionError(f"{phi} is not certified OC on {phi_interval}")
        route = "om_and_oc"
    else:
        if not (phi_interval.contains(0.0) or phi_interval.lo == 0.0):
            raise PreconditionError("0 must lie in the domain of phi or be its left endpoint")
        route = "soc_inner"
    h = fc.compose(phi, f.expr)
    return f.extend(h, OC, op="compose_oc", phi=str(phi), route=route, degree=_degree(h))


def antiderivative(g: LabeledFunc, base: float) -> LabeledFunc:
    """``t -> int_base^t g``, closed form when available; operator monotone."""
    _require(g, SOC)
    if not g.interval.contains(base):
        raise DomainError(f"base point {base} is not in {g.interval}")
    F = symbolic.integrate(g.expr, base)
    how = "symbolic"
    if F is None:
        F = fc.Integral(g.expr, float(base))
        how = "quadrature"
    return g.extend(F, OM, op="antiderivative", base=float(base), method=how, degree=_degree(F))


def soc_zoo(h: LabeledFunc, phi: Expr | None = None, psi: Expr | None = None) -> dict:
    """Functions derived from a nonzero SOC ``h`` on ``(0, inf)``.

    Keys ``inv_th`` (``1/(t h)``, SOC), ``th`` (``t h``, OM) and ``t_over_h``
    (``t/h``, OC on ``[0, inf)``); with positive OM ``phi``/``psi`` also
    ``phi_h``, ``psi_inv_th`` and ``product``, all SOC.
    """
    _require(h, SOC)
    J = h.interval
    if J.lo != 0 or J.hi != math.inf:
        raise PreconditionError(f"h must live on (0, inf), not {J}")
    if is_zero(h.expr, J):
        raise PreconditionError("h must be nonzero")
    th, th_deg = _tidy(fc.mul(fc.T, h.expr))
    inv_th, inv_deg = _tidy(fc.div(1.0, th))
    t_over_h, toh_deg = _tidy(fc.div(fc.T, h.expr))
    out = {
        "inv_th": h.extend(inv_th, SOC, op="zoo", part="inv_th", degree=inv_deg),
        "th": h.extend(th, OM, op="zoo", part="th", degree=th_deg),
        "t_over_h": h.extend(t_over_h, OC, Interval(0.0, math.inf, lo_closed=True),
                             op="zoo", part="t_over_h", degree=toh_deg),
    }
    for name, fn in (("phi", phi), ("psi", psi)):
        if fn is not None:
            vals = _grid_values(fn, J)
            if vals.size == 0 or np.any(vals <= 0):
                raise PreconditionError(f"{name} must be positive on (0, inf)")
    if phi is not None:
        out["phi_h"] = h.extend(fc.compose(phi, h.expr), SOC, op="zoo", part="phi_h", phi=str(phi))
    if psi is not None:
        out["psi_inv_th"] = h.extend(fc.compose(psi, inv_th), SOC, op="zoo", part="psi_inv_th",
                                     psi=str(psi))
    if phi is not None and psi is not None:
        prod = fc.mul(out["phi_h"].expr, out["psi_inv_th"].expr)
        out["product"] = h.extend(prod, SOC, op="zoo", part="product", phi=str(phi), psi=str(psi))
    return out
