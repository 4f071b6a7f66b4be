"""Command-line front end.

Exit status: 0 for Certified / no counterexample, 1 for Refuted / witness,
2 for Inconclusive or any error.  Every command prints a JSON report (also
written to ``--out`` when given) that records the seed in use.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from . import construct as cons
from . import opineq, reprlib
from .certify import CERTIFIED, REFUTED, CertifyConfig, certify, replay_kernel_witness
from .fncore import DomainError, Expr, Interval, evaluate
from .kernels import divided_difference, make_grid
from .parsing import ParseError, parse_function, parse_interval

__all__ = ["RunConfig", "build_parser", "config_from_args", "run", "emit_plotdata", "main"]

EXIT_OK, EXIT_REFUTED, EXIT_ERROR = 0, 1, 2


@dataclass
class RunConfig:
    command: str
    subcommand: str | None = None
    func: str | None = None
    interval: str | None = None
    cls: str | None = None
    t0: float | None = None
    points: list = field(default_factory=list)
    consts: list | None = None
    dims: int = 6
    trials: int = 1000
    seed: int = 0
    grid: tuple = (4, 8, 12)
    tol: float | None = None
    lam: float = 0.0
    n: int = 100
    file: str | None = None
    out: str | None = None
    max_steps: int | None = None

    def __post_init__(self):
        for name in ("dims", "trials", "n"):
            if getattr(self, name) < 1:
                raise ValueError(f"--{name} must be positive")
        if any(g < 2 for g in self.grid):
            raise ValueError("--grid sizes must be at least 2")
        if self.tol is not None and self.tol <= 0:
            raise ValueError("--tol must be positive")
        if self.seed < 0:
            raise ValueError("--seed must be non-negative")


def _floats(text: str) -> list:
    """Comma-separated constants (``pi/2`` allowed); an empty slot becomes ``nan``."""
    out = []
    for part in text.split(","):
        if not part.strip():
            out.append(math.nan)
            continue
        e = parse_function(part)
        if not e.is_const:
            raise ValueError(f"{part!r} is not a constant")
        out.append(e.value)
    return out


def _ints(text: str) -> tuple:
    return tuple(int(x) for x in text.split(","))


def _default_seed() -> int:
    return int(os.environ.get("OPFUNC_SEED", "0"))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="opfunc", description="Operator monotone / convex function laboratory")
    p.add_argument("--version", action="version", version=f"opfunc {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, func=True, interval=True):
        if func:
            sp.add_argument("--func", required=True, help="function of t, e.g. 'tan(t)/t'")
        if interval:
            sp.add_argument("--interval", required=True, help="interval, e.g. '(-pi/2, pi/2)'")
        sp.add_argument("--seed", type=int, default=None, help="RNG seed (default $OPFUNC_SEED or 0)")
        sp.add_argument("--tol", type=float, default=None, help="PSD tolerance")
        sp.add_argument("--out", help="write the report here as well")

    c = sub.add_parser("certify", help="kernel certification of class membership")
    common(c)
    c.add_argument("--class", dest="cls", required=True, choices=["om", "oc", "soc", "cm", "bernstein"])
    c.add_argument("--grid", type=_ints, default=(4, 8, 12), help="grid sizes, e.g. 4,8,12")

    f = sub.add_parser("falsify", help="random matrix search for a violated inequality")
    common(f, func=False, interval=False)
    f.add_argument("--func")
    f.add_argument("--interval")
    f.add_argument("--class", dest="cls", default="soc",
                   help="soc, oc, om, or one of brown davis jensen ii iii iv monotone")
    f.add_argument("--trials", type=int, default=1000)
    f.add_argument("--dims", type=int, default=6, help="largest matrix dimension")
    f.add_argument("--lam", type=float, default=0.0, help="shift for SOC claims")
    f.add_argument("--replay", metavar="WITNESS", help="re-evaluate a witness file instead")

    k = sub.add_parser("construct", help="forward, star or backward process")
    k.add_argument("process", choices=["forward", "star", "backward"])
    common(k)
    k.add_argument("--points", type=_floats, required=True, help="base points t_i, e.g. 0,0")
    k.add_argument("--consts", type=_floats, default=None, help="shift constants for backward steps")
    k.add_argument("--max-steps", type=int, default=None)
    k.add_argument("--grid", type=_ints, default=(4, 8, 12))

    r = sub.add_parser("repr", help="build or split a representation file")
    r.add_argument("action", choices=["build", "split"])
    r.add_argument("file", help="representation JSON")
    common(r, func=False, interval=False)
    r.add_argument("--grid", type=_ints, default=(4, 8, 12))

    d = sub.add_parser("plotdata", help="two-column CSV of f on the retreated grid")
    common(d)
    d.add_argument("--n", type=int, default=100, help="number of grid points")
    d.add_argument("--t0", type=float, default=None, help="tabulate K_f(., t0) instead of f")

    y = sub.add_parser("replay", help="re-evaluate a witness from a falsify or certify report")
    y.add_argument("file")
    y.add_argument("--tol", type=float, default=None)
    y.add_argument("--out")
    y.add_argument("--seed", type=int, default=None)
    return p


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    seed = ns.seed if ns.seed is not None else _default_seed()
    kw = dict(command=ns.command, seed=seed, tol=ns.tol, out=ns.out,
              func=getattr(ns, "func", None), interval=getattr(ns, "interval", None),
              cls=getattr(ns, "cls", None))
    if ns.command == "certify":
        kw["grid"] = ns.grid
    elif ns.command == "falsify":
        kw.update(trials=ns.trials, dims=ns.dims, lam=ns.lam, file=ns.replay)
    elif ns.command == "construct":
        kw.update(subcommand=ns.process, points=ns.points, consts=ns.consts,
                  max_steps=ns.max_steps, grid=ns.grid)
    elif ns.command == "repr":
        kw.update(subcommand=ns.action, file=ns.file, grid=ns.grid)
    elif ns.command == "plotdata":
        kw.update(n=ns.n, t0=ns.t0)
    elif ns.command == "replay":
        kw.update(file=ns.file)
    return RunConfig(**kw)


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def _certify_cfg(cfg: RunConfig) -> CertifyConfig:
    kw = {"grid_sizes": cfg.grid, "seed": cfg.seed}
    if cfg.tol is not None:
        kw["psd_tol"] = cfg.tol
    return CertifyConfig(**kw)


def _parsed(cfg: RunConfig) -> tuple[Expr, Interval]:
    if not cfg.func or not cfg.interval:
        raise ValueError("--func and --interval are required")
    return parse_function(cfg.func), parse_interval(cfg.interval)


_VERDICT_EXIT = {CERTIFIED: EXIT_OK, REFUTED: EXIT_REFUTED}


def _cmd_certify(cfg):
    f, J = _parsed(cfg)
    v = certify(f, cfg.cls, J, _certify_cfg(cfg))
    return _VERDICT_EXIT.get(v.status, EXIT_ERROR), json.loads(v.to_json())


def _cmd_falsify(cfg):
    if cfg.file:
        return _replay_file(cfg)
    f, J = _parsed(cfg)
    fcfg = opineq.FalsifyConfig(trials=cfg.trials, maxdim=cfg.dims, seed=cfg.seed, lam=cfg.lam,
                                tol=cfg.tol if cfg.tol is not None else 1e-9)
    res = opineq.falsify(f, cfg.cls, J, fcfg)
    body = res.to_dict()
    body["interval"] = J.to_dict()
    if isinstance(res, opineq.Witness):
        # the envelope's seed is the run seed; the trial stream is kept alongside
        body["witness_seed"] = body.pop("seed")
        return EXIT_REFUTED, {"status": "witness", **body}
    return EXIT_OK, {"status": "no_counterexample", **body}


def _replay_file(cfg):
    with open(cfg.file) as fh:
        data = json.load(fh)
    if data.get("kind") == "witness":
        w = opineq.Witness.from_dict(data)
        margin = opineq.replay(w)
        tol = cfg.tol if cfg.tol is not None else w.tol
        violated = margin < -10 * tol * w.scale
        body = {"status": "witness" if violated else "not_reproduced", "kind": "replay",
                "function": w.function, "inequality": w.inequality, "witness_seed": list(w.scene.seed),
                "recorded_margin": w.margin,
                "replayed_margin": margin, "difference": abs(margin - w.margin)}
        return (EXIT_REFUTED if violated else EXIT_ERROR), body
    kernel = (data.get("witness") or {}).get("kernel")
    if data.get("status") == REFUTED and kernel in ("loewner", "cg"):
        f = parse_function(data["function"])
        lam = replay_kernel_witness(f, data["witness"], data["class"])
        recorded = data["witness"].get("min_eigenvalue")
        body = {"status": REFUTED, "kind": "replay", "function": data["function"],
                "class": data["class"], "recorded_margin": recorded, "replayed_margin": lam,
                "difference": None if recorded is None else abs(lam - recorded)}
        return EXIT_REFUTED, body
    raise ValueError(f"{cfg.file} holds no witness to replay")


def _cmd_construct(cfg):
    f, J = _parsed(cfg)
    ccfg = _certify_cfg(cfg)
    if cfg.subcommand == "forward":
        tr = cons.forward_process(f, J, cfg.points, cfg.max_steps, ccfg, verify=True)
    elif cfg.subcommand == "star":
        tr = cons.star_process(f, J, cfg.points, cfg.max_steps, ccfg, verify=True)
    else:
        consts = cfg.consts
        if consts is not None:
            consts = [None if math.isnan(c) else c for c in consts]
        tr = cons.backward_process(f, J, cfg.points, consts, cfg.max_steps, ccfg, verify=True)
    body = tr.to_dict()
    ok = all(c == CERTIFIED for c in tr.checks)
    body["status"] = "ok" if ok else "unconfirmed"
    return (EXIT_OK if ok else EXIT_ERROR), body


def _cmd_repr(cfg):
    r = reprlib.load_repr(cfg.file)
    ccfg = _certify_cfg(cfg)
    if cfg.subcommand == "build":
        if isinstance(r, reprlib.PickRepr):
            g, cls = reprlib.build_pick(r), "om"
        else:
            g, cls = reprlib.build_soc(r), "soc"
        v = certify(g, cls, r.J, ccfg)
        body = {"status": v.status, "function": str(g), "class": cls, "interval": r.J.to_dict(),
                "verdict": json.loads(v.to_json())}
        return _VERDICT_EXIT.get(v.status, EXIT_ERROR), body
    if not isinstance(r, reprlib.SOCRepr):
        raise ValueError("split needs an SOC representation")
    g_plus, g_minus = reprlib.split_soc(r)
    parts = []
    for g, J in ((g_plus, Interval(r.J.lo, math.inf)), (g_minus, Interval(-math.inf, r.J.hi))):
        v = certify(g, "soc", J, ccfg)
        parts.append({"function": str(g), "interval": J.to_dict(), "status": v.status})
    statuses = {p["status"] for p in parts}
    status = CERTIFIED if statuses == {CERTIFIED} else REFUTED if REFUTED in statuses else "inconclusive"
    return _VERDICT_EXIT.get(status, EXIT_ERROR), {"status": status, "g_plus": parts[0], "g_minus": parts[1]}


def emit_plotdata(f: Expr, J: Interval, n: int) -> str:
    """CSV ``t,f(t)`` on ``n`` retreated grid points; failing points are counted, not written."""
    if n < 2:
        raise ValueError("need at least two points")
    buf = io.StringIO()
    buf.write("t,f\n")
    skipped = 0
    for x in make_grid(J, n):
        try:
            y = evaluate(f, x)
        except DomainError:
            skipped += 1
            continue
        buf.write(f"{float(x)!r},{float(y)!r}\n")
    buf.write(f"# skipped {skipped} points\n")
    return buf.getvalue()


def _cmd_plotdata(cfg):
    f, J = _parsed(cfg)
    if cfg.t0 is not None:
        f = divided_difference(f, cfg.t0)
    return EXIT_OK, emit_plotdata(f, J, cfg.n)


_COMMANDS = {
    "certify": _cmd_certify,
    "falsify": _cmd_falsify,
    "construct": _cmd_construct,
    "repr": _cmd_repr,
    "plotdata": _cmd_plotdata,
    "replay": _replay_file,
}


def _envelope(cfg: RunConfig, body: dict) -> dict:
    head = {"tool": "opfunc", "version": __version__, "command": cfg.command, "seed": cfg.seed}
    if cfg.subcommand:
        head["subcommand"] = cfg.subcommand
    return {**head, **body}


def run(cfg: RunConfig, stdout=None) -> int:
    """Execute ``cfg``; print (and optionally save) the report; return the exit status."""
    stdout = stdout or sys.stdout
    try:
        code, body = _COMMANDS[cfg.command](cfg)
    except (ParseError, ValueError, ArithmeticError, OSError, KeyError) as err:
        code, body = EXIT_ERROR, {"status": "error", "error": f"{type(err).__name__}: {err}"}
    if isinstance(body, str):
        text = body
    else:
        text = json.dumps(_envelope(cfg, body), indent=2, default=_json_default) + "\n"
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    stdout.write(text)
    return code


def _json_default(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    raise TypeError(f"cannot serialise {type(x).__name__}")


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(ns)
    except ValueError as err:
        print(json.dumps({"tool": "opfunc", "status": "error", "error": str(err)}))
        return EXIT_ERROR
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
