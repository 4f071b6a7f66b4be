"""Random valid representations for property tests.

Atoms: at most 6, locations in [-10, 10] outside ``J``, weights in (0, 5].
"""

import math

import numpy as np

from opfunc.fncore import Interval
from opfunc.reprlib import DiscreteMeasure, PickRepr, SOCRepr


def random_interval(rng) -> Interval:
    a = float(rng.uniform(-3, 2))
    return Interval(a, a + float(rng.uniform(0.5, 4)))


def _atoms(rng, lo, hi, k):
    xs = rng.uniform(lo, hi, k)
    ws = 5 * (1 - rng.uniform(0, 1, k))  # (0, 5]
    return DiscreteMeasure(tuple(zip(xs, ws)))


def _split(rng, k):
    left = int(rng.integers(0, k + 1))
    return left, k - left


def random_pick(rng, J: Interval | None = None) -> PickRepr:
    J = J or random_interval(rng)
    left, right = _split(rng, int(rng.integers(0, 7)))
    lo_atoms = _atoms(rng, -10, J.lo, left) if math.isfinite(J.lo) else DiscreteMeasure()
    hi_atoms = _atoms(rng, J.hi, 10, right) if math.isfinite(J.hi) else DiscreteMeasure()
    t0 = float(J.param(rng.uniform(0.2, 0.8)))
    return PickRepr(float(rng.uniform(-2, 2)), float(rng.uniform(0, 2)), lo_atoms + hi_atoms, t0, J)


def random_soc(rng, J: Interval | None = None) -> SOCRepr:
    J = J or random_interval(rng)
    left, right = _split(rng, int(rng.integers(0, 7)))
    nu_m = _atoms(rng, -10, J.lo, left) if math.isfinite(J.lo) else DiscreteMeasure()
    nu_p = _atoms(rng, J.hi, 10, right) if math.isfinite(J.hi) else DiscreteMeasure()
    return SOCRepr(float(rng.uniform(0, 2)), nu_m, nu_p, J)
