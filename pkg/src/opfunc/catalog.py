"""Reference functions with known class membership.

Each entry records the expected verdict for ``om``, ``oc`` and ``soc`` on
its interval (``None`` where no claim is made).  Tests and the notebooks
draw their examples from here.
"""

from __future__ import annotations

from dataclasses import dataclass

from .fncore import Expr, Interval
from .parsing import parse_function, parse_interval

__all__ = ["CatalogEntry", "CATALOG", "get", "positive_entries"]


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    text: str
    interval_text: str
    om: bool | None = None
    oc: bool | None = None
    soc: bool | None = None
    positive: bool = False

    @property
    def expr(self) -> Expr:
        return parse_function(self.text)

    @property
    def interval(self) -> Interval:
        return parse_interval(self.interval_text)

    def expected(self, cls: str) -> bool | None:
        return getattr(self, cls)


CATALOG = (
    CatalogEntry("tan", "tan(t)", "(-pi/2, pi/2)", om=True, oc=False, soc=False),
    CatalogEntry("tan_over_t", "tan(t)/t", "(-pi/2, pi/2)", om=False, oc=True, soc=True, positive=True),
    CatalogEntry("inverse", "1/t", "(0, inf)", om=False, oc=True, soc=True, positive=True),
    CatalogEntry("identity", "t", "(0, 1)", om=True, oc=True, soc=False, positive=True),
    CatalogEntry("inverse_minus_one", "1/t - 1", "(0, 1)", om=False, oc=True, soc=False, positive=True),
    CatalogEntry("square", "t^2", "(-1, 1)", om=False, oc=True, soc=False),
    CatalogEntry("cube", "t^3", "(0, 10)", om=False, oc=False, soc=False, positive=True),
    CatalogEntry("sqrt", "sqrt(t)", "(0, inf)", om=True, oc=False, soc=False, positive=True),
    CatalogEntry("log", "log(t)", "(0, inf)", om=True, oc=False, soc=False),
    CatalogEntry("neg_inverse", "-1/t", "(0, inf)", om=True, oc=False, soc=False),
    CatalogEntry("one_plus_inverse", "(t + 1)/t", "(0, inf)", om=False, oc=True, soc=True, positive=True),
    CatalogEntry("mobius", "t/(1 + t)", "(0, inf)", om=True, oc=False, soc=False, positive=True),
    CatalogEntry("inverse_square", "1/t^2", "(0, inf)", om=False, oc=False, soc=False, positive=True),
    CatalogEntry("exp", "exp(t)", "(-1, 1)", om=False, oc=False, soc=False, positive=True),
    CatalogEntry("power_03", "t^0.3", "(0, inf)", om=True, oc=False, soc=False, positive=True),
    CatalogEntry("inv_sqrt", "t^(-0.5)", "(0, inf)", om=False, oc=True, soc=True, positive=True),
    CatalogEntry("two_pole", "1/(t + 1) + 3/(2 - t)", "(0, 1)", om=False, oc=True, soc=True, positive=True),
    CatalogEntry("entropy", "t*log(t)", "(0, inf)", om=False, oc=True, soc=False),
)


def get(name: str) -> CatalogEntry:
    for e in CATALOG:
        if e.name == name:
            return e
    raise KeyError(name)


def positive_entries() -> list:
    return [e for e in CATALOG if e.positive]
