# ---
# jupyter:
#   jupytext:
#     formats: py:percent
#     text_representation:
#       extension: .py
#       format_name: percent
# ---

# %% [markdown]
# # Processes and representations
#
# The forward process alternates divided differences and negative
# reciprocals, staying inside the OM class. For rational seeds the degree
# drops by one each cycle and the process ends at a constant.

# %%
import math

import numpy as np

from opfunc import fncore as fc
from opfunc.certify import certify
from opfunc.construct import forward_process, star_process
from opfunc.fncore import Interval
from opfunc.parsing import parse_function

SYM = Interval(-math.pi / 2, math.pi / 2)
tr = forward_process(fc.tan(fc.T), SYM, [0, 0])
for s in tr.steps:
    print(s.label, s.expr)
print("final is OM:", certify(tr.final.expr, "om", SYM).certified)

# %%
xs = SYM.param(np.linspace(0.05, 0.95, 7))
closed = (np.tan(xs) - xs) / (xs * np.tan(xs))
print(np.max(np.abs(fc.evaluate(tr.final.expr, xs) - closed)))

# %% [markdown]
# A rational seed runs out of degree.

# %%
tr = forward_process(fc.T, Interval(-1, 1), [0, 0])
print(tr.terminated, tr.reason, [s.label for s in tr.steps])

# %% [markdown]
# The star process on the half-line, seeded with the square root.

# %%
tr = star_process(parse_function("t^0.5"), Interval(0, math.inf), [1, 0])
print(tr.final.expr)

# %% [markdown]
# ## Representations
#
# An SOC representation on a bounded interval splits into a part that is
# SOC on the right half-line and a part that is SOC on the left half-line.

# %%
from opfunc.reprlib import DiscreteMeasure, SOCRepr, build_soc, split_soc

r = SOCRepr(0.5, DiscreteMeasure(((-1.0, 1.0),)), DiscreteMeasure(((2.0, 3.0),)), Interval(0, 1))
g = build_soc(r)
gp, gm = split_soc(r)
print(g)
print(certify(g, "soc", r.J).status,
      certify(gp, "soc", Interval(0, math.inf)).status,
      certify(gm, "soc", Interval(-math.inf, 1)).status)
