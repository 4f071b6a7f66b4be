# ---
# jupyter:
#   jupytext:
#     formats: py:percent
#     text_representation:
#       extension: .py
#       format_name: percent
# ---

# %% [markdown]
# # Catalog tour
#
# Every catalog function is certified against the three classes with the
# kernel certifiers, and the verdicts are compared with the documented
# memberships. A refutation carries a replayable witness.

# %%
import math

import numpy as np

from opfunc.catalog import CATALOG
from opfunc.certify import certify, soc_via_cg, soc_via_reciprocal
from opfunc.parsing import parse_function, parse_interval

# %%
rows = []
for e in CATALOG:
    row = [e.name, e.text, e.interval_text]
    for cls, expected in (("om", e.om), ("oc", e.oc), ("soc", e.soc)):
        v = certify(e.expr, cls, e.interval)
        mark = {True: "+", False: "-", None: "?"}[expected]
        row.append(f"{v.status[:4]}({mark})")
    rows.append(row)
for r in rows:
    print("{:18s} {:22s} {:18s} {:12s} {:12s} {:12s}".format(*r))

# %% [markdown]
# ## Löwner matrix of tan
#
# The smallest eigenvalue of the divided-difference matrix stays above the
# round-off threshold on grids of increasing size.

# %%
from opfunc.kernels import loewner_matrix, make_grid, psd_check

J = parse_interval("(-pi/2, pi/2)")
f = parse_function("tan(t)")
for n in (4, 8, 16, 32):
    L = loewner_matrix(f, make_grid(J, n))
    res = psd_check(L)
    print(n, res.min_eigenvalue, res.threshold, bool(res))

# %% [markdown]
# ## Two routes to SOC
#
# Membership through the C_g kernel and through operator convexity of -1/g
# give the same verdict on positive functions.

# %%
for text, interval in (("1/t", "(0, inf)"), ("tan(t)/t", "(-pi/2, pi/2)"), ("1/t - 1", "(0, 1)")):
    g, J = parse_function(text), parse_interval(interval)
    print(f"{text:10s}", soc_via_cg(g, J).status, soc_via_reciprocal(g, J).status)

# %% [markdown]
# ## A refutation witness
#
# The identity is not SOC on (0, 1). The witness records the grid and the
# eigenvector of the negative eigenvalue.

# %%
v = certify(parse_function("t"), "soc", parse_interval("(0, 1)"))
print(v.status, v.witness["kernel"], v.witness["min_eigenvalue"])
print(np.round(v.witness["grid"], 4))
