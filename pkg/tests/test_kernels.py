import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from opfunc import fncore as fc
from opfunc.catalog import CATALOG
from opfunc.fncore import Interval
from opfunc.kernels import (
    EmptyCore,
    cg_matrix,
    divided_difference,
    kernel_from_csv,
    kernel_to_csv,
    loewner_matrix,
    make_grid,
    psd_check,
    value_at,
)
from opfunc.parsing import parse_function

from oracles import loewner_mp, psd_by_minors


@pytest.mark.parametrize("text,pts,expected", [
    ("t", [0, 1], [[1, 1], [1, 1]]),
    ("t^2", [0, 1], [[0, 1], [1, 2]]),
    ("1/t", [1, 2], [[-1, -0.5], [-0.5, -0.25]]),
])
def test_loewner_examples(text, pts, expected):
    K = loewner_matrix(parse_function(text), pts)
    np.testing.assert_allclose(K.values, expected, atol=1e-15)
    assert K.label == "loewner"


def test_loewner_against_high_precision_oracle():
    import mpmath

    pts = [-1.2, -0.3, 0.1, 0.8, 1.4]
    K = loewner_matrix(fc.tan(fc.T), pts)
    np.testing.assert_allclose(K.values, loewner_mp(mpmath.tan, pts), rtol=1e-12)


@pytest.mark.parametrize("text,t0,pts,expected", [
    ("2.5", 0.3, [0.1, 0.5, 0.9], np.full((3, 3), 2.5)),
    ("t", 0, [1, 2], [[2, 3], [3, 4]]),
    ("1/t", 1, [1, 2], [[1, 0.5], [0.5, 0.25]]),
])
def test_cg_examples(text, t0, pts, expected):
    K = cg_matrix(parse_function(text), t0, pts)
    np.testing.assert_allclose(K.values, expected, atol=1e-15)


def test_cg_identity_not_psd():
    res = psd_check(cg_matrix(fc.T, 0.0, [1, 2]))
    assert not res
    assert res.min_eigenvalue == pytest.approx(3 - math.sqrt(10))


def test_psd_examples():
    assert psd_check(np.eye(3))
    assert psd_check(np.zeros((2, 2)))
    res = psd_check(np.array([[1.0, 2.0], [2.0, 1.0]]))
    assert not res
    assert res.min_eigenvalue == pytest.approx(-1.0)
    np.testing.assert_allclose(abs(res.vector), [2**-0.5] * 2)


@given(hnp.arrays(float, (4, 4), elements=st.floats(-3, 3)), st.integers(1, 4))
def test_psd_agrees_with_minor_oracle(X, rank):
    # low-rank Gram matrices plus a shift straddle the PSD boundary
    G = X[:, :rank] @ X[:, :rank].T
    for shift in (-0.5, 0.0, 0.5):
        M = G + shift * np.eye(4)
        lam = np.linalg.eigvalsh(M)[0]
        if abs(lam) < 1e-6:
            continue
        assert bool(psd_check(M, 1e-12)) == psd_by_minors(M, 1e-12)


def test_psd_agrees_with_minor_oracle_bulk():
    rng = np.random.default_rng(5)
    agree = 0
    for _ in range(1000):
        n = rng.integers(1, 7)
        X = rng.standard_normal((n, n))
        M = X @ X.T - rng.uniform(0, 1.5) * np.eye(n)
        if abs(np.linalg.eigvalsh(M)[0]) < 1e-6:
            agree += 1
            continue
        agree += bool(psd_check(M, 1e-12)) == psd_by_minors(M, 1e-12)
    assert agree == 1000


def test_refinement_keeps_refutation():
    f = parse_function("t^2")
    coarse = np.array([-0.5, 0.5])
    fine = np.sort(np.concatenate([coarse, [-0.9, -0.1, 0.3, 0.7]]))
    assert not psd_check(loewner_matrix(f, coarse))
    assert not psd_check(loewner_matrix(f, fine))


def test_make_grid():
    g = make_grid(Interval(0, 1), 2, 0.25)
    assert g[0] >= 0.25 and g[-1] <= 0.75
    g = make_grid(Interval(0, math.inf), 8)
    assert len(g) == 8 and np.all(np.diff(g) > 0) and g[0] >= 1e-3
    with pytest.raises(ValueError):
        make_grid(Interval(0, 1), 1)
    with pytest.raises(EmptyCore):
        make_grid(Interval(0, 1), 4, eps=0.6)


@pytest.mark.parametrize("text,t0,x,expected", [
    ("t^2", 0.0, 0.7, 0.7),
    ("tan(t)", 0.0, 0.0, 1.0),
    ("-1/t", 1.0, 2.5, 1 / 2.5),
    ("t^3", 1.0, 2.0, 7.0),
    ("(2*t + 1)/(t + 3)", 0.5, 1.5, (2 * 3 - 1) / ((1.5 + 3) * 3.5)),
])
def test_divided_difference(text, t0, x, expected):
    k = divided_difference(parse_function(text), t0)
    assert fc.evaluate(k, x) == pytest.approx(expected, rel=1e-13)


def test_divided_difference_closed_forms_are_exact_nodes():
    assert divided_difference(parse_function("t^2"), 0.0).text() == "t"
    assert divided_difference(parse_function("-1/t"), 1.0).text() == "1/t"
    assert isinstance(divided_difference(fc.tan(fc.T), 0.0), fc.DivDiff)


def test_value_at_endpoint_limit():
    f = parse_function("(exp(t) - 1)/t")
    assert value_at(f, 0.0) == pytest.approx(1.0, rel=1e-8)
    with pytest.raises(fc.DomainError):
        value_at(parse_function("log(t)"), 0.0)


@pytest.mark.parametrize("entry", [e for e in CATALOG if e.om], ids=lambda e: e.name)
def test_om_catalog_passes_random_grids(entry):
    rng = np.random.default_rng(1)
    J = entry.interval
    for _ in range(10):
        n = rng.integers(2, 13)
        pts = np.sort(J.param(rng.uniform(0.02, 0.98, n)))
        assert psd_check(loewner_matrix(entry.expr, pts))


@pytest.mark.parametrize("entry", [e for e in CATALOG if e.soc], ids=lambda e: e.name)
def test_soc_catalog_cg_random_base_points(entry):
    rng = np.random.default_rng(2)
    J = entry.interval
    for _ in range(5):
        t0 = float(J.param(rng.uniform(0.05, 0.95)))
        pts = np.sort(J.param(rng.uniform(0.02, 0.98, 8)))
        assert psd_check(cg_matrix(entry.expr, t0, pts))


def test_csv_round_trip():
    K = loewner_matrix(fc.tan(fc.T), [-0.5, 0.1, 0.9])
    back = kernel_from_csv(kernel_to_csv(K))
    np.testing.assert_array_equal(back.points, K.points)
    np.testing.assert_array_equal(back.values, K.values)
