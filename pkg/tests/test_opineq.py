import json
import math
from dataclasses import replace

import numpy as np
import pytest

from opfunc import fncore as fc
from opfunc.fncore import Interval, SpectrumError
from opfunc.opineq import (
    FalsifyConfig,
    NoCounterexample,
    PreconditionError,
    SingularError,
    SpectralScene,
    Witness,
    eq2_sides,
    falsify,
    replay,
    residual,
    residual_brown,
    residual_davis,
    residual_monotone_pair,
    residual_prop21_ii,
    residual_prop21_iii,
    residual_prop21_iv,
    sample_scene,
    scene_scale,
    verify_eq2_identity,
)
from opfunc.parsing import parse_function, parse_interval
from schemacheck import validate

HALF = Interval(0, math.inf)
INV = parse_function("1/t")


def _scene(A, B=None, P=None, S=None, s=0.5, lam=0.0, J=HALF):
    A = np.atleast_2d(np.asarray(A, float))
    n = A.shape[0]
    B = A if B is None else np.atleast_2d(np.asarray(B, float))
    P = np.eye(n) if P is None else np.atleast_2d(np.asarray(P, float))
    S = np.eye(n) if S is None else np.atleast_2d(np.asarray(S, float))
    return SpectralScene(n, A, B, P, S, s, lam, [], J)


def _min_eig(R):
    return float(np.linalg.eigvalsh(R)[0])


# ------------------------------------------------------------------ scenes


def test_scalar_scene_inside_interval():
    sc = sample_scene(Interval(0, 1), 1, np.random.default_rng(0))
    assert sc.A.shape == (1, 1) and 0 < sc.A[0, 0] < 1


@pytest.mark.parametrize("J", ["(0, 1)", "(0, inf)", "(-pi/2, pi/2)", "(-inf, inf)"])
def test_scene_invariants(J):
    J = parse_interval(J)
    for seed in range(20):
        sc = sample_scene(J, 4, np.random.default_rng(seed))
        np.testing.assert_allclose(sc.P @ sc.P, sc.P, atol=1e-12)
        np.testing.assert_allclose(sc.P, sc.P.T, atol=0)
        assert np.linalg.norm(sc.S, 2) <= 1 + 1e-12
        assert 0 < sc.s < 1
        for M in (sc.A, sc.B):
            assert np.all(J.contains(np.linalg.eigvalsh(M)))


def test_scene_determinism_and_round_trip():
    a = sample_scene(HALF, 3, np.random.default_rng([4, 2]), seed=[4, 2])
    b = sample_scene(HALF, 3, np.random.default_rng([4, 2]), seed=[4, 2])
    for k in "ABPS":
        np.testing.assert_array_equal(getattr(a, k), getattr(b, k))
    c = SpectralScene.from_dict(json.loads(json.dumps(a.to_dict())))
    np.testing.assert_array_equal(c.A, a.A)
    assert c.interval == a.interval and c.seed == [4, 2]


# ------------------------------------------------------------------ residuals


def test_brown_identity_counterexample():
    sc = _scene([[1, 1], [1, 1]], P=np.diag([1, 0]), J=Interval(-0.5, 2.5))
    R = residual_brown(fc.T, 0.0, sc)
    np.testing.assert_allclose(R, [[0, 1], [1, 1]], atol=1e-14)
    assert np.linalg.det(R) == pytest.approx(-1)


def test_brown_scalar_full_projection_is_zero():
    assert residual_brown(INV, 0.0, _scene([[0.7]])) == pytest.approx(0.0)


def test_brown_holds_for_inverse(rng):
    for _ in range(50):
        sc = sample_scene(HALF, int(rng.integers(1, 6)), rng)
        R = residual_brown(INV, 0.0, sc)
        assert _min_eig(R) >= -1e-9 * scene_scale(INV, sc)


def test_davis_square_example():
    sc = _scene([[0, 1], [1, 0]], P=np.diag([1, 0]), J=Interval(-2, 2))
    np.testing.assert_allclose(residual_davis(parse_function("t^2"), sc), np.diag([1, 0]), atol=1e-14)


def test_davis_identity_is_zero(rng):
    sc = sample_scene(Interval(-1, 1), 4, rng)
    np.testing.assert_allclose(residual_davis(fc.T, sc), 0, atol=1e-14)


def test_davis_inverse_psd(rng):
    for _ in range(50):
        sc = sample_scene(HALF, int(rng.integers(1, 6)), rng)
        assert _min_eig(residual_davis(INV, sc)) >= -1e-9 * scene_scale(INV, sc)


def test_prop21_inverse_is_exact_identity(rng):
    for s in (0.3, 0.5):
        sc = sample_scene(HALF, 4, rng)
        R = residual_prop21_iii(INV, 0.0, s, sc.A, sc.B, HALF)
        assert np.linalg.norm(R, 2) <= 1e-9 * scene_scale(INV, sc)


def test_prop21_shifted_inverse_fails_scalar():
    R = residual_prop21_ii(INV, 1.0, [[0.2]], [[0.8]], Interval(0, 1))
    assert R[0, 0] < 0


def test_prop21_equal_arguments_vanish(rng):
    sc = sample_scene(HALF, 3, rng)
    np.testing.assert_allclose(residual_prop21_ii(INV, 0.0, sc.A, sc.A, HALF), 0, atol=1e-12)


def test_prop21_small_s_is_continuous():
    R = residual_prop21_iii(INV, 0.0, 1e-6, [[0.5]], [[2.0]], HALF)
    assert np.linalg.norm(R) <= 1e-4


def test_specialization_midpoint(rng):
    g = parse_function("tan(t)/t")
    J = parse_interval("(-pi/2, pi/2)")
    for _ in range(10):
        sc = sample_scene(J, 4, rng)
        np.testing.assert_allclose(residual_prop21_iii(g, 0.0, 0.5, sc.A, sc.B, J),
                                   residual_prop21_ii(g, 0.0, sc.A, sc.B, J), rtol=0, atol=1e-12)


def test_prop21_preconditions():
    with pytest.raises(PreconditionError):
        residual_prop21_ii(INV, 5.0, [[0.5]], [[0.8]], HALF)
    with pytest.raises(ValueError):
        residual_prop21_iii(INV, 0.0, 1.0, [[0.5]], [[0.8]], HALF)
    # g close to lam makes the resolvent numerically singular
    g = parse_function("1/t - 1")
    with pytest.raises((SingularError, PreconditionError)):
        A = np.diag([1 - 1e-13, 0.5])
        residual_prop21_ii(g, 0.0, A, A, Interval(0, 1, hi_closed=True))


def test_prop21_iv_identity_contraction_is_jensen_free(rng):
    sc = replace(sample_scene(HALF, 3, rng), S=np.eye(3))
    np.testing.assert_allclose(residual_prop21_iv(INV, 0.0, sc), 0, atol=1e-10)


def test_prop21_iv_inverse_psd(rng):
    for _ in range(30):
        sc = sample_scene(HALF, 3, rng)
        R = residual_prop21_iv(INV, 0.0, sc)
        assert _min_eig(R) >= -1e-9 * scene_scale(INV, sc)


def test_prop21_iv_projection_contraction_matches_brown_status(rng):
    # S = P and B = t I reproduce the projection criterion
    g = parse_function("tan(t)/t")
    J = parse_interval("(-pi/2, pi/2)")
    agree = 0
    for _ in range(30):
        sc = sample_scene(J, 3, rng)
        t = float(np.linalg.eigvalsh(sc.B)[0])
        sc = replace(sc, S=sc.P, B=t * np.eye(3))
        tol = 1e-9 * scene_scale(g, sc)
        agree += (_min_eig(residual_prop21_iv(g, 0.0, sc)) >= -tol) == (_min_eig(residual_brown(g, 0.0, sc)) >= -tol)
    assert agree == 30


def test_monotone_pair_examples(rng):
    R = residual_monotone_pair(parse_function("t^2"), np.diag([-1.0, 0.0]), np.diag([0.0, 1.0]), Interval(-2, 2))
    np.testing.assert_allclose(R, np.diag([-1, 1]))
    J = Interval(-1.5, 1.5)
    for _ in range(30):
        sc = sample_scene(J, 4, rng)
        A = sc.A
        C = A + 0.1 * np.diag(rng.uniform(0, 1, 4))
        if np.linalg.eigvalsh(C)[-1] >= 1.5:
            continue
        assert _min_eig(residual_monotone_pair(fc.tan(fc.T), A, C, J)) >= -1e-10
    np.testing.assert_allclose(residual_monotone_pair(fc.T, A, A, J), 0)
    with pytest.raises(PreconditionError):
        residual_monotone_pair(fc.T, np.eye(2), np.zeros((2, 2)), J)


def test_spectrum_escape_raises():
    with pytest.raises(SpectrumError):
        residual_brown(INV, 0.0, _scene([[-1.0]]))


# ------------------------------------------------------------------ scalar reduction


@pytest.mark.parametrize("text,J", [("1/t", "(0, inf)"), ("tan(t)/t", "(-pi/2, pi/2)"), ("(t+1)/t", "(0, inf)")])
def test_scalar_reduction(text, J):
    g = parse_function(text)
    J = parse_interval(J)
    rng = np.random.default_rng(11)
    G = lambda x: fc.evaluate(g, x)  # noqa: E731
    for _ in range(20):
        sc = sample_scene(J, 1, rng)
        a, b, s, sig = sc.A[0, 0], sc.B[0, 0], sc.s, sc.S[0, 0]
        p = sc.P[0, 0]
        ga, gb = G(a), G(b)
        assert residual_brown(g, 0.3, sc)[0, 0] == pytest.approx((1 - p) * (ga - 0.3), abs=1e-12)
        assert residual_davis(g, sc)[0, 0] == pytest.approx(0.0, abs=1e-12)
        lhs = s * ga + (1 - s) * gb - G(s * a + (1 - s) * b)
        want = lhs - s * (1 - s) * (ga - gb) ** 2 / (s * gb + (1 - s) * ga)
        assert residual_prop21_iii(g, 0.0, s, sc.A, sc.B, J)[0, 0] == pytest.approx(want, abs=1e-12)
        r = math.sqrt(1 - sig**2)
        lhs = sig**2 * ga + r**2 * gb - G(sig**2 * a + r**2 * b)
        x = sig * r * (ga - gb)
        want = lhs - x**2 / (r**2 * ga + sig**2 * gb)
        assert residual_prop21_iv(g, 0.0, sc)[0, 0] == pytest.approx(want, abs=1e-12)


# ------------------------------------------------------------------ harmonic-mean identity


def test_eq2_scalar_example():
    lhs, rhs = eq2_sides([[1.0]], [[2.0]], 0.5)
    assert lhs[0, 0] == pytest.approx(1 / 12, rel=1e-14)
    assert rhs[0, 0] == pytest.approx(1 / 12, rel=1e-14)


def test_eq2_equal_arguments():
    A = np.diag([0.5, 2.0])
    assert verify_eq2_identity(A, A, 0.4) == pytest.approx(0.0, abs=1e-15)


def test_eq2_random_bulk():
    rng = np.random.default_rng(2)
    for _ in range(1000):
        n = int(rng.integers(1, 9))
        sc = sample_scene(HALF, n, rng)
        s = float(rng.uniform(0.01, 0.99))
        lhs, _ = eq2_sides(sc.A, sc.B, s)
        assert verify_eq2_identity(sc.A, sc.B, s) <= 1e-10 * (1 + np.linalg.norm(lhs, 2))


# ------------------------------------------------------------------ equivalence


def _statuses(g, sc):
    tol = 1e-9 * scene_scale(g, sc)
    out = [_min_eig(residual_brown(g, 0.0, sc)) >= -tol,
           _min_eig(residual_prop21_ii(g, 0.0, sc.A, sc.B, sc.interval)) >= -tol,
           _min_eig(residual_prop21_iv(g, 0.0, sc)) >= -tol]
    for s in (0.25, 0.5, 0.75):
        out.append(_min_eig(residual_prop21_iii(g, 0.0, s, sc.A, sc.B, sc.interval)) >= -tol)
    return out


@pytest.mark.parametrize("text,J", [("1/t", "(0, inf)"), ("tan(t)/t", "(-pi/2, pi/2)"), ("(t+1)/t", "(0, inf)")])
def test_equivalent_forms_agree(text, J):
    g, J = parse_function(text), parse_interval(J)
    checked = 0
    for i in range(200):
        rng = np.random.default_rng([9, i])
        sc = sample_scene(J, 1 + i % 5, rng)
        try:
            st = _statuses(g, sc)
        except (SpectrumError, SingularError, PreconditionError):
            continue
        checked += 1
        assert len(set(st)) == 1, (i, st)
    assert checked >= 190


# ------------------------------------------------------------------ falsify


def test_falsify_shifted_inverse():
    w = falsify(parse_function("1/t - 1"), "soc", Interval(0, 1), FalsifyConfig(trials=100, seed=7))
    assert isinstance(w, Witness)
    assert w.scene.n == 1
    assert replay(w) == pytest.approx(w.margin, abs=1e-10)
    assert w.margin <= -10 * w.tol


def test_falsify_identity():
    w = falsify(fc.T, "soc", Interval(0, 1), FalsifyConfig(trials=100))
    assert isinstance(w, Witness) and w.scene.n <= 2


def test_falsify_inverse_finds_nothing():
    rep = falsify(INV, "soc", HALF, FalsifyConfig(trials=1000, maxdim=6))
    assert isinstance(rep, NoCounterexample)
    d = rep.to_dict()
    assert d["kind"] == "no_counterexample" and sum(d["tested"].values()) > 3000


@pytest.mark.parametrize("text,claim,J", [
    ("t^3", "oc", "(0, 10)"), ("t^2", "om", "(-1, 1)"), ("t", "soc", "(-1, 1)"),
])
def test_witnesses_are_sound_and_serialise(text, claim, J):
    w = falsify(parse_function(text), claim, parse_interval(J), FalsifyConfig(trials=300))
    assert isinstance(w, Witness)
    d = json.loads(w.to_json())
    validate(d, "witness")
    assert replay(d) == pytest.approx(w.margin, abs=1e-10)
    assert replay(d) <= -10 * w.tol
    np.testing.assert_allclose(residual(parse_function(text), d["inequality"], Witness.from_dict(d).scene),
                               w.residual, atol=1e-12)


def test_falsify_is_deterministic():
    g = parse_function("1/t - 1")
    a = falsify(g, "soc", Interval(0, 1), FalsifyConfig(trials=50, seed=3))
    b = falsify(g, "soc", Interval(0, 1), FalsifyConfig(trials=50, seed=3))
    assert a.to_dict() == b.to_dict()


def test_falsify_rejects_unknown_claim():
    with pytest.raises(ValueError):
        falsify(INV, "bogus", HALF)
