import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stdmap_lab.family import (BadSet, CoefficientSchedule, Composition, ContractError, DomainError, Stage,
                               apply_forward, apply_inverse, bad_half_width, bad_set,
                               cocycle_norm_growth, critical_set, custom_family, in_bad_set, iterate,
                               jacobian, linear_test, stage_eval, trig_standard, validate_hypotheses)
from stdmap_lab.torus import circle_distance, wrap

TRIG = trig_standard()
LIN = linear_test(10)


def stage(L, fam=TRIG, eta=0.75, n=1):
    return Stage(n, float(L), fam, eta)


def test_stage_eval_examples():
    f, fp, fpp = stage_eval(stage(10), 0.25)
    assert (f, fp) == pytest.approx((10.5, 2.0), abs=1e-12)
    assert fpp == pytest.approx(-4 * math.pi**2 * 10)
    assert stage_eval(stage(10, LIN), 0.37) == pytest.approx((3.7, 10.0, 0.0))


def test_stage_eval_derivative_matches_finite_difference():
    st_ = stage(1e4)
    _, fp, _ = stage_eval(st_, 0.1)
    h = 1e-6
    fd = (stage_eval(st_, 0.1 + h)[0] - stage_eval(st_, 0.1 - h)[0]) / (2 * h)
    assert fp == pytest.approx(2 * math.pi * 1e4 * math.cos(0.2 * math.pi) + 2, rel=1e-14)
    assert fd == pytest.approx(fp, rel=1e-5)


def test_forward_inverse_examples():
    assert apply_forward(stage(10), 0.25, 0.5) == pytest.approx((0.0, 0.25), abs=1e-12)
    assert apply_forward(stage(10, LIN), 0.1, 0.3) == pytest.approx((0.7, 0.1), abs=1e-12)
    assert apply_inverse(stage(10, LIN), 0.7, 0.1) == pytest.approx((0.1, 0.3), abs=1e-12)
    x, y = apply_inverse(stage(10), 0.0, 0.25)
    assert (x, y) == pytest.approx((0.25, 0.5), abs=1e-12)


@pytest.mark.parametrize("L", [10, 1e4, 1e6])
def test_roundtrip_random_points(L):
    rng = np.random.default_rng(1)
    x, y = rng.random(10**5), rng.random(10**5)
    st_ = stage(L)
    xb, yb = apply_inverse(st_, *apply_forward(st_, x, y))
    assert np.max(circle_distance(xb, x)) <= 1e-12
    assert np.max(circle_distance(yb, y)) <= 1e-12
    xf, yf = apply_forward(st_, *apply_inverse(st_, x, y))
    assert np.max(circle_distance(xf, x)) <= 1e-12


def test_jacobian_examples_and_determinant():
    J = jacobian(stage(10), 0.25)
    assert np.allclose(J, [[2, -1], [1, 0]])
    assert np.allclose(jacobian(stage(10, LIN), 0.77), [[10, -1], [1, 0]])
    x = np.random.default_rng(2).random(10**5)
    J = jacobian(stage(1e4), x)
    det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
    assert np.max(np.abs(det - 1)) <= 1e-13


def test_pushforward_preserves_lebesgue():
    # measure of F^{-1}(Q) for a square Q of side 0.2, by sampling F^{-1}(Q) = {p: F(p) in Q}
    rng = np.random.default_rng(3)
    M = 10**6
    x, y = rng.random(M), rng.random(M)
    fx, fy = apply_forward(stage(1e3), x, y)
    inside = (wrap(fx - 0.35) < 0.2) & (wrap(fy - 0.6) < 0.2)
    p = inside.mean()
    assert abs(p - 0.04) <= 3 * math.sqrt(0.04 * 0.96 / M)


def test_cone_preservation_off_bad_set():
    L, eta = 1e4, 0.75
    st_ = stage(L, eta=eta)
    rng = np.random.default_rng(4)
    x = rng.random(10**5)
    x = x[~in_bad_set(st_, x)]
    vx = rng.choice([-1.0, 1.0], x.size)
    vy = rng.uniform(-0.1, 0.1, x.size) * np.abs(vx)
    _, fp, _ = stage_eval(st_, x)
    wx, wy = fp * vx - vy, vx
    assert np.all(np.abs(wy) <= np.abs(wx) / 10)
    assert np.all(np.hypot(wx, wy) >= L**eta * np.hypot(vx, vy))


# -- schedules ---------------------------------------------------------------


def test_schedule_kinds():
    assert CoefficientSchedule.constant(5.0)(7) == 5.0
    s = CoefficientSchedule.polynomial(6, 1e3)
    assert s(1) == 1e3 and s(4) == 4096.0
    e = CoefficientSchedule.explicit([10, 20, 30])
    assert [e(n) for n in (1, 2, 3, 9)] == [10, 20, 30, 30]
    with pytest.raises(DomainError):
        CoefficientSchedule.explicit([3, 2])


@settings(max_examples=40, deadline=None)
@given(st.floats(0.5, 20), st.floats(1, 1e4), st.sampled_from([None, 1e6, 1e8]))
def test_schedule_nondecreasing(p, L0, cap):
    s = CoefficientSchedule.polynomial(p, L0, cap)
    v = s.formula(np.arange(1, 300))
    assert np.all(np.diff(v) >= 0)


def test_schedule_caps():
    s = CoefficientSchedule.polynomial(14, 1e3)
    with pytest.warns(RuntimeWarning):
        s(4)  # 4^14 = 2.7e8
    with pytest.raises(DomainError):
        s(8)  # 8^14 = 4.4e12


def test_tail_sum():
    s = CoefficientSchedule.polynomial(6, 1.0)
    # sum_{n>=2} n^-1.8 = zeta(1.8) - 1
    from scipy.special import zeta
    assert s.tail_sum(-0.3, 2) == pytest.approx(zeta(1.8) - 1, rel=1e-6)
    assert math.isinf(s.tail_sum(-0.15, 1))
    assert math.isinf(CoefficientSchedule.constant(10).tail_sum(-0.5, 1))
    assert CoefficientSchedule.constant(100).tail_sum(-0.5, 1, 4) == pytest.approx(0.4)


# -- critical and bad sets ------------------------------------------------------


def test_critical_sets():
    assert len(critical_set(stage(10, LIN))) == 0
    r = critical_set(stage(10)).roots
    root = math.acos(-1 / (10 * math.pi)) / (2 * math.pi)
    assert r == pytest.approx((root, 1 - root), abs=1e-13)
    assert r[0] == pytest.approx(0.2550669150709341, abs=1e-13)
    big = critical_set(stage(1e8)).roots
    assert big == pytest.approx((0.25, 0.75), abs=1e-8)
    _, fp, _ = stage_eval(stage(10), np.array(r))
    assert np.max(np.abs(fp)) < 1e-9


def test_bad_set_linear_empty():
    b = bad_set(stage(10, LIN))
    assert b.strips == [] and b.measure == 0.0
    assert not np.any(in_bad_set(stage(10, LIN), np.linspace(0, 1, 100)))


def test_bad_set_width_and_boundary():
    fam = trig_standard(K1=0.04)
    st_ = stage(1e4, fam)
    assert bad_half_width(st_) == pytest.approx(0.008)
    r = critical_set(st_).roots[0]
    assert in_bad_set(st_, r + 0.0079999)
    assert not in_bad_set(st_, r + 0.00801)
    # boundary counts as inside (dyadic values make the distance exact)
    b = BadSet((0.25,), 0.125)
    assert b.contains(0.375) and b.contains(0.125) and not b.contains(0.3750001)
    assert bad_set(st_).measure == pytest.approx(4 * 0.008)
    primed = bad_half_width(st_, "primed")
    assert primed == pytest.approx(0.008 + 0.04 * 1e4 ** (-1 + 0.875))


def test_bad_set_measure_decreases_in_L():
    m = [bad_set(stage(L)).measure for L in (1e2, 1e3, 1e4, 1e5)]
    assert all(a > b for a, b in zip(m, m[1:]))


def test_validate_hypotheses():
    rep = validate_hypotheses(LIN, stage(10, LIN))
    assert rep.K0_hat == pytest.approx(1.0) and rep.K1_hat == 0.0 and rep.M0_hat == 0
    rep = validate_hypotheses(TRIG, stage(100))
    assert rep.K0_hat == pytest.approx(2 * math.pi + 4 * math.pi**2 + 0.02, abs=1e-3)
    assert rep.M0_hat == 2
    # K1 at L = 1e4: the maximum of L d(x, C) / |f'| sits at x = 1/2
    L = 1e4
    r = math.acos(-1 / (math.pi * L)) / (2 * math.pi)
    k1 = L * (0.5 - r) / (2 * math.pi * L - 2)
    rep = validate_hypotheses(TRIG, stage(L))
    assert rep.K1_hat == pytest.approx(k1, rel=1e-4)
    assert rep.K1_hat == pytest.approx(0.040, abs=5e-4)
    with pytest.raises(DomainError):
        validate_hypotheses(TRIG, stage(100), grid_size=100)


def test_custom_family_checks_derivatives():
    fam = custom_family(lambda x, L: L * np.sin(2 * np.pi * x) + 2 * x,
                        lambda x, L: 2 * np.pi * L * np.cos(2 * np.pi * x) + 2,
                        lambda x, L: -4 * np.pi**2 * L * np.sin(2 * np.pi * x), degree=2)
    assert critical_set(stage(10, fam)).roots == pytest.approx(critical_set(stage(10)).roots, abs=1e-12)
    with pytest.raises((ContractError, DomainError)):
        custom_family(lambda x, L: L * np.sin(2 * np.pi * x) + 2 * x,
                      lambda x, L: np.ones_like(x), lambda x, L: np.zeros_like(x), degree=2)


# -- trajectories and cocycles ----------------------------------------------------


def test_iterate_matches_manual():
    comp = Composition(TRIG, CoefficientSchedule.polynomial(2, 10.0), 0.75)
    x, y = 0.123, 0.456
    xm, ym = x, y
    for k in range(2, 6):
        xm, ym = apply_forward(comp.stage(k), xm, ym)
    assert iterate(comp, x, y, 2, 5) == pytest.approx((xm, ym))
    assert iterate(comp, x, y, 3, 2) == pytest.approx((x, y))


def test_cocycle_linear_limit():
    comp = Composition(LIN, CoefficientSchedule.constant(10.0), 0.75)
    ex = cocycle_norm_growth(comp, np.array([0.1]), np.array([0.2]), 400)
    assert ex[-1, 0] == pytest.approx(math.log((10 + math.sqrt(96)) / 2), abs=5e-3)


def test_cocycle_trig_typical_growth():
    comp = Composition(TRIG, CoefficientSchedule.constant(1e4), 0.75)
    rng = np.random.default_rng(5)
    ex = cocycle_norm_growth(comp, rng.random(10**4), rng.random(10**4), 10)
    assert np.mean(ex[-1] >= 0.9 * math.log(1e4)) >= 0.99


def test_cocycle_increasing_for_growing_schedule():
    comp = Composition(TRIG, CoefficientSchedule.polynomial(6, 1e3), 0.75)
    rng = np.random.default_rng(6)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        ex = cocycle_norm_growth(comp, rng.random(2000), rng.random(2000), 20)
    # L_n = 1e3 for n <= 3, then grows
    assert np.all(np.diff(np.median(ex[3:], axis=1)) > 0)
