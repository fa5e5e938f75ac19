import math

import numpy as np
import pytest

from stdmap_lab.family import (CoefficientSchedule, Composition, DomainError, apply_forward,
                               bad_half_width, linear_test, trig_standard)
from stdmap_lab.foliation import (Square, StatisticsError, atom_bounds, compute_tau, compute_tau_bar,
                                  initial_state, proliferated_mass, sigma_threshold, survival_tail,
                                  tail_shape, track_sigma, tracker_step)
from stdmap_lab.torus import circle_distance, wrap

TRIG = trig_standard()
LIN = linear_test(10, K1=0.04)


def lin_comp():
    return Composition(LIN, CoefficientSchedule.constant(10.0), 0.75)


def trig_comp(L=1e4, eta=0.75):
    return Composition(TRIG, CoefficientSchedule.constant(L), eta)


def tail_comp():
    return Composition(TRIG, CoefficientSchedule.polynomial(6, 1e3), 0.7)


def test_linear_stopping_times_are_one():
    x, y = Square().sample(1000, 2)
    assert np.all(compute_tau(lin_comp(), x, y, 20).value == 1)
    assert np.all(compute_tau_bar(lin_comp(), x, y, 20).value == 1)
    r = track_sigma(lin_comp(), x, y, N_max=20)
    s = survival_tail(r, "tau", lin_comp(), thresholds=[1, 2, 5], min_uncensored=1000)
    assert list(s.empirical) == [0.0, 0.0, 0.0]


def test_scalar_inputs():
    t = compute_tau(trig_comp(), 0.0, 0.3, 5)
    assert isinstance(t.value, int) and t.value == 1 and not t.censored
    with pytest.raises(DomainError):
        compute_tau(trig_comp(), 0.0, 0.3, 0)


def test_first_step_bad_fraction_matches_strip_measure():
    M = 10**6
    x, y = Square().sample(M, 3)
    st1 = trig_comp().stage(1)
    t = compute_tau(trig_comp(), x, y, 1)
    p = np.mean(t.value > 1)
    leb = 4 * bad_half_width(st1)  # two strips of width 2 * half-width
    assert abs(p - leb) <= 3 * math.sqrt(leb * (1 - leb) / M)
    assert leb == pytest.approx(0.032, abs=0.001)


def test_tau_bar_dominates_tau():
    x, y = Square().sample(20000, 4)
    comp = tail_comp()
    t = compute_tau(comp, x, y, 60).value
    tb = compute_tau_bar(comp, x, y, 60).value
    assert np.all(tb >= t)
    assert np.mean(tb > t) > 0


def test_censoring_flag_marks_late_visits():
    comp = trig_comp(1e3)
    x, y = Square().sample(5000, 5)
    t = compute_tau(comp, x, y, 50)
    late = t.value - 1 > 45
    assert np.array_equal(t.censored, late)


def test_linear_tracker_geometric_growth():
    comp = lin_comp()
    a = 5e-5
    S = Square(0.5 - a, 0.2, 2 * a)
    r = track_sigma(comp, np.array([0.5]), np.array([0.2 + a]), S, N_max=12, sigma_horizon=8,
                    persistence=3, record_radius=True)
    # endpoint offsets obey u_{k+1} = q u_k - u_{k-1} (x' = q x - y, y' = x), capped at 1/2
    u = [0.0, a]
    for _ in range(11):
        u.append(10 * u[-1] - u[-2])
    expected = np.minimum(np.array(u[1:13]), 0.5)
    assert np.allclose(r.radius[:, 0], expected, rtol=1e-12, atol=0)
    thr = sigma_threshold(comp.stage(1))
    assert r.sigma[0] == int(np.argmax(expected >= thr)) + 1 == 4
    assert r.persistence_ok[0]
    assert not np.any(r.case2[1:, 0])


def test_sigma_equals_tau_bar_when_radius_is_large():
    comp = trig_comp(1e4, 0.7)
    x, y = Square().sample(20000, 6)
    r = track_sigma(comp, x, y, Square(), N_max=40, sigma_horizon=30)
    first = (r.tau_bar == 1) & ~r.tau_bar_censored
    assert np.sum(first) > 1000
    assert np.all(r.sigma[first] == 1)


def test_case_one_extent_is_pushforward_of_endpoints():
    comp = trig_comp(1e4)
    st1, st2 = comp.stage(1), comp.stage(2)
    side = 1e-7
    x0, y0 = Square().sample(2000, 7)
    state = initial_state(st1, x0, y0, Square(0.0, 0.0, 1.0))
    # replace the torus-wide segment by a short one so that no clipping happens
    state.dxl[:] = -side / 2
    state.dxr[:] = side / 2
    new = tracker_step(st1, st2, state)
    lx, ly = apply_forward(st1, wrap(x0 - side / 2), y0)
    rx, ry = apply_forward(st1, wrap(x0 + side / 2), y0)
    left, right = atom_bounds(st2, new.xc)
    ok = ~new.restarted & (new.dxl > left) & (new.dxr < right)
    assert np.mean(ok) > 0.9
    got = np.sort(np.stack([wrap(new.xc + new.dxl), wrap(new.xc + new.dxr)]), axis=0)
    ends = np.sort(np.stack([lx, rx]), axis=0)
    assert np.max(circle_distance(got[:, ok], ends[:, ok])) <= 1e-10
    gy = np.sort(np.stack([wrap(new.yc + new.dyl), wrap(new.yc + new.dyr)]), axis=0)
    ey = np.sort(np.stack([ly, ry]), axis=0)
    assert np.max(circle_distance(gy[:, ok], ey[:, ok])) <= 1e-10


def test_atom_bounds_contain_centre():
    st1 = trig_comp().stage(1)
    x = np.random.default_rng(8).random(10000)
    left, right = atom_bounds(st1, x)
    assert np.all(left <= 0) and np.all(right >= 0)
    assert np.all(right - left <= 1.0)


def test_ordering_and_persistence_on_tail_schedule():
    comp = tail_comp()
    S = Square(0.3, 0.3, 0.1)
    x, y = S.sample(20000, 9)
    r = track_sigma(comp, x, y, S, N_max=100, sigma_horizon=90)
    assert r.ordering_ok().all()
    assert r.persistence_ok.all()
    full = ~(r.tau_censored | r.tau_bar_censored | r.sigma_censored)
    assert np.mean(full) > 0.9


def test_survival_monotone_and_errors():
    comp = tail_comp()
    S = Square(0.3, 0.3, 0.1)
    x, y = S.sample(5000, 10)
    r = track_sigma(comp, x, y, S, N_max=60, sigma_horizon=50)
    for which in ("tau", "tau_bar", "sigma"):
        s = survival_tail(r, which, comp)
        assert np.all(np.diff(s.empirical) <= 0)
        assert np.all(s.std_error > 0)
        assert np.all(np.isfinite(s.theoretical_shape))
    with pytest.raises(StatisticsError):
        survival_tail(r, "tau", comp, min_uncensored=10**6)
    r.sigma_censored[:] = True
    with pytest.raises(StatisticsError):
        survival_tail(r, "sigma", comp)


def test_tail_shape_truncates_divergent_series():
    comp = tail_comp()
    assert math.isfinite(tail_shape(comp, "tau", 10))
    # sum of n^(-0.9) diverges, so an untruncated shape is infinite
    assert math.isinf(tail_shape(comp, "tau_bar", 10))
    assert tail_shape(comp, "tau_bar", 10, horizon=100) == pytest.approx(
        sum(max(1e3, n**6) ** -0.15 for n in range(10, 101)))
    assert tail_shape(comp, "sigma", 40, 100) == tail_shape(comp, "tau_bar", 10, 100)


def test_proliferated_mass():
    m, se, _ = proliferated_mass(lin_comp(), Square(0.3, 0.3, 0.1), 6, samples=2000)
    assert m == 1.0
    comp = tail_comp()
    S = Square(0.3, 0.3, 0.1)
    m20, se20, _ = proliferated_mass(comp, S, 20, samples=20000)
    m40, se40, _ = proliferated_mass(comp, S, 40, samples=20000)
    assert m40 >= m20 - 3 * math.hypot(se20, se40)
    with pytest.raises(DomainError):
        proliferated_mass(comp, S, 1)


def test_square_rejects_outside_point():
    with pytest.raises(DomainError):
        Square(0.0, 0.0, 1.5)
    with pytest.raises(DomainError):
        initial_state(trig_comp().stage(1), np.array([0.5]), np.array([0.05]), Square(0.0, 0.0, 0.1))
