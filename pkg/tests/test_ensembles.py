import math

import numpy as np
import pytest
from scipy.special import jv

from stdmap_lab.ensembles import (EnsembleSpec, birkhoff_ensemble, birkhoff_sums, birkhoff_trend,
                                  clt_ensemble, correlation, finite_time_doc_scan, push,
                                  singular_limit_scan, singular_limit_value, square_mixing)
from stdmap_lab.family import (CoefficientSchedule, Composition, ContractError, ResolutionError,
                               linear_test, trig_standard)
from stdmap_lab.foliation import Square
from stdmap_lab.observables import get, trig

TRIG = trig_standard()
LIN = linear_test(10)


def const(L, fam=TRIG, eta=0.75):
    return Composition(fam, CoefficientSchedule.constant(L), eta)


def test_spec_validation():
    with pytest.raises(ValueError):
        EnsembleSpec(samples=50)
    with pytest.raises(ValueError):
        EnsembleSpec(time=0)
    assert EnsembleSpec(time=2000).burn == 44


def test_push_identity_for_empty_range():
    x = np.array([0.1, 0.2])
    px, py = push(const(1e3), x, x, 3, 2)
    assert np.array_equal(px, x) and np.array_equal(py, x)


def test_pass_through_for_random_pairs():
    rng = np.random.default_rng(30)
    comp = const(1e4)
    for i in range(5):
        k = int(rng.integers(1, 4))
        a1, b1, a2, b2 = rng.uniform(-1, 1, 4)
        g = trig((a1, b1, 0, k))      # function of y
        h = trig((a2, b2, k, 0), (0.3, 0, k + 1, 0))  # function of x
        exact = 0.5 * (a1 * a2 + b1 * b2)
        est, se = correlation(g, h, comp, 1, 1, budget=200_000, seed=i)
        assert abs(est - exact) <= 3 * se + 1e-12
        assert singular_limit_value(g, h) == pytest.approx(exact, abs=1e-12)


def test_two_map_correlation_bessel_oracle():
    # y after two maps is f(x) - y, so the y-average leaves J_2(2 pi L) / 2
    L = 1e3
    est, se = correlation(get("cos2piy"), get("cos2piy"), const(L), 1, 2, budget=4_000_000, seed=31)
    exact = 0.5 * jv(2, 2 * math.pi * L)
    assert abs(est - exact) <= 3 * se


def test_one_stage_cos_cos_is_zero():
    est, se = correlation(get("cos2pix"), get("cos2pix"), const(1e4), 1, 1, budget=1_000_000, seed=32)
    assert abs(est) <= 3 * se
    assert singular_limit_value(get("cos2pix"), get("cos2pix")) == pytest.approx(0.0, abs=1e-14)


def test_three_stage_correlation_at_noise_floor():
    est, se = correlation(get("cos2pi(x+y)"), get("cos2pix"), const(1e5), 1, 4, budget=1_000_000, seed=33)
    assert abs(est) <= 5 * se


def test_grid_method_refused_beyond_validity():
    with pytest.raises(ResolutionError):
        correlation(get("cos2pix"), get("cos2pix"), const(1e4), 1, 1, method="grid", budget=10_000)
    v, se = correlation(get("cos2piy"), get("cos2pix"), const(1e3), 1, 0, method="grid", budget=10_000)
    assert v == pytest.approx(0.0, abs=1e-12) and se == 0.0
    with pytest.raises(ValueError):
        correlation(get("cos2pix"), get("cos2pix"), const(1e3), 1, 1, method="bogus")


def test_linear_family_fourier_cancellation():
    # cos 2pi(x + y) o F^n is a trig polynomial of frequency <= 11^n; a midpoint grid
    # with more nodes than that integrates its product with cos 2pi x exactly
    comp = const(10.0, LIN)
    G = 4096
    t = (np.arange(G) + 0.5) / G
    X, Y = np.meshgrid(t, t, indexing="ij")
    for n in (1, 2, 3):
        px, py = push(comp, X.ravel(), Y.ravel(), 1, n)
        v = np.mean(get("cos2pi(x+y)")(px, py) * np.cos(2 * np.pi * X.ravel()))
        assert abs(v) <= 1e-12
    tab = finite_time_doc_scan(get("cos2pi(x+y)"), get("cos2pix"), LIN, [10.0], [2, 3], budget=250_000)
    assert tab.all_pass


def test_standard_error_scales_as_inverse_root_nodes():
    budgets = [10_000, 100_000, 1_000_000]
    ses = [correlation(get("cos2pi(x+y)"), get("cos2pix"), const(1e3), 1, 1, budget=b, seed=34)[1]
           for b in budgets]
    slope = np.polyfit(np.log(budgets), np.log(ses), 1)[0]
    assert slope == pytest.approx(-0.5, abs=0.1)


def test_results_do_not_depend_on_threads():
    comp = const(1e4)
    a = correlation(get("cos2piy"), get("cos2piy"), comp, 1, 2, budget=300_000, seed=35, threads=1)
    b = correlation(get("cos2piy"), get("cos2piy"), comp, 1, 2, budget=300_000, seed=35, threads=3)
    assert a == b
    spec1 = EnsembleSpec(samples=70_000, time=20, seed=36, threads=1)
    spec2 = EnsembleSpec(samples=70_000, time=20, seed=36, threads=2)
    s1 = birkhoff_sums(comp, get("cos2pix"), spec1)[0]
    s2 = birkhoff_sums(comp, get("cos2pix"), spec2)[0]
    assert np.array_equal(s1, s2)


def test_birkhoff_zero_observable():
    tab = birkhoff_ensemble(get("zero"), const(1e6), EnsembleSpec(samples=1000, time=50))
    assert all(r.estimate == 0.0 for r in tab.rows)
    assert tab.all_pass
    with pytest.raises(ContractError):
        birkhoff_ensemble(get("one"), const(1e6), EnsembleSpec(samples=1000, time=5))


def test_birkhoff_sums_count_n_terms():
    comp = const(1e6)
    S, Sb, rec = birkhoff_sums(comp, get("one"), EnsembleSpec(samples=200, time=25), record=(10,))
    assert np.all(S == 25) and np.all(Sb == 20) and np.all(rec[10] == 10)


def test_birkhoff_mean_square_matches_variance():
    tab = birkhoff_ensemble(get("cos2pix"), const(1e6), EnsembleSpec(samples=10_000, time=100, seed=37))
    r = tab.rows[0]
    assert r.row_id == "mean-square/N=100"
    assert abs(r.estimate - 0.5 / 100) <= 3 * r.std_error
    assert "shape_L_N" in r.parameters and "shape_L_sqrtN" in r.parameters


def test_birkhoff_trend_rows():
    tab = birkhoff_trend(get("cos2pix"), const(1e6), [10, 100], samples=2000, seed=38)
    trend = tab.select("trend")
    assert len(trend) == 1 and trend[0].passed


def test_clt_contract_and_coboundary():
    spec = EnsembleSpec(samples=2000, time=200, seed=39)
    with pytest.raises(ContractError):
        clt_ensemble(get("cos2pix-cos2piy"), const(1e6), spec)
    tab = clt_ensemble(get("cos2pix-cos2piy"), const(1e6), spec, coboundary=True)
    assert len(tab.rows) == 1 and tab.rows[0].estimate <= 0.01
    with pytest.raises(ContractError):
        clt_ensemble(get("one"), const(1e6), spec)


def test_clt_small_ensemble_rows():
    tab = clt_ensemble(get("cos2pix"), const(1e6), EnsembleSpec(samples=20_000, time=200, seed=40),
                       var_rel_tol=0.05, ks_tol=0.03)
    assert [r.row_id for r in tab.rows] == ["variance/N=200", "ks/N=200", "variance/N=100"]
    assert tab.all_pass


def test_square_mixing_constant_observable():
    tab = square_mixing(get("one"), const(1e4, eta=0.7), Square(0.3, 0.3, 0.1), [2, 4], samples=1000)
    assert all(r.estimate == 0.0 for r in tab.select("n="))


def test_square_mixing_full_torus_is_global_correlation():
    tab = square_mixing(get("cos2pi(x+y)"), const(1e4, eta=0.7), Square(), [6, 8], samples=200_000, seed=41)
    for r in tab.select("n="):
        assert r.estimate <= 5 * r.std_error


def test_singular_limit_scan_rows():
    tab = singular_limit_scan(TRIG, [1e3, 1e4], budget=250_000)
    assert len(tab.rows) == 4
    assert all(r.passed for r in tab.select("pass-through"))
