"""Monte Carlo ensemble experiments.

All randomness comes from per-chunk Philox streams (see :mod:`streams`);
with fixed chunk sizes the results do not depend on the thread count.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .family import CoefficientSchedule, Composition, ContractError, MapFamily, ResolutionError, apply_forward
from .foliation import Square
from .observables import Observable
from .results import ResultTable, calibrated_envelope, decreasing_within_noise, ls_envelope, strictly_decreasing
from .stats import ks_critical, ks_statistic, mean_of, sigma_squared
from .streams import DEFAULT_CHUNK, map_chunks


@dataclass(frozen=True)
class EnsembleSpec:
    samples: int = 10_000
    time: int = 100
    burn_in: Optional[int] = None  # None: floor(sqrt(time))
    seed: int = 0
    stratified: bool = False
    threads: int = 1
    chunk: int = DEFAULT_CHUNK

    def __post_init__(self):
        if self.samples < 100:
            raise ValueError("need at least 100 samples")
        if self.time < 1:
            raise ValueError("time must be >= 1")

    @property
    def burn(self) -> int:
        return int(math.isqrt(self.time)) if self.burn_in is None else int(self.burn_in)


def push(comp: Composition, x, y, m: int, n: int):
    """Apply stages ``m..n`` (identity when ``n < m``)."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for k in range(m, n + 1):
            x, y = apply_forward(comp.stage(k), x, y)
    return x, y


def _stage_expansion(comp: Composition, m: int, n: int) -> float:
    e = 1.0
    xs = np.linspace(0, 1, 4097)
    for k in range(m, n + 1):
        st = comp.stage(k)
        e *= float(np.max(np.abs(st.family.deriv(xs, st.L)))) + 1.0
    return e


# ---------------------------------------------------------------------------
# correlations


def correlation(phi1: Observable, phi2: Observable, comp: Composition, m: int, n: int,
                method: str = "stratified-MC", budget: int = 1_000_000, seed: int = 0,
                threads: int = 1, rows_per_chunk: Optional[int] = None):
    """``int phi1 o F_m^n . phi2`` with a standard error.

    ``stratified-MC`` draws one jittered node in each cell of a ``G x G``
    grid (``G = ceil(sqrt(budget))``); the standard error is the sample
    standard deviation over ``sqrt(nodes)``.  ``grid`` uses cell midpoints
    and is refused unless (spacing) x (expansion) <= 0.01.
    """
    if n < m - 1:
        raise ValueError("need m <= n + 1")
    G = int(math.ceil(math.sqrt(budget)))
    if method == "grid":
        if _stage_expansion(comp, m, n) / G > 0.01:
            raise ResolutionError("grid method invalid: expansion x spacing > 0.01")
    elif method != "stratified-MC":
        raise ValueError(f"unknown method {method!r}")
    rows_per_chunk = rows_per_chunk or max(1, DEFAULT_CHUNK // G)

    def work(rng, r0, r1):
        i = np.arange(r0, r1)
        j = np.arange(G)
        I, J = np.meshgrid(i, j, indexing="ij")
        if method == "grid":
            x = (I + 0.5) / G
            y = (J + 0.5) / G
        else:
            u = rng.random(I.shape + (2,))
            x = (I + u[..., 0]) / G
            y = (J + u[..., 1]) / G
        x, y = x.ravel(), y.ravel()
        px, py = push(comp, x, y, m, n)
        v = phi1(px, py) * phi2(x, y)
        return float(np.sum(v)), float(np.sum(v * v)), v.size

    parts = map_chunks(work, G, seed, rows_per_chunk, threads)
    s = sum(p[0] for p in parts)
    s2 = sum(p[1] for p in parts)
    cnt = sum(p[2] for p in parts)
    mean = s / cnt
    var = max(s2 / cnt - mean * mean, 0.0)
    se = math.sqrt(var / cnt) if method != "grid" else 0.0
    return mean, se


def singular_limit_value(phi1: Observable, phi2: Observable, G: int = 64) -> float:
    """``int phi1(x, z) phi2(z, y) dx dy dz`` (the one-step singular limit)."""
    t = np.arange(G) / G
    X, Z = np.meshgrid(t, t, indexing="ij")
    a = np.mean(phi1(X, Z), axis=0)  # over x -> function of z
    b = np.mean(phi2(Z.T, X.T), axis=1)  # phi2(z, y) averaged over y
    return float(np.mean(a * b))


def singular_limit_shape(L: float, eta: float, alpha: float) -> float:
    return L ** (-min(2 * eta - 1, alpha * (1 - eta) / (2 + alpha)))


def singular_limit_scan(family: MapFamily, L_list: Sequence[float], eta: float = 0.75,
                        alpha: float = 1.0, budget: int = 1_000_000, seed: int = 0,
                        threads: int = 1, pairs=None) -> ResultTable:
    """One-stage correlations against the singular-limit value for each ``L``.

    ``pairs`` is a list of ``(name, phi1, phi2, mode)`` with mode ``exact``
    (test ``|est - limit| <= 3 SE``) or ``envelope`` (one least-squares
    constant for ``|est - limit| <= C L^(-min(2 eta - 1, alpha(1-eta)/(2+alpha))) + 3 SE``).
    """
    from .observables import get
    if pairs is None:
        pairs = [("pass-through", get("cos2piy"), get("cos2pix"), "exact"),
                 ("cos-cos", get("cos2pix"), get("cos2pix"), "envelope")]
    tab = ResultTable()
    for name, p1, p2, mode in pairs:
        target = singular_limit_value(p1, p2)
        ests, ses, shapes = [], [], []
        for k, L in enumerate(L_list):
            comp = Composition(family, CoefficientSchedule.constant(L), eta)
            e, se = correlation(p1, p2, comp, 1, 1, budget=budget, seed=seed + 1000 * k, threads=threads)
            ests.append(e - target)
            ses.append(se)
            shapes.append(singular_limit_shape(L, eta, alpha))
        if mode == "exact":
            ok = np.abs(ests) <= 3 * np.asarray(ses)
            C = math.nan
        else:
            fit = ls_envelope(ests, ses, shapes)
            ok, C = fit.passed, fit.constant
        for L, e, se, s, p in zip(L_list, ests, ses, shapes, ok):
            tab.add("singular-limit", f"{name}/L={L:g}", {"L": L, "eta": eta, "alpha": alpha,
                    "pair": name, "limit": target, "budget": budget}, e, se,
                    0.0 if mode == "exact" else s, C, bool(p))
        tab.fitted[name] = C
    return tab


def finite_time_shape(n: int, L: float, alpha: float) -> float:
    """``n L^(-alpha / (3 alpha + 4))``."""
    return n * L ** (-alpha / (3 * alpha + 4))


def finite_time_doc_scan(phi: Observable, psi: Observable, family: MapFamily, L_list, n_list,
                         alpha: float = 1.0, budget: int = 1_000_000, seed: int = 0,
                         threads: int = 1, eta: float = 0.75) -> ResultTable:
    """Correlations ``int phi o F_L^n . psi - int phi int psi`` over an ``(L, n)`` grid.

    A single constant is fitted by least squares over cells above three
    standard errors; a cell fails when it exceeds the fitted envelope by more
    than three standard errors.
    """
    mphi, mpsi = mean_of(phi), mean_of(psi)
    cells = []
    for a, L in enumerate(L_list):
        comp = Composition(family, CoefficientSchedule.constant(L), eta)
        for b, n in enumerate(n_list):
            e, se = correlation(phi, psi, comp, 1, n, budget=budget,
                                seed=seed + 7919 * a + 31 * b, threads=threads)
            cells.append((L, n, e - mphi * mpsi, se, finite_time_shape(n, L, alpha)))
    est = [c[2] for c in cells]
    ses = [c[3] for c in cells]
    shp = [c[4] for c in cells]
    fit = ls_envelope(est, ses, shp)
    tab = ResultTable()
    for (L, n, e, se, s), p in zip(cells, fit.passed):
        tab.add("finite-time-doc", f"L={L:g}/n={n}", {"L": L, "n": n, "alpha": alpha,
                "phi": phi.name, "psi": psi.name, "budget": budget,
                "exponent": -alpha / (3 * alpha + 4)}, e, se, s, fit.constant, bool(p))
    tab.fitted["finite-time-doc"] = fit.constant
    return tab


# ---------------------------------------------------------------------------
# Birkhoff sums


def birkhoff_sums(comp: Composition, phi: Observable, spec: EnsembleSpec, record=(),
                  corner=(0.0, 0.0), side: float = 1.0):
    """``S_N = sum_{i=0}^{N-1} phi(F^i p)`` for uniform ``p``.

    Returns ``(S_N, S_burn, recorded)`` where ``S_burn`` omits the first
    ``spec.burn`` terms and ``recorded[t]`` is ``S_t`` for ``t`` in ``record``.
    """
    N = spec.time
    burn = spec.burn
    record = tuple(sorted(set(int(t) for t in record if 0 < t <= N)))

    def work(rng, s, e):
        u = rng.random((e - s, 2))
        x = corner[0] + side * u[:, 0]
        y = corner[1] + side * u[:, 1]
        x, y = x - np.floor(x), y - np.floor(y)
        S = np.zeros(e - s)
        Sb = np.zeros(e - s)
        rec = {}
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            for i in range(N):
                v = phi(x, y)
                S += v
                if i >= burn:
                    Sb += v
                if i + 1 in record:
                    rec[i + 1] = S.copy()
                if i + 1 < N:
                    x, y = apply_forward(comp.stage(i + 1), x, y)
        return S, Sb, rec

    parts = map_chunks(work, spec.samples, spec.seed, spec.chunk, spec.threads)
    S = np.concatenate([p[0] for p in parts])
    Sb = np.concatenate([p[1] for p in parts])
    rec = {t: np.concatenate([p[2][t] for p in parts]) for t in record}
    return S, Sb, rec


def _mean_se(v):
    v = np.asarray(v, float)
    return float(np.mean(v)), float(np.std(v, ddof=1) / math.sqrt(v.size))


def _batch_max_se(v, batches=10):
    parts = np.array_split(np.asarray(v), batches)
    mx = np.array([np.max(p) for p in parts])
    return float(np.std(mx, ddof=1) / math.sqrt(batches))


def birkhoff_ensemble(phi: Observable, comp: Composition, spec: EnsembleSpec,
                      sigma2: Optional[float] = None, alpha: float = 1.0) -> ResultTable:
    """``||N^-1 S_N||^2`` (mean square over the ensemble), ``max |N^-1 S_N|`` and
    the same with the first ``floor(sqrt N)`` terms dropped.

    The mean-square row is compared with ``sigma^2 / N`` (within 3 SE); the
    strong-law shapes ``N^2 L_N^(-a/(3a+4))`` and the same with
    ``L_floor(sqrt N)`` are recorded as parameters.
    """
    if abs(mean_of(phi)) > 1e-8:
        raise ContractError("observable must have zero mean")
    N = spec.time
    S, Sb, _ = birkhoff_sums(comp, phi, spec)
    if sigma2 is None:
        sigma2 = sigma_squared(phi) if phi.trig is not None else math.nan
    tab = ResultTable()
    e = -alpha / (3 * alpha + 4)
    LN = comp.schedule.formula(N)
    Lr = comp.schedule.formula(max(1, math.isqrt(N)))
    params = {"N": N, "M": spec.samples, "seed": spec.seed, "phi": phi.name,
              "shape_L_N": float(N**2 * LN**e), "shape_L_sqrtN": float(N**2 * Lr**e)}
    ms, ms_se = _mean_se((S / N) ** 2)
    target = sigma2 / N
    ok = abs(ms - target) <= 3 * ms_se if math.isfinite(target) else True
    if ms_se == 0.0:
        ok = abs(ms - target) <= 1e-15
    tab.add("birkhoff", f"mean-square/N={N}", params, ms, ms_se, target, math.nan, bool(ok))
    mx = float(np.max(np.abs(S / N)))
    tab.add("birkhoff", f"max/N={N}", params, mx, _batch_max_se(np.abs(S / N)), math.nan,
            math.nan, True)
    Nb = N - spec.burn
    msb, msb_se = _mean_se((Sb / N) ** 2)
    tab.add("birkhoff", f"burn-mean-square/N={N}", dict(params, burn=spec.burn), msb, msb_se,
            sigma2 * Nb / N**2 if math.isfinite(sigma2) else math.nan, math.nan, True)
    tab.add("birkhoff", f"burn-max/N={N}", dict(params, burn=spec.burn),
            float(np.max(np.abs(Sb / N))), _batch_max_se(np.abs(Sb / N)), math.nan, math.nan, True)
    return tab


def birkhoff_trend(phi: Observable, comp: Composition, N_list, samples: int, seed: int = 0,
                   threads: int = 1, compare_sigma: bool = False) -> ResultTable:
    """Mean-square Birkhoff averages over several ``N`` with a strict decrease check."""
    tab = ResultTable()
    vals, ses = [], []
    for k, N in enumerate(N_list):
        t = birkhoff_ensemble(phi, comp, EnsembleSpec(samples, N, seed=seed + k, threads=threads))
        r = t.rows[0]
        if not compare_sigma:
            r.passed = True
        vals.append(r.estimate)
        ses.append(r.std_error)
        tab.extend(t)
    dec = strictly_decreasing(vals)
    for (a, b), ok in zip(zip(N_list[:-1], N_list[1:]), dec):
        tab.add("birkhoff", f"trend/N={a}->{b}", {"N_from": a, "N_to": b}, vals[N_list.index(b)] -
                vals[N_list.index(a)], math.hypot(ses[N_list.index(a)], ses[N_list.index(b)]),
                0.0, math.nan, bool(ok))
    return tab


# ---------------------------------------------------------------------------
# CLT


def clt_ensemble(phi: Observable, comp: Composition, spec: EnsembleSpec, coboundary: bool = False,
                 var_rel_tol: float = 0.03, ks_tol: float = 0.02,
                 coboundary_tol: float = 0.01) -> ResultTable:
    """Distribution of ``S_N / sqrt(N)``.

    Reports the sample variance against ``sigma^2``, the KS distance of
    ``S_N / (sigma sqrt N)`` to the standard normal and the variance at
    ``N/2`` (stability).  In coboundary mode only ``Var(S_N / sqrt N)`` is
    reported and must not exceed ``coboundary_tol``.
    """
    if abs(mean_of(phi)) > 1e-8:
        raise ContractError("observable must have zero mean")
    s2 = sigma_squared(phi)
    if s2 <= 1e-10 and not coboundary:
        raise ContractError("sigma^2 = 0: use coboundary mode for this observable")
    N = spec.time
    half = max(1, N // 2)
    S, _, rec = birkhoff_sums(comp, phi, spec, record=(half,))
    Z = S / math.sqrt(N)
    M = Z.size
    var = float(np.var(Z, ddof=1))
    m4 = float(np.mean((Z - Z.mean()) ** 4))
    var_se = math.sqrt(max(m4 - var**2, 0.0) / M)
    params = {"N": N, "M": M, "seed": spec.seed, "phi": phi.name, "sigma2": s2}
    tab = ResultTable()
    if coboundary:
        tab.add("clt", f"coboundary-variance/N={N}", params, var, var_se, coboundary_tol,
                math.nan, var <= coboundary_tol)
        return tab
    tab.add("clt", f"variance/N={N}", params, var, var_se, s2, math.nan,
            abs(var - s2) <= var_rel_tol * s2)
    ks = ks_statistic(Z / math.sqrt(s2))
    tab.add("clt", f"ks/N={N}", dict(params, ks_critical_99=ks_critical(M)), ks, math.nan,
            ks_tol, math.nan, ks <= ks_tol)
    Zh = rec[half] / math.sqrt(half)
    vh = float(np.var(Zh, ddof=1))
    m4h = float(np.mean((Zh - Zh.mean()) ** 4))
    vh_se = math.sqrt(max(m4h - vh**2, 0.0) / M)
    tab.add("clt", f"variance/N={half}", dict(params, N=half), vh, vh_se, s2, math.nan,
            abs(vh - s2) <= var_rel_tol * s2)
    return tab


# ---------------------------------------------------------------------------
# square mixing


def square_mixing_shape(comp: Composition, n: int, side: float, alpha: float = 1.0,
                        horizon: Optional[int] = None) -> float:
    """``max(L_{n/2}^(-min(2eta-1, a(1-eta)/(a+2))), side^-2 sum_{i>=n/8} L_i^(-(1-eta)/2))``.

    A divergent tail sum is truncated at ``horizon``.
    """
    eta = comp.eta
    a = comp.schedule.formula(max(1, n // 2)) ** (-min(2 * eta - 1, alpha * (1 - eta) / (alpha + 2)))
    tail = comp.schedule.tail_sum(-(1 - eta) / 2, max(1, n // 8))
    if not math.isfinite(tail):
        tail = comp.schedule.tail_sum(-(1 - eta) / 2, max(1, n // 8), horizon or n)
    return float(max(a, tail / side**2))


def square_mixing(psi: Observable, comp: Composition, square: Square, n_list, samples: int = 1_000_000,
                  seed: int = 0, threads: int = 1, alpha: float = 1.0,
                  calibrate: int = 1) -> ResultTable:
    """``int psi o F^n dnu - int psi`` for ``nu`` uniform on the square.

    The envelope constant is calibrated on the first ``calibrate`` entries
    of ``n_list`` and tested on all; the deviation must also be
    non-increasing in ``n`` up to three combined standard errors.
    """
    n_list = sorted(int(n) for n in n_list)
    nmax = n_list[-1]
    mpsi = mean_of(psi)

    def work(rng, s, e):
        u = rng.random((e - s, 2))
        x = square.x0 + square.side * u[:, 0]
        y = square.y0 + square.side * u[:, 1]
        x, y = x - np.floor(x), y - np.floor(y)
        out = {}
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            for k in range(1, nmax + 1):
                x, y = apply_forward(comp.stage(k), x, y)
                if k in n_list:
                    v = psi(x, y)
                    out[k] = (float(np.sum(v)), float(np.sum(v * v)))
        return out, e - s

    parts = map_chunks(work, samples, seed, DEFAULT_CHUNK, threads)
    M = sum(p[1] for p in parts)
    est, ses, shapes = [], [], []
    for n in n_list:
        s = sum(p[0][n][0] for p in parts)
        s2 = sum(p[0][n][1] for p in parts)
        mean = s / M
        var = max(s2 / M - mean**2, 0.0)
        est.append(abs(mean - mpsi))
        ses.append(math.sqrt(var / M))
        shapes.append(square_mixing_shape(comp, n, square.side, alpha, horizon=nmax))
    cal = np.zeros(len(n_list), bool)
    cal[:calibrate] = True
    fit = calibrated_envelope(est, ses, shapes, cal)
    trend = decreasing_within_noise(est, ses)
    tab = ResultTable()
    for i, n in enumerate(n_list):
        tab.add("square-mixing", f"n={n}", {"n": n, "side": square.side, "corner": [square.x0, square.y0],
                "samples": M, "psi": psi.name, "calibration": bool(cal[i])}, est[i], ses[i],
                shapes[i], fit.constant, bool(fit.passed[i]))
    for i, ok in enumerate(trend):
        tab.add("square-mixing", f"trend/n={n_list[i]}->{n_list[i + 1]}",
                {"n_from": n_list[i], "n_to": n_list[i + 1]}, est[i + 1] - est[i],
                math.hypot(ses[i], ses[i + 1]), 0.0, math.nan, bool(ok))
    tab.fitted["square-mixing"] = fit.constant
    return tab
