"""Stopping times and the per-point curve-growth tracker.

For a point ``p`` with orbit ``p_k = F^{k-1} p``:

* ``tau`` is one plus the last ``k`` with ``p_k`` in the bad set ``B_k``;
* ``tau_bar`` is the same with strips widened by ``K1 L_k^(-1+eta')``;
* ``sigma`` is the first ``k >= tau_bar`` at which the tracked curve through
  ``p_k`` has horizontal radius at least ``K1 L_k^(-1+eta')``.

The tracked curve starts as the horizontal segment through ``p`` clipped to
the square ``S`` and to the atom of ``B_1`` containing ``p``.  When ``p_k``
is off ``B_k`` the curve is pushed forward and clipped to the ``B_{k+1}``
atom of the new centre; otherwise it restarts as the horizontal segment
through ``p_{k+1}`` clipped to that atom.  Restart segments are cut only by
strips, not by images of earlier partition boundaries, which can only
over-estimate the radius.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .family import Composition, Stage, bad_half_width, critical_set, apply_forward, distance_to_set
from .streams import uniform_points
from .torus import DomainError, wrap

DEFAULT_HORIZON = 200
CENSOR_FRACTION = 0.1


class StatisticsError(RuntimeError):
    pass


@dataclass(frozen=True)
class Square:
    """``[x0, x0 + side) x [y0, y0 + side)`` on the torus; ``side = 1`` is the torus."""

    x0: float = 0.0
    y0: float = 0.0
    side: float = 1.0

    def __post_init__(self):
        if not (0 < self.side <= 1):
            raise DomainError("square side must lie in (0, 1]")

    @property
    def is_torus(self) -> bool:
        return self.side >= 1.0

    @property
    def area(self) -> float:
        return self.side**2

    def sample(self, n: int, seed: int = 0, salt: int = 0):
        return uniform_points(seed, n, salt=salt, corner=(self.x0, self.y0), side=self.side)


@dataclass(frozen=True)
class Censored:
    """Integer values with censoring flags (arrays or scalars)."""

    value: object
    censored: object


@dataclass(frozen=True)
class StoppingRecord:
    tau: int
    tau_censored: bool
    tau_bar: int
    tau_bar_censored: bool
    sigma: int
    sigma_censored: bool
    horizon: int


@dataclass
class StoppingRecords:
    """Per-sample stopping times; ``sigma`` is -1 where not reached."""

    tau: np.ndarray
    tau_censored: np.ndarray
    tau_bar: np.ndarray
    tau_bar_censored: np.ndarray
    sigma: np.ndarray
    sigma_censored: np.ndarray
    horizon: int
    sigma_horizon: int
    persistence_ok: Optional[np.ndarray] = None
    radius: Optional[np.ndarray] = None  # (horizon, samples) when recorded
    case2: Optional[np.ndarray] = None

    def __len__(self):
        return int(self.tau.size)

    def __getitem__(self, i) -> StoppingRecord:
        return StoppingRecord(int(self.tau[i]), bool(self.tau_censored[i]), int(self.tau_bar[i]),
                              bool(self.tau_bar_censored[i]), int(self.sigma[i]),
                              bool(self.sigma_censored[i]), self.horizon)

    def ordering_ok(self) -> np.ndarray:
        """``tau <= tau_bar <= sigma`` where all three are uncensored."""
        ok = np.ones(len(self), dtype=bool)
        full = ~(self.tau_censored | self.tau_bar_censored | self.sigma_censored)
        ok[full] = (self.tau[full] <= self.tau_bar[full]) & (self.tau_bar[full] <= self.sigma[full])
        return ok


# ---------------------------------------------------------------------------
# strips


def _primed_half_width(stage: Stage) -> float:
    return bad_half_width(stage, "primed")


def sigma_threshold(stage: Stage) -> float:
    """``K1 L^(-1+eta')``."""
    return stage.family.k1() * stage.L ** (-1.0 + stage.eta_prime)


def _in_strips(stage: Stage, x, primed: bool = False):
    roots = critical_set(stage).roots
    if not roots:
        return np.zeros(np.shape(x), dtype=bool)
    hw = _primed_half_width(stage) if primed else bad_half_width(stage)
    return distance_to_set(x, roots) <= hw


def atom_bounds(stage: Stage, xc):
    """Offsets ``(left, right)`` from ``xc`` to the ends of its ``B``-atom.

    The atom is the strip containing ``xc`` or the gap between strips;
    with no strips it is the circle, reported as ``(-1/2, 1/2)``.
    """
    xc = np.asarray(xc, dtype=float)
    roots = critical_set(stage).roots
    if not roots:
        return np.full(xc.shape, -0.5), np.full(xc.shape, 0.5)
    hw = bad_half_width(stage)
    left = np.full(xc.shape, -np.inf)
    right = np.full(xc.shape, np.inf)
    inside = np.zeros(xc.shape, dtype=bool)
    sl = np.zeros(xc.shape)
    sr = np.zeros(xc.shape)
    for r in roots:
        d = wrap(xc - r + 0.5) - 0.5  # signed offset of xc from the root
        hit = np.abs(d) <= hw
        sl = np.where(hit & ~inside, -hw - d, sl)
        sr = np.where(hit & ~inside, hw - d, sr)
        inside |= hit
        right = np.minimum(right, wrap(r - hw - xc))
        left = np.maximum(left, -wrap(xc - (r + hw)))
    left = np.where(inside, sl, left)
    right = np.where(inside, sr, right)
    return left, right


# ---------------------------------------------------------------------------
# stopping times


def _orbit_bad_visits(comp: Composition, x, y, N_max: int):
    """Last ``k <= N_max`` with ``p_k`` in ``B_k`` (standard and primed), 0 if none."""
    x = np.array(x, dtype=float, copy=True)
    y = np.array(y, dtype=float, copy=True)
    last = np.zeros(x.shape, dtype=np.int64)
    last_p = np.zeros(x.shape, dtype=np.int64)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for k in range(1, N_max + 1):
            st = comp.stage(k)
            last = np.where(_in_strips(st, x), k, last)
            last_p = np.where(_in_strips(st, x, primed=True), k, last_p)
            if k < N_max:
                x, y = apply_forward(st, x, y)
    return last, last_p


def _censor(last, N_max):
    return last > N_max - CENSOR_FRACTION * N_max


def compute_tau(comp: Composition, x, y, N_max: int = DEFAULT_HORIZON) -> Censored:
    """``tau`` over a finite horizon; censored if the last visit is in the final 10%."""
    if N_max < 1:
        raise DomainError("N_max must be >= 1")
    last, _ = _orbit_bad_visits(comp, x, y, N_max)
    return _pack(last + 1, _censor(last, N_max), np.ndim(x))


def compute_tau_bar(comp: Composition, x, y, N_max: int = DEFAULT_HORIZON) -> Censored:
    """As :func:`compute_tau` with the widened strips."""
    if N_max < 1:
        raise DomainError("N_max must be >= 1")
    _, last = _orbit_bad_visits(comp, x, y, N_max)
    return _pack(last + 1, _censor(last, N_max), np.ndim(x))


def _pack(v, c, ndim):
    if ndim == 0:
        return Censored(int(v), bool(c))
    return Censored(v, c)


# ---------------------------------------------------------------------------
# tracker


@dataclass
class TrackerState:
    """Centres and endpoint offsets of the tracked curves (lifted, relative)."""

    xc: np.ndarray
    yc: np.ndarray
    dxl: np.ndarray
    dyl: np.ndarray
    dxr: np.ndarray
    dyr: np.ndarray
    restarted: np.ndarray

    @property
    def radius(self) -> np.ndarray:
        return np.minimum(-self.dxl, self.dxr)

    def copy(self) -> "TrackerState":
        return TrackerState(*(np.array(getattr(self, f), copy=True) for f in
                              ("xc", "yc", "dxl", "dyl", "dxr", "dyr", "restarted")))


def _lift_difference(stage: Stage, x0, dx):
    """``f(x0 + dx) - f(x0)`` without cancellation for the built-in families."""
    fam = stage.family
    if fam.kind == "trig-standard":
        return (2.0 * stage.L * np.cos(np.pi * (2 * x0 + dx)) * np.sin(np.pi * dx) + 2.0 * dx)
    if fam.kind == "linear-test":
        return fam.params["q"] * dx
    return fam.value(x0 + dx, stage.L) - fam.value(x0, stage.L)


def _clip_to_atom(stage: Stage, st: TrackerState):
    left, right = atom_bounds(stage, st.xc)
    # chord interpolation for y at a clipped end (curves are nearly flat)
    with np.errstate(invalid="ignore", divide="ignore"):
        cl = st.dxl < left
        st.dyl = np.where(cl, st.dyl * np.where(st.dxl != 0, left / st.dxl, 0.0), st.dyl)
        st.dxl = np.where(cl, left, st.dxl)
        cr = st.dxr > right
        st.dyr = np.where(cr, st.dyr * np.where(st.dxr != 0, right / st.dxr, 0.0), st.dyr)
        st.dxr = np.where(cr, right, st.dxr)
    return st


def initial_state(stage1: Stage, x, y, square: Square) -> TrackerState:
    """Horizontal segment through ``p`` cut by the square and the ``B_1`` atom."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if square.is_torus:
        dxl = np.full(x.shape, -0.5)
        dxr = np.full(x.shape, 0.5)
    else:
        off = wrap(x - square.x0)
        if np.any(off >= square.side):
            raise DomainError("point outside the square")
        dxl = -off
        dxr = square.side - off
    z = np.zeros_like(x)
    st = TrackerState(x.copy(), y.copy(), dxl, z.copy(), dxr, z.copy(), np.ones(x.shape, bool))
    return _clip_to_atom(stage1, st)


def tracker_step(stage: Stage, next_stage: Stage, st: TrackerState) -> TrackerState:
    """Build the curve through ``p_{n+1}`` from the one through ``p_n``."""
    case2 = _in_strips(stage, st.xc)
    xn, yn = apply_forward(stage, st.xc, st.yc)
    # case 1: push endpoint offsets through the lift
    nxl = _lift_difference(stage, st.xc, st.dxl) - st.dyl
    nxr = _lift_difference(stage, st.xc, st.dxr) - st.dyr
    nyl, nyr = st.dxl, st.dxr
    swap = nxl > nxr  # orientation reversing where f' < 0
    lx = np.where(swap, nxr, nxl)
    ly = np.where(swap, nyr, nyl)
    rx = np.where(swap, nxl, nxr)
    ry = np.where(swap, nyl, nyr)
    # cap extent at half a circle on each side
    z = np.zeros_like(lx)
    new = TrackerState(np.asarray(xn, float), np.asarray(yn, float),
                       np.where(case2, -np.inf, lx), np.where(case2, z, ly),
                       np.where(case2, np.inf, rx), np.where(case2, z, ry), case2)
    new = _clip_to_atom(next_stage, new)
    new.dxl = np.maximum(new.dxl, -0.5)
    new.dxr = np.minimum(new.dxr, 0.5)
    return new


def track_sigma(comp: Composition, x, y, square: Square = Square(), N_max: int = DEFAULT_HORIZON,
                sigma_horizon: Optional[int] = None, persistence: int = 10,
                record_radius: bool = False) -> StoppingRecords:
    """Stopping times ``tau, tau_bar, sigma`` and the curve tracker along each orbit.

    ``sigma`` is searched up to ``sigma_horizon`` (default ``N_max -
    persistence``) and censored when not found; after ``sigma`` the radius
    condition is checked for ``persistence`` further steps (bounded by
    ``N_max``).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if sigma_horizon is None:
        sigma_horizon = max(1, N_max - persistence)
    sigma_horizon = min(sigma_horizon, N_max)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        last, last_p = _orbit_bad_visits(comp, x, y, N_max)
        tau, tau_bar = last + 1, last_p + 1
        sigma = np.full(x.shape, -1, dtype=np.int64)
        persist_ok = np.ones(x.shape, dtype=bool)
        radii = np.empty((N_max, x.size)) if record_radius else None
        cases = np.empty((N_max, x.size), dtype=bool) if record_radius else None
        stage = comp.stage(1)
        st = initial_state(stage, x, y, square)
        for k in range(1, N_max + 1):
            r = st.radius
            thr = sigma_threshold(stage)
            if record_radius:
                radii[k - 1] = r
                cases[k - 1] = st.restarted
            hit = (sigma < 0) & (k >= tau_bar) & (r >= thr) & (k <= sigma_horizon)
            sigma = np.where(hit, k, sigma)
            watch = (sigma > 0) & (k > sigma) & (k <= sigma + persistence)
            persist_ok &= ~(watch & (r < thr * (1 - 1e-12)))
            if k == N_max:
                break
            nxt = comp.stage(k + 1)
            st = tracker_step(stage, nxt, st)
            stage = nxt
    sig_c = sigma < 0
    return StoppingRecords(tau, _censor(last, N_max), tau_bar, _censor(last_p, N_max),
                           np.where(sig_c, sigma_horizon + 1, sigma), sig_c, N_max,
                           sigma_horizon, persist_ok, radii, cases)


# ---------------------------------------------------------------------------
# tails


@dataclass
class SurvivalCurve:
    thresholds: np.ndarray
    empirical: np.ndarray
    std_error: np.ndarray
    theoretical_shape: np.ndarray
    samples: int
    censored: int
    which: str


def tail_shape(comp: Composition, which: str, N: int, horizon: Optional[int] = None) -> float:
    """Tail-sum shape for ``P(which > N)``.

    ``tau``: ``sum_{n>=N} L_n^(-1+eta)``; ``tau_bar``:
    ``sum_{n>=N} L_n^((eta-1)/2)``; ``sigma``: ``sum_{i>=N/4} L_i^((eta-1)/2)``.
    Divergent series are truncated at ``horizon``.
    """
    eta = comp.eta
    if which == "tau":
        e, start = -1.0 + eta, N
    elif which == "tau_bar":
        e, start = 0.5 * (eta - 1.0), N
    elif which == "sigma":
        e, start = 0.5 * (eta - 1.0), max(1, N // 4)
    else:
        raise DomainError(f"unknown stopping time {which!r}")
    s = comp.schedule.tail_sum(e, start)
    if not math.isfinite(s):
        if horizon is None:
            return math.inf
        s = comp.schedule.tail_sum(e, start, horizon)
    return s


def survival_tail(records: StoppingRecords, which: str, comp: Composition, thresholds=None,
                  min_uncensored: int = 1000, truncate_at: Optional[int] = None) -> SurvivalCurve:
    """Empirical ``P(which > N)`` with binomial errors and the tail-sum shape.

    Censored records count as alive at every threshold.
    """
    val = {"tau": records.tau, "tau_bar": records.tau_bar, "sigma": records.sigma}[which]
    cen = {"tau": records.tau_censored, "tau_bar": records.tau_bar_censored,
           "sigma": records.sigma_censored}[which]
    n_unc = int(np.sum(~cen))
    if n_unc == 0:
        raise StatisticsError("all records are censored")
    if n_unc < min_uncensored:
        raise StatisticsError(f"only {n_unc} uncensored records (< {min_uncensored})")
    horizon = records.sigma_horizon if which == "sigma" else records.horizon
    if thresholds is None:
        thresholds = np.arange(1, horizon + 1)
    thresholds = np.asarray(thresholds, dtype=np.int64)
    M = val.size
    alive = np.array([np.mean((val > N) | cen) for N in thresholds])
    se = np.sqrt(np.maximum(alive * (1 - alive), 1.0 / M) / M)
    trunc = truncate_at if truncate_at is not None else records.horizon
    shape = np.array([tail_shape(comp, which, int(N), trunc) for N in thresholds])
    return SurvivalCurve(thresholds, alive, se, shape, M, int(np.sum(cen)), which)


def proliferated_mass(comp: Composition, square: Square, n: int, samples: int = 10_000,
                      seed: int = 0, records: Optional[StoppingRecords] = None):
    """Fraction of ``S`` whose curve at time ``n`` is long and centred off ``B_n``.

    Long means radius ``>= K1 L_n^(-1+eta')``; off means outside the widened
    strips.  Returns ``(estimate, std_error, lower_bound_shape)`` where the
    shape is ``1 - L_n^(-(1-eta)/2) - P_S(sigma > n)``.
    """
    if n < 2:
        raise DomainError("n must be >= 2")
    x, y = square.sample(samples, seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        stage = comp.stage(1)
        st = initial_state(stage, x, y, square)
        for k in range(1, n):
            nxt = comp.stage(k + 1)
            st = tracker_step(stage, nxt, st)
            stage = nxt
        good = (st.radius >= sigma_threshold(stage)) & ~_in_strips(stage, st.xc, primed=True)
    est = float(np.mean(good))
    se = math.sqrt(max(est * (1 - est), 1.0 / samples) / samples)
    if records is None:
        records = track_sigma(comp, x, y, square, N_max=n, sigma_horizon=n, persistence=0)
    p_sigma = float(np.mean(records.sigma_censored | (records.sigma > n)))
    shape = 1.0 - comp.L(n) ** (-(1.0 - comp.eta) / 2.0) - p_sigma
    return est, se, shape
