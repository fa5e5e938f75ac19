"""Horizontal curves, the forward graph transform and fully crossing splits.

A curve is stored lazily as a chain of levels.  Level 0 holds seed
segments ``{(x, h0(x))}``.  A piece at level ``j`` is the image under one
stage of a subinterval ``[src_lo, src_hi]`` of its parent piece at level
``j - 1``.  With ``X(u) = f(u) - h_parent(u) - shift`` the piece is the graph
of ``h = X^{-1}`` over ``[lo, hi] = X([src_lo, src_hi])``, so evaluating the
graph at ``x`` means solving ``X(u) = x`` one level at a time.  All
coordinates are lifted and stay O(1) at every level because the integer
``shift`` is removed at each step.

``B(x)`` denotes the base (level 0) coordinate of the point above ``x`` and
``J = dB/dx``; lengths "pulled back to the source curve" are differences of
``B``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .family import (ContractError, Composition, ResolutionError, Stage, bad_half_width,
                     critical_set, apply_forward)
from .torus import CircleArc, DomainError, arc_minus_strips, wrap

#: seeds must satisfy Lip h0 <= SEED_LIP and |h0''| <= SEED_CURVATURE
SEED_LIP = 0.1
SEED_CURVATURE = 1.0
DEFAULT_PIECE_BUDGET = 100_000


# ---------------------------------------------------------------------------
# storage


@dataclass(frozen=True)
class Seed:
    """Level-0 graph: constant ``height`` or a callable ``graph(x) -> (h, h', h'')``."""

    height: float = 0.0
    graph: Optional[Callable] = None
    closed: bool = False  # full circle whose graph is 1-periodic

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        if self.graph is None:
            z = np.zeros_like(x)
            return z + self.height, z, z.copy()
        h, hp, hpp = self.graph(x)
        return (np.broadcast_to(np.asarray(h, float), x.shape).copy(),
                np.broadcast_to(np.asarray(hp, float), x.shape).copy(),
                np.broadcast_to(np.asarray(hpp, float), x.shape).copy())


@dataclass(frozen=True, eq=False)
class Level:
    """Struct-of-arrays for all pieces at one level of a chain."""

    stage: Optional[Stage]
    parent: np.ndarray
    shift: np.ndarray
    sign: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    src_lo: np.ndarray
    src_hi: np.ndarray
    blo: np.ndarray
    bhi: np.ndarray
    weight: np.ndarray
    slope: np.ndarray
    curvature: np.ndarray

    def __len__(self):
        return self.lo.size


def _level(stage, parent, shift, sign, lo, hi, src_lo, src_hi, blo, bhi, weight, slope, curv):
    a = lambda v, dt=float: np.atleast_1d(np.asarray(v, dtype=dt))
    return Level(stage, a(parent, np.int64), a(shift), a(sign), a(lo), a(hi), a(src_lo),
                 a(src_hi), a(blo), a(bhi), a(weight), a(slope), a(curv))


@dataclass(frozen=True, eq=False)
class Chain:
    seed: Seed
    base_stage: int
    levels: tuple

    def extend(self, level: Level) -> "Chain":
        return Chain(self.seed, self.base_stage, self.levels + (level,))


@dataclass(frozen=True, eq=False)
class GraphEval:
    h: np.ndarray
    hp: np.ndarray
    hpp: np.ndarray
    B: np.ndarray
    J: np.ndarray


# ---------------------------------------------------------------------------
# evaluation through the chain


def _locate(chain: Chain, j: int, idx, x) -> GraphEval:
    """Graph data of pieces ``idx`` at level ``j`` at lifted abscissae ``x``."""
    x = np.asarray(x, dtype=float)
    idx = np.broadcast_to(np.asarray(idx, dtype=np.int64), x.shape)
    if j == 0:
        h, hp, hpp = chain.seed.eval(x)
        return GraphEval(h, hp, hpp, x.copy(), np.ones_like(x))
    lev = chain.levels[j]
    target = x + lev.shift[idx]
    a = lev.src_lo[idx]
    b = lev.src_hi[idx]
    sgn = lev.sign[idx]
    # X(src_lo) is the lower end of the image for increasing pieces
    xa = np.where(sgn > 0, lev.lo[idx], lev.hi[idx]) + lev.shift[idx]
    xb = np.where(sgn > 0, lev.hi[idx], lev.lo[idx]) + lev.shift[idx]
    u0 = _interp_guess(a, b, xa, xb, target)
    u, ev = _solve(chain, j - 1, lev.parent[idx], lev.stage, target, a, b, sgn, u0)
    _, fp, fpp = lev.stage.family.eval(u, lev.stage.L)
    Xp = fp - ev.hp
    Xpp = fpp - ev.hpp
    hp = 1.0 / Xp
    return GraphEval(u, hp, -Xpp * hp**3, ev.B, ev.J * hp)


def _interp_guess(a, b, xa, xb, target):
    den = xb - xa
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(den != 0, (target - xa) / den, 0.5)
    return a + np.clip(t, 0.0, 1.0) * (b - a)


def _solve(chain, j, idx, stage, target, a, b, sgn, u0, maxiter=100):
    """Solve ``f_stage(u) - h_j(u) = target`` for ``u`` in ``[a, b]``.

    ``sgn`` is the sign of the (monotone) left side's derivative.  Safeguarded
    Newton: steps leaving the bracket are replaced by bisection.  Returns
    ``u`` and the level-``j`` graph data at ``u``.
    """
    a = np.array(a, dtype=float, copy=True)
    b = np.array(b, dtype=float, copy=True)
    u = np.array(u0, dtype=float, copy=True)
    idx = np.asarray(idx)
    active = np.ones(u.shape, dtype=bool)
    for _ in range(maxiter):
        if not active.any():
            break
        k = np.nonzero(active)[0]
        uk = u[k]
        ev = _locate(chain, j, idx[k], uk)
        f, fp, _ = stage.family.eval(uk, stage.L)
        G = f - ev.h - target[k]
        Gp = fp - ev.hp
        s = sgn[k]
        below = s * G < 0
        ak = np.where(below, uk, a[k])
        bk = np.where(below, b[k], uk)
        with np.errstate(divide="ignore", invalid="ignore"):
            un = uk - G / Gp
        bad = ~np.isfinite(un) | (un <= ak) | (un >= bk)
        un = np.where(bad, 0.5 * (ak + bk), un)
        tol = 4e-16 * np.maximum(1.0, np.abs(uk))
        done = (G == 0) | (np.abs(un - uk) <= tol) | (bk - ak <= tol)
        a[k], b[k] = ak, bk
        u[k] = np.where(G == 0, uk, un)
        active[k[done]] = False
    ev = _locate(chain, j, idx, u)
    return u, ev


def _image_of(chain: Chain, j: int, idx, u, stage: Stage):
    """``X(u) = f(u) - h_j(u)`` (no shift) with derivative data."""
    ev = _locate(chain, j, idx, u)
    f, fp, fpp = stage.family.eval(u, stage.L)
    return f - ev.h, fp - ev.hp, fpp - ev.hpp, ev


# ---------------------------------------------------------------------------
# public curve objects


@dataclass(frozen=True, eq=False)
class HorizontalCurve:
    """One piece of a chain: the graph of ``h`` over a lifted interval."""

    chain: Chain
    level: int
    index: int

    @property
    def _lev(self) -> Level:
        return self.chain.levels[self.level]

    @property
    def lo(self) -> float:
        return float(self._lev.lo[self.index])

    @property
    def hi(self) -> float:
        return float(self._lev.hi[self.index])

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def wraps(self) -> int:
        return int(math.floor(self.width + 1e-12))

    @property
    def is_fully_crossing(self) -> bool:
        return self.width >= 1.0 - 1e-12

    @property
    def domain(self) -> CircleArc:
        return CircleArc(self.lo, min(1.0, max(0.0, self.width)))

    @property
    def base_stage(self) -> int:
        return self.chain.base_stage

    @property
    def time(self) -> int:
        """Index of the next stage to apply."""
        return self.chain.base_stage + self.level

    @property
    def chain_stages(self) -> list:
        return [lev.stage.n for lev in self.chain.levels[1:self.level + 1]]

    @property
    def slope_bound(self) -> float:
        return float(self._lev.slope[self.index])

    @property
    def curvature_bound(self) -> float:
        return float(self._lev.curvature[self.index])

    @property
    def base_interval(self) -> tuple:
        lev = self._lev
        a, b = float(lev.blo[self.index]), float(lev.bhi[self.index])
        return min(a, b), max(a, b)

    @property
    def weight(self) -> float:
        return float(self._lev.weight[self.index])

    def eval(self, x) -> GraphEval:
        x = np.asarray(x, dtype=float)
        flat = x.ravel()
        ev = _locate(self.chain, self.level, np.full(flat.shape, self.index), flat)
        shp = x.shape
        return GraphEval(ev.h.reshape(shp), ev.hp.reshape(shp), ev.hpp.reshape(shp),
                         ev.B.reshape(shp), ev.J.reshape(shp))

    def __call__(self, x):
        return self.eval(x).h

    def points(self, x):
        """Torus points ``(wrap(x), wrap(h(x)))``."""
        return wrap(np.asarray(x, float)), wrap(self.eval(x).h)


@dataclass(frozen=True, eq=False)
class PieceSet:
    """Several pieces of one level of a chain."""

    chain: Optional[Chain]
    level: int
    indices: np.ndarray

    def __len__(self):
        return int(self.indices.size)

    def __getitem__(self, i) -> HorizontalCurve:
        return HorizontalCurve(self.chain, self.level, int(self.indices[i]))

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @property
    def weights(self) -> np.ndarray:
        if len(self) == 0:
            return np.zeros(0)
        return self.chain.levels[self.level].weight[self.indices]


def seed_curve(lo: float = 0.0, hi: float = 1.0, height: float = 0.0,
               graph: Optional[Callable] = None, base_stage: int = 1) -> HorizontalCurve:
    """Seed curve over the lifted interval ``[lo, hi]`` at time ``base_stage``.

    ``hi - lo == 1`` with a constant height (or a 1-periodic ``graph``) is
    the closed horizontal circle.  Callable seeds are sampled on 1001 points
    and rejected when the slope exceeds 1/10 or the curvature exceeds 1.
    """
    if hi < lo or hi - lo > 1.0:
        raise DomainError("seed interval must satisfy 0 <= hi - lo <= 1")
    closed = abs((hi - lo) - 1.0) < 1e-15
    seed = Seed(float(height), graph, closed)
    slope = curv = 0.0
    if graph is not None:
        xs = np.linspace(lo, hi, 1001)
        h, hp, hpp = seed.eval(xs)
        slope = float(np.max(np.abs(hp)))
        curv = float(np.max(np.abs(hpp)))
        if slope > SEED_LIP + 1e-15:
            raise ContractError(f"seed slope {slope:.3g} exceeds 1/10")
        if curv > SEED_CURVATURE:
            raise ContractError(f"seed curvature {curv:.3g} exceeds 1")
        if closed:
            h0, _, _ = seed.eval(np.array([lo, hi]))
            if abs(h0[1] - h0[0]) > 1e-12:
                seed = Seed(float(height), graph, False)
    lev = _level(None, -1, 0.0, 1.0, lo, hi, lo, hi, lo, hi, 1.0, slope, curv)
    return HorizontalCurve(Chain(seed, int(base_stage), (lev,)), 0, 0)


def horizontal_segment(center: float, length: float, height: float, base_stage: int = 1) -> HorizontalCurve:
    return seed_curve(center - 0.5 * length, center + 0.5 * length, height, base_stage=base_stage)


def curve_length(curve: HorizontalCurve) -> float:
    """Horizontal extent of the curve's domain (the length metric used throughout)."""
    return curve.width


# ---------------------------------------------------------------------------
# graph transform


def _expansion_floor(stage: Stage) -> float:
    return stage.family.min_expansion_off_bad(stage.L, stage.eta)


def _domain_meets_bad_set(stage: Stage, lo: float, hi: float) -> bool:
    roots = critical_set(stage).roots
    if not roots:
        return False
    good = arc_minus_strips(lo, hi, roots, bad_half_width(stage))
    if hi == lo:
        return not good and len(arc_minus_strips(lo - 1e-300, hi + 1e-300, roots, bad_half_width(stage))) == 0
    return not (len(good) == 1 and good[0][0] == lo and good[0][1] == hi)


def graph_transform_step(curve: HorizontalCurve, stage: Stage, sample_points: int = 1000) -> HorizontalCurve:
    """Image of ``curve`` under one stage, as a graph over the image interval.

    The domain must avoid the stage's bad set and the slope must be at most
    1/10.  Slope and curvature of the image are measured on
    ``sample_points`` points of the source; ``|X'| >= expansion - 1/10`` is
    enforced on the same grid.
    """
    if curve.slope_bound > SEED_LIP + 1e-12:
        raise ContractError("curve slope exceeds 1/10")
    lo, hi = curve.lo, curve.hi
    if _domain_meets_bad_set(stage, lo, hi):
        raise ContractError("curve domain meets the bad set; split it first")
    j, i = curve.level, curve.index
    us = np.linspace(lo, hi, max(2, sample_points)) if hi > lo else np.array([lo, lo])
    X, Xp, Xpp, ev = _image_of(curve.chain, j, np.full(us.shape, i), us, stage)
    floor_ = _expansion_floor(stage) - SEED_LIP
    if np.min(np.abs(Xp)) < floor_ * (1 - 1e-12):
        raise ContractError(f"expansion {np.min(np.abs(Xp)):.4g} below guaranteed {floor_:.4g}")
    if np.any(np.sign(Xp) != np.sign(Xp[0])):
        raise ContractError("lift is not monotone on the domain")
    sgn = 1.0 if Xp[0] > 0 else -1.0
    x_lo, x_hi = (X[0], X[-1]) if sgn > 0 else (X[-1], X[0])
    shift = math.floor(x_lo)
    slope = float(np.max(np.abs(1.0 / Xp)))
    curv = float(np.max(np.abs(Xpp / Xp**3)))
    blo, bhi = (ev.B[0], ev.B[-1]) if sgn > 0 else (ev.B[-1], ev.B[0])
    lev = _level(stage, i, shift, sgn, x_lo - shift, x_hi - shift, lo, hi, blo, bhi,
                 curve.weight, slope, curv)
    return HorizontalCurve(curve.chain.extend(lev), j + 1, 0)


def slope_law_bound(stage: Stage) -> float:
    return stage.L ** (-stage.eta)


def curvature_law_bound(stage: Stage, K0: float) -> float:
    return 2.0 * K0 * stage.L ** (1.0 - 3.0 * stage.eta)


# ---------------------------------------------------------------------------
# fully crossing splits


@dataclass
class CrossingDecomposition:
    """Fully crossing pieces plus the excised part of the source curve.

    ``excised_measure`` is a horizontal length in the source curve's domain
    (base coordinates for iterated splits).  When ``subsampled`` is set,
    ``pieces`` is a uniform subsample carrying weights and ``piece_count``
    is the (estimated) total.
    """

    pieces: PieceSet
    excised_arcs: Optional[list]
    excised_measure: float
    source_length: float
    piece_count: float
    subsampled: bool = False
    level_stats: list = field(default_factory=list)

    @property
    def kept_measure(self) -> float:
        return self.source_length - self.excised_measure


def _components(chain: Chain, j: int, idx: np.ndarray, stage: Stage):
    """Good components of each parent domain (domain minus closed bad strips)."""
    lev = chain.levels[j]
    roots = critical_set(stage).roots
    hw = bad_half_width(stage) if roots else 0.0
    pid, ca, cb = [], [], []
    for i in idx:
        lo, hi = float(lev.lo[i]), float(lev.hi[i])
        if j == 0 and chain.seed.closed and roots:
            # rotate the closed circle so the cut sits inside a strip
            c0 = roots[0] + math.floor(lo - roots[0]) + 1.0
            comps = arc_minus_strips(c0 - 1.0, c0, roots, hw)
        else:
            comps = arc_minus_strips(lo, hi, roots, hw)
        for a, b in comps:
            pid.append(i)
            ca.append(a)
            cb.append(b)
    return np.asarray(pid, dtype=np.int64), np.asarray(ca, float), np.asarray(cb, float)


def _closed_component(chain: Chain, stage: Stage):
    """For a closed seed without strips: start at a point with integer image."""
    X0, Xp0, _, _ = _image_of(chain, 0, np.array([0]), np.array([chain.levels[0].lo[0]]), stage)
    lo = float(chain.levels[0].lo[0])
    sgn = 1.0 if Xp0[0] > 0 else -1.0
    tgt = math.ceil(X0[0]) if sgn > 0 else math.floor(X0[0])
    if tgt == X0[0]:
        return lo, lo + 1.0
    # X(lo + 1) = X(lo) + sgn * |degree - 0| for a periodic seed
    u, _ = _solve(chain, 0, np.array([0]), stage, np.array([float(tgt)]), np.array([lo]),
                  np.array([lo + 1.0]), np.array([sgn]), np.array([lo + 0.5]))
    return float(u[0]), float(u[0]) + 1.0


def _split_level(chain: Chain, j: int, idx: np.ndarray, stage: Stage, budget: Optional[int],
                 rng: Optional[np.random.Generator], want_arcs: bool = True):
    """Split pieces ``idx`` at level ``j`` through ``stage``.

    Returns the new level, kept child indices into it, exact excised base
    measure (weighted), exact total child count (weighted) and excised arcs.
    """
    lev = chain.levels[j]
    frame = {}
    roots = critical_set(stage).roots
    if j == 0 and chain.seed.closed and not roots and len(idx) == 1:
        a, b = _closed_component(chain, stage)
        pid, ca, cb = np.array([idx[0]]), np.array([a]), np.array([b])
        frame[int(idx[0])] = (a, b)
    else:
        pid, ca, cb = _components(chain, j, idx, stage)
        if j == 0 and chain.seed.closed and roots:
            lo = float(lev.lo[idx[0]])
            c0 = roots[0] + math.floor(lo - roots[0]) + 1.0
            frame[int(idx[0])] = (c0 - 1.0, c0)
    # images of component endpoints
    Xa, Xpa, _, eva = _image_of(chain, j, pid, ca, stage)
    Xb, Xpb, _, evb = _image_of(chain, j, pid, cb, stage)
    sgn = np.where(Xb >= Xa, 1.0, -1.0)
    A = np.minimum(Xa, Xb)
    Bv = np.maximum(Xa, Xb)
    first = np.ceil(A)
    last = np.floor(Bv)  # children l = first .. last - 1
    counts = np.maximum(last - first, 0.0).astype(np.int64)
    w = lev.weight[pid]
    # preimages of the first and last integer of each component
    has = counts > 0
    ufirst = np.where(sgn > 0, ca, cb)
    ulast = np.where(sgn > 0, cb, ca)
    if has.any():
        k = np.nonzero(has)[0]
        u1, ev1 = _solve(chain, j, pid[k], stage, first[k], ca[k], cb[k], sgn[k],
                         _interp_guess(ca[k], cb[k], Xa[k], Xb[k], first[k]))
        u2, ev2 = _solve(chain, j, pid[k], stage, last[k], ca[k], cb[k], sgn[k],
                         _interp_guess(ca[k], cb[k], Xa[k], Xb[k], last[k]))
        ufirst = ufirst.copy()
        ulast = ulast.copy()
        ufirst[k], ulast[k] = u1, u2
        kept_base = np.zeros(pid.size)
        kept_base[k] = np.abs(ev2.B - ev1.B)
    else:
        kept_base = np.zeros(pid.size)
    parent_base = np.abs(lev.bhi[idx] - lev.blo[idx])
    excised = float(np.sum(lev.weight[idx] * parent_base) - np.sum(w * kept_base))
    total = float(np.sum(w * counts))

    arcs = None
    if want_arcs:
        arcs = _excised_arcs(lev, idx, pid, ufirst, ulast, counts, frame)

    # choose children
    n_all = int(counts.sum())
    if budget is not None and n_all > budget:
        rng = rng if rng is not None else np.random.default_rng(0)
        pick = np.sort(rng.choice(n_all, size=budget, replace=False))
        scale = n_all / budget
        subsampled = True
    else:
        pick = np.arange(n_all)
        scale = 1.0
        subsampled = False
    offsets = np.concatenate([[0], np.cumsum(counts)])
    comp = np.searchsorted(offsets, pick, side="right") - 1
    l = first[comp] + (pick - offsets[comp])
    csgn = sgn[comp]
    ca_c, cb_c = ca[comp], cb[comp]
    guess_l = _interp_guess(ca_c, cb_c, Xa[comp], Xb[comp], l)
    guess_r = _interp_guess(ca_c, cb_c, Xa[comp], Xb[comp], l + 1.0)
    ppar = pid[comp]
    if pick.size:
        ul, evl = _solve(chain, j, ppar, stage, l, ca_c, cb_c, csgn, guess_l)
        ur, evr = _solve(chain, j, ppar, stage, l + 1.0, ca_c, cb_c, csgn, guess_r)
        _, fpl, fppl = stage.family.eval(ul, stage.L)
        _, fpr, fppr = stage.family.eval(ur, stage.L)
        Xpl, Xpr = fpl - evl.hp, fpr - evr.hp
        slope = np.maximum(np.abs(1 / Xpl), np.abs(1 / Xpr))
        curv = np.maximum(np.abs((fppl - evl.hpp) / Xpl**3), np.abs((fppr - evr.hpp) / Xpr**3))
        src_lo, src_hi = np.minimum(ul, ur), np.maximum(ul, ur)
        blo, bhi = evl.B, evr.B
    else:
        slope = curv = src_lo = src_hi = blo = bhi = np.zeros(0)
    new = _level(stage, ppar, l, csgn, np.zeros(pick.size), np.ones(pick.size), src_lo, src_hi,
                 blo, bhi, lev.weight[ppar] * scale, slope, curv)
    return new, excised, total, arcs, subsampled


def _excised_arcs(lev, idx, pid, ufirst, ulast, counts, frame):
    """Excised parts of each parent domain as arcs (lifted parent coordinates)."""
    out = []
    for i in idx:
        lo, hi = frame.get(int(i), (float(lev.lo[i]), float(lev.hi[i])))
        sel = np.nonzero(pid == i)[0]
        kept = []
        for c in sel:
            if counts[c] > 0:
                a, b = sorted((float(ufirst[c]), float(ulast[c])))
                kept.append((a, b))
        kept.sort()
        if not kept:
            if hi > lo:
                out.append(CircleArc(lo, min(1.0, hi - lo)))
            continue
        cur, end = lo, hi
        for a, b in kept:
            if a > cur:
                out.append(CircleArc(cur, min(1.0, a - cur)))
            cur = max(cur, b)
        if end > cur:
            out.append(CircleArc(cur, min(1.0, end - cur)))
    return [arc for arc in out if arc.length > 0]


def full_crossing_split(curve: HorizontalCurve, stage: Stage) -> CrossingDecomposition:
    """Cut the curve's image under ``stage`` into fully crossing pieces.

    The domain is clipped against the bad set; each surviving component
    contributes one piece per unit interval ``[l, l + 1]`` inside its lifted
    image; trimmed ends and strip hits are excised.  Measures are horizontal
    lengths in the source curve's domain.
    """
    if curve.slope_bound > SEED_LIP + 1e-12:
        raise ContractError("curve slope exceeds 1/10")
    sub = _subchain(curve)
    new, _, total, arcs, _ = _split_level(sub, sub_level(curve), np.array([0]), stage, None, None)
    chain = sub.extend(new)
    # source-domain lengths of the pieces (parent coordinates)
    kept = float(np.sum(new.src_hi - new.src_lo))
    excised = curve.width - kept
    return CrossingDecomposition(PieceSet(chain, len(chain.levels) - 1, np.arange(len(new))),
                                 arcs, excised, curve.width, total)


def sub_level(curve: HorizontalCurve) -> int:
    return curve.level


def _subchain(curve: HorizontalCurve) -> Chain:
    """Chain containing only the ancestors of ``curve``, re-indexed to 0."""
    levels = list(curve.chain.levels[:curve.level + 1])
    i = curve.index
    out = []
    for j in range(curve.level, -1, -1):
        lev = levels[j]
        sel = np.array([i])
        parent = lev.parent[sel]
        out.append(Level(lev.stage, np.zeros(1, np.int64) if j > 0 else parent, lev.shift[sel],
                         lev.sign[sel], lev.lo[sel], lev.hi[sel], lev.src_lo[sel], lev.src_hi[sel],
                         lev.blo[sel], lev.bhi[sel], lev.weight[sel], lev.slope[sel],
                         lev.curvature[sel]))
        i = int(parent[0])
    return Chain(curve.chain.seed, curve.chain.base_stage, tuple(reversed(out)))


def iterate_crossing_split(curve: HorizontalCurve, comp: Composition, m: int, k: int,
                           budget: int = DEFAULT_PIECE_BUDGET,
                           rng: Optional[np.random.Generator] = None) -> CrossingDecomposition:
    """Split through stages ``m..k`` recursively.

    Excised measure is reported in base coordinates of the source curve.  At
    each level the excised mass of the current (possibly subsampled, hence
    weighted) parents is exact; once a level exceeds ``budget`` children a
    uniform subsample is kept with weights ``count / budget``.
    """
    sub = _subchain(curve)
    b0, b1 = curve.base_interval
    source = b1 - b0
    if k == m - 1:
        if curve.is_fully_crossing:
            return CrossingDecomposition(PieceSet(sub, curve.level, np.array([0])), [], 0.0, source, 1.0)
        return CrossingDecomposition(PieceSet(sub, curve.level, np.zeros(0, np.int64)),
                                     [CircleArc(curve.lo, curve.domain.length)], source, source, 0.0)
    if k < m - 1:
        raise DomainError("need m <= k + 1")
    rng = rng if rng is not None else np.random.default_rng(0)
    chain = sub
    j = curve.level
    idx = np.array([0])
    excised = 0.0
    subsampled = False
    stats = []
    arcs = None
    total = 1.0
    for n in range(m, k + 1):
        st = comp.stage(n)
        new, exc, total, lev_arcs, sub_flag = _split_level(chain, j, idx, st, budget, rng,
                                                           want_arcs=(n == m))
        if n == m:
            arcs = lev_arcs
        excised += exc
        subsampled = subsampled or sub_flag
        chain = chain.extend(new)
        j += 1
        idx = np.arange(len(new))
        stats.append({"stage": n, "L": st.L, "pieces": total, "kept": len(new), "excised": exc,
                      "subsampled": subsampled})
        if len(new) == 0:
            break
    if k > m:
        arcs = None
    return CrossingDecomposition(PieceSet(chain, j, idx), arcs, excised, source, total,
                                 subsampled, stats)


def excision_bound_shape(comp: Composition, m: int, k: int) -> float:
    """``sum_{i=m}^{k} L_i^(-1+eta)``."""
    return comp.schedule.tail_sum(-1.0 + comp.eta, m, k)


# ---------------------------------------------------------------------------
# distortion and densities


@dataclass(frozen=True)
class DistortionReport:
    max_log_ratio: float
    theoretical_bound: float
    pairs: int


def _log_stretch(chain: Chain, j: int, idx, x):
    """log of the tangent stretch from the base curve to level ``j`` at ``x``."""
    ev = _locate(chain, j, idx, x)
    hb, hbp, _ = chain.seed.eval(ev.B)
    return 0.5 * np.log1p(ev.hp**2) - np.log(np.abs(ev.J)) - 0.5 * np.log1p(hbp**2)


def tangent_distortion(pieces, sample_pairs: int = 16, C_hat: float = 1.0,
                       rng: Optional[np.random.Generator] = None) -> DistortionReport:
    """Max over pairs of ``|log stretch(p1) - log stretch(p2)|`` along the chain.

    ``pieces`` is a curve or a :class:`PieceSet`.  Each piece contributes its
    endpoint pair plus ``sample_pairs`` random pairs.  The bound is
    ``C_hat * L_m^(1 - 2 eta)`` with ``m`` the last stage of the chain.
    """
    if isinstance(pieces, HorizontalCurve):
        chain, j, idx = pieces.chain, pieces.level, np.array([pieces.index])
    else:
        chain, j, idx = pieces.chain, pieces.level, np.asarray(pieces.indices)
    if j == 0 or idx.size == 0:
        return DistortionReport(0.0, 0.0, 0)
    rng = rng if rng is not None else np.random.default_rng(0)
    lev = chain.levels[j]
    lo, hi = lev.lo[idx], lev.hi[idx]
    t = np.concatenate([np.zeros((idx.size, 1)), rng.random((idx.size, sample_pairs))], axis=1)
    s = np.concatenate([np.ones((idx.size, 1)), rng.random((idx.size, sample_pairs))], axis=1)
    w = (hi - lo)[:, None]
    x1 = lo[:, None] + t * w
    x2 = lo[:, None] + s * w
    ii = np.broadcast_to(idx[:, None], x1.shape).ravel()
    g1 = _log_stretch(chain, j, ii, x1.ravel())
    g2 = _log_stretch(chain, j, ii, x2.ravel())
    st = lev.stage
    bound = C_hat * st.L ** (1.0 - 2.0 * st.eta)
    return DistortionReport(float(np.max(np.abs(g1 - g2))), bound, int(g1.size))


def density_ratio(piece: HorizontalCurve, p1, p2, tol: float = 1e-9) -> float:
    """Ratio ``rho(p1) / rho(p2)`` of the pushed-forward normalised curve measure.

    The density is inversely proportional to the tangent stretch accumulated
    along the chain, so the ratio is ``stretch(p2) / stretch(p1)``.  Points
    are ``(x, y)`` pairs; ``x`` is matched to the piece domain modulo 1.
    """
    xs = []
    for p in (p1, p2):
        x, y = float(p[0]), float(p[1])
        xl = piece.lo + wrap(x - piece.lo)
        if xl > piece.hi + 1e-12:
            raise DomainError("point is not on the piece")
        xl = min(xl, piece.hi)
        hy = float(piece.eval(xl).h)
        d = abs(wrap(hy - y + 0.5) - 0.5)
        if d > tol:
            raise DomainError("point is not on the piece")
        xs.append(xl)
    if xs[0] == xs[1]:
        return 1.0
    g = _log_stretch(piece.chain, piece.level, np.array([piece.index] * 2), np.array(xs))
    return float(np.exp(g[1] - g[0]))


# ---------------------------------------------------------------------------
# integrals along curves


def curve_integral(curve: HorizontalCurve, psi, quad_points: int = 256, rtol: float = 1e-8,
                   max_points: int = 1 << 20) -> float:
    """``int_gamma psi dLeb_gamma`` by the trapezoid rule in ``x``.

    The node count doubles from ``quad_points`` until two successive values
    agree to ``rtol`` (relative to ``max(1, |value|)``).
    """
    lo, hi = curve.lo, curve.hi
    if hi == lo:
        return 0.0
    n = max(2, int(quad_points))
    prev = None
    while True:
        xs = np.linspace(lo, hi, n + 1)
        ev = curve.eval(xs)
        vals = np.asarray(psi(wrap(xs), wrap(ev.h)), float) * np.sqrt(1.0 + ev.hp**2)
        val = float(np.trapezoid(vals, xs)) if hasattr(np, "trapezoid") else float(np.trapz(vals, xs))
        if prev is not None and abs(val - prev) <= rtol * max(1.0, abs(val)):
            return val
        if n >= max_points:
            return val
        prev = val
        n *= 2


def arclength(curve: HorizontalCurve, quad_points: int = 256) -> float:
    return curve_integral(curve, lambda x, y: np.ones_like(x), quad_points)


@dataclass(frozen=True)
class EquidistributionResult:
    measured: float
    bound_shape: float
    std_error: float
    nodes: int
    method: str
    curve_integral: float
    length: float
    mean: float


def equidistribution_shape(comp: Composition, m: int, n: int, alpha: float = 1.0) -> float:
    eta = comp.eta
    return (comp.L(n) ** (-alpha * (1 - eta) / (alpha + 2)) + comp.L(m) ** (1 - 2 * eta)
            + comp.schedule.tail_sum(-1.0 + eta, m, n))


def curve_equidistribution_error(curve: HorizontalCurve, psi, comp: Composition, m: int, n: int,
                                 psi_mean: Optional[float] = None, alpha: float = 1.0,
                                 nodes: int = 1 << 20, stratified: bool = True,
                                 rng: Optional[np.random.Generator] = None,
                                 chunk: int = 1 << 20) -> EquidistributionResult:
    """``|int_gamma psi o F_m^n - Len(gamma) int psi|`` with the bound shape.

    Nodes on the curve are pushed through stages ``m..n``.  A uniform grid
    is used when (node spacing) x (product of max |f'|) <= 0.01; otherwise
    ``nodes / 2`` strata with two jittered nodes each give an estimate and a
    standard error from within-stratum differences.
    """
    if not curve.is_fully_crossing:
        raise ContractError("curve must be fully crossing")
    if psi_mean is None:
        from .stats import integrate, QuadratureGrid
        psi_mean = integrate(QuadratureGrid(256, 2), psi)
    lo, hi = curve.lo, curve.hi
    width = hi - lo
    expansion = 1.0
    for k in range(m, n + 1):
        st = comp.stage(k)
        xs = np.linspace(0, 1, 4097)
        expansion *= float(np.max(np.abs(st.family.deriv(xs, st.L)))) + 1.0
    length = arclength(curve)
    direct = width / nodes * expansion <= 0.01
    if not direct and not stratified:
        raise ResolutionError("expansion too large for direct quadrature")
    rng = rng if rng is not None else np.random.default_rng(0)

    def push(x):
        ev = curve.eval(x)
        px, py = wrap(x), wrap(ev.h)
        for k in range(m, n + 1):
            px, py = apply_forward(comp.stage(k), px, py)
        return np.asarray(psi(px, py), float) * np.sqrt(1.0 + ev.hp**2)

    if direct:
        xs = np.linspace(lo, hi, nodes + 1)
        vals = push(xs)
        trap = np.trapezoid if hasattr(np, "trapezoid") else np.trapz
        est = float(trap(vals, xs))
        se = 0.0
        method = "grid"
    else:
        strata = max(1, nodes // 2)
        total = 0.0
        var = 0.0
        for s0 in range(0, strata, chunk):
            s1 = min(strata, s0 + chunk)
            k = np.arange(s0, s1)
            a = lo + (k + rng.random(k.size)) * (width / strata)
            b = lo + (k + rng.random(k.size)) * (width / strata)
            va, vb = push(a), push(b)
            total += float(np.sum(0.5 * (va + vb)))
            var += float(np.sum((va - vb) ** 2) / 4.0)
        est = width * total / strata
        se = width * math.sqrt(var) / strata
        method = "stratified"
    measured = abs(est - length * psi_mean)
    return EquidistributionResult(measured, equidistribution_shape(comp, m, n, alpha), se,
                                  int(nodes), method, est, length, float(psi_mean))
