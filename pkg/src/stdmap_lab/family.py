"""Map families, coefficient schedules and single-stage operations.

A stage ``F_n(x, y) = (f_n(x) - y mod 1, x)`` is determined by a family
(which supplies the lift ``f`` and its derivatives as functions of ``x`` and
the coefficient ``L``), the coefficient ``L_n`` and the hyperbolicity
parameter ``eta``.
"""
from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .torus import CircleArc, DomainError, circle_distance, wrap

TWO_PI = 2.0 * math.pi

#: schedules refuse coefficients above this value
L_HARD_CAP = 1e12
#: schedules warn above this value
L_WARN = 1e8


class ContractError(ValueError):
    """A documented precondition of an operation was violated."""


class ResolutionError(RuntimeError):
    """A grid or node set was too coarse for the requested accuracy."""


class NumericError(ArithmeticError):
    """Floating point failure (overflow, loss of all precision)."""


# ---------------------------------------------------------------------------
# families


@dataclass(frozen=True, eq=False)
class MapFamily:
    """A family ``x -> f(x; L)`` of circle-map lifts.

    ``kind`` is ``"trig-standard"``, ``"linear-test"`` or ``"custom"``.
    For custom families ``f``, ``fp``, ``fpp`` take ``(x, L)`` and
    ``critical_locator`` (optional) takes ``L`` and returns approximate
    critical points, which are then polished.
    """

    kind: str
    params: dict = field(default_factory=dict)
    f: Optional[Callable] = None
    fp: Optional[Callable] = None
    fpp: Optional[Callable] = None
    critical_locator: Optional[Callable] = None
    degree: int = 2
    K1: Optional[float] = None
    M0: Optional[int] = None
    K0: Optional[float] = None

    # -- evaluation -------------------------------------------------------
    def eval(self, x, L):
        """Return ``(f, f', f'')`` at ``x`` for coefficient ``L``."""
        x = np.asarray(x, dtype=float)
        if self.kind == "trig-standard":
            s = np.sin(TWO_PI * x)
            c = np.cos(TWO_PI * x)
            return L * s + 2.0 * x, TWO_PI * L * c + 2.0, -(TWO_PI**2) * L * s
        if self.kind == "linear-test":
            q = self.params["q"]
            c0 = self.params.get("c", 0.0)
            return q * x + c0, np.full_like(x, float(q)), np.zeros_like(x)
        return (np.asarray(self.f(x, L), dtype=float),
                np.asarray(self.fp(x, L), dtype=float),
                np.asarray(self.fpp(x, L), dtype=float))

    def value(self, x, L):
        x = np.asarray(x, dtype=float)
        if self.kind == "trig-standard":
            return L * np.sin(TWO_PI * x) + 2.0 * x
        if self.kind == "linear-test":
            return self.params["q"] * x + self.params.get("c", 0.0)
        return np.asarray(self.f(x, L), dtype=float)

    def deriv(self, x, L):
        x = np.asarray(x, dtype=float)
        if self.kind == "trig-standard":
            return TWO_PI * L * np.cos(TWO_PI * x) + 2.0
        if self.kind == "linear-test":
            return np.full_like(x, float(self.params["q"]))
        return np.asarray(self.fp(x, L), dtype=float)

    @property
    def has_critical_points(self) -> bool:
        return self.kind != "linear-test"

    @property
    def declared_M0(self) -> int:
        if self.M0 is not None:
            return self.M0
        return {"trig-standard": 2, "linear-test": 0}.get(self.kind, 8)

    def k1(self) -> float:
        """The (H3) constant used for bad-set widths.

        Declared value if given, otherwise the grid-measured value at
        ``L = 1e4``.
        """
        if self.K1 is not None:
            return float(self.K1)
        return _measured_k1(self)

    def min_expansion_off_bad(self, L: float, eta: float) -> float:
        """Lower bound for ``|f'|`` outside the bad set of a stage."""
        if self.kind == "linear-test":
            return abs(float(self.params["q"]))
        return 2.0 * L**eta


def trig_standard(K1: Optional[float] = None) -> MapFamily:
    """``f(x) = L sin(2 pi x) + 2x``."""
    return MapFamily("trig-standard", {}, degree=2, K1=K1, M0=2)


def linear_test(q: int = 10, c: float = 0.0, K1: Optional[float] = None) -> MapFamily:
    """``f(x) = q x + c``, no critical points; exact analytic oracle."""
    if int(q) != q or q < 2:
        raise DomainError("linear-test needs integer q >= 2")
    return MapFamily("linear-test", {"q": int(q), "c": float(c)}, degree=int(q), K1=K1, M0=0)


def custom_family(f, fp, fpp, degree: int, critical_locator=None, K1=None, M0=None,
                  check_L: float = 100.0) -> MapFamily:
    """Wrap user callables ``f(x, L)``, ``f'(x, L)``, ``f''(x, L)``.

    The derivatives are checked against central finite differences
    (relative tolerance 1e-6) and the lift property ``f(x + 1) - f(x) =
    degree`` is checked on a grid.
    """
    fam = MapFamily("custom", {}, f=f, fp=fp, fpp=fpp, critical_locator=critical_locator,
                    degree=int(degree), K1=K1, M0=M0)
    xs = np.linspace(0.013, 0.987, 257)
    h = 1e-6
    v, d1, d2 = fam.eval(xs, check_L)
    fd1 = (fam.value(xs + h, check_L) - fam.value(xs - h, check_L)) / (2 * h)
    fd2 = (fam.deriv(xs + h, check_L) - fam.deriv(xs - h, check_L)) / (2 * h)
    scale1 = np.max(np.abs(d1)) + 1.0
    scale2 = np.max(np.abs(d2)) + 1.0
    if np.max(np.abs(fd1 - d1)) > 1e-6 * scale1 or np.max(np.abs(fd2 - d2)) > 1e-6 * scale2:
        raise ContractError("custom family derivatives disagree with finite differences")
    shift = fam.value(xs + 1.0, check_L) - v
    if np.max(np.abs(shift - degree)) > 1e-8 * (1 + np.max(np.abs(v))):
        raise ContractError("custom family is not a lift of the declared degree")
    if degree < 1:
        raise ContractError("degree must be a positive integer")
    return fam


@functools.lru_cache(maxsize=None)
def _measured_k1(family: MapFamily) -> float:
    st = Stage(1, 1e4, family, 0.75)
    return validate_hypotheses(family, st, grid_size=100_000).K1_hat


# ---------------------------------------------------------------------------
# schedules and stages


@dataclass(frozen=True)
class CoefficientSchedule:
    """Nondecreasing coefficient sequence ``L_1, L_2, ...``.

    kinds: ``constant`` (``L0``), ``polynomial`` (``max(L0, n**p)``, optionally
    clipped at ``cap``), ``explicit`` (``values``; the last value repeats).
    """

    kind: str
    L0: float = 1e3
    p: float = 0.0
    values: tuple = ()
    cap: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("constant", "polynomial", "explicit"):
            raise DomainError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "explicit":
            vals = np.asarray(self.values, dtype=float)
            if vals.size == 0 or np.any(np.diff(vals) < 0):
                raise DomainError("explicit schedule must be nonempty and nondecreasing")
        if self.L0 <= 0:
            raise DomainError("L0 must be positive")

    @classmethod
    def constant(cls, L: float) -> "CoefficientSchedule":
        return cls("constant", L0=float(L))

    @classmethod
    def polynomial(cls, p: float, L0: float, cap: Optional[float] = None) -> "CoefficientSchedule":
        return cls("polynomial", L0=float(L0), p=float(p), cap=cap)

    @classmethod
    def explicit(cls, values: Sequence[float]) -> "CoefficientSchedule":
        return cls("explicit", values=tuple(float(v) for v in values))

    def formula(self, n):
        """Coefficient values without the precision cap checks."""
        n = np.asarray(n, dtype=float)
        if self.kind == "constant":
            out = np.full_like(n, self.L0)
        elif self.kind == "polynomial":
            out = np.maximum(self.L0, n**self.p)
            if self.cap is not None:
                out = np.minimum(out, self.cap)
        else:
            vals = np.asarray(self.values)
            idx = np.clip(n.astype(int) - 1, 0, vals.size - 1)
            out = vals[idx]
        return out

    def __call__(self, n: int) -> float:
        if n < 1:
            raise DomainError("stages are indexed from 1")
        L = float(self.formula(n))
        if L > L_HARD_CAP:
            raise DomainError(f"L_{n} = {L:.3g} exceeds the precision cap {L_HARD_CAP:.0e}")
        if L > L_WARN:
            warnings.warn(f"L_{n} = {L:.3g} > {L_WARN:.0e}: map roundoff ~ {L * 2**-52:.1e}",
                          RuntimeWarning, stacklevel=2)
        return L

    def tail_sum(self, exponent: float, start: int, stop: Optional[int] = None) -> float:
        """``sum_{n=start}^{stop} L_n**exponent`` (``stop=None``: infinite).

        Infinite tails of polynomial schedules are summed exactly up to a
        large index and completed with the Euler-Maclaurin integral; they are
        ``inf`` when the series diverges.
        """
        start = max(int(start), 1)
        if stop is not None:
            if stop < start:
                return 0.0
            n = np.arange(start, stop + 1, dtype=float)
            return float(np.sum(self.formula(n) ** exponent))
        if exponent >= 0:
            return math.inf
        if self.kind == "constant" or (self.kind == "polynomial" and self.cap is not None):
            return math.inf
        if self.kind == "explicit":
            return math.inf
        s = -exponent * self.p  # L_n ~ n**p, terms ~ n**-s
        if s <= 1:
            return math.inf
        big = max(start, 10_000)
        n = np.arange(start, big, dtype=float)
        head = float(np.sum(self.formula(n) ** exponent))
        # sum_{n>=big} n^-s ~ big^(1-s)/(s-1) + big^-s/2
        tail = big ** (1 - s) / (s - 1) + 0.5 * big ** (-s)
        return head + tail


@dataclass(frozen=True)
class Stage:
    n: int
    L: float
    family: MapFamily
    eta: float = 0.75

    def __post_init__(self):
        if not (0.5 < self.eta < 1.0):
            raise DomainError("eta must lie in (1/2, 1)")
        if not self.L > 0:
            raise DomainError("L must be positive")

    @property
    def eta_prime(self) -> float:
        return 0.5 * (self.eta + 1.0)


@dataclass(frozen=True)
class Composition:
    """Family + schedule + eta: the nonautonomous sequence of stages."""

    family: MapFamily
    schedule: CoefficientSchedule
    eta: float = 0.75

    def __post_init__(self):
        if not (0.5 < self.eta < 1.0):
            raise DomainError("eta must lie in (1/2, 1)")

    def stage(self, n: int) -> Stage:
        return Stage(n, self.schedule(n), self.family, self.eta)

    def L(self, n: int) -> float:
        return self.schedule(n)


# ---------------------------------------------------------------------------
# single-stage operations


def stage_eval(stage: Stage, x):
    """Lift value and first two derivatives of ``f_n`` at ``x``."""
    return stage.family.eval(x, stage.L)


def apply_forward(stage: Stage, x, y):
    """``(x, y) -> (f(x) - y mod 1, x)``.

    The lift value is reduced mod 1 before subtracting ``y`` so the result
    is exactly invertible given the same computed ``f(x)``.
    """
    fx = stage.family.value(x, stage.L)
    xn = _wrap_fast(_wrap_fast(fx) - y)
    return xn, np.asarray(x, dtype=float) if np.ndim(x) else float(x)


def apply_inverse(stage: Stage, x, y):
    """Inverse of :func:`apply_forward`: ``(x, y) -> (y, f(y) - x mod 1)``."""
    fy = stage.family.value(y, stage.L)
    yp = _wrap_fast(_wrap_fast(fy) - x)
    return (np.asarray(y, dtype=float) if np.ndim(y) else float(y)), yp


def _wrap_fast(v):
    r = v - np.floor(v)
    if np.ndim(r):
        r[r >= 1.0] = 0.0
        return r
    return 0.0 if r >= 1.0 else float(r)


def jacobian(stage: Stage, x):
    """Derivative ``[[f'(x), -1], [1, 0]]`` (shape ``(..., 2, 2)``)."""
    fp = stage.family.deriv(x, stage.L)
    out = np.zeros(np.shape(fp) + (2, 2))
    out[..., 0, 0] = fp
    out[..., 0, 1] = -1.0
    out[..., 1, 0] = 1.0
    return out


def iterate(comp: Composition, x, y, m: int, n: int):
    """Apply ``F_n o ... o F_m``; the empty composition (``n = m - 1``) is the identity."""
    x = np.array(x, dtype=float, copy=True)
    y = np.array(y, dtype=float, copy=True)
    for k in range(m, n + 1):
        x, y = apply_forward(comp.stage(k), x, y)
    return x, y


def cocycle_norm_growth(comp: Composition, x, y, N: int):
    """Running exponents ``(1/n) log ||dF^n_p||`` for ``n = 1..N``.

    The derivative product is renormalised every step; returns an array of
    shape ``(N,) + shape(x)``.
    """
    if N < 1:
        raise DomainError("N must be >= 1")
    x = np.array(x, dtype=float, copy=True)
    y = np.array(y, dtype=float, copy=True)
    a = np.ones_like(x)
    b = np.zeros_like(x)
    c = np.zeros_like(x)
    d = np.ones_like(x)
    logn = np.zeros_like(x)
    out = np.empty((N,) + x.shape)
    with np.errstate(over="raise", invalid="raise"):
        for k in range(1, N + 1):
            st = comp.stage(k)
            fp = st.family.deriv(x, st.L)
            a, b, c, d = fp * a - c, fp * b - d, a, b
            nrm = np.sqrt(a * a + b * b + c * c + d * d)
            if not np.all(np.isfinite(nrm)) or np.any(nrm == 0):
                raise NumericError("cocycle renormalisation failed")
            a, b, c, d = a / nrm, b / nrm, c / nrm, d / nrm
            logn = logn + np.log(nrm)
            # operator norm of the normalised product
            s = a * a + b * b + c * c + d * d
            det = a * d - b * c
            opn = np.sqrt(0.5 * (s + np.sqrt(np.maximum(s * s - 4 * det * det, 0.0))))
            out[k - 1] = (logn + np.log(opn)) / k
            x, y = apply_forward(st, x, y)
    return out


# ---------------------------------------------------------------------------
# critical sets, bad sets, hypotheses


@dataclass(frozen=True)
class CriticalSet:
    roots: tuple

    def __len__(self):
        return len(self.roots)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.roots, dtype=float)


@functools.lru_cache(maxsize=4096)
def critical_set(stage: Stage) -> CriticalSet:
    """Roots of ``f'`` on the circle, to absolute tolerance 1e-13.

    Sign changes on a uniform grid are bracketed and bisected, then
    polished by one Newton step.
    """
    fam = stage.family
    if fam.kind == "linear-test":
        return CriticalSet(())
    L = stage.L
    if fam.critical_locator is not None:
        guesses = np.atleast_1d(np.asarray(fam.critical_locator(L), dtype=float))
        roots = [_polish(fam, L, wrap(g)) for g in guesses]
        return CriticalSet(tuple(sorted(set(wrap(np.array(roots)).tolist()))))
    cells = max(10_000, 64 * fam.declared_M0)
    xs = np.linspace(0.0, 1.0, cells + 1)
    _, d1, d2 = fam.eval(xs, L)
    h = 1.0 / cells
    sgn = np.sign(d1)
    change = np.nonzero(sgn[:-1] * sgn[1:] <= 0)[0]
    # unresolved tangencies: a local minimum of |f'| too small to exclude a
    # pair of roots inside one cell
    ad = np.abs(d1)
    interior = np.arange(1, cells)
    locmin = interior[(ad[interior] <= ad[interior - 1]) & (ad[interior] <= ad[interior + 1])]
    fpp_max = np.max(np.abs(d2))
    for i in locmin:
        near = (i - 1 in change) or (i in change)
        if not near and ad[i] < fpp_max * h:
            raise ResolutionError("critical-point grid too coarse to separate roots")
    roots = []
    for i in change:
        a, b = xs[i], xs[i + 1]
        fa = d1[i]
        if d1[i] == 0.0:
            roots.append(a)
            continue
        if d1[i + 1] == 0.0:
            continue  # picked up by the next cell
        for _ in range(200):
            mid = 0.5 * (a + b)
            fm = fam.deriv(mid, L)
            if np.sign(fm) == np.sign(fa):
                a, fa = mid, fm
            else:
                b = mid
            if b - a < 1e-13:
                break
        roots.append(_polish(fam, L, 0.5 * (a + b)))
    roots = sorted(set(float(wrap(r)) for r in roots))
    return CriticalSet(tuple(roots))


def _polish(fam: MapFamily, L: float, x0: float) -> float:
    _, d1, d2 = fam.eval(x0, L)
    if d2 != 0:
        step = float(d1 / d2)
        if abs(step) < 1e-6:
            return float(x0 - step)
    return float(x0)


@dataclass(frozen=True)
class BadSet:
    """x-projections of the critical strips of one stage."""

    centers: tuple
    half_width: float
    margin_kind: str = "standard"

    @property
    def strips(self) -> list:
        if not self.centers:
            return []
        arcs = []
        w = self.half_width
        for c in self.centers:
            arcs.append((c - w, c + w))
        merged = []
        for a, b in sorted(arcs):
            if merged and a <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(merged[-1][1], b))
            else:
                merged.append((a, b))
        if len(merged) > 1 and merged[-1][1] >= merged[0][0] + 1.0:
            a0, b0 = merged.pop(0)
            merged[-1] = (merged[-1][0], max(merged[-1][1], b0 + 1.0))
        return [CircleArc(a, min(1.0, b - a)) for a, b in merged]

    @property
    def measure(self) -> float:
        return float(sum(a.length for a in self.strips))

    def contains(self, x):
        if not self.centers:
            return np.zeros(np.shape(x), dtype=bool) if np.ndim(x) else False
        d = distance_to_set(x, self.centers)
        return d <= self.half_width


def distance_to_set(x, centers):
    """Circle distance from ``x`` to the nearest of ``centers`` (inf if empty)."""
    x = np.asarray(x, dtype=float)
    if len(centers) == 0:
        return np.full(x.shape, np.inf) if x.ndim else math.inf
    d = None
    for c in centers:
        dc = circle_distance(x, c)
        d = dc if d is None else np.minimum(d, dc)
    return d


def bad_half_width(stage: Stage, margin_kind: str = "standard") -> float:
    K1 = stage.family.k1()
    w = 2.0 * K1 * stage.L ** (-1.0 + stage.eta)
    if margin_kind == "primed":
        w += K1 * stage.L ** (-1.0 + stage.eta_prime)
    elif margin_kind != "standard":
        raise DomainError(f"unknown margin kind {margin_kind!r}")
    return w


def bad_set(stage: Stage, margin_kind: str = "standard") -> BadSet:
    """Critical strips ``d(x, C_n) <= 2 K1 L^(-1+eta)`` (plus ``K1 L^(-1+eta')`` when primed)."""
    roots = critical_set(stage).roots
    return BadSet(tuple(roots), bad_half_width(stage, margin_kind), margin_kind)


def in_bad_set(stage: Stage, x, margin_kind: str = "standard"):
    """Membership of ``x`` (the strips are vertical); boundary counts as inside."""
    return bad_set(stage, margin_kind).contains(x)


@dataclass(frozen=True)
class HypothesisReport:
    K0_hat: float
    K1_hat: float
    M0_hat: int
    grid_size: int
    pass_H1: Optional[bool]
    pass_H2: Optional[bool]
    pass_H3: Optional[bool]
    unstable: bool = False


def validate_hypotheses(family: MapFamily, stage: Stage, grid_size: int = 10_000) -> HypothesisReport:
    """Grid estimates of the constants in (H1)-(H3) for one stage.

    Pass flags compare against the family's declared ``K0``, ``M0``, ``K1``
    and are ``None`` when no constant is declared.
    """
    if grid_size < 10_000:
        raise DomainError("grid_size must be >= 1e4")
    L = stage.L
    xs = np.arange(grid_size + 1) / grid_size
    xs = np.concatenate([xs, [0.25, 0.5, 0.75]])
    _, d1, d2 = family.eval(xs, L)
    K0_hat = float((np.max(np.abs(d1)) + np.max(np.abs(d2))) / L)
    roots = critical_set(stage).roots if family.has_critical_points else ()
    unstable = False
    if roots:
        dist = distance_to_set(xs, roots)
        ok = dist > 1e-12
        tiny = np.abs(d1) < 1e-300
        if np.any(ok & tiny):
            unstable = True
            ok &= ~tiny
        K1_hat = float(np.max(L * dist[ok] / np.abs(d1[ok])))
    else:
        K1_hat = 0.0
    M0_hat = len(roots)
    h1 = None if family.K0 is None else K0_hat <= family.K0
    h2 = None if family.M0 is None else M0_hat <= family.M0
    h3 = None if family.K1 is None else K1_hat <= family.K1
    return HypothesisReport(K0_hat, K1_hat, M0_hat, grid_size, h1, h2, h3, unstable)
