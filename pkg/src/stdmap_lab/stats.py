"""Quadrature, the singular-limit Markov operator and asymptotic variances.

In the limit of large coefficients the maps act like the Markov chain
``Z_{n+1} = (beta_{n+1}, X_n)`` with ``beta`` i.i.d. uniform.  Its transition
operator is ``(P psi)(x, y) = int psi(b, x) db`` and ``P^2 psi`` is the
constant ``int psi``.  The limiting variance of Birkhoff sums is

    sigma^2 = int phi^2 + 2 int phi(x, z) phi(z, y) dx dy dz.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .family import ContractError
from .observables import Observable

MAX_POINTS_PER_AXIS = 4096
MAX_TOTAL_POINTS = 1 << 24  # 3D grids stop at 256 points per axis


@dataclass(frozen=True)
class QuadratureGrid:
    points_per_axis: int = 16
    dimension: int = 2

    def __post_init__(self):
        if self.points_per_axis < 16:
            raise ValueError("need at least 16 points per axis")
        if self.dimension not in (1, 2, 3):
            raise ValueError("dimension must be 1, 2 or 3")


class QuadResult(float):
    """A float carrying ``converged`` and ``points_per_axis``."""

    def __new__(cls, value, converged, points):
        obj = float.__new__(cls, value)
        obj.converged = converged
        obj.points_per_axis = points
        return obj


def _nodes(G):
    return np.arange(G) / G


def _trap(f, G, dim):
    t = _nodes(G)
    if dim == 1:
        return float(np.mean(f(t)))
    if dim == 2:
        X, Y = np.meshgrid(t, t, indexing="ij")
        return float(np.mean(f(X, Y)))
    Y, Z = np.meshgrid(t, t, indexing="ij")
    total = 0.0
    for x in t:
        total += float(np.sum(f(np.full_like(Y, x), Y, Z)))
    return total / G**3


def integrate(grid: QuadratureGrid, f, dim: int = None, tol: float = 1e-10) -> QuadResult:
    """Periodic trapezoid rule on ``[0,1)^dim``, doubling until two values agree to ``tol``."""
    dim = grid.dimension if dim is None else dim
    G = grid.points_per_axis
    prev = _trap(f, G, dim)
    while True:
        G2 = 2 * G
        if G2 > MAX_POINTS_PER_AXIS or G2**dim > MAX_TOTAL_POINTS:
            return QuadResult(prev, False, G)
        val = _trap(f, G2, dim)
        if abs(val - prev) <= tol:
            return QuadResult(val, True, G2)
        prev, G = val, G2


def mean_of(phi: Observable, G: int = 64) -> float:
    if phi.trig is not None:
        return phi.trig.mean
    return float(integrate(QuadratureGrid(G, 2), phi))


def _require_zero_mean(phi: Observable):
    m = mean_of(phi)
    if abs(m) > 1e-8:
        raise ContractError(f"observable has mean {m:.3g}; center it first")


def _start_grid(phi: Observable) -> int:
    if phi.trig is not None:
        return max(16, 4 * phi.trig.max_frequency() + 4)
    return 32


def sigma_squared_direct(phi: Observable) -> float:
    """``int phi^2 + 2 int phi(x, z) phi(z, y)`` by 2D and 3D quadrature."""
    G = _start_grid(phi)
    a = integrate(QuadratureGrid(G, 2), lambda x, y: phi(x, y) ** 2)
    b = integrate(QuadratureGrid(G, 3), lambda x, y, z: phi(x, z) * phi(z, y))
    return float(a + 2.0 * b)


def _inner_first(phi: Observable, G: int):
    """``a(x) = int phi(z, x) dz`` as a callable (periodic trapezoid in ``z``)."""
    z = _nodes(G)

    def a(x):
        x = np.asarray(x, float)
        flat = x.ravel()
        out = np.mean(phi(z[None, :], flat[:, None]), axis=1)
        return out.reshape(x.shape)
    return a


def markov_apply_P(psi: Observable, k: int = 1, G: int = 256) -> Observable:
    """``P^k psi``: ``(P psi)(x, y) = int psi(b, x) db``; constant ``int psi`` for ``k >= 2``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if k >= 2:
        m = mean_of(psi)
        return Observable(lambda x, y: np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape) + m,
                          psi.alpha, abs(m), m, f"P^{k}({psi.name})", abs(m) < 1e-15)
    if psi.trig is not None:
        return psi.trig.apply_P().observable(f"P({psi.name})")
    a = _inner_first(psi, G)
    return Observable(lambda x, y: a(np.broadcast_to(x, np.broadcast(np.asarray(x), np.asarray(y)).shape)),
                      psi.alpha, psi.holder_norm, psi.mean, f"P({psi.name})", psi.zero_mean,
                      declared=False)


def sigma_squared_green_kubo(phi: Observable) -> float:
    """``int phi^2 + 2 int phi . P phi`` (the Markov-chain form)."""
    G = _start_grid(phi)
    Pphi = markov_apply_P(phi, 1, G=max(64, 2 * G))
    a = integrate(QuadratureGrid(G, 2), lambda x, y: phi(x, y) ** 2)
    b = integrate(QuadratureGrid(G, 2), lambda x, y: phi(x, y) * Pphi(x, y))
    return float(a + 2.0 * b)


def sigma_squared(phi: Observable, check: bool = True) -> float:
    """Limiting variance of ``S_N / sqrt(N)``.

    Computed from the three-point formula and checked against the
    Markov-chain form to 1e-9.
    """
    _require_zero_mean(phi)
    s = sigma_squared_direct(phi)
    if check:
        g = sigma_squared_green_kubo(phi)
        if abs(s - g) > 1e-9:
            raise ArithmeticError(f"variance routes disagree: {s!r} vs {g!r}")
    return s


@dataclass(frozen=True)
class CoboundaryCheck:
    lhs: float
    rhs: float
    residual: float
    psi: object = None
    reconstruction_residual: float = math.nan


def coboundary_identity_check(phi: Observable, grid: int = 128, tol: float = 1e-9) -> CoboundaryCheck:
    """Compare ``sigma^2`` with ``int (phi(x,y) + a(x) - a(y))^2``, ``a(x) = int phi(z,x) dz``.

    When both vanish, ``psi(x) = -a(x)`` is returned and
    ``phi(x, y) - psi(x) + psi(y)`` is checked to vanish on a grid.
    """
    _require_zero_mean(phi)
    lhs = sigma_squared(phi, check=False)
    G = _start_grid(phi)
    a = _inner_first(phi, max(64, 2 * G))
    rhs = float(integrate(QuadratureGrid(G, 2), lambda x, y: (phi(x, y) + a(x) - a(y)) ** 2))
    res = abs(lhs - rhs)
    psi = None
    recon = math.nan
    if abs(lhs) <= tol and abs(rhs) <= tol:
        def psi(x):
            return -a(x)
        t = _nodes(grid)
        X, Y = np.meshgrid(t, t, indexing="ij")
        recon = float(np.max(np.abs(phi(X, Y) - psi(X) + psi(Y))))
    return CoboundaryCheck(lhs, rhs, res, psi, recon)


# ---------------------------------------------------------------------------
# Kolmogorov-Smirnov


def normal_cdf(z):
    """Standard normal CDF via the error function."""
    return ndtr(z)


def ks_statistic(samples, cdf=normal_cdf) -> float:
    """Two-sided ``sup |F_M - F|`` for a continuous reference CDF."""
    z = np.sort(np.asarray(samples, dtype=float).ravel())
    M = z.size
    if M == 0:
        raise ValueError("no samples")
    F = cdf(z)
    i = np.arange(1, M + 1)
    return float(max(np.max(i / M - F), np.max(F - (i - 1) / M)))


def ks_critical(M: int, level: float = 0.99) -> float:
    """Asymptotic critical value ``c(level) / sqrt(M)`` (1.63 at 99%)."""
    c = {0.95: 1.36, 0.99: 1.63}.get(level)
    if c is None:
        c = math.sqrt(-0.5 * math.log((1 - level) / 2))
    return c / math.sqrt(M)
