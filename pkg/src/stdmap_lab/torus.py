"""Arithmetic on the circle [0, 1) and the flat torus R^2 / Z^2.

All functions accept scalars or numpy arrays and are pure.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DomainError(ValueError):
    """Raised for inputs outside the domain of an operation."""


def wrap(x):
    """Reduce ``x`` modulo 1 into [0, 1).

    Values that round to 1.0 are folded to 0.0 so the result is always
    strictly below 1.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("wrap requires finite input")
    r = arr - np.floor(arr)
    r = np.where(r >= 1.0, 0.0, r)
    if np.ndim(x) == 0:
        return float(r)
    return r


def circle_distance(a, b):
    """Geodesic distance on the circle, in [0, 1/2]."""
    d = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
    d = d - np.floor(d)
    out = np.minimum(d, 1.0 - d)
    if np.ndim(out) == 0:
        return float(out)
    return out


def torus_distance(p, q):
    """Flat geodesic distance on the torus between points ``(x, y)``."""
    dx = circle_distance(p[0], q[0])
    dy = circle_distance(p[1], q[1])
    return np.hypot(dx, dy)


@dataclass(frozen=True)
class TorusPoint:
    x: float
    y: float

    def __post_init__(self):
        object.__setattr__(self, "x", wrap(self.x))
        object.__setattr__(self, "y", wrap(self.y))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class CircleArc:
    """The arc ``{anchor + t mod 1 : 0 <= t < length}``.

    ``length == 1`` is the full circle.
    """

    anchor: float
    length: float

    def __post_init__(self):
        if not (0.0 <= self.length <= 1.0):
            raise DomainError(f"arc length {self.length} outside [0, 1]")
        object.__setattr__(self, "anchor", wrap(self.anchor))

    @classmethod
    def from_endpoints(cls, a: float, b: float) -> "CircleArc":
        """Arc running counterclockwise from ``a`` to ``b`` (lifted, ``b >= a``)."""
        return cls(a, min(1.0, max(0.0, b - a)))

    @property
    def is_full(self) -> bool:
        return self.length >= 1.0

    def contains(self, x):
        t = wrap(np.asarray(x, dtype=float) - self.anchor)
        if self.is_full:
            return np.ones_like(t, dtype=bool) if np.ndim(t) else True
        return t < self.length

    def lifted(self) -> tuple[float, float]:
        return self.anchor, self.anchor + self.length


def arc_clip(arc: CircleArc, allowed: CircleArc) -> list[CircleArc]:
    """Maximal subarcs of ``arc`` that lie inside ``allowed``.

    Returns zero, one or two arcs.
    """
    if arc.length == 0.0 or allowed.length == 0.0:
        return []
    if allowed.is_full:
        return [arc]
    if arc.is_full:
        return [allowed]
    a0, a1 = arc.lifted()
    out = []
    # shifts of the allowed arc that can meet [a0, a1)
    base = allowed.anchor - 1.0
    for k in range(3):
        lo = max(a0, base + k)
        hi = min(a1, base + k + allowed.length)
        if hi > lo:
            out.append((lo, hi))
    return [CircleArc(lo, hi - lo) for lo, hi in out]


def arc_minus_strips(lo: float, hi: float, centers, half_width: float) -> list[tuple[float, float]]:
    """Lifted subintervals of ``[lo, hi]`` avoiding closed strips.

    The strips are ``[c - half_width, c + half_width] + Z`` for each center.
    Boundary points belong to the strips.
    """
    centers = np.sort(wrap(np.asarray(centers, dtype=float)).ravel())
    if centers.size == 0 or half_width <= 0.0:
        return [(lo, hi)] if hi > lo else []
    if 2.0 * half_width * centers.size >= 1.0 and _strips_cover(centers, half_width):
        return []
    k0 = int(np.floor(lo)) - 1
    k1 = int(np.floor(hi)) + 1
    bad = []
    for k in range(k0, k1 + 1):
        for c in centers:
            bad.append((c + k - half_width, c + k + half_width))
    bad.sort()
    out = []
    cur = lo
    for b0, b1 in bad:
        if b1 < cur:
            continue
        if b0 > hi:
            break
        if b0 > cur:
            out.append((cur, min(b0, hi)))
        cur = max(cur, b1)
        if cur >= hi:
            break
    if cur < hi:
        out.append((cur, hi))
    return [(a, b) for a, b in out if b > a]


def _strips_cover(centers: np.ndarray, half_width: float) -> bool:
    gaps = np.diff(np.concatenate([centers, centers[:1] + 1.0]))
    return bool(np.all(gaps <= 2.0 * half_width))
