"""Observables on the torus.

Trigonometric polynomials carry exact means, Hoelder data (alpha = 1) and
an exact action of the singular-limit operator.  Arbitrary callables must
declare ``alpha`` and ``holder_norm``; those values are not verified.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True, eq=False)
class Observable:
    evaluator: Callable
    alpha: float = 1.0
    holder_norm: float = math.nan
    mean: Optional[float] = None
    name: str = "custom"
    zero_mean: bool = False
    trig: Optional["TrigPolynomial"] = None
    coboundary_of: Optional[Callable] = None
    declared: bool = True  # False when Hoelder data are unverified

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError("alpha must lie in (0, 1]")

    def __call__(self, x, y):
        return self.evaluator(np.asarray(x, float), np.asarray(y, float))

    def centered(self) -> "Observable":
        """Mean-corrected copy (mean from the analytic value or quadrature)."""
        if self.trig is not None:
            return self.trig.centered().observable(self.name + "-centered")
        from .stats import QuadratureGrid, integrate
        m = self.mean if self.mean is not None else float(integrate(QuadratureGrid(64, 2), self))
        ev = self.evaluator
        return Observable(lambda x, y: ev(x, y) - m, self.alpha, self.holder_norm + abs(m),
                          0.0, self.name + "-centered", True, None, None, self.declared)


@dataclass(frozen=True)
class TrigPolynomial:
    """``sum a_k cos(2 pi k.p) + b_k sin(2 pi k.p)`` over integer ``k = (kx, ky)``."""

    terms: tuple  # (a, b, kx, ky)

    def __call__(self, x, y):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        out = np.zeros(np.broadcast(x, y).shape)
        for a, b, kx, ky in self.terms:
            ph = TWO_PI * (kx * x + ky * y)
            if a:
                out = out + a * np.cos(ph)
            if b:
                out = out + b * np.sin(ph)
        return out

    @property
    def mean(self) -> float:
        return float(sum(a for a, b, kx, ky in self.terms if kx == 0 and ky == 0))

    def centered(self) -> "TrigPolynomial":
        return TrigPolynomial(tuple(t for t in self.terms if (t[2], t[3]) != (0, 0)))

    def gradient(self, x, y):
        gx = np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)
        gy = np.zeros_like(gx)
        for a, b, kx, ky in self.terms:
            ph = TWO_PI * (kx * x + ky * y)
            d = TWO_PI * (-a * np.sin(ph) + b * np.cos(ph))
            gx = gx + kx * d
            gy = gy + ky * d
        return gx, gy

    def max_frequency(self) -> int:
        return max([max(abs(kx), abs(ky)) for _, _, kx, ky in self.terms] + [0])

    def holder_norm(self) -> float:
        """``sup|phi| + sup|grad phi|`` (the Lipschitz norm).

        Single-frequency terms are exact; sums are maximised on a grid fine
        enough for the polynomial's degree, then polished by local search.
        """
        nz = [t for t in self.terms if (t[2], t[3]) != (0, 0)]
        const = self.mean
        if len(nz) == 1 and const == 0.0:
            a, b, kx, ky = nz[0]
            amp = math.hypot(a, b)
            return amp + TWO_PI * amp * math.hypot(kx, ky)
        if not nz:
            return abs(const)
        g = 64 * max(1, self.max_frequency())
        xs = (np.arange(g) + 0.5) / g
        X, Y = np.meshgrid(xs, xs, indexing="ij")
        sup = _refined_max(lambda x, y: np.abs(self(x, y)), X, Y, g)
        gr = _refined_max(lambda x, y: np.hypot(*self.gradient(x, y)), X, Y, g)
        return sup + gr

    def apply_P(self) -> "TrigPolynomial":
        """Exact ``(P psi)(x, y) = int psi(b, x) db``."""
        out = []
        for a, b, kx, ky in self.terms:
            if kx == 0:
                out.append((a, b, ky, 0))
        return TrigPolynomial(tuple(out))

    def observable(self, name: str = "trig") -> Observable:
        m = self.mean
        return Observable(self, 1.0, self.holder_norm(), m, name, abs(m) < 1e-15, self)


def _refined_max(fn, X, Y, g):
    v = fn(X, Y)
    i = np.unravel_index(np.argmax(v), v.shape)
    x0, y0 = X[i], Y[i]
    h = 1.0 / g
    best = float(v[i])
    for _ in range(30):
        xs = x0 + h * np.linspace(-1, 1, 9)
        Xs, Ys = np.meshgrid(xs, y0 + h * np.linspace(-1, 1, 9), indexing="ij")
        w = fn(Xs, Ys)
        j = np.unravel_index(np.argmax(w), w.shape)
        x0, y0 = Xs[j], Ys[j]
        best = max(best, float(w[j]))
        h *= 0.5
    return best


def trig(*terms, name: str = "trig") -> Observable:
    return TrigPolynomial(tuple((float(a), float(b), int(kx), int(ky)) for a, b, kx, ky in terms)).observable(name)


def custom(fn: Callable, alpha: float, holder_norm: float, mean: Optional[float] = None,
           name: str = "custom") -> Observable:
    """User observable with declared (unverified) Hoelder data."""
    zero = mean is not None and abs(mean) < 1e-15
    return Observable(fn, alpha, holder_norm, mean, name, zero, None, None, False)


def coboundary(psi_terms, name: str = "coboundary") -> Observable:
    """``phi(x, y) = psi(x) - psi(y)`` for a 1D trig polynomial ``psi``.

    ``psi_terms`` are ``(a, b, k)`` for ``a cos(2 pi k t) + b sin(2 pi k t)``.
    """
    terms = []
    for a, b, k in psi_terms:
        terms.append((a, b, k, 0))
        terms.append((-a, -b, 0, k))
    tp = TrigPolynomial(tuple((float(a), float(b), int(kx), int(ky)) for a, b, kx, ky in terms))

    def psi(t):
        t = np.asarray(t, float)
        return sum(a * np.cos(TWO_PI * k * t) + b * np.sin(TWO_PI * k * t) for a, b, k in psi_terms)

    obs = tp.observable(name)
    return Observable(obs.evaluator, 1.0, obs.holder_norm, obs.mean, name, True, tp, psi)


LIBRARY = {
    "zero": lambda: trig(name="zero"),
    "one": lambda: trig((1, 0, 0, 0), name="one"),
    "cos2pix": lambda: trig((1, 0, 1, 0), name="cos2pix"),
    "cos2piy": lambda: trig((1, 0, 0, 1), name="cos2piy"),
    "sin2pix": lambda: trig((0, 1, 1, 0), name="sin2pix"),
    "cos2pi(x+y)": lambda: trig((1, 0, 1, 1), name="cos2pi(x+y)"),
    "sin2pi(x+y)": lambda: trig((0, 1, 1, 1), name="sin2pi(x+y)"),
    "cos2pix*cos2piy": lambda: trig((0.5, 0, 1, 1), (0.5, 0, 1, -1), name="cos2pix*cos2piy"),
    "cos2pix-cos2piy": lambda: coboundary([(1.0, 0.0, 1)], name="cos2pix-cos2piy"),
    "cos4pix+sin2piy": lambda: trig((1, 0, 2, 0), (0, 1, 0, 1), name="cos4pix+sin2piy"),
}


def get(name: str) -> Observable:
    try:
        return LIBRARY[name]()
    except KeyError:
        raise KeyError(f"unknown observable {name!r}; known: {sorted(LIBRARY)}") from None


def basket() -> list:
    """Ten zero-mean trig observables used for identity checks."""
    return [
        get("cos2pix"),
        get("cos2piy"),
        get("cos2pix-cos2piy"),
        get("cos2pix*cos2piy"),
        get("sin2pi(x+y)"),
        get("cos2pi(x+y)"),
        trig((1, 0, 1, 0), (0.5, 0, 0, 1), name="cos2pix+cos2piy/2"),
        trig((0.3, 0.2, 2, 1), (0, 0.7, 1, -2), name="mixed-2"),
        trig((1, 0, 1, 0), (0, 1, 1, 1), (0.25, 0, 3, 0), name="mixed-3"),
        coboundary([(0.5, 0.0, 1), (0.0, 0.2, 2)], name="coboundary-2"),
    ]
