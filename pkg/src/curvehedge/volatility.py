"""Deterministic factor volatilities of bond prices.

A :class:`VolSurface` maps (time, maturity) to a d-vector of loadings, one
per Brownian factor, in units of 1/sqrt(year).  Built-in families:

* ``constant`` -- same vector everywhere (freezes the forward curve);
* ``ho-lee`` -- per factor ``-beta * (y - t)``;
* ``vasicek`` -- per factor ``-(sigma/a) * (1 - exp(-a*(y - t)))``;
* ``piecewise`` -- constant in time, step function in maturity.

Surfaces are deterministic and immutable; time integrals are taken by the
composite midpoint rule on a fixed subgrid (``QUAD_SUBPOINTS`` points per
step), which is what the simulation schemes consume.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

# Sub-points per simulation step for time integrals of the volatility.
QUAD_SUBPOINTS = 8


@dataclass(frozen=True)
class VolSurface:
    factors: int
    family: str
    params: dict = field(default_factory=dict)
    _fn: Callable[[float, np.ndarray], np.ndarray] = None  # (t, ys) -> (len(ys), d)

    def __call__(self, t: float, y: float) -> np.ndarray:
        """Loadings at one (time, maturity) point, shape (factors,)."""
        return self._fn(t, np.atleast_1d(float(y)))[0]

    def at(self, t: float, ys: Sequence[float] | np.ndarray) -> np.ndarray:
        """Loadings at one time for many maturities, shape (len(ys), factors)."""
        return self._fn(t, np.asarray(ys, dtype=float))

    def averaged(self, t0: float, t1: float, ys: Sequence[float] | np.ndarray) -> np.ndarray:
        """Time average over [t0, t1] by the midpoint rule, shape (len(ys), factors).

        Exact for surfaces affine in time; for the built-in families the
        residual quadrature error is O(((t1-t0)/QUAD_SUBPOINTS)^2).
        """
        ys = np.asarray(ys, dtype=float)
        if t1 <= t0:
            return self.at(t0, ys)
        h = (t1 - t0) / QUAD_SUBPOINTS
        acc = np.zeros((len(ys), self.factors))
        for q in range(QUAD_SUBPOINTS):
            acc += self._fn(t0 + (q + 0.5) * h, ys)
        return acc / QUAD_SUBPOINTS

    def max_norm(self, times: Sequence[float], ys: Sequence[float]) -> float:
        """Largest loading norm on the sampled grid; boundedness probe."""
        worst = 0.0
        ys = np.asarray(ys, dtype=float)
        for t in times:
            norms = np.linalg.norm(self.at(t, ys), axis=1)
            worst = max(worst, float(norms.max()))
        return worst

    # -- families ----------------------------------------------------------

    @staticmethod
    def zero(factors: int = 1) -> "VolSurface":
        return VolSurface.constant(np.zeros(factors))

    @staticmethod
    def constant(levels: float | Sequence[float]) -> "VolSurface":
        vec = np.atleast_1d(np.asarray(levels, dtype=float))

        def fn(t, ys):
            return np.broadcast_to(vec, (len(ys), len(vec))).copy()

        return VolSurface(len(vec), "constant", {"levels": vec.tolist()}, fn)

    @staticmethod
    def ho_lee(betas: float | Sequence[float]) -> "VolSurface":
        b = np.atleast_1d(np.asarray(betas, dtype=float))

        def fn(t, ys):
            return -np.outer(ys - t, b)

        return VolSurface(len(b), "ho-lee", {"betas": b.tolist()}, fn)

    @staticmethod
    def vasicek(sigmas: float | Sequence[float], speeds: float | Sequence[float]) -> "VolSurface":
        s = np.atleast_1d(np.asarray(sigmas, dtype=float))
        a = np.atleast_1d(np.asarray(speeds, dtype=float))
        if len(s) != len(a):
            raise ValueError("sigmas and speeds need the same length")
        if np.any(a <= 0.0):
            raise ValueError("mean-reversion speeds must be positive")

        def fn(t, ys):
            gap = np.maximum(np.asarray(ys) - t, 0.0)
            return -(s / a) * (1.0 - np.exp(-np.outer(gap, a)))

        return VolSurface(len(s), "vasicek", {"sigmas": s.tolist(), "speeds": a.tolist()}, fn)

    @staticmethod
    def piecewise(nodes: Sequence[float], levels: Sequence[Sequence[float]]) -> "VolSurface":
        """Step function in maturity: maturities in [nodes[i], nodes[i+1]) take
        levels[i]; below the first node the first level, at or above the last
        node the last level.  Constant in time."""
        nd = np.asarray(nodes, dtype=float)
        lv = np.atleast_2d(np.asarray(levels, dtype=float))
        if len(nd) != lv.shape[0]:
            raise ValueError("need one level row per node")
        if np.any(np.diff(nd) <= 0.0):
            raise ValueError("piecewise nodes must be strictly increasing")

        def fn(t, ys):
            idx = np.clip(np.searchsorted(nd, np.asarray(ys), side="right") - 1, 0, len(nd) - 1)
            return lv[idx]

        return VolSurface(
            lv.shape[1], "piecewise", {"nodes": nd.tolist(), "levels": lv.tolist()}, fn
        )

    @staticmethod
    def stack(*surfaces: "VolSurface") -> "VolSurface":
        """Concatenate independent factor groups into one surface."""
        d = sum(s.factors for s in surfaces)

        def fn(t, ys):
            return np.concatenate([s._fn(t, np.asarray(ys, dtype=float)) for s in surfaces], axis=1)

        return VolSurface(d, "stack", {"parts": [s.family for s in surfaces]}, fn)
