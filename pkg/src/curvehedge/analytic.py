"""Closed-form pricing under a lognormal forward-price model.

When the forward asset price follows a driftless geometric Brownian motion
with deterministic (possibly multi-factor) volatility under the forward
measure, exchange calls are priced by the Black-Scholes-Margrabe formula.
This module supplies the formula, its two cumulative-normal terms, the
root-integrated volatility, and the extraction of the deterministic
effective volatility from a bond-price factor surface per instrument kind.

The normal CDF is scipy's ``ndtr`` (error-function based, accurate to a few
ulps, well beyond the 1e-12 absolute accuracy all downstream closed-form
tolerances assume).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import ndtr

from .instruments import InstrumentSpec
from .market import BondCurve, measure_pair
from .seeding import SeedSpec
from .volatility import VolSurface

# Sub-intervals of the composite midpoint rule used for variance integrals.
VOL_QUAD_POINTS = 64


def norm_cdf(x):
    """Standard normal CDF (vectorized)."""
    return ndtr(x)


@dataclass(frozen=True)
class GbmForwardModel:
    """Driftless lognormal forward price: dX = X sigma(t) . dW_fwd.

    ``sigma`` maps time to the factor-loading vector; the scalar vol used in
    the pricing formulas is its Euclidean norm.
    """

    x0: float
    sigma: Callable[[float], np.ndarray]
    label: str = ""

    def vol_squared(self, t: float) -> float:
        v = np.atleast_1d(self.sigma(t))
        return float(v @ v)

    @staticmethod
    def with_constant_vol(x0: float, level: float, label: str = "") -> "GbmForwardModel":
        vec = np.atleast_1d(float(level))
        return GbmForwardModel(x0, lambda t: vec, label)

    # -- exact lognormal sampling -------------------------------------------

    def terminal_samples(
        self, t: float, horizon: float, x: float, n: int, seeds: SeedSpec
    ) -> np.ndarray:
        v = integrated_vol(self, t, horizon)
        z = seeds.normals((n,))
        return x * np.exp(v * z - 0.5 * v * v)

    def sample_paths(self, grid, n: int, seeds: SeedSpec) -> np.ndarray:
        """Exact lognormal paths on the grid, shape (n, len(grid))."""
        g = np.asarray(grid, dtype=float)
        steps = len(g) - 1
        z = seeds.normals((n, steps))
        out = np.empty((n, steps + 1))
        out[:, 0] = self.x0
        for l in range(steps):
            v = integrated_vol(self, g[l], g[l + 1])
            out[:, l + 1] = out[:, l] * np.exp(v * z[:, l] - 0.5 * v * v)
        return out


def integrated_vol(model: GbmForwardModel, t: float, horizon: float) -> float:
    """Root of the variance integral of |sigma|^2 over [t, horizon].

    Composite midpoint rule with ``VOL_QUAD_POINTS`` sub-intervals.
    """
    if t > horizon:
        raise ValueError(f"need t <= horizon, got {t} > {horizon}")
    if t == horizon:
        return 0.0
    h = (horizon - t) / VOL_QUAD_POINTS
    total = sum(model.vol_squared(t + (q + 0.5) * h) for q in range(VOL_QUAD_POINTS))
    return float(np.sqrt(total * h))


def nd1_nd2(x: float, kappa: float, v: float) -> tuple[float, float]:
    """The two normal-CDF terms of the exchange-call formula.

    Returns (N(log(x/kappa)/v + v/2), N(log(x/kappa)/v - v/2)).  For v = 0
    the zero-variance limits apply: (1, 1) in the money, (0, 0) out of the
    money, (1/2, 1/2) at the kink.
    """
    if x <= 0.0 or kappa <= 0.0:
        raise ValueError("x and kappa must be strictly positive")
    if v < 0.0:
        raise ValueError("v must be nonnegative")
    if v == 0.0:
        if x > kappa:
            return 1.0, 1.0
        if x < kappa:
            return 0.0, 0.0
        return 0.5, 0.5
    ratio = np.log(x / kappa) / v
    return float(ndtr(ratio + 0.5 * v)), float(ndtr(ratio - 0.5 * v))


def forward_call_price(x: float, kappa: float, v: float) -> float:
    """Forward (numeraire-denominated) price of the call on the ratio."""
    if kappa == 0.0:
        return x
    plus, minus = nd1_nd2(x, kappa, v)
    return x * plus - kappa * minus


def call_delta(x: float, kappa: float, v: float) -> float:
    """Derivative of the forward call price in the ratio; equals the first CDF term."""
    if kappa == 0.0:
        return 1.0
    return nd1_nd2(x, kappa, v)[0]


def margrabe_price(
    x: float, kappa: float, numeraire_value: float, asset_value: float, v: float
) -> float:
    """Cash price of the exchange call: asset * N(d+) - kappa * numeraire * N(d-).

    ``x`` must equal asset_value / numeraire_value (checked to 1e-9
    relative); passing both keeps unit errors loud.
    """
    implied = asset_value / numeraire_value
    if abs(implied - x) > 1e-9 * max(1.0, abs(x)):
        raise ValueError(
            f"inconsistent forward ratio: x={x!r} but asset/numeraire={implied!r}"
        )
    if kappa == 0.0:
        return asset_value
    plus, minus = nd1_nd2(x, kappa, v)
    return asset_value * plus - kappa * numeraire_value * minus


FROZEN_VOL_LABEL = "frozen-vol approximation"


def effective_vol(
    zeta: VolSurface,
    spec: InstrumentSpec,
    curve0: BondCurve | None = None,
) -> GbmForwardModel:
    """Deterministic forward-price volatility implied by the factor surface.

    * bond-call: loading difference between the underlying and the exercise
      maturities (the ratio is an exact lognormal in this model);
    * caplet: fixing-minus-payment loading difference (also exact);
    * swaption: the swap-rate loading with curve weights frozen at time
      zero, a deterministic approximation flagged by ``FROZEN_VOL_LABEL``
      (``curve0`` required).

    Returns a model anchored at x0 = asset/numeraire value on ``curve0``
    when a curve is given, else x0 = nan (caller supplies the state).
    """
    if spec.kind == "bond-call":
        u, t_ex = spec.underlying_maturity, spec.exercise
        sig = lambda t: zeta(t, u) - zeta(t, t_ex)
        label = ""
    elif spec.kind == "caplet":
        fixing, payment = spec.exercise, spec.settlement
        sig = lambda t: zeta(t, fixing) - zeta(t, payment)
        label = ""
    elif spec.kind == "swaption":
        if curve0 is None:
            raise ValueError("swaption effective vol needs the time-zero curve")
        sig = _frozen_swap_vol(zeta, spec, curve0)
        label = FROZEN_VOL_LABEL
    else:
        raise ValueError(f"no deterministic effective vol for kind {spec.kind!r}")

    if curve0 is not None:
        x0 = measure_pair(curve0, spec.mu) / measure_pair(curve0, spec.nu)
    else:
        x0 = float("nan")
    return GbmForwardModel(x0, sig, label)


def _frozen_swap_vol(zeta: VolSurface, spec: InstrumentSpec, curve0: BondCurve):
    tenor = spec.tenor
    mats = tenor.maturities
    taus = tenor.spacings
    first, last = mats[0], mats[-1]
    float_leg = measure_pair(curve0, spec.mu)
    annuity = measure_pair(curve0, spec.nu)
    if float_leg == 0.0:
        raise ValueError("degenerate swap: zero float-leg value at time zero")
    w_last = curve0.value(last) / float_leg
    w_fix = [tau * curve0.value(m) / annuity for tau, m in zip(taus, mats[1:])]

    def sig(t: float) -> np.ndarray:
        z_first = zeta(t, first)
        out = w_last * (z_first - zeta(t, last))
        for w, m in zip(w_fix, mats[1:]):
            out = out + w * (z_first - zeta(t, m))
        return out

    return sig
