"""Noise-derivative objects behind the representation hedge.

The forward curve's local volatility field at maturity y is

    field(F, y) = F(y) * sum_k w_k F(T_k) (zeta_t(y) - zeta_t(T_k))

over the numeraire atoms (T_k, w_k).  The pathwise derivative of a later
curve value with respect to a Brownian perturbation at time t is the same
field evaluated with the later curve and the time-t loadings; this is
asserted structurally (one code path) and checked against pathwise finite
differences.

The integrand of the predictable representation of the forward claim payoff
with respect to the forward Brownian motion is a sum of three conditional
expectations (asset-measure, numeraire-measure, and drift-correction terms):

    alpha_t = sum_mu  w_y E[g'(X_T) F_T(y) | F_t] zeta_t(y)
            - sum_nu  w_y E[X_T g'(X_T) F_T(y) | F_t] zeta_t(y)
            + sum_nu  w_y E[g(X_T) (F_T(y) - F_t(y)) | F_t] zeta_t(y)

estimated with the same nested Monte Carlo engine (and seeds) as the
hedging strategies so that consistency checks between the two are not
polluted by independent noise.  The residual of the discretized
representation over simulated paths measures how well the integrand
reproduces the claim.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hedging import (
    DEFAULT_INNER_PATHS,
    DEFAULT_INNER_STEPS,
    InnerSample,
    SharedInnerFactors,
    shared_inner_factors,
    single_asset_ratio_kind,
)
from .instruments import InstrumentSpec
from .market import ForwardCurve
from .seeding import SeedSpec
from .simulation import FORWARD, CurvePath, PathBundle, _index_of, simulate_forward_euler
from .volatility import VolSurface


def forward_vol_field(
    fcurve: ForwardCurve, zeta: VolSurface, t: float | None = None, y: float | None = None
) -> np.ndarray:
    """Local volatility vector of the forward curve at maturity y.

    ``t`` defaults to the curve's own time; passing an earlier t evaluates
    the loadings at that time against the present curve, which is exactly
    the pathwise noise derivative (see :func:`malliavin_derivative`).
    """
    if y is None:
        raise ValueError("a maturity y is required")
    if t is None:
        t = fcurve.t
    fy = fcurve.value(y)  # raises CurveLookupError for unknown maturities
    sup = fcurve.numeraire.support
    w = fcurve.numeraire.weights
    vals = np.array([fcurve.value(z) for z in sup])
    z_y = zeta(t, y)
    z_nodes = zeta.at(t, sup)
    return fy * ((w * vals) @ (z_y[None, :] - z_nodes))


def malliavin_derivative(
    fcurve_at_u: ForwardCurve, zeta: VolSurface, t: float, y: float
) -> np.ndarray:
    """Derivative of the time-u forward curve value at maturity y with
    respect to a Brownian perturbation at time t <= u.

    Same expression as :func:`forward_vol_field`: time-t loadings, time-u
    curve.
    """
    if t > fcurve_at_u.t + 1e-12:
        raise ValueError(f"need t <= curve time, got {t} > {fcurve_at_u.t}")
    return forward_vol_field(fcurve_at_u, zeta, t=t, y=y)


@dataclass
class AlphaProcess:
    """Representation integrand along one path: per date a factor vector,
    its standard error, and the three-term split for diagnostics."""

    dates: np.ndarray            # (m,)
    values: np.ndarray           # (m, d)
    ses: np.ndarray              # (m, d)
    terms: np.ndarray            # (m, 3, d)

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise ValueError("integrand values must be finite")
        if np.any(self.ses < 0.0):
            raise ValueError("standard errors must be nonnegative")


def integrand_at_state(
    state: ForwardCurve,
    spec: InstrumentSpec,
    zeta: VolSurface,
    inner: InnerSample,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Integrand value, SE and term split at one state from shared inner paths."""
    d = zeta.factors
    t = state.t
    n = inner.n_inner
    per_sample = np.zeros((n, d))
    terms = np.zeros((3, d))
    for y, w in spec.mu.atoms:
        zy = zeta(t, y)
        samples = inner.gp_T * inner.terminal_at(y)
        contrib = w * samples[:, None] * zy[None, :]
        per_sample += contrib
        terms[0] += w * samples.mean() * zy
    for y, w in spec.nu.atoms:
        zy = zeta(t, y)
        s2 = inner.xhat_T * inner.gp_T * inner.terminal_at(y)
        s3 = inner.g_T * (inner.terminal_at(y) - state.value(y))
        per_sample += (-w * s2 + w * s3)[:, None] * zy[None, :]
        terms[1] += -w * s2.mean() * zy
        terms[2] += w * s3.mean() * zy
    value = np.empty(d)
    se = np.empty(d)
    for j in range(d):
        value[j], se[j] = inner.mean_se(per_sample[:, j])
    return value, se, terms


def clark_ocone_integrand(
    path: CurvePath,
    spec: InstrumentSpec,
    zeta: VolSurface,
    inner_paths: int = DEFAULT_INNER_PATHS,
    seeds: SeedSpec | None = None,
    *,
    inner_steps: int = DEFAULT_INNER_STEPS,
    antithetic: bool = True,
) -> AlphaProcess:
    """Estimate the representation integrand at every rebalance date of a
    forward-measure path (all grid points strictly before exercise)."""
    if seeds is None:
        seeds = SeedSpec(0)
    bundle = path.bundle
    if bundle.measure != FORWARD:
        raise ValueError("the integrand lives on forward-measure paths")
    if bundle.grid[-1] < spec.exercise - 1e-12:
        raise ValueError("path must reach the exercise date")
    dates = [l for l, t in enumerate(bundle.grid) if t < spec.exercise - 1e-12]
    d = zeta.factors
    values = np.empty((len(dates), d))
    ses = np.empty((len(dates), d))
    terms = np.empty((len(dates), 3, d))
    for row, l in enumerate(dates):
        state = path.curve(l)
        inner = InnerSample(
            state, spec, zeta, inner_paths, seeds.child("date", l),
            inner_steps=inner_steps, antithetic=antithetic,
        )
        values[row], ses[row], terms[row] = integrand_at_state(state, spec, zeta, inner)
    return AlphaProcess(
        dates=bundle.grid[dates], values=values, ses=ses, terms=terms
    )


def integrand_batch_single(
    t: float,
    xs: np.ndarray,
    spec: InstrumentSpec,
    zeta: VolSurface,
    shared: SharedInnerFactors,
    *,
    chunk: int = 256,
) -> np.ndarray:
    """Integrand for many scalar states of a single-asset-ratio instrument.

    With a one-atom numeraire the third term vanishes identically and the
    first two collapse to ``x * E[g'(x M) M] * (zeta_t(y_mu) - zeta_t(y_nu))``
    over the shared inner factors M.  Returns shape (len(xs), d).
    """
    y_mu = spec.mu.support[0]
    y_nu = spec.nu.support[0]
    dz = zeta(t, y_mu) - zeta(t, y_nu)
    xs = np.asarray(xs, dtype=float)
    if spec.kind != "generic":
        slope_mean, _ = shared.tail_means(spec.forward_strike / xs)
    else:
        slope_mean = np.empty(len(xs))
        M = shared.factors[None, :]
        for a in range(0, len(xs), chunk):
            b = min(a + chunk, len(xs))
            xt = xs[a:b, None] * M
            slope_mean[a:b], _ = shared.mean_se_rows(spec.ghat_prime(xt) * M)
    return (xs * slope_mean)[:, None] * dz[None, :]


def bump_check(
    curve0,
    numeraire,
    zeta: VolSurface,
    horizon: float,
    y: float,
    *,
    steps: int = 200,
    bump_step: int | None = None,
    factor: int = 0,
    eps: float = 1e-5,
    seeds: SeedSpec | None = None,
) -> tuple[float, float]:
    """Pathwise finite-difference check of the noise derivative.

    Simulates one discounted path with the exact scheme, normalizes at the
    horizon, then perturbs one Brownian increment by ``eps`` in one factor
    direction and recomputes.  Returns (finite difference, analytic value)
    of the derivative of the forward curve at maturity ``y``.
    """
    from .simulation import _averaged_vols

    if seeds is None:
        seeds = SeedSpec(0)
    grid = np.linspace(curve0.t, horizon, steps + 1)
    dts = np.diff(grid)
    mats = curve0.maturities
    zbars = _averaged_vols(zeta, grid, mats)
    d = zeta.factors
    if bump_step is None:
        bump_step = steps // 2
    noise = seeds.normals((steps, d)) * np.sqrt(dts)[:, None]

    def evolve(dW):
        vals = curve0.values.copy()
        for l in range(steps):
            vals = vals * np.exp(zbars[l] @ dW[l] - 0.5 * np.sum(zbars[l] ** 2, axis=1) * dts[l])
        return vals

    base = evolve(noise)
    bumped_noise = noise.copy()
    bumped_noise[bump_step, factor] += eps
    bumped = evolve(bumped_noise)

    nu_idx = np.array([_index_of(mats, z) for z in numeraire.support])
    w = numeraire.weights
    fwd_base = base / (base[nu_idx] @ w)
    fwd_bumped = bumped / (bumped[nu_idx] @ w)
    y_idx = _index_of(mats, y)
    fd = (fwd_bumped[y_idx] - fwd_base[y_idx]) / eps

    state = ForwardCurve(horizon, numeraire, mats, fwd_base)
    analytic = malliavin_derivative(state, zeta, float(grid[bump_step]), y)[factor]
    return float(fd), float(analytic)


def representation_residuals(
    bundle: PathBundle, spec: InstrumentSpec, alpha_values: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Per-path residual of the discretized predictable representation.

    ``alpha_values`` has shape (n_paths, n_rebalance_dates, d), evaluated at
    each path's state on the grid points before exercise.  The residual is
    the forward payoff minus its ensemble mean minus the discrete stochastic
    integral of the integrand against the recorded increments; both the
    residuals and the integrals are returned.

    Because the ensemble mean is subtracted, the residual mean equals minus
    the integral mean exactly, so the standard error of the residual mean is
    the integral spread over sqrt(n), not the (much smaller) residual spread
    over sqrt(n).
    """
    if bundle.dW is None:
        raise ValueError("bundle must record increments")
    mu_idx = np.array([_index_of(bundle.maturities, y) for y in spec.mu.support])
    xhat_T = bundle.terminal[:, mu_idx] @ spec.mu.weights
    payoff = spec.ghat(xhat_T)
    m = alpha_values.shape[1]
    integral = np.einsum("nld,nld->n", alpha_values, bundle.dW[:, :m, :])
    return payoff - payoff.mean() - integral, integral


@dataclass
class ResidualRow:
    n_steps: int
    mean: float
    sd: float
    se: float  # standard error of the residual mean (integral spread / sqrt n)


@dataclass
class ResidualReport:
    rows: list[ResidualRow]
    slope: float  # of log sd against log dt over the refinement

    def sds(self) -> list[float]:
        return [r.sd for r in self.rows]


def co_representation_residual(
    fcurve0: ForwardCurve,
    spec: InstrumentSpec,
    zeta: VolSurface,
    steps_list: list[int],
    n_paths: int,
    inner_paths: int,
    seeds: SeedSpec,
    *,
    inner_steps: int = DEFAULT_INNER_STEPS,
    antithetic: bool = True,
    threads: int = 1,
) -> ResidualReport:
    """Residual statistics over a dyadic refinement of the rebalance grid.

    For each step count: simulate forward paths to exercise, evaluate the
    integrand at every date's state, and measure the residuals.  Reports
    mean, SD, and SE per refinement plus the log-log slope of SD against
    step size (about one half when the discrete integral dominates).
    """
    rows = []
    for steps in steps_list:
        grid = np.linspace(fcurve0.t, spec.exercise, steps + 1)
        run_seed = seeds.child("residual", steps)
        bundle = simulate_forward_euler(
            fcurve0, zeta, grid, run_seed.child("outer"), n_paths, threads=threads
        )
        alpha = _alpha_values_for_bundle(
            bundle, spec, zeta, inner_paths, run_seed,
            inner_steps=inner_steps, antithetic=antithetic,
        )
        residuals, integrals = representation_residuals(bundle, spec, alpha)
        rows.append(
            ResidualRow(
                n_steps=steps,
                mean=float(residuals.mean()),
                sd=float(residuals.std(ddof=1)),
                se=float(integrals.std(ddof=1) / np.sqrt(len(residuals))),
            )
        )
    dts = np.log([(spec.exercise - fcurve0.t) / r.n_steps for r in rows])
    sds = np.log([max(r.sd, 1e-300) for r in rows])
    slope = float(np.polyfit(dts, sds, 1)[0]) if len(rows) > 1 else float("nan")
    return ResidualReport(rows=rows, slope=slope)


def _alpha_values_for_bundle(
    bundle: PathBundle,
    spec: InstrumentSpec,
    zeta: VolSurface,
    inner_paths: int,
    seeds: SeedSpec,
    *,
    inner_steps: int,
    antithetic: bool,
) -> np.ndarray:
    """Integrand at every (path, rebalance date) state of a forward bundle."""
    dates = [l for l, t in enumerate(bundle.grid) if t < spec.exercise - 1e-12]
    n, d = bundle.n_paths, zeta.factors
    out = np.empty((n, len(dates), d))
    fast = single_asset_ratio_kind(spec)
    mu_idx = np.array([_index_of(bundle.maturities, y) for y in spec.mu.support])
    for row, l in enumerate(dates):
        t = float(bundle.grid[l])
        date_seed = seeds.child("date", l)
        if fast:
            shared = shared_inner_factors(
                t, spec, zeta, inner_paths, date_seed,
                inner_steps=inner_steps, antithetic=antithetic,
            )
            xs = bundle.values[:, l, mu_idx] @ spec.mu.weights
            out[:, row, :] = integrand_batch_single(t, xs, spec, zeta, shared)
        else:
            for i in range(n):
                state = bundle.path(i).curve(l)
                inner = InnerSample(
                    state, spec, zeta, inner_paths, date_seed.child("path", i),
                    inner_steps=inner_steps, antithetic=antithetic,
                )
                out[i, row, :], _, _ = integrand_at_state(state, spec, zeta, inner)
    return out
