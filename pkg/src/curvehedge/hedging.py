"""Hedging strategies: martingale-representation and delta portfolios.

Two constructions are implemented side by side.

**Representation portfolio** (:func:`clark_ocone_strategy`).  For a claim
``P_S(nu) * g(F_T(mu))`` on the forward curve F, the hedge at time t puts

* on each asset atom y:      ``E_fwd[ (F_T(y)/F_t(y)) g'(F_T(mu)) | F_t ]``
* on each numeraire atom y:  ``E_fwd[ (g - F_T(mu) g') F_T(y)/F_t(y) | F_t ]``

weighted by the atom masses.  The conditional expectations are estimated by
inner forward-measure paths restarted from the current state (nested Monte
Carlo) with antithetic pairing; all atoms of one date share the same inner
paths, which makes the residual numeraire position vanish to roundoff and
gives per-atom standard errors for free.

**Delta portfolio** (:func:`delta_strategy`).  When the forward asset price
is Markov-lognormal with deterministic volatility, the hedge holds the
price derivative on the asset measure and the remainder on the numeraire
measure; for call payoffs these weights are the two cumulative-normal terms
of the exchange-call formula.

For bond calls and caplets the two constructions coincide; the engine keeps
both so the coincidence is a testable property rather than an assumption.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .analytic import GbmForwardModel, call_delta, forward_call_price, integrated_vol, nd1_nd2
from .instruments import InstrumentSpec
from .market import DiscreteMeasure, ForwardCurve, measure_pair
from .seeding import SeedSpec
from .simulation import _index_of, _averaged_vols, euler_evolve_terminal
from .volatility import VolSurface

DEFAULT_INNER_PATHS = 10_000
DEFAULT_INNER_STEPS = 16
MIN_INNER_PATHS = 1_000


@dataclass
class StrategyDiagnostics:
    """Inner-estimator quality: per-atom standard errors and the value estimate."""

    atom_se: dict[float, float]
    value: float
    value_se: float
    inner_paths: int
    inner_steps: int
    antithetic: bool


@dataclass
class HedgeLedger:
    """Per-rebalance-date strategy measures plus residual numeraire position."""

    dates: tuple[float, ...]
    strategies: tuple[DiscreteMeasure, ...]
    etas: tuple[float, ...]
    diagnostics: tuple[StrategyDiagnostics | None, ...] = None

    def __post_init__(self):
        if not (len(self.dates) == len(self.strategies) == len(self.etas)):
            raise ValueError("dates, strategies and etas must align")
        if self.diagnostics is None:
            self.diagnostics = tuple(None for _ in self.dates)


class InnerSample:
    """Inner forward-measure paths restarted from one state, shared per date.

    Holds the terminal curve values of ``inner_paths`` forward-Euler paths
    from ``state.t`` to the exercise date.  With ``antithetic`` the second
    half mirrors the first half's increments; standard errors are computed
    over pair averages.
    """

    def __init__(
        self,
        state: ForwardCurve,
        spec: InstrumentSpec,
        zeta: VolSurface,
        inner_paths: int,
        seeds: SeedSpec,
        *,
        inner_steps: int = DEFAULT_INNER_STEPS,
        antithetic: bool = True,
    ):
        if inner_paths < MIN_INNER_PATHS:
            raise ValueError(f"need at least {MIN_INNER_PATHS} inner paths")
        if state.t >= spec.exercise:
            raise ValueError("inner sampling needs state time before exercise")
        self.state = state
        self.spec = spec
        self.antithetic = antithetic
        self.inner_steps = inner_steps

        grid = np.linspace(state.t, spec.exercise, inner_steps + 1)
        dts = np.diff(grid)
        zbars = _averaged_vols(zeta, grid, state.maturities)
        nu_idx = np.array([_index_of(state.maturities, y) for y in spec.nu.support])
        if antithetic:
            half = max(1, inner_paths // 2)
            z = seeds.normals((half, inner_steps, zeta.factors))
            z = np.concatenate([z, -z], axis=0)
        else:
            z = seeds.normals((inner_paths, inner_steps, zeta.factors))
        dW = z * np.sqrt(dts)[None, :, None]
        self.n_inner = dW.shape[0]
        self.terminal = euler_evolve_terminal(
            state.values, zbars, dts, dW, nu_idx, spec.nu.weights
        )

        mu_idx = np.array([_index_of(state.maturities, y) for y in spec.mu.support])
        self.xhat_T = self.terminal[:, mu_idx] @ spec.mu.weights
        self.g_T = spec.ghat(self.xhat_T)
        self.gp_T = spec.ghat_prime(self.xhat_T)

    def terminal_at(self, y: float) -> np.ndarray:
        return self.terminal[:, _index_of(self.state.maturities, y)]

    def mean_se(self, samples: np.ndarray) -> tuple[float, float]:
        """Mean and standard error; antithetic samples are paired first."""
        if self.antithetic:
            half = self.n_inner // 2
            samples = 0.5 * (samples[:half] + samples[half:])
        n = len(samples)
        mean = float(samples.mean())
        se = float(samples.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
        return mean, se

    def atom_samples(self, y: float) -> np.ndarray:
        """Per-inner-path contribution to the strategy weight at maturity y."""
        ratio = self.terminal_at(y) / self.state.value(y)
        out = np.zeros(self.n_inner)
        mu_w = self.spec.mu.weight_at(y)
        nu_w = self.spec.nu.weight_at(y)
        if mu_w != 0.0:
            out += mu_w * self.gp_T * ratio
        if nu_w != 0.0:
            out += nu_w * (self.g_T - self.xhat_T * self.gp_T) * ratio
        return out


def clark_ocone_strategy(
    state: ForwardCurve,
    spec: InstrumentSpec,
    zeta: VolSurface,
    inner_paths: int = DEFAULT_INNER_PATHS,
    seeds: SeedSpec | None = None,
    *,
    inner_steps: int = DEFAULT_INNER_STEPS,
    antithetic: bool = True,
) -> tuple[DiscreteMeasure, StrategyDiagnostics]:
    """Representation hedge at one state, with per-atom standard errors.

    The output depends on the path history only through ``state`` and
    ``seeds``; feeding the same state and seeds reproduces it bit for bit.
    """
    if seeds is None:
        seeds = SeedSpec(0)
    if np.any(state.values <= 0.0):
        raise ValueError("state curve must be strictly positive")
    inner = InnerSample(
        state, spec, zeta, inner_paths, seeds, inner_steps=inner_steps, antithetic=antithetic
    )
    atoms = []
    ses: dict[float, float] = {}
    for y in spec.support():
        mean, se = inner.mean_se(inner.atom_samples(y))
        atoms.append((y, mean))
        ses[y] = se
    value, value_se = inner.mean_se(inner.g_T)
    diag = StrategyDiagnostics(
        atom_se=ses,
        value=value,
        value_se=value_se,
        inner_paths=inner.n_inner,
        inner_steps=inner_steps,
        antithetic=antithetic,
    )
    return DiscreteMeasure(tuple(atoms)), diag


def instrument_strategy(
    state: ForwardCurve,
    spec: InstrumentSpec,
    zeta: VolSurface,
    *,
    inner_paths: int = DEFAULT_INNER_PATHS,
    seeds: SeedSpec | None = None,
    inner_steps: int = DEFAULT_INNER_STEPS,
    antithetic: bool = True,
) -> DiscreteMeasure:
    """Specialized hedge per instrument kind, on the kind's own maturity atoms.

    Bond calls and caplets use the closed lognormal form of the conditional
    expectations (their forward asset price is an exact geometric Brownian
    motion in this model); swaptions and exchange options use nested Monte
    Carlo.  Generic payoffs must go through :func:`clark_ocone_strategy`.
    """
    if spec.kind == "generic":
        raise ValueError("generic payoffs have no specialization; use clark_ocone_strategy")
    from .analytic import effective_vol

    if spec.kind == "bond-call":
        u, t_ex = spec.underlying_maturity, spec.exercise
        x = state.value(u) / state.value(t_ex)
        v = integrated_vol(effective_vol(zeta, spec), state.t, spec.exercise)
        if spec.forward_strike == 0.0:
            return DiscreteMeasure.dirac(u)
        plus, minus = nd1_nd2(x, spec.forward_strike, v)
        # E[ratio * indicator] in closed form: x*N(d+) scaled back by F_t(T)/F_t(U)
        coeff_u = (state.value(t_ex) / state.value(u)) * x * plus
        return DiscreteMeasure(((u, coeff_u), (t_ex, -spec.forward_strike * minus)))

    if spec.kind == "caplet":
        fixing, payment = spec.exercise, spec.settlement
        x = state.value(fixing) / state.value(payment)
        v = integrated_vol(effective_vol(zeta, spec), state.t, spec.exercise)
        if spec.forward_strike == 0.0:
            return DiscreteMeasure.dirac(fixing)
        plus, minus = nd1_nd2(x, spec.forward_strike, v)
        coeff_fix = (state.value(payment) / state.value(fixing)) * x * plus
        return DiscreteMeasure(
            ((fixing, coeff_fix), (payment, -spec.forward_strike * minus))
        )

    if spec.kind in ("swaption", "exchange"):
        if seeds is None:
            seeds = SeedSpec(0)
        inner = InnerSample(
            state, spec, zeta, inner_paths, seeds,
            inner_steps=inner_steps, antithetic=antithetic,
        )
        indicator = inner.gp_T  # 1 above the strike for call payoffs
        if spec.kind == "exchange":
            atoms = []
            for y in spec.support():
                ratio = inner.terminal_at(y) / state.value(y)
                c, _ = inner.mean_se(indicator * ratio)
                atoms.append((y, c * (spec.mu.weight_at(y) - spec.strike * spec.nu.weight_at(y))))
            return DiscreteMeasure(tuple(atoms))
        # swaption: first tenor date carries the ratio expectation, the last
        # one the (1 + strike * last spacing) multiple, interior dates the
        # strike-weighted annuity legs.
        tenor = spec.tenor
        mats, taus = tenor.maturities, tenor.spacings
        kappa = spec.strike
        atoms = []
        for pos, y in enumerate(mats):
            ratio = inner.terminal_at(y) / state.value(y)
            e, _ = inner.mean_se(indicator * ratio)
            if pos == 0:
                atoms.append((y, e))
            elif pos == len(mats) - 1:
                atoms.append((y, -(1.0 + kappa * taus[-1]) * e))
            else:
                atoms.append((y, -kappa * taus[pos - 1] * e))
        return DiscreteMeasure(tuple(atoms))

    raise ValueError(f"unknown instrument kind {spec.kind!r}")


def delta_strategy(
    state: ForwardCurve,
    spec: InstrumentSpec,
    model: GbmForwardModel,
    *,
    mc_paths: int = 200_000,
    seeds: SeedSpec | None = None,
) -> tuple[DiscreteMeasure, float]:
    """Delta hedge under the lognormal forward model: slope on the asset
    measure, remainder on the numeraire measure; the residual numeraire
    position is zero by construction.

    Call payoffs use the closed form.  Generic payoffs estimate the price
    by single-layer lognormal Monte Carlo and the slope by a central finite
    difference with step ``1e-4 * x`` on common random numbers.
    """
    x = measure_pair(state, spec.mu) / measure_pair(state, spec.nu)
    v = integrated_vol(model, state.t, spec.exercise)
    if spec.kind in ("exchange", "bond-call", "caplet", "swaption"):
        kappa = spec.forward_strike
        if kappa == 0.0:
            return spec.mu, 0.0
        if v == 0.0 and x == kappa:
            slope, cdf_minus = 0.5, 0.5  # documented half-weight convention
        else:
            slope, cdf_minus = nd1_nd2(x, kappa, v)
        remainder = -kappa * cdf_minus
    else:
        if seeds is None:
            seeds = SeedSpec(0)
        z = seeds.normals((mc_paths,))
        factors = np.exp(v * z - 0.5 * v * v)
        h = 1e-4 * x
        price = float(np.mean(spec.ghat(x * factors)))
        up = float(np.mean(spec.ghat((x + h) * factors)))
        down = float(np.mean(spec.ghat((x - h) * factors)))
        slope = (up - down) / (2.0 * h)
        remainder = price - x * slope
    phi = DiscreteMeasure.combine(spec.mu.scaled(slope), spec.nu.scaled(remainder))
    return phi, 0.0


def swaption_delta_strategy(
    state: ForwardCurve, spec: InstrumentSpec, model: GbmForwardModel
) -> DiscreteMeasure:
    """Swap-tenor grouping of the swaption delta hedge.

    First tenor date: the call slope.  Last date: minus the slope and the
    strike-weighted last annuity leg.  Interior dates: the strike-weighted
    annuity legs.  Values identically those of :func:`jamshidian_strategy`.
    """
    if spec.kind != "swaption":
        raise ValueError("swap-tenor grouping only applies to swaptions")
    x = measure_pair(state, spec.mu) / measure_pair(state, spec.nu)
    v = integrated_vol(model, state.t, spec.exercise)
    kappa = spec.strike
    if v == 0.0 and x == kappa:
        plus, minus = 0.5, 0.5
    else:
        plus, minus = nd1_nd2(x, kappa, v)
    mats, taus = spec.tenor.maturities, spec.tenor.spacings
    atoms = [(mats[0], plus)]
    for pos in range(1, len(mats) - 1):
        atoms.append((mats[pos], -kappa * minus * taus[pos - 1]))
    atoms.append((mats[-1], -(plus + kappa * taus[-1] * minus)))
    return DiscreteMeasure(tuple(atoms))


def jamshidian_strategy(
    state: ForwardCurve, spec: InstrumentSpec, model: GbmForwardModel
) -> DiscreteMeasure:
    """Float-leg-plus-annuity grouping of the swaption delta hedge:
    the slope on first-minus-last bond, minus the strike-weighted second
    CDF term on every annuity leg."""
    if spec.kind != "swaption":
        raise ValueError("this grouping only applies to swaptions")
    x = measure_pair(state, spec.mu) / measure_pair(state, spec.nu)
    v = integrated_vol(model, state.t, spec.exercise)
    kappa = spec.strike
    if v == 0.0 and x == kappa:
        plus, minus = 0.5, 0.5
    else:
        plus, minus = nd1_nd2(x, kappa, v)
    return DiscreteMeasure.combine(
        spec.mu.scaled(plus), spec.nu.scaled(-kappa * minus)
    )


def hedge_value(state: ForwardCurve, phi: DiscreteMeasure, eta: float = 0.0) -> float:
    """Forward portfolio value: pairing of the strategy with the forward
    curve plus the numeraire position.  Multiply by the cash numeraire value
    to get the cash price."""
    return measure_pair(state, phi) + eta


# -- batched representation hedges ------------------------------------------


def single_asset_ratio_kind(spec: InstrumentSpec) -> bool:
    """True when both measures are single atoms, so the forward state is the
    scalar ratio and inner paths are shareable across states (the Euler
    loadings are then state-independent)."""
    return len(spec.mu.atoms) == 1 and len(spec.nu.atoms) == 1


@dataclass
class SharedInnerFactors:
    """Multiplicative inner-path factors from t to exercise for a
    single-asset-ratio instrument; reusable across any number of states."""

    t: float
    factors: np.ndarray  # (n_inner,) terminal ratio per inner path (state 1)
    antithetic: bool
    _sorted: np.ndarray | None = None
    _suffix_sum: np.ndarray | None = None

    def mean_se_rows(self, samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Row-wise mean and SE over inner paths of a (n_states, n_inner) array."""
        if self.antithetic:
            half = samples.shape[1] // 2
            samples = 0.5 * (samples[:, :half] + samples[:, half:])
        n = samples.shape[1]
        mean = samples.mean(axis=1)
        se = samples.std(axis=1, ddof=1) / np.sqrt(n)
        return mean, se

    def mean_se(self, samples: np.ndarray) -> tuple[float, float]:
        mean, se = self.mean_se_rows(samples[None, :])
        return float(mean[0]), float(se[0])

    def call_tables(self) -> tuple[np.ndarray, np.ndarray]:
        """Sorted factors and their suffix sums, for O(log) call-payoff means.

        ``mean[M * (M > c)] = suffix_sum[k] / n`` and
        ``mean[(M > c)] = (n - k) / n`` with ``k = searchsorted(sorted, c,
        'right')``; summation in sorted order, deterministic for a given
        factor array.
        """
        if self._sorted is None:
            s = np.sort(self.factors)
            suffix = np.concatenate([np.cumsum(s[::-1])[::-1], [0.0]])
            object.__setattr__(self, "_sorted", s)
            object.__setattr__(self, "_suffix_sum", suffix)
        return self._sorted, self._suffix_sum

    def tail_means(self, thresholds: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(mean[M * (M > c)], mean[(M > c)]) per threshold c."""
        s, suffix = self.call_tables()
        n = len(s)
        k = np.searchsorted(s, thresholds, side="right")
        return suffix[k] / n, (n - k) / n


def shared_inner_factors(
    t: float,
    spec: InstrumentSpec,
    zeta: VolSurface,
    inner_paths: int,
    seeds: SeedSpec,
    *,
    inner_steps: int = DEFAULT_INNER_STEPS,
    antithetic: bool = True,
) -> SharedInnerFactors:
    """Simulate the inner multiplicative factors once for all states.

    Runs the same renormalized Euler recursion as :class:`InnerSample` on a
    unit initial state; for single-atom measures the recursion's loadings do
    not depend on the state, so terminal values for a state x are x times
    these factors.
    """
    if not single_asset_ratio_kind(spec):
        raise ValueError("shared inner factors need single-atom measures")
    y_mu = spec.mu.support[0]
    y_nu = spec.nu.support[0]
    unit = ForwardCurve.from_pairs(t, spec.nu, {y_mu: 1.0, y_nu: 1.0 / spec.nu.weights[0]})
    probe = InnerSample(
        unit, spec, zeta, inner_paths, seeds, inner_steps=inner_steps, antithetic=antithetic
    )
    return SharedInnerFactors(t=t, factors=probe.terminal_at(y_mu), antithetic=antithetic)


def clark_ocone_coeffs_batch(
    xs: np.ndarray,
    spec: InstrumentSpec,
    shared: SharedInnerFactors,
    *,
    chunk: int = 256,
) -> dict:
    """Representation-hedge weights for many scalar states at one date.

    ``xs`` are forward asset ratios.  Returns per-state arrays: weight on
    the asset atom, weight on the numeraire atom, and the value estimate.
    Same estimator as calling :func:`clark_ocone_strategy` state by state
    with the same inner noise (summation order differs only within float
    roundoff).

    Call payoffs reduce to tail means of the shared factors and are served
    from sorted suffix-sum tables; generic payoffs take the dense route.
    """
    mu_w = spec.mu.weights[0]
    nu_w = spec.nu.weights[0]
    xs = np.asarray(xs, dtype=float)
    n = len(xs)
    out = {"asset": np.empty(n), "numeraire": np.empty(n), "value": np.empty(n)}
    if spec.kind != "generic":
        kappa = spec.forward_strike
        tail_m, tail_p = shared.tail_means(kappa / xs)
        out["asset"] = mu_w * tail_m
        out["numeraire"] = nu_w * (-kappa) * tail_p
        out["value"] = xs * tail_m - kappa * tail_p
        return out
    M = shared.factors[None, :]
    for a in range(0, n, chunk):
        b = min(a + chunk, n)
        xt = xs[a:b, None] * M                # terminal ratios per state
        g = spec.ghat(xt)
        gp = spec.ghat_prime(xt)
        mean_aw, _ = shared.mean_se_rows(gp * M)
        mean_nw, _ = shared.mean_se_rows(g - xt * gp)
        mean_v, _ = shared.mean_se_rows(g)
        out["asset"][a:b] = mu_w * mean_aw
        out["numeraire"][a:b] = nu_w * mean_nw
        out["value"][a:b] = mean_v
    return out


def co_value_se(x: float, spec: InstrumentSpec, shared: SharedInnerFactors) -> tuple[float, float]:
    """Value estimate and standard error at one state from shared factors."""
    return shared.mean_se(np.asarray(spec.ghat(x * shared.factors), dtype=float))
