"""Rolls hedging strategies along simulated paths and scores replication.

All backtests run in forward units: the numeraire asset is identically one,
so the residual numeraire position never contributes to value changes and
the self-financing identity reduces to

    V_{l+1} = V_l + sum_y phi_l(y) * (F_{l+1}(y) - F_l(y)).

Cash-unit figures are obtained at the reporting layer by multiplying with
the initial numeraire value (and the flat short rate only enters there).

Two worlds are supported: the factor-volatility world, where forward curves
are simulated under the forward measure, and the plain lognormal world,
where the scalar forward asset price is simulated directly (single-asset
instruments only); the latter is the delta hedge's own model and isolates
pure discretization error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .analytic import GbmForwardModel, effective_vol, forward_call_price, integrated_vol
from .hedging import (
    DEFAULT_INNER_PATHS,
    DEFAULT_INNER_STEPS,
    HedgeLedger,
    InnerSample,
    StrategyDiagnostics,
    clark_ocone_coeffs_batch,
    clark_ocone_strategy,
    co_value_se,
    delta_strategy,
    hedge_value,
    instrument_strategy,
    shared_inner_factors,
    single_asset_ratio_kind,
)
from .instruments import InstrumentSpec
from .market import BondCurve, DiscreteMeasure, ForwardCurve, forward_normalize, measure_pair
from .seeding import SeedSpec
from .simulation import FORWARD, CurvePath, PathBundle, _index_of, rn_weights, \
    simulate_discounted_exact, simulate_forward_euler
from .volatility import VolSurface

STRATEGIES = ("clark-ocone", "delta", "instrument")


@dataclass
class ReportRow:
    n_steps: int
    mean_error: float
    sd_error: float
    max_abs_error: float
    se: float
    max_sf_gap: float


@dataclass
class BacktestReport:
    instrument: str
    strategy: str
    world: str
    n_paths: int
    rebalance_every: int
    rows: list[ReportRow] = field(default_factory=list)
    price: float = float("nan")
    price_se: float = float("nan")

    def __post_init__(self):
        self.rows = sorted(self.rows, key=lambda r: r.n_steps)
        if any(r.sd_error < 0.0 for r in self.rows):
            raise ValueError("error SD must be nonnegative")

    @property
    def slope(self) -> float:
        """Log-log slope of terminal-error SD against step size."""
        pos = [r for r in self.rows if r.sd_error > 0.0]
        if len(pos) < 2:
            return float("nan")
        x = np.log([1.0 / r.n_steps for r in pos])
        y = np.log([r.sd_error for r in pos])
        return float(np.polyfit(x, y, 1)[0])


# -- single-path operations ---------------------------------------------------


def _ledger_grid_indices(path: CurvePath, ledger: HedgeLedger) -> list[int]:
    grid = path.grid
    idx = []
    for t in ledger.dates:
        hits = np.nonzero(np.abs(grid - t) <= 1e-9)[0]
        if len(hits) == 0:
            raise ValueError(f"ledger date {t} is not a path grid point")
        idx.append(int(hits[0]))
    if idx != sorted(idx):
        raise ValueError("ledger dates must be increasing")
    return idx


def rollforward(path: CurvePath, ledger: HedgeLedger, v0: float) -> np.ndarray:
    """Self-financing value series along one path, starting from v0.

    The most recent ledger strategy is held between rebalance dates; the
    numeraire position drops out in forward units.
    """
    idx = _ledger_grid_indices(path, ledger)
    grid = path.grid
    values = np.empty(len(grid))
    values[: idx[0] + 1] = v0
    series = np.asarray([path.state_values(l) for l in range(len(grid))])
    mats = path.bundle.maturities
    held = 0
    v = v0
    for l in range(idx[0], len(grid) - 1):
        while held + 1 < len(idx) and idx[held + 1] <= l:
            held += 1
        phi = ledger.strategies[held]
        cols = [_index_of(mats, y) for y in phi.support]
        move = series[l + 1, cols] - series[l, cols]
        v += float(phi.weights @ move)
        values[l + 1] = v
    return values


def self_financing_check(path: CurvePath, ledger: HedgeLedger) -> float:
    """Largest gap between the marked portfolio value and the rolled value
    over the rebalance dates; the roll starts from the date-0 mark."""
    idx = _ledger_grid_indices(path, ledger)
    v0 = hedge_value(path.curve(idx[0]), ledger.strategies[0], ledger.etas[0])
    rolled = rollforward(path, ledger, v0)
    gap = 0.0
    for k, l in enumerate(idx):
        mark = hedge_value(path.curve(l), ledger.strategies[k], ledger.etas[k])
        gap = max(gap, abs(mark - rolled[l]))
    return gap


def build_ledger(
    path: CurvePath,
    spec: InstrumentSpec,
    strategy: str,
    zeta: VolSurface,
    *,
    model: GbmForwardModel | None = None,
    inner_paths: int = DEFAULT_INNER_PATHS,
    inner_steps: int = DEFAULT_INNER_STEPS,
    seeds: SeedSpec | None = None,
    rebalance_every: int = 1,
    antithetic: bool = True,
) -> HedgeLedger:
    """Evaluate one strategy at every rebalance date of one path."""
    if strategy not in STRATEGIES:
        raise ValueError(f"strategy must be one of {STRATEGIES}")
    if seeds is None:
        seeds = SeedSpec(0)
    grid = path.grid
    date_idx = [
        l for l in range(0, len(grid) - 1, rebalance_every)
        if grid[l] < spec.exercise - 1e-12
    ]
    dates, strategies, etas, diags = [], [], [], []
    for l in date_idx:
        state = path.curve(l)
        date_seed = seeds.child("date", l)
        if strategy == "clark-ocone":
            phi, diag = clark_ocone_strategy(
                state, spec, zeta, inner_paths, date_seed,
                inner_steps=inner_steps, antithetic=antithetic,
            )
            eta = diag.value - hedge_value(state, phi)
        elif strategy == "instrument":
            phi, diag, eta = _instrument_with_eta(
                state, spec, zeta, inner_paths, date_seed,
                inner_steps=inner_steps, antithetic=antithetic,
            )
        else:
            if model is None:
                raise ValueError("delta ledgers need a lognormal forward model")
            phi, eta = delta_strategy(state, spec, model)
            diag = None
        dates.append(float(grid[l]))
        strategies.append(phi)
        etas.append(eta)
        diags.append(diag)
    return HedgeLedger(tuple(dates), tuple(strategies), tuple(etas), tuple(diags))


def _instrument_with_eta(state, spec, zeta, inner_paths, seeds, *, inner_steps, antithetic):
    """Specialized strategy plus its residual numeraire position.

    Monte Carlo kinds reuse one inner sample for the weights and the value,
    so the residual is zero to roundoff; closed-form kinds are zero
    algebraically.
    """
    if spec.kind in ("swaption", "exchange"):
        inner = InnerSample(
            state, spec, zeta, inner_paths, seeds,
            inner_steps=inner_steps, antithetic=antithetic,
        )
        phi = _specialized_atoms(state, spec, inner)
        value, value_se = inner.mean_se(inner.g_T)
        eta = value - hedge_value(state, phi)
        diag = StrategyDiagnostics(
            atom_se={}, value=value, value_se=value_se,
            inner_paths=inner.n_inner, inner_steps=inner_steps, antithetic=antithetic,
        )
        return phi, diag, eta
    phi = instrument_strategy(state, spec, zeta, inner_paths=inner_paths, seeds=seeds,
                              inner_steps=inner_steps, antithetic=antithetic)
    return phi, None, 0.0


def _specialized_atoms(state, spec, inner: InnerSample) -> DiscreteMeasure:
    indicator = inner.gp_T
    if spec.kind == "exchange":
        atoms = []
        for y in spec.support():
            ratio = inner.terminal_at(y) / state.value(y)
            c, _ = inner.mean_se(indicator * ratio)
            atoms.append((y, c * (spec.mu.weight_at(y) - spec.strike * spec.nu.weight_at(y))))
        return DiscreteMeasure(tuple(atoms))
    tenor, kappa = spec.tenor, spec.strike
    mats, taus = tenor.maturities, tenor.spacings
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


# -- vectorized replication backtests -----------------------------------------


def _call_terms_vec(x: np.ndarray, kappa: float, v: float) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized cumulative-normal call terms with the zero-variance limits."""
    x = np.asarray(x, dtype=float)
    if kappa <= 0.0:
        return np.ones_like(x), np.ones_like(x)
    if v == 0.0:
        plus = (x > kappa).astype(float) + 0.5 * (x == kappa)
        return plus, plus.copy()
    ratio = np.log(x / kappa) / v
    return ndtr(ratio + 0.5 * v), ndtr(ratio - 0.5 * v)


def replication_report(
    spec: InstrumentSpec,
    strategy: str,
    curve0: BondCurve,
    zeta: VolSurface,
    n_paths: int,
    steps_list: list[int],
    seeds: SeedSpec,
    *,
    world: str = "zeta",
    inner_paths: int = DEFAULT_INNER_PATHS,
    inner_steps: int = DEFAULT_INNER_STEPS,
    rebalance_every: int = 1,
    antithetic: bool = True,
    threads: int = 1,
) -> BacktestReport:
    """Replication backtest over a list of step counts.

    For each step count: simulate paths to exercise, evaluate the strategy
    at the rebalance dates, roll the portfolio forward from the date-0
    value, and record terminal replication errors and the per-date
    self-financing gap.
    """
    if sorted(steps_list) != list(steps_list) or not steps_list:
        raise ValueError("steps_list must be nonempty and increasing")
    if strategy not in STRATEGIES:
        raise ValueError(f"strategy must be one of {STRATEGIES}")
    if world not in ("zeta", "gbm"):
        raise ValueError("world must be 'zeta' or 'gbm'")
    if world == "gbm" and not single_asset_ratio_kind(spec):
        raise ValueError("the lognormal world supports single-asset instruments only")

    model = None
    if strategy == "delta" or world == "gbm":
        model = effective_vol(zeta, spec, curve0)
    rows = []
    price = price_se = float("nan")
    for steps in steps_list:
        run_seed = seeds.child("bt", steps)
        if world == "gbm":
            err, gap, p0 = _gbm_world_run(
                spec, model, n_paths, steps, run_seed, rebalance_every
            )
        else:
            err, gap, p0 = _zeta_world_run(
                spec, strategy, curve0, zeta, model, n_paths, steps, run_seed,
                inner_paths=inner_paths, inner_steps=inner_steps,
                rebalance_every=rebalance_every, antithetic=antithetic, threads=threads,
            )
        sd = float(err.std(ddof=1))
        rows.append(ReportRow(
            n_steps=steps,
            mean_error=float(err.mean()),
            sd_error=sd,
            max_abs_error=float(np.abs(err).max()),
            se=sd / np.sqrt(len(err)),
            max_sf_gap=gap,
        ))
        price, price_se = p0
    return BacktestReport(
        instrument=spec.kind, strategy=strategy, world=world,
        n_paths=n_paths, rebalance_every=rebalance_every, rows=rows,
        price=price, price_se=price_se,
    )


def _gbm_world_run(spec, model, n_paths, steps, seeds, rebalance_every):
    """Delta hedge of a single-asset claim in its own lognormal model."""
    t_ex = spec.exercise
    grid = np.linspace(0.0, t_ex, steps + 1)
    xs = model.sample_paths(grid, n_paths, seeds.child("paths"))
    kappa = spec.forward_strike
    v0 = forward_call_price(model.x0, kappa, integrated_vol(model, 0.0, t_ex))
    v = np.full(n_paths, v0)
    gap = 0.0
    slope = np.zeros(n_paths)
    for l in range(steps):
        if l % rebalance_every == 0:
            vol_rem = integrated_vol(model, grid[l], t_ex)
            slope, minus = _call_terms_vec(xs[:, l], kappa, vol_rem)
            mark = xs[:, l] * slope - kappa * minus
            if l > 0:
                gap = max(gap, float(np.abs(mark - v).max()))
        v = v + slope * (xs[:, l + 1] - xs[:, l])
    err = v - spec.ghat(xs[:, -1])
    return err, gap, (v0, 0.0)


def _zeta_world_run(
    spec, strategy, curve0, zeta, model, n_paths, steps, seeds, *,
    inner_paths, inner_steps, rebalance_every, antithetic, threads,
):
    f0 = forward_normalize(curve0, spec.nu)
    grid = np.linspace(0.0, spec.exercise, steps + 1)
    bundle = simulate_forward_euler(
        f0, zeta, grid, seeds.child("paths"), n_paths, threads=threads
    )
    mats = bundle.maturities
    mu_idx = np.array([_index_of(mats, y) for y in spec.mu.support])
    nu_idx = np.array([_index_of(mats, y) for y in spec.nu.support])
    sup = spec.support()
    sup_idx = np.array([_index_of(mats, y) for y in sup])
    series = bundle.values[:, :, sup_idx]            # (n, m+1, |support|)
    xhat = (
        bundle.values[:, :, mu_idx] @ spec.mu.weights
    ) / (bundle.values[:, :, nu_idx] @ spec.nu.weights)

    date_idx = [l for l in range(0, steps, rebalance_every)]
    fast_co = strategy == "clark-ocone" and single_asset_ratio_kind(spec)
    v = None
    coeffs = None
    gap = 0.0
    p0 = (float("nan"), float("nan"))
    for l in range(steps):
        if l in date_idx:
            coeffs, values_now, values_se = _date_coefficients(
                l, grid, xhat[:, l], bundle, spec, strategy, zeta, model,
                inner_paths, inner_steps, seeds, antithetic, fast_co, sup, sup_idx,
            )
            mark = sum(
                coeffs[j] * series[:, l, j] for j in range(len(sup))
            )
            if l == 0:
                if values_now is not None:
                    p0 = (float(values_now.mean()), float(values_se))
                    v = values_now.copy()
                else:
                    v = mark.copy()
                    p0 = (float(mark[0]), 0.0)
            else:
                gap = max(gap, float(np.abs(mark - v).max()))
        move = series[:, l + 1, :] - series[:, l, :]
        v = v + sum(coeffs[j] * move[:, j] for j in range(len(sup)))
    err = v - spec.ghat(xhat[:, -1])
    return err, gap, p0


def _date_coefficients(
    l, grid, xs, bundle, spec, strategy, zeta, model,
    inner_paths, inner_steps, seeds, antithetic, fast_co, sup, sup_idx,
):
    """Per-support-atom strategy coefficients for all paths at one date.

    Returns (list of (n,) arrays aligned with ``sup``, optional per-path
    value estimates used to start the roll, their standard error).
    """
    t = float(grid[l])
    n = bundle.n_paths
    if strategy == "delta" or (
        strategy == "instrument" and spec.kind in ("bond-call", "caplet")
    ):
        vol_rem = integrated_vol(model, t, spec.exercise)
        kappa = spec.forward_strike
        plus, minus = _call_terms_vec(xs, kappa, vol_rem)
        slope, remainder = plus, -kappa * minus
        coeffs = [
            slope * spec.mu.weight_at(y) + remainder * spec.nu.weight_at(y)
            for y in sup
        ]
        return coeffs, None, 0.0
    if fast_co:
        shared = shared_inner_factors(
            t, spec, zeta, inner_paths, seeds.child("date", l),
            inner_steps=inner_steps, antithetic=antithetic,
        )
        batch = clark_ocone_coeffs_batch(xs, spec, shared)
        per_atom = {
            spec.mu.support[0]: batch["asset"],
            spec.nu.support[0]: batch["numeraire"],
        }
        coeffs = [per_atom[y] for y in sup]
        se0 = co_value_se(float(xs[0]), spec, shared)[1] if l == 0 else 0.0
        return coeffs, batch["value"], se0
    # general nested route: one inner sample per (path, date)
    coeffs = [np.empty(n) for _ in sup]
    values = np.empty(n)
    for i in range(n):
        state = bundle.path(i).curve(l)
        date_seed = seeds.child("date", l, "path", i)
        if strategy == "clark-ocone":
            phi, diag = clark_ocone_strategy(
                state, spec, zeta, inner_paths, date_seed,
                inner_steps=inner_steps, antithetic=antithetic,
            )
            values[i] = diag.value
        else:
            phi, diag, _ = _instrument_with_eta(
                state, spec, zeta, inner_paths, date_seed,
                inner_steps=inner_steps, antithetic=antithetic,
            )
            values[i] = diag.value if diag is not None else hedge_value(state, phi)
        for j, y in enumerate(sup):
            coeffs[j][i] = phi.weight_at(y)
    return coeffs, values, 0.0


# -- Monte Carlo pricing -------------------------------------------------------


def pricing_grid(t0: float, exercise: float, settlement: float, steps: int) -> np.ndarray:
    """Time grid from t0 to settlement containing the exercise date."""
    if settlement <= exercise + 1e-12:
        return np.linspace(t0, exercise, steps + 1)
    k1 = max(1, int(round(steps * (exercise - t0) / (settlement - t0))))
    k2 = max(1, steps - k1)
    head = np.linspace(t0, exercise, k1 + 1)
    tail = np.linspace(exercise, settlement, k2 + 1)[1:]
    return np.concatenate([head, tail])


def forward_price_euler(
    curve0: BondCurve,
    spec: InstrumentSpec,
    zeta: VolSurface,
    n_paths: int,
    steps: int,
    seeds: SeedSpec,
    *,
    threads: int = 1,
) -> tuple[float, float]:
    """Forward claim price by direct forward-measure simulation."""
    f0 = forward_normalize(curve0, spec.nu)
    grid = np.linspace(0.0, spec.exercise, steps + 1)
    bundle = simulate_forward_euler(
        f0, zeta, grid, seeds, n_paths, record="terminal", threads=threads
    )
    mu_idx = np.array([_index_of(bundle.maturities, y) for y in spec.mu.support])
    nu_idx = np.array([_index_of(bundle.maturities, y) for y in spec.nu.support])
    xhat = (bundle.terminal[:, mu_idx] @ spec.mu.weights) / (
        bundle.terminal[:, nu_idx] @ spec.nu.weights
    )
    payoff = spec.ghat(xhat)
    return float(payoff.mean()), float(payoff.std(ddof=1) / np.sqrt(n_paths))


def forward_price_exact_reweighted(
    curve0: BondCurve,
    spec: InstrumentSpec,
    zeta: VolSurface,
    n_paths: int,
    steps: int,
    seeds: SeedSpec,
    *,
    threads: int = 1,
) -> tuple[float, float]:
    """Forward claim price from exact risk-neutral paths with density weights.

    The oracle route: discounted bonds are exact lognormal martingales, and
    the forward-measure density is the discounted numeraire ratio at
    settlement.
    """
    grid = pricing_grid(0.0, spec.exercise, spec.settlement, steps)
    bundle = simulate_discounted_exact(curve0, zeta, grid, seeds, n_paths, threads=threads)
    w = rn_weights(bundle, spec.nu)
    l_ex = int(np.argmin(np.abs(bundle.grid - spec.exercise)))
    mu_idx = np.array([_index_of(bundle.maturities, y) for y in spec.mu.support])
    nu_idx = np.array([_index_of(bundle.maturities, y) for y in spec.nu.support])
    at_T = bundle.values[:, l_ex, :]
    xhat = (at_T[:, mu_idx] @ spec.mu.weights) / (at_T[:, nu_idx] @ spec.nu.weights)
    samples = w * spec.ghat(xhat)
    return float(samples.mean()), float(samples.std(ddof=1) / np.sqrt(n_paths))
