"""Path generation for discounted and forward bond curves.

Two mutually validating simulation routes are provided:

* :func:`simulate_discounted_exact` evolves discounted bond prices under the
  risk-neutral measure with the exact lognormal step
  ``P(y) <- P(y) * exp(zbar(y) . dW - 0.5 |zbar(y)|^2 dt)``,
  where ``zbar`` is the per-step time average of the deterministic factor
  volatility.  Every maturity is driven by the same d-dimensional increment.
  Discounted prices are exact martingales step by step.

* :func:`simulate_forward_euler` evolves the numeraire-normalized forward
  curve under the forward measure with a log-Euler step whose local loading
  for maturity ``y`` is ``b(y) = sum_k w_k F(T_k) (zbar(y) - zbar(T_k))``
  over the numeraire atoms ``(T_k, w_k)``, followed by renormalization so
  the pairing against the numeraire stays one exactly.

Forward-measure expectations can also be taken on the risk-neutral route by
weighting each path with :func:`rn_weight`, the discounted numeraire ratio;
the short rate cancels in discounted units and never enters.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .market import BondCurve, DiscreteMeasure, ForwardCurve, measure_pair
from .seeding import BLOCK, SeedSpec
from .volatility import VolSurface

RISK_NEUTRAL = "risk-neutral"
FORWARD = "forward"


@dataclass
class PathBundle:
    """Array-backed collection of simulated curve paths on a common grid.

    ``values`` has shape (n_paths, len(grid), n_maturities) when fully
    recorded, else None with only ``terminal`` (n_paths, n_maturities) kept.
    ``dW`` holds the Gaussian increments actually used, shape
    (n_paths, len(grid)-1, factors), when recorded.
    """

    measure: str
    grid: np.ndarray
    maturities: np.ndarray
    initial: np.ndarray
    terminal: np.ndarray
    values: np.ndarray | None = None
    dW: np.ndarray | None = None
    numeraire: DiscreteMeasure | None = None
    rn: np.ndarray | None = None

    @property
    def n_paths(self) -> int:
        return self.terminal.shape[0]

    @property
    def n_steps(self) -> int:
        return len(self.grid) - 1

    def path(self, i: int) -> "CurvePath":
        return CurvePath(self, int(i))

    def values_at(self, maturity: float) -> np.ndarray:
        """Full per-path series for one maturity, shape (n_paths, len(grid))."""
        if self.values is None:
            raise ValueError("bundle was recorded terminal-only")
        return self.values[:, :, _index_of(self.maturities, maturity)]

    def terminal_at(self, maturity: float) -> np.ndarray:
        return self.terminal[:, _index_of(self.maturities, maturity)]


def _index_of(maturities: np.ndarray, maturity: float) -> int:
    from .market import MATURITY_TOL, CurveLookupError

    i = int(np.searchsorted(maturities, maturity))
    for j in (i - 1, i):
        if 0 <= j < len(maturities) and abs(maturities[j] - maturity) <= MATURITY_TOL:
            return j
    raise CurveLookupError(maturity)


@dataclass
class CurvePath:
    """View of one path of a :class:`PathBundle`."""

    bundle: PathBundle
    index: int

    @property
    def grid(self) -> np.ndarray:
        return self.bundle.grid

    @property
    def dW(self) -> np.ndarray:
        if self.bundle.dW is None:
            raise ValueError("increments were not recorded")
        return self.bundle.dW[self.index]

    def state_values(self, step: int) -> np.ndarray:
        if self.bundle.values is None:
            raise ValueError("bundle was recorded terminal-only")
        return self.bundle.values[self.index, step]

    def curve(self, step: int):
        """Materialize the curve at grid point ``step`` (validates invariants)."""
        t = float(self.bundle.grid[step])
        vals = self.state_values(step)
        if self.bundle.measure == FORWARD:
            return ForwardCurve(t, self.bundle.numeraire, self.bundle.maturities, vals)
        return BondCurve(t, self.bundle.maturities, vals)

    def terminal_curve(self):
        t = float(self.bundle.grid[-1])
        if self.bundle.measure == FORWARD:
            return ForwardCurve(t, self.bundle.numeraire, self.bundle.maturities,
                                self.bundle.terminal[self.index])
        return BondCurve(t, self.bundle.maturities, self.bundle.terminal[self.index])


def _validate_grid(grid, t0: float) -> np.ndarray:
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or len(g) < 2:
        raise ValueError("grid needs at least two time points")
    if np.any(np.diff(g) <= 0.0):
        raise ValueError("grid must be strictly increasing")
    if abs(g[0] - t0) > 1e-12:
        raise ValueError(f"grid must start at the curve time {t0}, got {g[0]}")
    return g


def _averaged_vols(zeta: VolSurface, grid: np.ndarray, mats: np.ndarray) -> np.ndarray:
    """Per-step time-averaged loadings, shape (n_steps, n_maturities, factors)."""
    return np.stack(
        [zeta.averaged(grid[l], grid[l + 1], mats) for l in range(len(grid) - 1)]
    )


def _run_blocks(n_paths: int, threads: int, work) -> None:
    starts = list(range(0, n_paths, BLOCK))
    if threads <= 1 or len(starts) <= 1:
        for s in starts:
            work(s)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        list(pool.map(work, starts))


def simulate_discounted_exact(
    curve0: BondCurve,
    zeta: VolSurface,
    grid,
    seeds: SeedSpec,
    n_paths: int,
    *,
    record: str = "full",
    threads: int = 1,
) -> PathBundle:
    """Exact lognormal evolution of discounted bonds under the risk-neutral measure."""
    if n_paths <= 0:
        raise ValueError("n_paths must be positive")
    g = _validate_grid(grid, curve0.t)
    mats = curve0.maturities
    K, d, m = len(mats), zeta.factors, len(g) - 1
    dts = np.diff(g)
    zbars = _averaged_vols(zeta, g, mats)                      # (m, K, d)
    drifts = -0.5 * np.sum(zbars**2, axis=2) * dts[:, None]    # (m, K)

    full = record == "full"
    values = np.empty((n_paths, m + 1, K)) if full else None
    terminal = np.empty((n_paths, K))
    dW_out = np.empty((n_paths, m, d)) if full else None

    def work(start: int) -> None:
        stop = min(start + BLOCK, n_paths)
        take = stop - start
        dW = seeds.child("block", start // BLOCK).normals((BLOCK, m, d))[:take]
        dW *= np.sqrt(dts)[None, :, None]
        cur = np.broadcast_to(curve0.values, (take, K)).copy()
        if full:
            values[start:stop, 0] = cur
            dW_out[start:stop] = dW
        for l in range(m):
            incr = dW[:, l, :] @ zbars[l].T + drifts[l]
            cur = cur * np.exp(incr)
            if full:
                values[start:stop, l + 1] = cur
        terminal[start:stop] = cur

    _run_blocks(n_paths, threads, work)
    return PathBundle(
        measure=RISK_NEUTRAL,
        grid=g,
        maturities=mats,
        initial=curve0.values.copy(),
        terminal=terminal,
        values=values,
        dW=dW_out,
    )


def rn_weight(path: CurvePath, numeraire: DiscreteMeasure) -> float:
    """Forward-measure density of one risk-neutral path, in discounted form.

    Equals the terminal over initial value of the discounted numeraire
    basket; the short-rate discount cancels.  Averages to one over paths.
    """
    return float(rn_weights(path.bundle, numeraire)[path.index])


def rn_weights(bundle: PathBundle, numeraire: DiscreteMeasure) -> np.ndarray:
    """Vectorized :func:`rn_weight` over a whole bundle."""
    if bundle.measure != RISK_NEUTRAL:
        raise ValueError("density weights apply to risk-neutral paths")
    numeraire.validate_numeraire_role()
    idx = np.array([_index_of(bundle.maturities, y) for y in numeraire.support])
    w = numeraire.weights
    denom = float(bundle.initial[idx] @ w)
    if denom <= 0.0:
        raise ValueError(f"initial numeraire value {denom!r} is not positive")
    return (bundle.terminal[:, idx] @ w) / denom


def girsanov_drift(fcurve: ForwardCurve, zeta: VolSurface, t: float | None = None) -> np.ndarray:
    """Drift vector relating the two Brownian motions: dW = drift dt + dW_fwd.

    Equals the numeraire-weighted average of the loadings over the forward
    curve: ``sum_k w_k F(T_k) zeta_t(T_k)``, shape (factors,).
    """
    if t is None:
        t = fcurve.t
    sup = fcurve.numeraire.support
    w = fcurve.numeraire.weights
    vals = np.array([fcurve.value(y) for y in sup])
    return (w * vals) @ zeta.at(t, sup)


def simulate_forward_euler(
    fcurve0: ForwardCurve,
    zeta: VolSurface,
    grid,
    seeds: SeedSpec,
    n_paths: int,
    *,
    record: str = "full",
    threads: int = 1,
) -> PathBundle:
    """Log-Euler evolution of the forward curve under the forward measure.

    After each step the curve is renormalized by its numeraire pairing, so
    the normalization invariant holds exactly along every path.
    """
    if n_paths <= 0:
        raise ValueError("n_paths must be positive")
    g = _validate_grid(grid, fcurve0.t)
    mats = fcurve0.maturities
    K, d, m = len(mats), zeta.factors, len(g) - 1
    dts = np.diff(g)
    zbars = _averaged_vols(zeta, g, mats)  # (m, K, d)
    nu = fcurve0.numeraire
    nu_idx = np.array([_index_of(mats, y) for y in nu.support])
    nu_w = nu.weights

    full = record == "full"
    values = np.empty((n_paths, m + 1, K)) if full else None
    terminal = np.empty((n_paths, K))
    dW_out = np.empty((n_paths, m, d)) if full else None

    def work(start: int) -> None:
        stop = min(start + BLOCK, n_paths)
        take = stop - start
        dW = seeds.child("block", start // BLOCK).normals((BLOCK, m, d))[:take]
        dW *= np.sqrt(dts)[None, :, None]
        cur = np.broadcast_to(fcurve0.values, (take, K)).copy()
        if full:
            values[start:stop, 0] = cur
            dW_out[start:stop] = dW
        for l in range(m):
            cur = _euler_step(cur, zbars[l], dts[l], dW[:, l, :], nu_idx, nu_w)
            if full:
                values[start:stop, l + 1] = cur
        terminal[start:stop] = cur

    _run_blocks(n_paths, threads, work)
    return PathBundle(
        measure=FORWARD,
        grid=g,
        maturities=mats,
        initial=fcurve0.values.copy(),
        terminal=terminal,
        values=values,
        dW=dW_out,
        numeraire=nu,
    )


def euler_evolve_terminal(
    start_values: np.ndarray,  # (K,) shared or (n, K) per path
    zbars: np.ndarray,         # (n_steps, K, d) per-step averaged loadings
    dts: np.ndarray,           # (n_steps,)
    dW: np.ndarray,            # (n, n_steps, d) Brownian increments
    nu_idx: np.ndarray,
    nu_w: np.ndarray,
) -> np.ndarray:
    """Run the renormalized log-Euler recursion on explicit noise; terminal only.

    Exposed for the nested conditional-expectation engine, which supplies
    antithetic increments and keeps the same arithmetic as the public
    simulator.
    """
    n = dW.shape[0]
    if start_values.ndim == 1:
        cur = np.broadcast_to(start_values, (n, len(start_values))).copy()
    else:
        cur = start_values.copy()
    for l in range(len(dts)):
        cur = _euler_step(cur, zbars[l], dts[l], dW[:, l, :], nu_idx, nu_w)
    return cur


def _euler_step(
    cur: np.ndarray,       # (n, K)
    zbar: np.ndarray,      # (K, d)
    dt: float,
    dW: np.ndarray,        # (n, d)
    nu_idx: np.ndarray,
    nu_w: np.ndarray,
) -> np.ndarray:
    weighted = cur[:, nu_idx] * nu_w                 # (n, K_nu)
    pairing = weighted.sum(axis=1)                   # == 1 after renormalization
    avg_load = weighted @ zbar[nu_idx]               # (n, d)
    # b[n, k, :] = pairing[n] * zbar[k] - avg_load[n]
    b = pairing[:, None, None] * zbar[None, :, :] - avg_load[:, None, :]
    incr = np.einsum("nkd,nd->nk", b, dW) - 0.5 * np.sum(b * b, axis=2) * dt
    nxt = cur * np.exp(incr)
    nxt /= (nxt[:, nu_idx] * nu_w).sum(axis=1)[:, None]
    return nxt


def normalization_gap(bundle: PathBundle) -> float:
    """Largest |numeraire pairing - 1| over all recorded states of a forward bundle."""
    if bundle.measure != FORWARD:
        raise ValueError("normalization applies to forward bundles")
    idx = np.array([_index_of(bundle.maturities, y) for y in bundle.numeraire.support])
    w = bundle.numeraire.weights
    states = bundle.values if bundle.values is not None else bundle.terminal[:, None, :]
    pairings = np.einsum("nlk,k->nl", states[:, :, idx], w)
    return float(np.abs(pairings - 1.0).max())


def forward_state(bundle: PathBundle, i: int, step: int) -> ForwardCurve:
    """Forward curve seen by path ``i`` at grid point ``step``."""
    return bundle.path(i).curve(step)


def initial_forward_curve(curve0: BondCurve, numeraire: DiscreteMeasure) -> ForwardCurve:
    from .market import forward_normalize

    return forward_normalize(curve0, numeraire)
