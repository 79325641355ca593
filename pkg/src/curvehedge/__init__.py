"""Bond-market simulation and hedging engine.

Builds hedging portfolios for interest-rate claims under a generalized
annuity numeraire by two routes — conditional-expectation (martingale
representation) weights estimated by nested Monte Carlo, and closed-form
delta weights under a lognormal forward model — and verifies
self-financing, replication, and the coincidence of the two routes by
simulation.
"""

__version__ = "0.1.0"

from .analytic import (
    GbmForwardModel,
    call_delta,
    effective_vol,
    forward_call_price,
    integrated_vol,
    margrabe_price,
    nd1_nd2,
    norm_cdf,
)
from .backtest import (
    BacktestReport,
    build_ledger,
    forward_price_euler,
    forward_price_exact_reweighted,
    replication_report,
    rollforward,
    self_financing_check,
)
from .config import ConfigError, ExperimentConfig, config_hash, emit_config, parse_config
from .hedging import (
    HedgeLedger,
    InnerSample,
    clark_ocone_strategy,
    delta_strategy,
    hedge_value,
    instrument_strategy,
    jamshidian_strategy,
    swaption_delta_strategy,
)
from .instruments import InstrumentSpec
from .malliavin import (
    AlphaProcess,
    bump_check,
    clark_ocone_integrand,
    co_representation_residual,
    forward_vol_field,
    malliavin_derivative,
    representation_residuals,
)
from .market import (
    BondCurve,
    CurveLookupError,
    DiscreteMeasure,
    ForwardCurve,
    TenorStructure,
    forward_normalize,
    libor_rate,
    measure_pair,
    swap_rate,
)
from .seeding import SeedSpec
from .simulation import (
    CurvePath,
    PathBundle,
    girsanov_drift,
    normalization_gap,
    rn_weight,
    rn_weights,
    simulate_discounted_exact,
    simulate_forward_euler,
)
from .volatility import VolSurface
