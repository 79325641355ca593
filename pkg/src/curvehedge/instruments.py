"""Payoff descriptors for the supported interest-rate claims.

Every claim is of the form ``numeraire_value_at_settlement * g(ratio)``
where the ratio is the basket value of the asset measure divided by the
numeraire measure value at exercise.  The built-in kinds pin the measures:

* ``bond-call``  -- asset: bond maturing at U; numeraire: bond at exercise.
* ``caplet``     -- asset: bond at fixing T; numeraire: bond at payment S;
                    the rate payoff reduces to a call on the ratio with
                    strike ``1 + kappa * (S - T)``.
* ``swaption``   -- asset: first-minus-last tenor bond; numeraire: annuity.
* ``exchange``   -- caller-supplied measures, call payoff.
* ``generic``    -- caller-supplied measures and Lipschitz payoff.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .market import DiscreteMeasure, TenorStructure, swap_measures

CALL_KINDS = ("exchange", "bond-call", "caplet", "swaption")


@dataclass(frozen=True)
class InstrumentSpec:
    """One claim: measures, dates, strike, and forward payoff."""

    kind: str
    mu: DiscreteMeasure
    nu: DiscreteMeasure
    exercise: float
    settlement: float
    strike: float | None = None           # contract strike (rate or price)
    forward_strike: float | None = None   # kink of the forward payoff
    payoff: Callable[[np.ndarray], np.ndarray] | None = None
    payoff_slope: Callable[[np.ndarray], np.ndarray] | None = None
    lipschitz: float | None = None
    tenor: TenorStructure | None = None
    underlying_maturity: float | None = None

    def __post_init__(self):
        if self.settlement < self.exercise:
            raise ValueError("settlement must not precede exercise")
        self.nu.validate_numeraire_role()
        for m in (self.mu, self.nu):
            if m.min_maturity() < self.exercise - 1e-12:
                raise ValueError("measure atoms must not precede the exercise date")
        if self.kind == "generic":
            if self.payoff is None or self.payoff_slope is None:
                raise ValueError("generic instruments need payoff and payoff_slope")
        elif self.kind in CALL_KINDS:
            if self.forward_strike is None or self.forward_strike < 0.0:
                raise ValueError("call-style instruments need a nonnegative strike")
        else:
            raise ValueError(f"unknown instrument kind {self.kind!r}")

    # -- forward payoff ------------------------------------------------------

    def ghat(self, x: np.ndarray | float) -> np.ndarray | float:
        """Forward payoff g(ratio)."""
        if self.kind == "generic":
            return self.payoff(x)
        return np.maximum(np.asarray(x) - self.forward_strike, 0.0)

    def ghat_prime(self, x: np.ndarray | float) -> np.ndarray | float:
        """One-sided derivative of g; at the kink the left-closed value 0."""
        if self.kind == "generic":
            return self.payoff_slope(x)
        return (np.asarray(x) > self.forward_strike).astype(float)

    def support(self) -> tuple[float, ...]:
        """Sorted union of the asset- and numeraire-measure maturities."""
        return DiscreteMeasure.combine(self.mu, self.nu).support

    # -- factories -----------------------------------------------------------

    @staticmethod
    def bond_call(underlying_maturity: float, exercise: float, strike: float) -> "InstrumentSpec":
        if underlying_maturity <= exercise:
            raise ValueError("the bond must outlive the option")
        return InstrumentSpec(
            kind="bond-call",
            mu=DiscreteMeasure.dirac(underlying_maturity),
            nu=DiscreteMeasure.dirac(exercise),
            exercise=exercise,
            settlement=exercise,
            strike=strike,
            forward_strike=strike,
            underlying_maturity=underlying_maturity,
        )

    @staticmethod
    def caplet(fixing: float, payment: float, strike_rate: float) -> "InstrumentSpec":
        if payment <= fixing:
            raise ValueError("payment date must follow the fixing date")
        accrual = payment - fixing
        return InstrumentSpec(
            kind="caplet",
            mu=DiscreteMeasure.dirac(fixing),
            nu=DiscreteMeasure.dirac(payment),
            exercise=fixing,
            settlement=payment,
            strike=strike_rate,
            forward_strike=1.0 + strike_rate * accrual,
        )

    @staticmethod
    def swaption(tenor: TenorStructure, strike_rate: float) -> "InstrumentSpec":
        float_leg, annuity = swap_measures(tenor)
        return InstrumentSpec(
            kind="swaption",
            mu=float_leg,
            nu=annuity,
            exercise=tenor.exercise,
            settlement=tenor.exercise,
            strike=strike_rate,
            forward_strike=strike_rate,
            tenor=tenor,
        )

    @staticmethod
    def exchange(
        mu: DiscreteMeasure, nu: DiscreteMeasure, strike: float, exercise: float
    ) -> "InstrumentSpec":
        return InstrumentSpec(
            kind="exchange",
            mu=mu,
            nu=nu,
            exercise=exercise,
            settlement=exercise,
            strike=strike,
            forward_strike=strike,
        )

    @staticmethod
    def generic(
        mu: DiscreteMeasure,
        nu: DiscreteMeasure,
        exercise: float,
        payoff: Callable,
        payoff_slope: Callable,
        *,
        settlement: float | None = None,
        lipschitz: float | None = None,
    ) -> "InstrumentSpec":
        return InstrumentSpec(
            kind="generic",
            mu=mu,
            nu=nu,
            exercise=exercise,
            settlement=exercise if settlement is None else settlement,
            payoff=payoff,
            payoff_slope=payoff_slope,
            lipschitz=lipschitz,
        )
