"""Core bond-market types: tenor structures, point measures, and curves.

Bond baskets are described by signed point measures on maturities; pairing a
measure against a curve gives the basket value.  Dividing a bond curve by
the value of a positive measure (the generalized annuity numeraire) yields
the forward curve, whose pairing with the numeraire measure is identically
one.  All types are immutable after construction and safe to share across
workers.

Curves live on the finite set of maturities actually in play; no
interpolation is offered.  Maturities are matched with an absolute
tolerance of ``MATURITY_TOL`` years to absorb round-trips through config
files.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Union

import numpy as np

MATURITY_TOL = 1e-9

# Forward-curve pairing against its own numeraire must equal one within:
NORMALIZATION_TOL = 1e-12


class CurveLookupError(LookupError):
    """A maturity was requested that the curve does not carry."""

    def __init__(self, maturity: float):
        super().__init__(f"maturity {maturity!r} not present on the curve")
        self.maturity = maturity


@dataclass(frozen=True)
class TenorStructure:
    """Strictly increasing payment dates with an exercise and settlement date.

    ``maturities`` are the tenor points (years), ``exercise`` the option
    exercise date and ``settlement`` the payment date; dates must satisfy
    exercise <= first maturity and exercise <= settlement.
    """

    maturities: tuple[float, ...]
    exercise: float
    settlement: float

    def __post_init__(self):
        mats = tuple(float(m) for m in self.maturities)
        object.__setattr__(self, "maturities", mats)
        if len(mats) < 2:
            raise ValueError("a tenor structure needs at least two maturities")
        if any(b - a <= 0.0 for a, b in zip(mats, mats[1:])):
            raise ValueError("tenor maturities must be strictly increasing")
        if mats[0] < self.exercise:
            raise ValueError(
                f"first tenor maturity {mats[0]} precedes exercise {self.exercise}"
            )
        if self.settlement < self.exercise:
            raise ValueError("settlement must not precede exercise")

    @property
    def spacings(self) -> tuple[float, ...]:
        m = self.maturities
        return tuple(b - a for a, b in zip(m, m[1:]))


@dataclass(frozen=True)
class DiscreteMeasure:
    """Signed weighted sum of Dirac masses on maturities.

    Used for bond baskets, numeraires and hedge portfolios alike: the atom
    ``(y, w)`` stands for ``w`` units of the bond maturing at ``y``.
    """

    atoms: tuple[tuple[float, float], ...]

    def __post_init__(self):
        atoms = tuple(sorted((float(y), float(w)) for y, w in self.atoms))
        mats = [y for y, _ in atoms]
        for a, b in zip(mats, mats[1:]):
            if b - a <= MATURITY_TOL:
                raise ValueError(f"duplicate maturity {b} in measure atoms")
        object.__setattr__(self, "atoms", atoms)

    @staticmethod
    def dirac(maturity: float, weight: float = 1.0) -> "DiscreteMeasure":
        return DiscreteMeasure(((maturity, weight),))

    @staticmethod
    def combine(*measures: "DiscreteMeasure") -> "DiscreteMeasure":
        """Sum of measures; weights on coinciding maturities are merged."""
        merged: list[list[float]] = []
        for m in measures:
            for y, w in m.atoms:
                for entry in merged:
                    if abs(entry[0] - y) <= MATURITY_TOL:
                        entry[1] += w
                        break
                else:
                    merged.append([y, w])
        return DiscreteMeasure(tuple((y, w) for y, w in merged))

    @property
    def support(self) -> tuple[float, ...]:
        return tuple(y for y, _ in self.atoms)

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for _, w in self.atoms])

    def scaled(self, factor: float) -> "DiscreteMeasure":
        return DiscreteMeasure(tuple((y, factor * w) for y, w in self.atoms))

    def weight_at(self, maturity: float) -> float:
        for y, w in self.atoms:
            if abs(y - maturity) <= MATURITY_TOL:
                return w
        return 0.0

    def validate_numeraire_role(self) -> None:
        """A numeraire-role measure must be strictly positive."""
        if any(w <= 0.0 for _, w in self.atoms):
            raise ValueError("numeraire measure needs strictly positive weights")

    def min_maturity(self) -> float:
        return self.atoms[0][0]


def _as_nodes(values: Mapping[float, float] | Iterable[tuple[float, float]]):
    pairs = values.items() if isinstance(values, Mapping) else values
    pairs = sorted((float(y), float(p)) for y, p in pairs)
    mats = np.array([y for y, _ in pairs])
    vals = np.array([p for _, p in pairs])
    if mats.size == 0:
        raise ValueError("curve needs at least one maturity")
    if np.any(np.diff(mats) <= MATURITY_TOL):
        raise ValueError("curve maturities must be distinct")
    mats.setflags(write=False)
    vals.setflags(write=False)
    return mats, vals


class _NodeCurve:
    """Shared machinery: values stored on a sorted maturity grid."""

    maturities: np.ndarray
    values: np.ndarray

    def index_of(self, maturity: float) -> int:
        i = int(np.searchsorted(self.maturities, maturity))
        for j in (i - 1, i):
            if 0 <= j < len(self.maturities) and abs(self.maturities[j] - maturity) <= MATURITY_TOL:
                return j
        raise CurveLookupError(maturity)

    def value(self, maturity: float) -> float:
        return float(self.values[self.index_of(maturity)])

    def indices_of(self, maturities: Iterable[float]) -> np.ndarray:
        return np.array([self.index_of(y) for y in maturities], dtype=np.intp)

    def carries(self, maturity: float) -> bool:
        try:
            self.index_of(maturity)
            return True
        except CurveLookupError:
            return False


@dataclass(frozen=True)
class BondCurve(_NodeCurve):
    """Bond prices at one instant, per unit notional, on a finite maturity grid."""

    t: float
    maturities: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        mats, vals = _as_nodes(zip(np.atleast_1d(self.maturities), np.atleast_1d(self.values)))
        if np.any(vals <= 0.0):
            raise ValueError("bond prices must be strictly positive")
        object.__setattr__(self, "maturities", mats)
        object.__setattr__(self, "values", vals)

    @staticmethod
    def from_pairs(t: float, values: Mapping[float, float] | Iterable[tuple[float, float]]) -> "BondCurve":
        mats, vals = _as_nodes(values)
        return BondCurve(t, mats, vals)


@dataclass(frozen=True)
class ForwardCurve(_NodeCurve):
    """Bond curve divided by its numeraire value.

    Invariant: the pairing against the numeraire measure equals one within
    ``NORMALIZATION_TOL``, enforced at construction.
    """

    t: float
    numeraire: DiscreteMeasure
    maturities: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        mats, vals = _as_nodes(zip(np.atleast_1d(self.maturities), np.atleast_1d(self.values)))
        if np.any(vals <= 0.0):
            raise ValueError("forward bond prices must be strictly positive")
        object.__setattr__(self, "maturities", mats)
        object.__setattr__(self, "values", vals)
        self.numeraire.validate_numeraire_role()
        pairing = measure_pair(self, self.numeraire)
        if abs(pairing - 1.0) > NORMALIZATION_TOL:
            raise ValueError(
                f"forward curve pairing against its numeraire is {pairing!r}, not 1"
            )

    @staticmethod
    def from_pairs(
        t: float,
        numeraire: DiscreteMeasure,
        values: Mapping[float, float] | Iterable[tuple[float, float]],
    ) -> "ForwardCurve":
        mats, vals = _as_nodes(values)
        return ForwardCurve(t, numeraire, mats, vals)


Curve = Union[BondCurve, ForwardCurve]


def measure_pair(curve: Curve, measure: DiscreteMeasure) -> float:
    """Pairing of a point measure against a curve: sum of weight * price.

    Raises :class:`CurveLookupError` naming the first maturity the curve
    does not carry.
    """
    total = 0.0
    for y, w in measure.atoms:
        total += w * curve.values[curve.index_of(y)]
    return float(total)


def forward_normalize(curve: Curve, numeraire: DiscreteMeasure) -> ForwardCurve:
    """Divide a curve by its pairing with ``numeraire``.

    Applying it to a forward curve with the same numeraire is the identity.
    """
    numeraire.validate_numeraire_role()
    denom = measure_pair(curve, numeraire)
    if denom <= 0.0:
        raise ValueError(f"numeraire value {denom!r} is not positive")
    return ForwardCurve(curve.t, numeraire, curve.maturities, curve.values / denom)


def libor_rate(curve: Curve, start: float, end: float) -> float:
    """Simple forward rate implied by two bond prices over [start, end]."""
    if start >= end:
        raise ValueError(f"need start < end, got {start} >= {end}")
    p_start = curve.value(start)
    p_end = curve.value(end)
    return (p_start - p_end) / ((end - start) * p_end)


def swap_measures(tenor: TenorStructure) -> tuple[DiscreteMeasure, DiscreteMeasure]:
    """Float-leg measure (first minus last bond) and annuity measure of a swap."""
    mats = tenor.maturities
    float_leg = DiscreteMeasure(((mats[0], 1.0), (mats[-1], -1.0)))
    annuity = DiscreteMeasure(tuple(zip(mats[1:], tenor.spacings)))
    return float_leg, annuity


def swap_rate(curve: Curve, tenor: TenorStructure) -> float:
    """Par swap rate: float-leg value divided by the annuity."""
    float_leg, annuity = swap_measures(tenor)
    denom = measure_pair(curve, annuity)
    if denom <= 0.0:
        raise ValueError(f"swap annuity {denom!r} is not positive")
    return measure_pair(curve, float_leg) / denom
