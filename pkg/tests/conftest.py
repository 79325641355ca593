import numpy as np
import pytest

from curvehedge import BondCurve, DiscreteMeasure, SeedSpec, TenorStructure, VolSurface


@pytest.fixture
def flat_curve():
    """Flat 3% discount curve on the maturities used throughout."""
    return BondCurve.from_pairs(
        0.0, {y: float(np.exp(-0.03 * y)) for y in (0.5, 1.0, 1.5, 2.0)}
    )


@pytest.fixture
def ho_lee():
    return VolSurface.ho_lee(0.1)


@pytest.fixture
def seeds():
    return SeedSpec(314159)


@pytest.fixture
def swap_tenor():
    return TenorStructure((1.0, 1.5, 2.0), exercise=1.0, settlement=1.0)


@pytest.fixture
def annuity(swap_tenor):
    return DiscreteMeasure(tuple(zip(swap_tenor.maturities[1:], swap_tenor.spacings)))
