import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curvehedge import (
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


class TestDiscreteMeasure:
    def test_duplicate_maturities_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            DiscreteMeasure(((1.0, 1.0), (1.0, 2.0)))

    def test_numeraire_role_needs_positive_weights(self):
        signed = DiscreteMeasure(((1.0, 1.0), (2.0, -1.0)))
        with pytest.raises(ValueError, match="positive"):
            signed.validate_numeraire_role()

    def test_combine_merges_coinciding_atoms(self):
        m = DiscreteMeasure.combine(
            DiscreteMeasure(((1.0, 1.0), (2.0, -1.0))),
            DiscreteMeasure(((2.0, 0.25),)),
        )
        assert m.weight_at(2.0) == -0.75
        assert m.support == (1.0, 2.0)


class TestTenorStructure:
    def test_ordering_enforced(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            TenorStructure((2.0, 1.0), exercise=1.0, settlement=1.0)

    def test_exercise_before_first_maturity(self):
        with pytest.raises(ValueError, match="precedes exercise"):
            TenorStructure((1.0, 2.0), exercise=1.5, settlement=1.5)

    def test_spacings(self):
        ts = TenorStructure((1.0, 1.5, 2.25), exercise=1.0, settlement=1.0)
        assert ts.spacings == (0.5, 0.75)


class TestMeasurePair:
    def test_linear_combination(self):
        curve = BondCurve.from_pairs(0.0, {1.5: 0.96, 2.0: 0.93})
        m = DiscreteMeasure(((1.5, 1.0), (2.0, -1.0)))
        assert measure_pair(curve, m) == pytest.approx(0.03, abs=1e-15)

    def test_zero_measure(self):
        curve = BondCurve.from_pairs(0.0, {1.0: 0.97, 2.0: 0.94})
        m = DiscreteMeasure(((1.0, 0.0), (2.0, 0.0)))
        assert measure_pair(curve, m) == 0.0

    def test_forward_curve_with_own_numeraire_is_one(self, flat_curve, annuity):
        fwd = forward_normalize(flat_curve, annuity)
        assert measure_pair(fwd, annuity) == pytest.approx(1.0, abs=1e-12)

    def test_missing_maturity_names_it(self):
        curve = BondCurve.from_pairs(0.0, {1.0: 0.97})
        with pytest.raises(CurveLookupError, match="7.25"):
            measure_pair(curve, DiscreteMeasure.dirac(7.25))

    def test_lookup_tolerance(self):
        curve = BondCurve.from_pairs(0.0, {1.0: 0.97})
        assert curve.value(1.0 + 1e-10) == 0.97

    @settings(max_examples=100, deadline=None)
    @given(
        w1=st.floats(-5, 5),
        w2=st.floats(-5, 5),
        a=st.floats(-3, 3),
        b=st.floats(-3, 3),
    )
    def test_linearity_in_weights(self, w1, w2, a, b):
        curve = BondCurve.from_pairs(0.0, {1.0: 0.97, 2.0: 0.94})
        pair = lambda u, v: measure_pair(curve, DiscreteMeasure(((1.0, u), (2.0, v))))
        combined = pair(a * w1, a * w2) + pair(b * w1, b * w2)
        assert combined == pytest.approx((a + b) * pair(w1, w2), abs=1e-9)


class TestForwardNormalize:
    def test_single_atom_numeraire_pins_that_maturity(self, flat_curve):
        fwd = forward_normalize(flat_curve, DiscreteMeasure.dirac(1.0))
        assert fwd.value(1.0) == 1.0
        assert fwd.value(2.0) == pytest.approx(
            flat_curve.value(2.0) / flat_curve.value(1.0), rel=1e-15
        )

    def test_direct_arithmetic(self):
        curve = BondCurve.from_pairs(0.0, {1.0: 0.97, 2.0: 0.94})
        nu = DiscreteMeasure(((1.0, 0.5), (2.0, 0.5)))
        fwd = forward_normalize(curve, nu)
        assert fwd.value(1.0) == pytest.approx(0.97 / 0.955, rel=1e-14)
        assert fwd.value(2.0) == pytest.approx(0.94 / 0.955, rel=1e-14)

    def test_idempotent(self, flat_curve, annuity):
        fwd = forward_normalize(flat_curve, annuity)
        again = forward_normalize(fwd, annuity)
        np.testing.assert_allclose(again.values, fwd.values, rtol=1e-13)

    def test_nonpositive_numeraire_rejected(self):
        curve = BondCurve.from_pairs(0.0, {1.0: 0.97, 2.0: 0.94})
        nu = DiscreteMeasure(((1.0, 0.0), (2.0, 0.0)))
        with pytest.raises(ValueError, match="not positive"):
            forward_normalize(curve, nu)

    def test_forward_curve_validates_normalization(self):
        nu = DiscreteMeasure.dirac(1.0)
        with pytest.raises(ValueError, match="not 1"):
            ForwardCurve.from_pairs(0.0, nu, {1.0: 1.01, 2.0: 0.9})

    @settings(max_examples=60, deadline=None)
    @given(
        p1=st.floats(0.5, 1.2),
        p2=st.floats(0.5, 1.2),
        w1=st.floats(0.1, 3.0),
        w2=st.floats(0.1, 3.0),
    )
    def test_normalization_invariant(self, p1, p2, w1, w2):
        curve = BondCurve.from_pairs(0.0, {1.0: p1, 2.0: p2})
        nu = DiscreteMeasure(((1.0, w1), (2.0, w2)))
        fwd = forward_normalize(curve, nu)
        assert abs(measure_pair(fwd, nu) - 1.0) <= 1e-12


class TestLiborRate:
    def test_direct_evaluation(self):
        curve = BondCurve.from_pairs(0.0, {1.0: 0.98, 1.5: 0.94})
        assert libor_rate(curve, 1.0, 1.5) == pytest.approx(0.04 / (0.5 * 0.94), rel=1e-14)

    def test_flat_curve_gives_zero(self):
        curve = BondCurve.from_pairs(0.0, {1.0: 0.95, 1.5: 0.95})
        assert libor_rate(curve, 1.0, 1.5) == 0.0

    def test_order_enforced(self):
        curve = BondCurve.from_pairs(0.0, {1.0: 0.98, 1.5: 0.94})
        with pytest.raises(ValueError, match="start < end"):
            libor_rate(curve, 1.5, 1.0)

    @pytest.mark.parametrize("p_end", [0.90, 0.96, 0.9852, 1.02])
    def test_rate_payoff_equals_price_payoff(self, p_end):
        # accrual * (rate - strike)^+ == (1/P(end) - (1 + strike*accrual))^+
        # on a curve observed at the fixing date
        start, end, strike = 1.0, 1.5, 0.03
        curve = BondCurve.from_pairs(start, {start: 1.0, end: p_end})
        accrual = end - start
        lhs = max(accrual * (libor_rate(curve, start, end) - strike), 0.0)
        rhs = max(1.0 / p_end - (1.0 + strike * accrual), 0.0)
        assert lhs == pytest.approx(rhs, abs=1e-14)


class TestSwapRate:
    def test_direct_arithmetic(self, swap_tenor):
        curve = BondCurve.from_pairs(0.0, {1.0: 0.97, 1.5: 0.955, 2.0: 0.94})
        assert swap_rate(curve, swap_tenor) == pytest.approx(0.03 / 0.9475, rel=1e-14)

    def test_flat_curve_gives_zero(self, swap_tenor):
        curve = BondCurve.from_pairs(0.0, {1.0: 0.95, 1.5: 0.95, 2.0: 0.95})
        assert swap_rate(curve, swap_tenor) == 0.0

    def test_single_period_reduces_to_libor(self):
        curve = BondCurve.from_pairs(0.0, {1.0: 0.97, 1.5: 0.955})
        ts = TenorStructure((1.0, 1.5), exercise=1.0, settlement=1.0)
        assert swap_rate(curve, ts) == pytest.approx(libor_rate(curve, 1.0, 1.5), rel=1e-14)

    def test_matches_measure_pair_ratio(self, flat_curve, swap_tenor, annuity):
        float_leg = DiscreteMeasure(((1.0, 1.0), (2.0, -1.0)))
        expected = measure_pair(flat_curve, float_leg) / measure_pair(flat_curve, annuity)
        assert swap_rate(flat_curve, swap_tenor) == pytest.approx(expected, rel=1e-14)


class TestCurveValidation:
    def test_nonpositive_prices_rejected(self):
        with pytest.raises(ValueError, match="positive"):
            BondCurve.from_pairs(0.0, {1.0: -0.5})

    def test_duplicate_maturities_rejected(self):
        with pytest.raises(ValueError, match="distinct"):
            BondCurve.from_pairs(0.0, [(1.0, 0.9), (1.0, 0.8)])
