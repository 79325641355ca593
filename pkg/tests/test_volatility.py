import numpy as np
import pytest

from curvehedge import VolSurface


def test_constant_family():
    z = VolSurface.constant([0.1, -0.05])
    assert z.factors == 2
    np.testing.assert_array_equal(z(0.3, 2.0), [0.1, -0.05])
    np.testing.assert_array_equal(z(1.7, 0.5), [0.1, -0.05])


def test_ho_lee_is_linear_in_maturity_gap():
    z = VolSurface.ho_lee(0.1)
    assert z(0.0, 2.0)[0] == pytest.approx(-0.2)
    assert z(1.0, 2.0)[0] == pytest.approx(-0.1)
    assert z(2.0, 2.0)[0] == 0.0


def test_vasicek_closed_form():
    sigma, a = 0.15, 0.8
    z = VolSurface.vasicek(sigma, a)
    gap = 1.5
    assert z(0.5, 0.5 + gap)[0] == pytest.approx(-(sigma / a) * (1 - np.exp(-a * gap)), rel=1e-14)
    assert z(1.0, 1.0)[0] == 0.0


def test_vasicek_validation():
    with pytest.raises(ValueError, match="positive"):
        VolSurface.vasicek(0.1, 0.0)
    with pytest.raises(ValueError, match="same length"):
        VolSurface.vasicek([0.1, 0.2], [0.5])


def test_piecewise_buckets():
    z = VolSurface.piecewise([1.0, 2.0], [[0.1], [0.3]])
    assert z(0.0, 0.5)[0] == 0.1   # below first node
    assert z(0.0, 1.0)[0] == 0.1
    assert z(0.0, 1.9)[0] == 0.1
    assert z(0.0, 2.0)[0] == 0.3
    assert z(0.0, 5.0)[0] == 0.3
    with pytest.raises(ValueError, match="increasing"):
        VolSurface.piecewise([2.0, 1.0], [[0.1], [0.3]])


def test_stack_concatenates_factors():
    z = VolSurface.stack(VolSurface.ho_lee(0.1), VolSurface.constant(0.2))
    assert z.factors == 2
    np.testing.assert_allclose(z(0.0, 1.5), [-0.15, 0.2])


def test_averaged_exact_for_time_affine_surface():
    # ho-lee loadings are affine in t, so the midpoint average over a step
    # equals the midpoint value
    z = VolSurface.ho_lee(0.1)
    avg = z.averaged(0.2, 0.6, [2.0])
    np.testing.assert_allclose(avg, z.at(0.4, [2.0]), rtol=1e-14)


def test_averaged_matches_dense_quadrature_for_vasicek():
    z = VolSurface.vasicek(0.15, 0.8)
    t0, t1, y = 0.3, 0.8, 2.0
    dense = np.mean([z(s, y)[0] for s in t0 + (np.arange(4000) + 0.5) * (t1 - t0) / 4000])
    assert z.averaged(t0, t1, [y])[0, 0] == pytest.approx(dense, rel=1e-6)


def test_max_norm_probe():
    z = VolSurface.ho_lee(0.1)
    worst = z.max_norm(np.linspace(0, 1, 5), [1.0, 2.0])
    assert worst == pytest.approx(0.2)  # at t=0, y=2


def test_zero_surface():
    z = VolSurface.zero(3)
    assert z.factors == 3
    np.testing.assert_array_equal(z(0.5, 1.5), np.zeros(3))
