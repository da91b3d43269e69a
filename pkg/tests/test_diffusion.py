import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rexcessive import (ConfigError, DiffusionSpec, HittingTime, IntervalSpec, ScaleSpeed, catalog,
                        derive_scale_speed)
from rexcessive._compact import Compactifier


def test_interval_rejects_reversed_and_nan():
    with pytest.raises(ConfigError):
        IntervalSpec(1.0, 0.0)
    with pytest.raises(ConfigError):
        IntervalSpec(float("nan"), 1.0)


def test_interval_rejects_included_infinite_endpoint():
    with pytest.raises(ConfigError):
        IntervalSpec(0.0, math.inf, beta_included=True)


def test_interval_str_shows_inclusion():
    assert str(IntervalSpec(0.0, 1.0, alpha_included=True)) == "[0, 1["


def test_zero_volatility_rejected():
    with pytest.raises(ConfigError, match="volatility"):
        DiffusionSpec(IntervalSpec(0, 1), lambda x: 0 * x, lambda x: 0 * x, 0.5)


def test_volatility_vanishing_inside_rejected():
    with pytest.raises(ConfigError):
        DiffusionSpec(IntervalSpec(-1, 1), lambda x: 0 * x, lambda x: np.abs(x) * 0 + (x > 0.3), 0.5)


def test_reference_point_must_be_interior():
    with pytest.raises(ConfigError, match="reference point"):
        DiffusionSpec(IntervalSpec(0, 1), lambda x: 0 * x, lambda x: 1 + 0 * x, 1.0)


def test_catalog_missing_parameter_named():
    with pytest.raises(ConfigError, match="sigma"):
        catalog("gbm", {"mu": 0.1})


def test_catalog_unknown_family():
    with pytest.raises(ConfigError):
        catalog("heston", {})


def test_catalog_reference_points():
    assert catalog("brownian").reference_point == 0.0
    assert catalog("bessel", {"delta": 3}).reference_point == 1.0
    assert catalog("cir", {"kappa": 2, "theta": 0.5, "sigma": 1}).reference_point == 0.5
    assert catalog("ou", {"kappa": 1, "theta": 0, "sigma": 1, "x0": 2}).reference_point == 2.0


def test_scalar_coefficients_broadcast():
    spec = DiffusionSpec(IntervalSpec(-math.inf, math.inf), lambda x: 0.0, lambda x: 2.0, 0.0)
    assert spec.volatility(np.zeros(4)).shape == (4,)


def test_bessel3_scale_and_speed_closed_forms():
    ss = derive_scale_speed(catalog("bessel", {"delta": 3}))
    x = np.array([0.2, 0.7, 1.0, 3.0, 12.0])
    np.testing.assert_allclose(ss.scale_density(x), x**-2.0, rtol=1e-9)
    np.testing.assert_allclose(ss.speed_density(x), 2 * x**2, rtol=1e-9)
    np.testing.assert_allclose(ss.scale(x), 1 - 1 / x, rtol=1e-9, atol=1e-12)


def test_gbm_scale_density_is_power():
    ss = derive_scale_speed(catalog("gbm", {"mu": 0.1, "sigma": 0.3}))
    x = np.array([0.5, 2.0, 5.0])
    np.testing.assert_allclose(ss.scale_density(x), x ** (-2 * 0.1 / 0.09), rtol=1e-9)


def test_scale_speed_from_densities_matches_coefficients():
    ss1 = derive_scale_speed(catalog("bessel", {"delta": 3}))
    ss2 = ScaleSpeed.from_densities(IntervalSpec(0, math.inf), 1.0, lambda x: x**-2.0, lambda x: 2 * x**2)
    x = np.array([0.3, 1.5, 4.0])
    np.testing.assert_allclose(ss1.speed_density(x), ss2.speed_density(x), rtol=1e-9)
    np.testing.assert_allclose(ss1.scale(x), ss2.scale(x), rtol=1e-9)


def test_scale_speed_rejects_exterior_points():
    ss = derive_scale_speed(catalog("bessel", {"delta": 3}))
    with pytest.raises(ValueError):
        ss.scale_density(np.array([-1.0]))


def test_hitting_time():
    assert HittingTime(1.0, math.inf).censored
    assert not HittingTime(1.0, 0.3).censored
    with pytest.raises(ValueError):
        HittingTime(1.0, -0.1)


@given(st.sampled_from([(0.0, 1.0), (0.0, math.inf), (-math.inf, math.inf), (-math.inf, 2.0)]),
       st.floats(0.01, 0.99))
@settings(max_examples=60, deadline=None)
def test_compactifier_round_trip(ends, frac):
    a, b = ends
    x0 = {(0.0, 1.0): 0.5, (0.0, math.inf): 1.0, (-math.inf, math.inf): 0.0, (-math.inf, 2.0): 1.0}[ends]
    comp = Compactifier(a, b, x0)
    for side in ("alpha", "beta"):
        d0 = float(comp.delta(x0, side))
        d = d0 * frac
        x = float(comp.point(d, side))
        assert a < x < b
        assert math.isclose(float(comp.delta(x, side)), d, rel_tol=1e-9)


@given(st.floats(0.05, 50.0), st.floats(0.05, 50.0))
@settings(max_examples=40, deadline=None)
def test_scale_is_increasing(x, y):
    ss = derive_scale_speed(catalog("cir", {"kappa": 1, "theta": 1, "sigma": 1}))
    if x == y:
        return
    px, py = ss.scale(np.array([x, y]))
    assert (px < py) == (x < y)
