import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from rexcessive import (BoundaryKind, InconclusiveError, IntervalSpec, ScaleSpeed, catalog,
                        classify_boundary, derive_scale_speed, improper_feller_integral)
from rexcessive.boundary import decide_improper

CATALOG = [
    ("brownian", {}, "InaccessibleNatural", "InaccessibleNatural"),
    ("gbm", {"mu": 0.1, "sigma": 0.3}, "InaccessibleNatural", "InaccessibleNatural"),
    ("bessel", {"delta": 3}, "InaccessibleEntrance", "InaccessibleNatural"),
    ("cir", {"kappa": 1, "theta": 1, "sigma": 1}, "InaccessibleEntrance", "InaccessibleNatural"),
    ("cir", {"kappa": 1, "theta": 1, "sigma": 2}, "Accessible", "InaccessibleNatural"),
    ("ou", {"kappa": 1, "theta": 0, "sigma": 1}, "InaccessibleNatural", "InaccessibleNatural"),
]


@pytest.mark.parametrize("family,params,alpha,beta", CATALOG)
def test_catalog_classes(family, params, alpha, beta):
    ss = derive_scale_speed(catalog(family, params))
    assert classify_boundary(ss, "alpha").kind.value == alpha
    assert classify_boundary(ss, "beta").kind.value == beta


def test_bessel3_entrance_integral_is_one_third():
    ss = derive_scale_speed(catalog("bessel", {"delta": 3}))
    bc = classify_boundary(ss, "alpha")
    assert bc.test_values[0] == math.inf
    assert bc.test_values[1] == pytest.approx(1 / 3, rel=1e-8)


@pytest.mark.parametrize("delta,access,nature", [(1.5, 2.0, 2 / 3), (2.0, math.inf, 0.5)])
def test_bessel_family_closed_forms(delta, access, nature):
    # p' = x^{1-delta}, m' = 2 x^{delta-1}; integrals from x_ref = 1 toward 0
    bc = classify_boundary(derive_scale_speed(catalog("bessel", {"delta": delta})), "alpha")
    if math.isinf(access):
        assert bc.test_values[0] == math.inf
    else:
        assert bc.test_values[0] == pytest.approx(access, rel=1e-7)
    assert bc.test_values[1] == pytest.approx(nature, rel=1e-7)


def test_cir_values_match_nested_quadrature():
    sd, md = oracles.cir_densities(1, 1, 1, 1.0)
    bc = classify_boundary(derive_scale_speed(catalog("cir", {"kappa": 1, "theta": 1, "sigma": 1})), "alpha")
    assert bc.test_values[1] == pytest.approx(oracles.feller_nature_alpha(sd, md, 1.0), rel=1e-8)

    sd, md = oracles.cir_densities(1, 1, 2, 1.0)
    bc = classify_boundary(derive_scale_speed(catalog("cir", {"kappa": 1, "theta": 1, "sigma": 2})), "alpha")
    assert bc.kind is BoundaryKind.ACCESSIBLE
    assert bc.test_values[0] == pytest.approx(oracles.feller_access_alpha(sd, md, 1.0), rel=1e-8)
    assert bc.test_values[1] == pytest.approx(oracles.feller_nature_alpha(sd, md, 1.0), rel=1e-8)


@pytest.mark.parametrize("x_ref", [0.3, 1.0, 4.0])
def test_kind_independent_of_reference_point(x_ref):
    ss = derive_scale_speed(catalog("cir", {"kappa": 1, "theta": 1, "sigma": 1}))
    assert classify_boundary(ss, "alpha", x_ref).kind is BoundaryKind.ENTRANCE
    assert classify_boundary(ss, "beta", x_ref).kind is BoundaryKind.NATURAL


def test_nature_value_tracks_reference_point():
    # Bessel(3): int_0^x (1/z - 1/x) 2 z^2 dz = x^2 / 3
    ss = derive_scale_speed(catalog("bessel", {"delta": 3}))
    v = improper_feller_integral(ss, 2.0, "alpha", "nature")
    assert v.value == pytest.approx(4 / 3, rel=1e-8)


def test_evidence_shapes():
    ss = derive_scale_speed(catalog("bessel", {"delta": 3}))
    v = improper_feller_integral(ss, None, "alpha", "nature")
    assert v.partial_sums[0] == 0.0
    assert v.truncation_points[0] == 1.0
    assert len(v.partial_sums) == len(v.truncation_points)
    assert np.all(np.diff(v.truncation_points) < 0)
    assert np.all(np.diff(v.partial_sums) >= 0)


def test_direct_densities():
    ss = ScaleSpeed.from_densities(IntervalSpec(0, math.inf), 1.0, lambda x: x**-2.0, lambda x: 2 * x**2)
    assert classify_boundary(ss, "alpha").kind is BoundaryKind.ENTRANCE
    assert classify_boundary(ss, "beta").kind is BoundaryKind.NATURAL


def test_finite_interval_brownian_is_accessible():
    from rexcessive import DiffusionSpec
    spec = DiffusionSpec(IntervalSpec(0.0, 1.0), lambda x: 0 * x, lambda x: 1 + 0 * x, 0.5)
    ss = derive_scale_speed(spec)
    for side in ("alpha", "beta"):
        bc = classify_boundary(ss, side)
        assert bc.accessible
        # int_0^{1/2} 2 (1/2 - y) dy = 1/4
        assert bc.test_values[0] == pytest.approx(0.25, rel=1e-9)


def test_bad_side_and_reference():
    ss = derive_scale_speed(catalog("brownian"))
    with pytest.raises(ValueError):
        classify_boundary(ss, "gamma")
    ss = derive_scale_speed(catalog("bessel", {"delta": 3}))
    with pytest.raises(ValueError):
        classify_boundary(ss, "alpha", x_ref=-1.0)


# -- the decision rule on synthetic sequences ---------------------------------

def _power_increments(a, n=40, ratio=0.5, c=1.0):
    deltas = ratio ** np.arange(n + 1)
    lo = c * deltas[1:] ** a
    return np.log(lo), np.log(deltas)


@given(st.floats(0.3, 3.0), st.floats(0.1, 10.0))
@settings(max_examples=40, deadline=None)
def test_geometric_tail_is_summed(a, c):
    log_inc, log_d = _power_increments(a, c=c)
    v = decide_improper(log_inc, np.exp(log_d), log_d)
    exact = c * sum(0.5 ** (a * k) for k in range(1, 10_000))
    assert not v.diverged
    assert v.value == pytest.approx(exact, rel=1e-9)


@given(st.floats(-2.0, 0.0))
@settings(max_examples=30, deadline=None)
def test_non_decaying_increments_diverge(a):
    log_inc, log_d = _power_increments(a, c=1e-3)
    v = decide_improper(log_inc, np.exp(log_d), log_d)
    assert v.diverged and v.value == math.inf


def test_cap_triggers_divergence():
    log_d = np.log(0.5 ** np.arange(41))
    log_inc = np.full(40, math.log(1e11))
    assert decide_improper(log_inc, np.exp(log_d), log_d).diverged


def test_borderline_decay_is_inconclusive():
    log_inc, log_d = _power_increments(0.035, c=1e-6)
    with pytest.raises(InconclusiveError) as exc:
        decide_improper(log_inc, np.exp(log_d), log_d)
    assert exc.value.evidence is not None


def test_empty_integral_is_zero():
    v = decide_improper(np.array([]), np.array([1.0]), np.array([0.0]))
    assert v.value == 0.0 and not v.diverged
