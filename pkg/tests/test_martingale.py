import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rexcessive import (BoundaryClass, BoundaryKind, InconclusiveError, Regime, Verdict, catalog,
                        derive_scale_speed, full_report, kotani_verdict, make_tabulation, row_B,
                        row_C, row_D, row_E, row_F, solve_excessive, verdict_from_boundary)
from rexcessive.martingale import estimate_limit

K_HALF, K_ONE = 1.0, math.sqrt(2.0)


def _bc(kind, side="beta"):
    return BoundaryClass(BoundaryKind(kind), (math.inf, math.inf), side)


@pytest.fixture(scope="module")
def bessel():
    ss = derive_scale_speed(catalog("bessel", {"delta": 3}))
    tab = make_tabulation(ss, [0.5, 1.0])
    fns = {(r, d): solve_excessive(ss, r, d, tab) for r in (0.5, 1.0) for d in ("increasing", "decreasing")}
    return ss, tab, fns


@pytest.fixture(scope="module")
def brownian():
    ss = derive_scale_speed(catalog("brownian"))
    tab = make_tabulation(ss, [0.5, 1.0])
    fns = {(r, d): solve_excessive(ss, r, d, tab) for r in (0.5, 1.0) for d in ("increasing", "decreasing")}
    return ss, tab, fns


@pytest.mark.parametrize("kind,expected", [
    ("InaccessibleNatural", Verdict.MARTINGALE),
    ("InaccessibleEntrance", Verdict.STRICT),
    ("Accessible", Verdict.MARTINGALE),
])
def test_verdict_from_boundary(kind, expected):
    v = verdict_from_boundary(_bc(kind), "beta")
    assert v.verdict is expected and v.process == "psi_side_beta"
    assert not v.initial_state_note


def test_degenerate_zero_only_with_flag():
    v = verdict_from_boundary(_bc("Accessible"), "beta", True)
    assert v.verdict is Verdict.DEGENERATE and v.initial_state_note


def test_verdict_side_mismatch():
    with pytest.raises(ValueError):
        verdict_from_boundary(_bc("Accessible", "alpha"), "beta")


def test_kotani_examples():
    nat, ent = "InaccessibleNatural", "InaccessibleEntrance"
    assert kotani_verdict(_bc(nat, "alpha"), _bc(nat)).verdict is Verdict.MARTINGALE
    v = kotani_verdict(_bc(ent, "alpha"), _bc(nat))
    assert v.verdict is Verdict.SUB and v.submartingale and not v.supermartingale
    v = kotani_verdict(_bc(nat, "alpha"), _bc(ent))
    assert v.verdict is Verdict.SUPER
    v = kotani_verdict(_bc(ent, "alpha"), _bc(ent))
    assert v.verdict is Verdict.STRICT and not v.submartingale and not v.supermartingale


# -- rows against closed forms ---------------------------------------------

def test_row_B_brownian_diverges(brownian):
    ss, _, fns = brownian
    est = row_B(ss, 0.5, 1.0, "beta", f_r=fns[(0.5, "increasing")], f_s=fns[(1.0, "increasing")])
    assert est.regime is Regime.DIVERGES and est.value == math.inf


def test_row_B_bessel_alpha_value(bessel):
    # phi_s / phi_r -> exp(k_s - k_r) at 0 with normalisation at 1
    ss, _, fns = bessel
    est = row_B(ss, 0.5, 1.0, "alpha", f_r=fns[(0.5, "decreasing")], f_s=fns[(1.0, "decreasing")])
    assert est.regime is Regime.FINITE
    assert est.value == pytest.approx(math.exp(K_ONE - K_HALF), rel=1e-8)


def test_row_B_equal_rates_is_one(bessel):
    ss, _, fns = bessel
    f = fns[(0.5, "decreasing")]
    est = row_B(ss, 0.5, 0.5, "alpha", f_r=f, f_s=f)
    assert est.regime is Regime.FINITE and est.value == 1.0


def test_row_B_rejects_reversed_rates(bessel):
    ss, tab, _ = bessel
    with pytest.raises(ValueError):
        row_B(ss, 1.0, 0.5, "alpha", tabulation=tab)


def test_row_C(bessel, brownian):
    ss, _, fns = bessel
    # phi / |p| = e^{-k(x-1)} / (1 - x) -> e^k
    est = row_C(ss, 0.5, "alpha", f_r=fns[(0.5, "decreasing")])
    assert est.regime is Regime.FINITE and est.value == pytest.approx(math.e, rel=1e-8)
    # at beta p is finite: psi / (p(inf) - p(x)) = x psi -> inf
    assert row_C(ss, 0.5, "beta", f_r=fns[(0.5, "increasing")]).regime is Regime.DIVERGES
    ss, _, fns = brownian
    assert row_C(ss, 0.5, "beta", f_r=fns[(0.5, "increasing")]).regime is Regime.DIVERGES


def test_row_D(bessel):
    ss, _, fns = bessel
    est = row_D(ss, 0.5, 1.0, "alpha", f_r=fns[(0.5, "decreasing")], f_s=fns[(1.0, "decreasing")])
    assert est.regime is Regime.FINITE
    assert est.value == pytest.approx(math.exp(K_ONE - K_HALF), rel=1e-7)


def test_row_E(bessel, brownian):
    ss, _, fns = bessel
    # |d phi/dp| = e^{-k(x-1)} (k x + 1) -> e^k
    est = row_E(ss, 0.5, "alpha", f_r=fns[(0.5, "decreasing")])
    assert est.regime is Regime.FINITE and est.value == pytest.approx(math.e, rel=1e-7)
    ss, _, fns = brownian
    f = fns[(0.5, "increasing")]
    assert row_E(ss, 0.5, "beta", f_r=f).regime is Regime.DIVERGES
    assert all(q >= 0 for _, q in row_E(ss, 0.5, "beta", f_r=f).samples)


def test_row_F(bessel, brownian):
    ss, _, fns = bessel
    # int_0^1 e^{-(y-1)} / y * 2 y^2 dy = 2e - 4
    v = row_F(ss, 0.5, "alpha", f_r=fns[(0.5, "decreasing")])
    assert not v.diverged and v.value == pytest.approx(2 * math.e - 4, rel=1e-6)
    ss, _, fns = brownian
    assert row_F(ss, 0.5, "beta", f_r=fns[(0.5, "increasing")]).diverged


def test_row_F_other_reference_point(bessel):
    ss, tab, _ = bessel
    # int_0^2 e^{-(y-1)} 2 y dy = 2e (1 - 3 e^{-2})
    v = row_F(ss, 0.5, "alpha", 2.0, tabulation=tab)
    assert v.value == pytest.approx(2 * math.e * (1 - 3 * math.exp(-2)), rel=1e-6)
    assert v.partial_sums[0] == 0.0


# -- invariance --------------------------------------------------------------

@given(st.floats(-6, 6), st.floats(-6, 6))
@settings(max_examples=10, deadline=None)
def test_regimes_invariant_under_rescaling(la, lb):
    ss, fns = _cir()
    for side, d in (("alpha", "decreasing"), ("beta", "increasing")):
        f_r, f_s = fns[(0.5, d)], fns[(1.0, d)]
        g_r, g_s = f_r.rescaled(10**la), f_s.rescaled(10**lb)
        for fn in (row_B, row_D):
            assert fn(ss, 0.5, 1.0, side, f_r=f_r, f_s=f_s).regime == \
                fn(ss, 0.5, 1.0, side, f_r=g_r, f_s=g_s).regime
        for fn in (row_C, row_E):
            assert fn(ss, 0.5, side, f_r=f_r).regime == fn(ss, 0.5, side, f_r=g_r).regime
        assert row_F(ss, 0.5, side, f_r=f_r).diverged == row_F(ss, 0.5, side, f_r=g_r).diverged


_CIR = []


def _cir():
    if not _CIR:
        ss = derive_scale_speed(catalog("cir", {"kappa": 1, "theta": 1, "sigma": 1}))
        tab = make_tabulation(ss, [0.5, 1.0])
        fns = {(r, d): solve_excessive(ss, r, d, tab) for r in (0.5, 1.0)
               for d in ("increasing", "decreasing")}
        _CIR.extend([ss, fns])
    return _CIR


@pytest.mark.parametrize("x0", [0.25, 3.0])
def test_row_C_E_invariant_under_reanchoring(x0):
    spec = catalog("cir", {"kappa": 1, "theta": 1, "sigma": 1})
    for s in (spec, spec.with_reference_point(x0)):
        ss = derive_scale_speed(s)
        assert row_C(ss, 0.5, "alpha").regime is Regime.FINITE
        assert row_E(ss, 0.5, "alpha").regime is Regime.FINITE
        assert row_C(ss, 0.5, "beta").regime is Regime.DIVERGES
        assert row_E(ss, 0.5, "beta").regime is Regime.DIVERGES


# -- limit rule ----------------------------------------------------------------

def test_limit_rule_cases():
    x = np.arange(12.0)
    L = np.linspace(10, 11, 12)
    assert estimate_limit(x, np.full(12, 0.3), L).regime is Regime.FINITE
    assert estimate_limit(x, 0.6 * L, L).regime is Regime.DIVERGES
    assert estimate_limit(x, -0.6 * L, L).regime is Regime.ZERO
    assert estimate_limit(x, 0.01 * L, L).regime is Regime.INCONCLUSIVE
    wiggle = 0.1 * np.sin(7 * L)
    assert estimate_limit(x, wiggle, L).regime is Regime.INCONCLUSIVE
    assert estimate_limit(x, np.linspace(0, 30, 12), L).regime is Regime.DIVERGES


def test_limit_estimate_invariants():
    L = np.linspace(1, 2, 12)
    for log_q in (np.zeros(12), 3 * L, -3 * L):
        est = estimate_limit(np.arange(12.0), log_q, L)
        if est.regime is Regime.DIVERGES:
            assert est.value == math.inf
        elif est.regime is Regime.ZERO:
            assert est.value == 0.0
        else:
            assert 0 < est.value < math.inf


# -- report --------------------------------------------------------------------

def test_full_report_bessel():
    rep = full_report(catalog("bessel", {"delta": 3}), [0.5])
    assert rep.rates == (0.5, 1.0)
    assert rep.verdicts == {"phi_side_alpha": Verdict.STRICT, "psi_side_beta": Verdict.MARTINGALE}
    assert rep.sides["alpha"].column == "entrance"
    assert rep.sides["beta"].column == "natural"
    assert rep.kotani.verdict is Verdict.SUB


def test_full_report_skips_rows_at_accessible_end():
    rep = full_report(catalog("cir", {"kappa": 1, "theta": 1, "sigma": 2}), [0.5, 1.0])
    assert rep.sides["alpha"].rows == {}
    assert rep.sides["alpha"].concordant is None
    assert rep.sides["beta"].concordant


def test_full_report_names_failing_row(monkeypatch):
    import rexcessive.martingale as m

    def broken(*a, **k):
        return m.LimitEstimate(math.nan, (), Regime.INCONCLUSIVE)

    monkeypatch.setattr(m, "row_E", broken)
    with pytest.raises(InconclusiveError, match=r"row E\(r=0.5\)"):
        full_report(catalog("brownian"), [0.5, 1.0])
