"""Martingale verdicts for the discounted excessive processes and for ``p(X)``.

At ``beta`` the process ``exp(-r t) psi_r(X_t)`` is a true martingale when
``beta`` is accessible or natural and a strict local martingale when ``beta``
is entrance; ``phi_r`` at ``alpha`` is the mirror image.  Rows B to F are
independent numerical witnesses of the same dichotomy:

==== =========================================== ========= ============
row  quantity as x approaches the endpoint        natural   entrance
==== =========================================== ========= ============
B    psi_s / psi_r  (s > r)                       inf       ]0, inf[
C    psi_r / |p - p(endpoint)|  or  psi_r / |p|   inf       ]0, inf[
D    (d+psi_s/dp) / (d+psi_r/dp)                  inf       ]0, inf[
E    |d+psi_r/dp|                                 inf       ]0, inf[
F    int psi_r dm  toward the endpoint            inf       finite
==== =========================================== ========= ============
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ._grid import GAUSS_WEIGHTS, Tabulation
from .boundary import (BoundaryClass, BoundaryKind, ExtendedRealVerdict, _side, classify_boundary,
                       improper_from_contributions)
from .diffusion import DiffusionSpec, ScaleSpeed, derive_scale_speed
from .excessive import (DECREASING, INCREASING, DiscountRate, ExcessiveFunction, as_rate,
                        make_tabulation, solve_excessive, stage_log_values)
from .exceptions import InconclusiveError

N_SAMPLES = 12
CAUCHY_TOL = 1e-4
GROWTH_LIMIT = 1e8
SLOPE_MIN = 0.05


class Verdict(str, Enum):
    MARTINGALE = "Martingale"
    STRICT = "StrictLocalMartingale"
    DEGENERATE = "DegenerateZero"
    SUPER = "Supermartingale"
    SUB = "Submartingale"

    def __str__(self):
        return self.value


class Regime(str, Enum):
    DIVERGES = "DivergesToInfinity"
    FINITE = "FinitePositive"
    ZERO = "Zero"
    INCONCLUSIVE = "Inconclusive"

    def __str__(self):
        return self.value


PROCESS_FOR_SIDE = {"beta": "psi_side_beta", "alpha": "phi_side_alpha"}
SCALE_PROCESS = "scale_process"


@dataclass(frozen=True)
class MartingaleVerdict:
    process: str
    verdict: Verdict
    basis: object
    initial_state_note: bool = False
    supermartingale: bool | None = None
    submartingale: bool | None = None

    def as_dict(self):
        out = {"process": self.process, "verdict": self.verdict.value,
               "initial_state_note": self.initial_state_note}
        if self.process == SCALE_PROCESS:
            out["supermartingale"] = self.supermartingale
            out["submartingale"] = self.submartingale
        return out


@dataclass(frozen=True, eq=False)
class LimitEstimate:
    value: float
    samples: tuple
    regime: Regime
    slope: float = math.nan

    @property
    def column(self):
        return _COLUMN.get(self.regime)

    def as_dict(self):
        return {"value": self.value, "regime": self.regime.value,
                "samples": [[float(x), float(q)] for x, q in self.samples]}


_COLUMN = {Regime.DIVERGES: "natural", Regime.FINITE: "entrance"}


def verdict_from_boundary(bc: BoundaryClass, side, alpha_absorbing_and_started_there=False):
    """Martingale verdict for the excessive process attached to ``side``."""
    side = _side(side)
    if bc.side != side:
        raise ValueError(f"boundary class is for {bc.side}, not {side}")
    if alpha_absorbing_and_started_there:
        v = Verdict.DEGENERATE
    elif bc.kind is BoundaryKind.ENTRANCE:
        v = Verdict.STRICT
    else:
        v = Verdict.MARTINGALE
    return MartingaleVerdict(PROCESS_FOR_SIDE[side], v, bc, bool(alpha_absorbing_and_started_there))


def kotani_verdict(bc_alpha: BoundaryClass, bc_beta: BoundaryClass):
    """Martingale property of ``p(X)`` stopped at the boundaries.

    A martingale iff neither endpoint is entrance; a supermartingale iff
    ``alpha`` is not entrance and a submartingale iff ``beta`` is not.
    """
    sup = bc_alpha.kind is not BoundaryKind.ENTRANCE
    sub = bc_beta.kind is not BoundaryKind.ENTRANCE
    if sup and sub:
        v = Verdict.MARTINGALE
    elif sup:
        v = Verdict.SUPER
    elif sub:
        v = Verdict.SUB
    else:
        v = Verdict.STRICT
    return MartingaleVerdict(SCALE_PROCESS, v, (bc_alpha, bc_beta), False, sup, sub)


# -- limit extrapolation ---------------------------------------------------

def _tail_indices(n_grid, side, n=N_SAMPLES):
    # ordered from the interior toward the endpoint
    return np.arange(n_grid - n, n_grid) if side == "beta" else np.arange(n - 1, -1, -1)


def estimate_limit(x, log_q, log_inv_delta):
    """Classify the limit of a positive quantity from samples approaching an endpoint.

    ``FinitePositive`` if the samples agree to ``CAUCHY_TOL``.  Otherwise a
    monotone tail is ``DivergesToInfinity`` (or ``Zero``) when it moves by more
    than ``GROWTH_LIMIT`` across the window, or when ``log q`` keeps growing at
    least like ``SLOPE_MIN * log(1 / delta)`` without slowing down.
    """
    x = np.asarray(x, dtype=float)
    log_q = np.asarray(log_q, dtype=float)
    L = np.asarray(log_inv_delta, dtype=float)
    with np.errstate(over="ignore"):
        samples = tuple(zip(x.tolist(), np.exp(log_q).tolist()))
    if not np.all(np.isfinite(log_q)):
        # overflow to +inf on the way out counts as growth, anything else is noise
        if np.all(np.isfinite(log_q) | (log_q == np.inf)) and log_q[-1] == np.inf:
            return LimitEstimate(math.inf, samples, Regime.DIVERGES)
        return LimitEstimate(math.nan, samples, Regime.INCONCLUSIVE)
    spread = np.max(np.abs(np.expm1(log_q - log_q[-1])))
    slopes = np.diff(log_q) / np.diff(L)
    half = len(slopes) // 2
    early, late = float(np.mean(slopes[:half])), float(np.mean(slopes[half:]))
    if spread < CAUCHY_TOL:
        return LimitEstimate(float(math.exp(log_q[-1])), samples, Regime.FINITE, late)
    d = np.diff(log_q)
    tol = 1e-12 * np.maximum(1.0, np.abs(log_q[1:]))
    rise = log_q[-1] - log_q[0]
    if np.all(d >= -tol):
        if rise > math.log(GROWTH_LIMIT) or (late >= SLOPE_MIN and late >= 0.5 * early):
            return LimitEstimate(math.inf, samples, Regime.DIVERGES, late)
    if np.all(d <= tol):
        if -rise > math.log(GROWTH_LIMIT) or (late <= -SLOPE_MIN and late <= 0.5 * early):
            return LimitEstimate(0.0, samples, Regime.ZERO, late)
    return LimitEstimate(math.nan, samples, Regime.INCONCLUSIVE, late)


def _estimate_on_grid(tab, log_q, side):
    idx = _tail_indices(len(tab.grid), side)
    x = tab.grid[idx]
    L = -np.log(tab.comp.delta(x, side))
    return estimate_limit(x, np.asarray(log_q)[idx], L)


# -- rows ------------------------------------------------------------------

def _direction_for(side):
    return INCREASING if side == "beta" else DECREASING


def _function(ss, rate, side, f, tabulation):
    if f is not None:
        return f
    return solve_excessive(ss, rate, _direction_for(side), tabulation)


def _shared_tabulation(ss, rates, tabulation):
    if tabulation is not None:
        return tabulation
    return make_tabulation(ss, rates)


def _check_pair(r, s):
    if s.r < r.r:
        raise ValueError(f"rows B and D need s >= r, got r={r.r}, s={s.r}")


def row_B(ss, r, s, side="beta", *, f_r=None, f_s=None, tabulation=None) -> LimitEstimate:
    """Limit of ``psi_s / psi_r`` (``phi`` at ``alpha``)."""
    side = _side(side)
    r, s = as_rate(r), as_rate(s)
    _check_pair(r, s)
    tab = f_r.tabulation if f_r is not None else _shared_tabulation(ss, [r, s], tabulation)
    f_r = _function(ss, r, side, f_r, tab)
    f_s = _function(ss, s, side, f_s, tab)
    return _estimate_on_grid(tab, f_s.log_values - f_r.log_values, side)


def row_C(ss, r, side="beta", *, f_r=None, tabulation=None) -> LimitEstimate:
    """Limit of ``psi_r`` against the scale distance (see module docstring)."""
    side = _side(side)
    r = as_rate(r)
    tab = f_r.tabulation if f_r is not None else _shared_tabulation(ss, [r], tabulation)
    f_r = _function(ss, r, side, f_r, tab)
    return _estimate_on_grid(tab, f_r.log_values - tab.log_abs_scale(side), side)


def row_D(ss, r, s, side="beta", *, f_r=None, f_s=None, tabulation=None) -> LimitEstimate:
    """Limit of the ratio of scale derivatives of ``psi_s`` and ``psi_r``."""
    side = _side(side)
    r, s = as_rate(r), as_rate(s)
    _check_pair(r, s)
    tab = f_r.tabulation if f_r is not None else _shared_tabulation(ss, [r, s], tabulation)
    f_r = _function(ss, r, side, f_r, tab)
    f_s = _function(ss, s, side, f_s, tab)
    return _estimate_on_grid(tab, f_s.log_abs_scale_derivative - f_r.log_abs_scale_derivative, side)


def row_E(ss, r, side="beta", *, f_r=None, tabulation=None) -> LimitEstimate:
    """Limit of ``|d+psi_r/dp|`` at the endpoint."""
    side = _side(side)
    r = as_rate(r)
    tab = f_r.tabulation if f_r is not None else _shared_tabulation(ss, [r], tabulation)
    f_r = _function(ss, r, side, f_r, tab)
    return _estimate_on_grid(tab, f_r.log_abs_scale_derivative, side)


def row_F(ss, r, side="beta", x_ref=None, *, f_r=None, tabulation=None) -> ExtendedRealVerdict:
    """Convergence of ``int psi_r dm`` from ``x_ref`` toward the endpoint."""
    side = _side(side)
    r = as_rate(r)
    tab = f_r.tabulation if f_r is not None else _shared_tabulation(ss, [r], tabulation)
    x_ref = tab.x0 if x_ref is None else float(x_ref)
    hit = np.flatnonzero(tab.x_sub == x_ref)
    if not hit.size:
        if not tab.interval.is_interior(x_ref):
            raise ValueError(f"x_ref={x_ref} is not interior")
        tab = Tabulation(tab.ss, tab.config, extra_nodes=(x_ref,))
        f_r = None
        hit = np.flatnonzero(tab.x_sub == x_ref)
    start = int(hit[0])
    f_r = _function(ss, r, side, f_r, tab)
    log_f = stage_log_values(f_r)
    ell_stage = tab.ell_sub[:-1, None] + tab.d_stage
    with np.errstate(divide="ignore"):
        terms = log_f + np.log(tab.q_stage) - ell_stage + np.log(GAUSS_WEIGHTS)[None, :]
        contrib = np.log(tab.h) + np.logaddexp.reduce(terms, axis=1)
    lo, hi = tab.grid_sub[0], tab.grid_sub[-1]
    contrib[:lo] = -np.inf
    contrib[hi:] = -np.inf
    return improper_from_contributions(tab, contrib, start, side,
                                       what=f"row F integral at {side}")


# -- consolidated report ---------------------------------------------------

@dataclass(eq=False)
class SideReport:
    side: str
    boundary: BoundaryClass
    verdict: MartingaleVerdict
    rows: dict = field(default_factory=dict)
    column: str | None = None
    concordant: bool | None = None

    def as_dict(self):
        rows = {}
        for key, val in self.rows.items():
            if isinstance(val, ExtendedRealVerdict):
                rows[key] = {"value": val.value, "diverged": val.diverged,
                             "column": "natural" if val.diverged else "entrance"}
            else:
                rows[key] = {"value": val.value, "regime": val.regime.value, "column": val.column}
        return {"side": self.side, "boundary": self.boundary.as_dict(),
                "verdict": self.verdict.as_dict(), "rows": rows,
                "column": self.column, "concordant": self.concordant}


@dataclass(eq=False)
class Report:
    name: str
    params: dict
    rates: tuple
    sides: dict
    kotani: MartingaleVerdict
    functions: dict = field(default_factory=dict, repr=False)
    tabulation: Tabulation = field(default=None, repr=False)

    @property
    def verdicts(self):
        return {s.verdict.process: s.verdict.verdict for s in self.sides.values()}

    def as_dict(self):
        return {"diffusion": {"name": self.name, "params": self.params},
                "rates": list(self.rates),
                "sides": {k: v.as_dict() for k, v in self.sides.items()},
                "kotani": self.kotani.as_dict()}


def _row_column(val):
    if isinstance(val, ExtendedRealVerdict):
        return "natural" if val.diverged else "entrance"
    return val.column


def diagnostic_rows(ss, rates, side, tab, functions):
    """Rows B to F at ``side`` for every rate (and every pair ``s > r``)."""
    rates = sorted({as_rate(r).r for r in rates})
    direction = _direction_for(side)
    rows = {}
    for i, r in enumerate(rates):
        f_r = functions[(r, direction)]
        for s in rates[i + 1:]:
            f_s = functions[(s, direction)]
            rows[f"B(r={r:g},s={s:g})"] = row_B(ss, r, s, side, f_r=f_r, f_s=f_s)
            rows[f"D(r={r:g},s={s:g})"] = row_D(ss, r, s, side, f_r=f_r, f_s=f_s)
        rows[f"C(r={r:g})"] = row_C(ss, r, side, f_r=f_r)
        rows[f"E(r={r:g})"] = row_E(ss, r, side, f_r=f_r)
        rows[f"F(r={r:g})"] = row_F(ss, r, side, f_r=f_r)
    return rows


def full_report(spec, rates=(0.5, 1.0), *, strict=True, grid_config=None) -> Report:
    """Classification, solutions, rows B-F and verdicts in one pass.

    A single rate is paired with ``2 r`` so that rows B and D exist.  Rows are
    not evaluated at accessible endpoints.  With ``strict`` an undecidable row
    or rows landing in different columns raise :class:`InconclusiveError`.
    """
    if isinstance(spec, ScaleSpeed):
        ss, name, params = spec, "custom", {}
    else:
        ss = derive_scale_speed(spec)
        name, params = spec.name, dict(spec.params)
    rate_vals = sorted({as_rate(r).r for r in rates})
    if not rate_vals:
        raise ValueError("at least one rate is required")
    if len(rate_vals) == 1:
        rate_vals.append(2 * rate_vals[0])
    tab = make_tabulation(ss, rate_vals, grid_config)
    functions = {}
    for r in rate_vals:
        for d in (INCREASING, DECREASING):
            functions[(r, d)] = solve_excessive(ss, r, d, tab)
    sides = {}
    classes = {}
    for side in ("alpha", "beta"):
        bc = classify_boundary(ss, side, tabulation=tab)
        classes[side] = bc
        rep = SideReport(side, bc, verdict_from_boundary(bc, side))
        if not bc.accessible:
            try:
                rep.rows = diagnostic_rows(ss, rate_vals, side, tab, functions)
            except InconclusiveError as exc:
                raise InconclusiveError(f"{side}: {exc}", exc.evidence) from exc
            expected = "entrance" if bc.kind is BoundaryKind.ENTRANCE else "natural"
            cols = {k: _row_column(v) for k, v in rep.rows.items()}
            bad = [k for k, c in cols.items() if c is None]
            if bad and strict:
                raise InconclusiveError(f"{side}: row {bad[0]} is inconclusive", rep.rows[bad[0]])
            rep.concordant = all(c == expected for c in cols.values())
            rep.column = expected if rep.concordant else None
            if strict and not rep.concordant:
                off = [k for k, c in cols.items() if c != expected]
                raise InconclusiveError(
                    f"{side}: row {off[0]} lands in the {cols[off[0]]} column, "
                    f"classification says {expected}", rep.rows[off[0]])
        sides[side] = rep
    kot = kotani_verdict(classes["alpha"], classes["beta"])
    return Report(name, params, tuple(rate_vals), sides, kot, functions, tab)
