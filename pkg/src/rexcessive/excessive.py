"""The increasing and decreasing r-excessive functions of a diffusion.

``psi`` (increasing) and ``phi`` (decreasing) are the positive solutions of
``d/dm d+f/dp = r f`` singled out by their behaviour at the left and right
endpoint respectively.  They are computed on a grid as

* the solution vanishing at a guard node next to ``alpha`` (``psi``), or
* the solution vanishing at a guard node next to ``beta`` (``phi``),

which converge to the minimal positive solutions as the guard approaches the
endpoint.  Propagation runs in the direction in which the wanted solution
dominates, so contamination by the other solution decays along the sweep.
Each sub-cell step comes from Picard iteration on the Volterra form of the
equation; see :meth:`Tabulation.transfer`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import BPoly

from ._grid import GridConfig, Tabulation
from ._interp import MonotoneHermite
from .exceptions import SolverError

INCREASING = "increasing"
DECREASING = "decreasing"
_ALIASES = {"increasing": INCREASING, "psi": INCREASING, "decreasing": DECREASING, "phi": DECREASING}


def _direction(direction):
    try:
        return _ALIASES[str(direction).lower()]
    except KeyError:
        raise ValueError(f"direction must be 'increasing' or 'decreasing', got {direction!r}") from None


@dataclass(frozen=True)
class DiscountRate:
    r: float

    def __post_init__(self):
        r = float(self.r)
        if not (math.isfinite(r) and r > 0):
            raise ValueError(f"discount rate must be finite and > 0, got {self.r}")
        object.__setattr__(self, "r", r)

    def __float__(self):
        return self.r


def as_rate(rate):
    return rate if isinstance(rate, DiscountRate) else DiscountRate(rate)


@dataclass(frozen=True, eq=False)
class ExcessiveFunction:
    """Grid representation of ``psi_r`` or ``phi_r``.

    Values and scale derivatives are kept as logarithms; ``values`` and
    ``scale_derivative`` exponentiate on access and may overflow to ``inf``
    at inaccessible endpoints.  ``log_constant`` is the log of the value at the
    normalization point (0 unless the function was rescaled).
    """

    direction: str
    rate: DiscountRate
    grid: np.ndarray
    log_values: np.ndarray
    log_abs_scale_derivative: np.ndarray
    normalization_point: float
    tabulation: Tabulation = field(repr=False)
    log_constant: float = 0.0
    sub_log_values: np.ndarray = field(default=None, repr=False)
    sub_log_abs_scale_derivative: np.ndarray = field(default=None, repr=False)

    @property
    def sign(self):
        return 1.0 if self.direction == INCREASING else -1.0

    @property
    def values(self):
        with np.errstate(over="ignore"):
            return np.exp(self.log_values)

    @property
    def scale_derivative(self):
        with np.errstate(over="ignore"):
            return self.sign * np.exp(self.log_abs_scale_derivative)

    @property
    def scale(self):
        """``p`` on the grid (anchored at the reference point)."""
        return self.tabulation.scale_on_grid()

    def rescaled(self, factor):
        """The same function multiplied by a positive constant."""
        factor = float(factor)
        if not factor > 0:
            raise ValueError("rescaling factor must be positive")
        lc = math.log(factor)
        return replace(
            self,
            log_values=self.log_values + lc,
            log_abs_scale_derivative=self.log_abs_scale_derivative + lc,
            log_constant=self.log_constant + lc,
            sub_log_values=self.sub_log_values + lc,
            sub_log_abs_scale_derivative=self.sub_log_abs_scale_derivative + lc,
        )

    def _sub_nodes(self):
        """Sub-grid indices inside the output hull, three or so per grid cell."""
        tab = self.tabulation
        idx = np.arange(tab.grid_sub[0], tab.grid_sub[-1] + 1)
        ok = np.isfinite(self.sub_log_values[idx]) & np.isfinite(self.sub_log_abs_scale_derivative[idx])
        return idx[ok]

    def _log_slopes(self, idx):
        tab = self.tabulation
        return self.sign * np.exp(self.sub_log_abs_scale_derivative[idx] + tab.ell_sub[idx]
                                  - self.sub_log_values[idx])

    def _check_hull(self, x):
        x = np.asarray(x, dtype=float)
        if np.any((x < self.grid[0]) | (x > self.grid[-1])) or np.any(np.isnan(x)):
            raise ValueError(
                f"evaluation point outside the grid hull [{self.grid[0]:.6g}, {self.grid[-1]:.6g}]"
            )
        return x

    def log_evaluate(self, x):
        x = self._check_hull(x)
        interp = self.__dict__.get("_log_interp")
        if interp is None:
            interp = self._build_log_interp()
            object.__setattr__(self, "_log_interp", interp)
        return interp(x)

    def _build_log_interp(self):
        tab = self.tabulation
        idx = self._sub_nodes()
        x, y, w = tab.x_sub[idx], self.sub_log_values[idx], self._log_slopes(idx)
        slope_fn = tab.ss.log_scale_slope
        if slope_fn is None:
            return MonotoneHermite(x, y, w)
        # quintic Hermite: (log f)'' = r m'p' + w (log p')' - w^2 from the generator
        q = np.asarray(tab.ss.speed_scale_product(x), dtype=float)
        w2 = self.rate.r * q + w * np.asarray(slope_fn(x), dtype=float) - w * w
        poly = BPoly.from_derivatives(x, np.column_stack([y, w, w2]), extrapolate=False)

        def interp(xq):
            out = poly(xq)
            k = np.clip(np.searchsorted(x, xq), 0, len(x) - 1)
            return np.where(x[k] == xq, y[k], out)

        return interp

    def log_abs_scale_derivative_at(self, x):
        x = self._check_hull(x)
        interp = self.__dict__.get("_dlog_interp")
        if interp is None:
            tab = self.tabulation
            idx = self._sub_nodes()
            xs = tab.x_sub[idx]
            q = np.asarray(tab.ss.speed_scale_product(xs), dtype=float)
            lg = self.sub_log_abs_scale_derivative[idx]
            # d/dx log|g| = g'/g with g' = r f m'
            slope = self.sign * self.rate.r * np.exp(
                self.sub_log_values[idx] + np.log(q) - tab.ell_sub[idx] - lg
            )
            interp = MonotoneHermite(xs, lg, slope)
            object.__setattr__(self, "_dlog_interp", interp)
        return interp(x)


def evaluate(f: ExcessiveFunction, x):
    """Value of ``f`` at ``x`` by shape-preserving cubic interpolation.

    The interpolation runs on ``log f`` with slopes taken from the solver, so
    monotonicity is preserved and node values are reproduced exactly.
    """
    with np.errstate(over="ignore"):
        out = np.exp(f.log_evaluate(x))
    return float(out) if np.ndim(out) == 0 else out


def scale_derivative_at(f: ExcessiveFunction, x):
    """Interpolated ``d+f/dp`` at ``x``."""
    with np.errstate(over="ignore"):
        out = f.sign * np.exp(f.log_abs_scale_derivative_at(x))
    return float(out) if np.ndim(out) == 0 else out


def make_tabulation(ss, rates=(1.0,), config=None, extra_nodes=()):
    """Tabulation resolving solutions for every rate in ``rates``."""
    rmax = max(float(as_rate(r).r) for r in rates)
    if config is None:
        config = GridConfig(rate_max=rmax)
    elif config.rate_max < rmax:
        config = replace(config, rate_max=rmax)
    return Tabulation(ss, config, extra_nodes=extra_nodes)


def _propagate(T, forward):
    """Sweep ``(f, f')`` through the transfer matrices from a Dirichlet start."""
    S = len(T)
    rows = T.reshape(S, 4).tolist()
    u0s = [0.0] * (S + 1)
    u1s = [0.0] * (S + 1)
    cs = [0.0] * (S + 1)
    c = 0.0
    log = math.log
    if forward:
        u0, u1 = 0.0, 1.0
        u0s[0], u1s[0] = u0, u1
        for s in range(S):
            a, b, cc, d = rows[s]
            u0, u1 = a * u0 + b * u1, cc * u0 + d * u1
            m = abs(u0) if abs(u0) > abs(u1) else abs(u1)
            if m > 1e100 or m < 1e-100:
                u0 /= m
                u1 /= m
                c += log(m)
            u0s[s + 1], u1s[s + 1], cs[s + 1] = u0, u1, c
    else:
        u0, u1 = 0.0, -1.0
        u0s[S], u1s[S] = u0, u1
        for s in range(S - 1, -1, -1):
            a, b, cc, d = rows[s]
            det = a * d - b * cc
            u0, u1 = (d * u0 - b * u1) / det, (a * u1 - cc * u0) / det
            m = abs(u0) if abs(u0) > abs(u1) else abs(u1)
            if m > 1e100 or m < 1e-100:
                u0 /= m
                u1 /= m
                c += log(m)
            u0s[s], u1s[s], cs[s] = u0, u1, c
    return np.array(u0s), np.array(u1s), np.array(cs)


def solve_excessive(ss, rate, direction=INCREASING, grid_spec=None) -> ExcessiveFunction:
    """Construct ``psi_r`` (increasing) or ``phi_r`` (decreasing).

    ``grid_spec`` is a :class:`Tabulation` to reuse (required when several
    functions must share one grid), a :class:`GridConfig`, or ``None``.
    The result is normalised to 1 at the reference point.
    """
    rate = as_rate(rate)
    direction = _direction(direction)
    if isinstance(grid_spec, Tabulation):
        tab = grid_spec
        if tab.config.rate_max < rate.r:
            tab = make_tabulation(ss, [rate], replace(tab.config, rate_max=rate.r))
    else:
        tab = make_tabulation(ss, [rate], grid_spec)
    T = tab.transfer(rate.r)
    forward = direction == INCREASING
    u0, u1, c = _propagate(T, forward)
    sign = 1.0 if forward else -1.0
    inner = slice(1, -1)
    with np.errstate(divide="ignore", invalid="ignore"):
        logf = c + np.log(u0)
        logg = c + np.log(sign * u1) - tab.ell_sub
    bad = ~(np.isfinite(logf[inner]) & np.isfinite(logg[inner]))
    if bad.any():
        i = int(np.flatnonzero(bad)[0]) + 1
        raise SolverError(
            f"{direction} solution lost positivity or overflowed at x={tab.x_sub[i]:.6g}",
            location=float(tab.x_sub[i]),
        )
    norm = logf[tab.i0_sub]
    logf = logf - norm
    logg = logg - norm
    logf[tab.i0_sub] = 0.0
    idx = tab.grid_sub
    return ExcessiveFunction(
        direction=direction,
        rate=rate,
        grid=tab.grid.copy(),
        log_values=logf[idx],
        log_abs_scale_derivative=logg[idx],
        normalization_point=tab.x0,
        tabulation=tab,
        sub_log_values=logf,
        sub_log_abs_scale_derivative=logg,
    )


def stage_log_values(f: ExcessiveFunction):
    """``log f`` at the Gauss stages of every sub-cell.

    Cubic Hermite in ``log f`` on each sub-cell, using the exact end slopes.
    Sub-cells touching a guard node (where ``f`` vanishes) get ``-inf``.
    """
    tab = f.tabulation
    y = f.sub_log_values
    with np.errstate(invalid="ignore", over="ignore"):
        m = f.sign * np.exp(f.sub_log_abs_scale_derivative + tab.ell_sub - y)
    h = tab.h
    y0, y1 = y[:-1], y[1:]
    m0, m1 = m[:-1] * h, m[1:] * h
    t = tab.stages - tab.x_sub[:-1, None]
    t = t / h[:, None]
    t2, t3 = t * t, t * t * t
    h00 = 2 * t3 - 3 * t2 + 1
    h10 = t3 - 2 * t2 + t
    h01 = -2 * t3 + 3 * t2
    h11 = t3 - t2
    with np.errstate(invalid="ignore"):
        out = (h00 * y0[:, None] + h10 * m0[:, None] + h01 * y1[:, None] + h11 * m1[:, None])
    bad = ~(np.isfinite(y0) & np.isfinite(y1) & np.isfinite(m0) & np.isfinite(m1))
    out[bad] = -np.inf
    return out
