"""Monte Carlo checks by Euler-Maruyama simulation.

Paths are simulated in batches.  Batch ``b`` draws from a Philox stream keyed
by ``(seed, b)``, so every batch is reproducible on its own and results do not
depend on the order in which batches run.  Sums are reduced per batch and
then folded in batch order.

Near an inaccessible finite endpoint an overshooting Euler step is reflected
back by the overshoot; the exact diffusion never gets there and this is only
a discretisation guard.  At an accessible finite endpoint the path is
absorbed, with the absorption time interpolated linearly inside the step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .boundary import classify_boundary
from .diffusion import DiffusionSpec, derive_scale_speed
from .excessive import ExcessiveFunction, as_rate, evaluate
from .exceptions import InconclusiveError, SimulationError

ABSORB = "absorb-at-accessible"
MAX_RECORDED = 20_000_000  # states kept in memory when recording every step
HULL_EXIT_LIMIT = 1e-3


@dataclass(frozen=True)
class SimulationConfig:
    initial_state: float
    horizon: float
    step: float
    paths: int
    seed: int = 0
    boundary_policy: str = ABSORB
    batch_size: int = 20_000
    confidence: float = 0.99

    def __post_init__(self):
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise ValueError("horizon must be positive and finite")
        if not (0 < self.step < self.horizon):
            raise ValueError("step must satisfy 0 < step < horizon")
        if int(self.paths) < 100:
            raise ValueError("at least 100 paths are required")
        if self.boundary_policy != ABSORB:
            raise ValueError(f"only the {ABSORB!r} boundary policy is supported")
        if not 0 < self.confidence < 1:
            raise ValueError("confidence must lie in (0, 1)")
        if int(self.batch_size) < 1:
            raise ValueError("batch_size must be positive")
        object.__setattr__(self, "paths", int(self.paths))
        object.__setattr__(self, "batch_size", int(self.batch_size))
        object.__setattr__(self, "seed", int(self.seed) & (2**64 - 1))

    @property
    def n_steps(self):
        return int(round(self.horizon / self.step))

    def batches(self):
        """``(batch_index, start, stop)`` for the fixed batch plan."""
        out = []
        for b, start in enumerate(range(0, self.paths, self.batch_size)):
            out.append((b, start, min(start + self.batch_size, self.paths)))
        return out

    def replace(self, **kw):
        d = dict(self.__dict__)
        d.update(kw)
        return SimulationConfig(**d)


@dataclass(frozen=True, eq=False)
class PathEnsemble:
    """Simulated states at ``times`` (every step unless a subset was requested)."""

    times: np.ndarray
    states: np.ndarray
    absorbed: np.ndarray
    absorption_time: np.ndarray
    rng_stream_ids: tuple
    config: SimulationConfig = field(repr=False, default=None)

    @property
    def absorption_flags(self):
        return self.absorbed

    @property
    def final(self):
        return self.states[:, -1]


@dataclass(frozen=True)
class EstimateWithCI:
    mean: float
    half_width: float
    n_effective: int
    warning: str | None = None

    def z_score(self, reference=0.0):
        if self.half_width == 0:
            return 0.0 if self.mean == reference else math.copysign(math.inf, self.mean - reference)
        return (self.mean - reference) / self.half_width

    def as_dict(self):
        d = {"mean": self.mean, "half_width": self.half_width, "n_effective": self.n_effective}
        if self.warning:
            d["warning"] = self.warning
        return d


def stream(seed, batch):
    """Counter-based generator for one batch."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(batch)])))


def _z(confidence):
    return float(stats.norm.ppf(0.5 + confidence / 2.0))


def _estimate(values_by_batch, confidence, warning=None):
    sums = [float(np.sum(v)) for v in values_by_batch]
    n = sum(len(v) for v in values_by_batch)
    mean = sum(sums) / n
    # centre before squaring to keep the variance accurate
    sq = [float(np.sum((v - mean) ** 2)) for v in values_by_batch]
    var = sum(sq) / (n - 1)
    return EstimateWithCI(float(mean), _z(confidence) * math.sqrt(var / n), n, warning)


def _accessible_sides(spec):
    ss = derive_scale_speed(spec)
    out = {}
    for side in ("alpha", "beta"):
        if not spec.interval.is_finite(side):
            out[side] = False
            continue
        out[side] = classify_boundary(ss, side).accessible
    return out


def _record_indices(n_steps, step, record_times):
    if record_times is None:
        return np.arange(n_steps + 1)
    t = np.asarray(record_times, dtype=float)
    idx = np.unique(np.clip(np.rint(t / step).astype(int), 0, n_steps))
    return idx


def _simulate_batch(spec, cfg, rng, n, rec_idx, accessible, level=None, bridge=False):
    """One batch; returns recorded states, absorbed flags, absorption times."""
    a, b = spec.interval.alpha, spec.interval.beta
    dt = cfg.step
    sq = math.sqrt(dt)
    n_steps = cfg.n_steps
    x = np.full(n, float(cfg.initial_state))
    alive = np.ones(n, dtype=bool)
    t_abs = np.full(n, math.inf)
    rec = np.empty((n, len(rec_idx)))
    k_rec = 0
    if rec_idx[0] == 0:
        rec[:, 0] = x
        k_rec = 1
    drift, vol = spec.drift, spec.volatility
    for k in range(n_steps):
        z = rng.standard_normal(n)
        u = rng.random(n) if bridge else None
        live = np.flatnonzero(alive)
        if live.size:
            xl = x[live]
            sig = vol(xl)
            xn = xl + drift(xl) * dt + sig * sq * z[live]
            if not np.all(np.isfinite(xn)):
                raise SimulationError(f"non-finite state after step {k + 1}")
            t0 = k * dt
            hit = np.zeros(live.size, dtype=bool)
            frac = np.ones(live.size)
            if level is not None:
                up = level >= cfg.initial_state
                crossed = (xn >= level) if up else (xn <= level)
                with np.errstate(divide="ignore", invalid="ignore"):
                    f = np.where(crossed, (level - xl) / (xn - xl), 1.0)
                if bridge:
                    # crossing inside the step although both ends stay below
                    gap0, gap1 = np.abs(level - xl), np.abs(level - xn)
                    p = np.exp(-2.0 * gap0 * gap1 / (sig * sig * dt))
                    inside = ~crossed & (u[live] < p)
                    crossed = crossed | inside
                    f = np.where(inside, 0.5, f)
                hit |= crossed
                frac = np.where(crossed, f, frac)
                xn = np.where(crossed, level, xn)
            lo, hi = xn <= a, xn >= b
            if lo.any():
                if accessible["alpha"]:
                    frac = np.where(lo & ~hit, (xl - a) / (xl - xn), frac)
                    hit |= lo
                    xn = np.where(lo, a, xn)
                else:
                    xn = np.where(lo, 2 * a - xn, xn)
            if hi.any():
                if accessible["beta"]:
                    frac = np.where(hi & ~hit, (b - xl) / (xn - xl), frac)
                    hit |= hi
                    xn = np.where(hi, b, xn)
                else:
                    xn = np.where(hi, 2 * b - xn, xn)
            # reflection that overshoots the opposite side collapses to the nearest float
            bad = ~hit & ((xn <= a) | (xn >= b))
            if bad.any():
                xn = np.where(bad & (xn <= a), np.nextafter(a, b), xn)
                xn = np.where(bad & (xn >= b), np.nextafter(b, a), xn)
            x[live] = xn
            if hit.any():
                idx = live[hit]
                t_abs[idx] = t0 + np.clip(frac[hit], 0.0, 1.0) * dt
                alive[idx] = False
        if k_rec < len(rec_idx) and rec_idx[k_rec] == k + 1:
            rec[:, k_rec] = x
            k_rec += 1
    return rec, ~alive, t_abs


def simulate(spec: DiffusionSpec, cfg: SimulationConfig, record_times=None, *, accessible=None,
             level=None, bridge=False) -> PathEnsemble:
    """Euler-Maruyama paths of ``spec`` started at ``cfg.initial_state``.

    ``record_times`` selects the times whose states are kept (snapped to the
    step grid); by default every step is kept, which is refused above
    ``MAX_RECORDED`` states.  ``level`` adds an absorbing level, optionally
    with a Brownian-bridge test for crossings inside a step.
    """
    if not spec.interval.is_interior(cfg.initial_state):
        raise ValueError(f"initial state {cfg.initial_state} is not interior")
    if accessible is None:
        accessible = _accessible_sides(spec)
    rec_idx = _record_indices(cfg.n_steps, cfg.step, record_times)
    if cfg.paths * len(rec_idx) > MAX_RECORDED:
        raise SimulationError(
            f"recording {len(rec_idx)} times for {cfg.paths} paths exceeds the in-memory limit; "
            "pass record_times"
        )
    states, absorbed, t_abs, ids = [], [], [], []
    for b, start, stop in cfg.batches():
        rng = stream(cfg.seed, b)
        rec, ab, ta = _simulate_batch(spec, cfg, rng, stop - start, rec_idx, accessible, level, bridge)
        states.append(rec)
        absorbed.append(ab)
        t_abs.append(ta)
        ids.append((cfg.seed, b))
    return PathEnsemble(rec_idx * cfg.step, np.concatenate(states), np.concatenate(absorbed),
                        np.concatenate(t_abs), tuple(ids), cfg)


def _batched(ens, values):
    return [values[start:stop] for _, start, stop in ens.config.batches()]


def _evaluate_clipped(f, x):
    """``f`` at states, clamping into the grid hull; returns values and exit fraction."""
    lo, hi = f.grid[0], f.grid[-1]
    outside = (x < lo) | (x > hi)
    vals = evaluate(f, np.clip(x, lo, hi))
    return np.atleast_1d(vals), float(np.mean(outside))


def discounted_values(f: ExcessiveFunction, ens: PathEnsemble, r, col=-1):
    """``exp(-r (t ^ T)) f(X_{t ^ T})`` per path at recorded column ``col``."""
    r = as_rate(r).r
    t = ens.times[col]
    stop = np.minimum(ens.absorption_time, t)
    vals, exit_frac = _evaluate_clipped(f, ens.states[:, col])
    return np.exp(-r * stop) * vals, exit_frac


def deficit_curve(spec, r, f: ExcessiveFunction, cfg: SimulationConfig, times):
    """Martingale deficits at several times from one set of paths."""
    r = as_rate(r)
    fx = float(evaluate(f, cfg.initial_state))
    ens = simulate(spec, cfg, record_times=times)
    lo, hi = f.grid[0], f.grid[-1]
    out = []
    for j in range(len(ens.times)):
        x = ens.states[:, j]
        live = ~(ens.absorbed & (ens.absorption_time <= ens.times[j]))
        exit_frac = float(np.mean(live & ((x < lo) | (x > hi))))
        if exit_frac > HULL_EXIT_LIMIT:
            raise SimulationError(f"{100 * exit_frac:.3g}% of paths left the grid of f")
        disc, _ = discounted_values(f, ens, r, col=j)
        warning = f"{100 * exit_frac:.3g}% of paths clamped to the grid of f" if exit_frac else None
        out.append(_estimate(_batched(ens, fx - disc), cfg.confidence, warning))
    return ens.times, out


def martingale_deficit(spec, r, f: ExcessiveFunction, cfg: SimulationConfig) -> EstimateWithCI:
    """``f(x) - E_x[exp(-r (t ^ T)) f(X_{t ^ T})]`` with a confidence interval.

    ``T`` is the absorption time at accessible endpoints.  Paths ending outside
    the grid of ``f`` are clamped; more than 0.1% of them rejects the run.
    """
    return deficit_curve(spec, r, f, cfg, [cfg.horizon])[1][-1]


def scale_gap(spec, cfg: SimulationConfig, scale_fn) -> EstimateWithCI:
    """``E_x[p(X_{t ^ T})] - p(x)``; zero when ``p(X)`` is a martingale.

    Positive when ``p(X)`` is a strict submartingale-type local martingale, as
    for the three-dimensional Bessel process with ``p = 1 - 1/x``.
    """
    ens = simulate(spec, cfg, record_times=[cfg.horizon])
    px = float(scale_fn(np.asarray(cfg.initial_state)))
    vals = np.asarray(scale_fn(ens.final), dtype=float) - px
    return _estimate(_batched(ens, vals), cfg.confidence)


def hitting_laplace(spec, x, y, r, cfg: SimulationConfig, *, bridge=True) -> EstimateWithCI:
    """``E_x[exp(-r T_y)]`` by simulation absorbed at ``y``.

    Paths not hitting ``y`` by the horizon contribute 0, so the estimate is low
    by at most ``exp(-r * horizon)``.  The Brownian-bridge test catches
    crossings between grid times.
    """
    r = as_rate(r).r
    x, y = float(x), float(y)
    if not (spec.interval.is_interior(x) and spec.interval.is_interior(y)):
        raise ValueError("x and y must be interior")
    if x == y:
        return EstimateWithCI(1.0, 0.0, cfg.paths)
    cfg = cfg.replace(initial_state=x)
    ens = simulate(spec, cfg, record_times=[cfg.horizon], level=y, bridge=bridge)
    hit = np.isfinite(ens.absorption_time) & np.isclose(ens.final, y, rtol=0, atol=0)
    vals = np.where(hit, np.exp(-r * np.where(hit, ens.absorption_time, 0.0)), 0.0)
    censored = 1.0 - float(np.mean(hit))
    bound = math.exp(-r * cfg.horizon)
    warning = None
    if censored > 0 and bound > 0.5 * _z(cfg.confidence) * np.std(vals) / math.sqrt(cfg.paths):
        warning = f"censoring bias up to {bound:.3g} ({100 * censored:.3g}% of paths censored)"
    return _estimate(_batched(ens, vals), cfg.confidence, warning)


def time_grid(step, horizon, n=64):
    """``0`` followed by ``n`` geometric points on ``[step, horizon]``."""
    return np.concatenate([[0.0], np.geomspace(step, horizon, n)])


def exp_trapezoid_weights(u, a):
    """Weights ``w`` with ``sum w g(u) = int exp(-a u) g(u) du`` for piecewise-linear ``g``."""
    u = np.asarray(u, dtype=float)
    w = np.zeros(len(u))
    for k in range(len(u) - 1):
        u0, u1 = u[k], u[k + 1]
        h = u1 - u0
        e0, e1 = math.exp(-a * u0), math.exp(-a * u1)
        if a * h < 1e-6:
            w[k] += 0.5 * h * e0
            w[k + 1] += 0.5 * h * e1
            continue
        # int_0^h exp(-a(u0+s)) (1 - s/h) ds  and  int_0^h exp(-a(u0+s)) s/h ds
        i0 = (e0 - e1) / a
        i1 = (e0 - e1 - a * h * e1) / (a * a * h)
        w[k] += i0 - i1
        w[k + 1] += i1
    return w


@dataclass(frozen=True)
class RatioIdentity:
    lhs: float
    rhs: EstimateWithCI
    truncation_bound: float
    time_grid: np.ndarray = field(repr=False)
    expectations: np.ndarray = field(repr=False)

    @property
    def z(self):
        return self.rhs.z_score(self.lhs)


def ratio_identity_check(spec, r, s, x, cfg: SimulationConfig, *, side="beta", f_r=None, f_s=None,
                         lhs=None, n_times=64) -> RatioIdentity:
    """Compare the endpoint limit of ``f_r / f_s`` with its Monte Carlo representation.

    With ``f = psi`` at ``beta`` (``phi`` at ``alpha``) and ``a = s - r``::

        lim f_r/f_s = f_r(x)/f_s(x) - (a / f_s(x)) int_0^inf exp(-a u) E_x[exp(-r u) f_r(X_u)] du

    The time integral is cut at the horizon, whose remainder is at most
    ``f_r(x) exp(-a H) / a``; the run is inconclusive when that exceeds half
    the confidence half width.
    """
    from .martingale import Regime, row_B
    from .excessive import DECREASING, INCREASING, make_tabulation, solve_excessive

    r, s = as_rate(r), as_rate(s)
    if not s.r > r.r:
        raise ValueError("ratio identity needs s > r")
    direction = INCREASING if side == "beta" else DECREASING
    ss = derive_scale_speed(spec)
    if f_r is None or f_s is None:
        tab = make_tabulation(ss, [r, s])
        f_r = solve_excessive(ss, r, direction, tab)
        f_s = solve_excessive(ss, s, direction, tab)
    if lhs is None:
        est = row_B(ss, r, s, side, f_r=f_r, f_s=f_s)
        if est.regime is Regime.DIVERGES:
            lhs = 0.0
        elif est.regime is Regime.FINITE:
            lhs = 1.0 / est.value
        else:
            raise InconclusiveError("endpoint limit of the ratio is undecided", est)
    a = s.r - r.r
    cfg = cfg.replace(initial_state=float(x))
    u = time_grid(cfg.step, cfg.horizon, n_times)
    ens = simulate(spec, cfg, record_times=u)
    u = ens.times
    w = exp_trapezoid_weights(u, a)
    fr_x = float(evaluate(f_r, x))
    fs_x = float(evaluate(f_s, x))
    integral = np.zeros(cfg.paths)
    means = np.empty(len(u))
    for j in range(len(u)):
        vals, _ = discounted_values(f_r, ens, r, col=j)
        integral += w[j] * vals
        means[j] = float(np.mean(vals))
    per_path = fr_x / fs_x - (a / fs_x) * integral
    rhs = _estimate(_batched(ens, per_path), cfg.confidence)
    bound = fr_x * math.exp(-a * cfg.horizon) / a * (a / fs_x)
    if bound > 0.5 * rhs.half_width:
        raise InconclusiveError(
            f"time-integral truncation bound {bound:.3g} exceeds half the CI half width "
            f"{rhs.half_width:.3g}; increase the horizon",
            evidence=RatioIdentity(lhs, rhs, bound, u, means),
        )
    return RatioIdentity(float(lhs), rhs, bound, u, means)


def tabulated_scale(tab):
    """``p`` (anchored at the reference point) as a callable on the grid hull."""
    from ._interp import MonotoneHermite

    grid = tab.grid
    p = tab.scale_on_grid()
    slopes = np.exp(tab.ell_sub[tab.grid_sub])
    ok = np.isfinite(p) & np.isfinite(slopes)
    interp = MonotoneHermite(grid[ok], p[ok], slopes[ok])
    lo, hi = grid[ok][0], grid[ok][-1]

    def scale(x):
        return interp(np.clip(np.asarray(x, dtype=float), lo, hi))

    return scale
