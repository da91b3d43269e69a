"""Tabulation of scale and speed on an adaptively subdivided grid.

The output grid is geometric in compactified coordinates toward each
endpoint.  Each output cell is split into sub-cells small enough that the
coefficients and the local growth rate of solutions vary by a bounded factor
across one sub-cell.  Every sub-cell carries a 5-point Gauss-Legendre rule,
so all measure integrals below are composite rules of order 10.

Everything that can overflow is stored as a logarithm: ``ell = log p'``
(with ``p'(x0) = 1``), ``log |p|``, and per-sub-cell logs of the ``p`` and
``m`` masses.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from .exceptions import QuadratureError, SolverError

N_STAGES = 5
_t, _w = leggauss(N_STAGES)
GAUSS_NODES = 0.5 * (_t + 1.0)
GAUSS_WEIGHTS = 0.5 * _w


def _integration_matrix(nodes):
    # A[j, k] = int_0^{t_j} L_k(t) dt for the Lagrange basis on ``nodes``
    n = len(nodes)
    coef = np.linalg.inv(np.vander(nodes, n, increasing=True))
    powers = np.arange(1, n + 1)
    prim = nodes[:, None] ** powers[None, :] / powers[None, :]
    return prim @ coef


GAUSS_MATRIX = _integration_matrix(GAUSS_NODES)


@dataclass(frozen=True)
class GridConfig:
    """Knobs for grid construction.

    ``budget`` bounds the number of sub-cells per side; the grid stops short of
    an endpoint when resolving the solutions further out would exceed it.
    """

    n_nodes: int = 2000
    budget: int = 20000
    delta_floor: float = 1e-60
    step_target: float = 0.5
    endpoint_fraction: float = 0.25
    rate_max: float = 1.0
    scan_per_decade: int = 20

    def __post_init__(self):
        if self.n_nodes < 8:
            raise ValueError("n_nodes must be at least 8")
        if not self.rate_max > 0:
            raise ValueError("rate_max must be positive")


def _slope_fn(ss):
    if ss.log_scale_slope is not None:
        return ss.log_scale_slope
    ref = ss.log_scale_density_fn

    def slope(x):
        x = np.asarray(x, dtype=float)
        eps = 1e-6 * np.maximum(np.abs(x), 1e-3)
        return (np.asarray(ref(x + eps)) - np.asarray(ref(x - eps))) / (2 * eps)

    return slope


def tail_exponents(log_incs, log_deltas):
    """Local decay exponents of increments along a geometric truncation.

    With increments ``I_k`` on segments ending at compactified distances
    ``delta_k``, returns ``a_k`` such that ``I_{k+1} / I_k = (delta_{k+1} /
    delta_k) ** a_k``.  Positive means the increments shrink like a power of the
    distance; zero is the logarithmic (constant increment) borderline.
    """
    log_incs = np.asarray(log_incs, dtype=float)
    log_deltas = np.asarray(log_deltas, dtype=float)
    with np.errstate(invalid="ignore"):
        return np.diff(log_incs) / np.diff(log_deltas)


class Tabulation:
    """Scale/speed data on a refined grid for one :class:`ScaleSpeed`."""

    def __init__(self, ss, config=None, extra_nodes=()):
        self.ss = ss
        self.config = config or GridConfig()
        self.interval = ss.interval
        self.x0 = ss.reference_point
        self.comp = ss.compactifier()
        self._slope = _slope_fn(ss)
        self._transfer_cache = {}
        self._build_nodes(extra_nodes)
        self._build_subcells()
        self._build_measures()

    # -- construction ----------------------------------------------------

    def cost_density(self, x):
        """Sub-cells needed per unit length near ``x``."""
        cfg = self.config
        x = np.asarray(x, dtype=float)
        slope = self._slope(x)
        q = np.asarray(self.ss.speed_scale_product(x), dtype=float)
        half = 0.5 * np.abs(slope)
        lam = half + np.sqrt(half * half + cfg.rate_max * q)
        dist = np.full(x.shape, np.inf)
        if self.interval.is_finite("alpha"):
            dist = np.minimum(dist, x - self.interval.alpha)
        if self.interval.is_finite("beta"):
            dist = np.minimum(dist, self.interval.beta - x)
        spread = np.abs(x - self.x0) + self.comp.scale
        with np.errstate(divide="ignore", invalid="ignore"):
            k = lam / cfg.step_target + 1.0 / (cfg.endpoint_fraction * dist)
            k = k + 1.0 / (cfg.endpoint_fraction * spread)
        k[~(np.isfinite(k) & (q > 0))] = np.nan
        return k

    def _reach(self, side):
        """Smallest compactified distance reachable within the budget."""
        cfg = self.config
        d0 = float(self.comp.delta(self.x0, side))
        n_dec = max(1, int(math.ceil(math.log10(d0 / cfg.delta_floor) * cfg.scan_per_decade)))
        deltas = d0 * (cfg.delta_floor / d0) ** (np.arange(1, n_dec + 1) / n_dec)
        with np.errstate(all="ignore"):
            xs = self.comp.point(deltas, side)
        end = self.interval.endpoint(side)
        sign = 1.0 if side == "beta" else -1.0
        ok = np.isfinite(xs) & self.interval.is_interior(xs)
        if math.isfinite(end):
            ok &= np.abs(end - xs) > 64 * np.spacing(max(abs(end), 1e-300))
        prev = np.concatenate([[self.x0], xs[:-1]])
        ok &= sign * (xs - prev) > 0
        bad = np.flatnonzero(~ok)
        n_ok = bad[0] if bad.size else len(xs)
        xs, deltas = xs[:n_ok], deltas[:n_ok]
        if n_ok == 0:
            return d0
        k = self.cost_density(np.concatenate([[self.x0], xs]))
        bad = np.flatnonzero(~np.isfinite(k))
        if bad.size:
            n_ok = bad[0] - 1
            if n_ok <= 0:
                return d0 * 0.5
            xs, deltas, k = xs[:n_ok], deltas[:n_ok], k[: n_ok + 1]
        pts = np.concatenate([[self.x0], xs])
        seg = 0.5 * (k[1:] + k[:-1]) * np.abs(np.diff(pts))
        cum = np.cumsum(seg)
        within = np.flatnonzero(cum <= cfg.budget)
        if within.size == 0:
            return deltas[0]
        return float(deltas[within[-1]])

    def _build_nodes(self, extra_nodes):
        cfg = self.config
        n_int = cfg.n_nodes - 1
        n_a = n_int // 2
        n_b = n_int - n_a
        sides = {}
        for side, n in (("alpha", n_a), ("beta", n_b)):
            d0 = float(self.comp.delta(self.x0, side))
            dmin = self._reach(side)
            # n output nodes plus one guard node
            frac = np.arange(1, n + 2) / (n + 1)
            deltas = d0 * (dmin / d0) ** frac
            sides[side] = self.comp.point(deltas, side)
        nodes = np.concatenate([sides["alpha"][::-1], [self.x0], sides["beta"]])
        extra = np.asarray(extra_nodes, dtype=float).ravel()
        if extra.size:
            lo, hi = nodes[1], nodes[-2]
            if np.any((extra <= lo) | (extra >= hi)):
                raise ValueError("extra nodes must lie strictly inside the grid")
            nodes = np.concatenate([nodes, extra])
        nodes = np.unique(nodes)
        if np.any(np.diff(nodes) <= 0) or not np.all(self.interval.is_interior(nodes)):
            raise SolverError("grid construction produced non-interior or repeated nodes")
        self.nodes = nodes
        self.i0_node = int(np.searchsorted(nodes, self.x0))

    def _build_subcells(self):
        nodes = self.nodes
        k_nodes = self.cost_density(nodes)
        mids = 0.5 * (nodes[1:] + nodes[:-1])
        k_mid = self.cost_density(mids)
        width = np.diff(nodes)
        kmax = np.fmax(np.fmax(k_nodes[1:], k_nodes[:-1]), k_mid)
        kmax = np.where(np.isfinite(kmax), kmax, 1.0 / width)
        counts = np.maximum(1, np.ceil(width * kmax)).astype(np.int64)
        counts = np.minimum(counts, 100000)
        starts = np.concatenate([[0], np.cumsum(counts)])
        total = int(starts[-1])
        cell = np.repeat(np.arange(len(counts)), counts)
        j = np.arange(total) - starts[cell]
        a = nodes[cell] + width[cell] * j / counts[cell]
        x_sub = np.concatenate([a, [nodes[-1]]])
        # exact node positions at cell starts
        x_sub[starts[:-1]] = nodes[:-1]
        self.x_sub = x_sub
        self.node_sub = starts
        self.h = np.diff(x_sub)
        if np.any(self.h <= 0):
            raise SolverError("sub-cell construction produced zero-width cells (grid too fine for float spacing)")
        self.i0_sub = int(starts[self.i0_node])

    def _build_measures(self):
        a = self.x_sub[:-1]
        h = self.h
        t = GAUSS_NODES
        stages = a[:, None] + h[:, None] * t[None, :]
        self.stages = stages
        ss = self.ss
        if ss.log_scale_density_fn is not None:
            ell_abs = lambda x: np.asarray(ss.log_scale_density_fn(x), dtype=float)
            ref = float(ell_abs(np.asarray(self.x0)))
            ell_sub = ell_abs(self.x_sub) - ref
            ell_a = ell_sub[:-1]
            d_stage = ell_abs(stages) - ref - ell_a[:, None]
            d_end = np.diff(ell_sub)
        else:
            inner = a[:, None, None] + h[:, None, None] * t[None, :, None] * t[None, None, :]
            sl_inner = self._slope(inner)
            d_stage = h[:, None] * t[None, :] * (sl_inner @ GAUSS_WEIGHTS)
            sl_stage = self._slope(stages)
            d_end = h * (sl_stage @ GAUSS_WEIGHTS)
            ell_sub = np.empty(len(self.x_sub))
            i0 = self.i0_sub
            ell_sub[i0] = 0.0
            ell_sub[i0 + 1:] = np.cumsum(d_end[i0:])
            ell_sub[:i0] = -np.cumsum(d_end[:i0][::-1])[::-1]
            ell_a = ell_sub[:-1]
        q = np.asarray(ss.speed_scale_product(stages), dtype=float)
        bad = ~(np.isfinite(d_stage).all(axis=1) & np.isfinite(d_end)
                & np.isfinite(q).all(axis=1) & (q > 0).all(axis=1))
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            lo, hi = float(self.x_sub[i]), float(self.x_sub[i + 1])
            raise QuadratureError(
                f"scale/speed quadrature failed on [{lo:.6g}, {hi:.6g}] "
                "(non-integrable coefficient singularity?)",
                (lo, hi),
            )
        self.ell_sub = ell_sub
        self.d_stage = d_stage
        self.d_end = d_end
        self.q_stage = q

        e_p = np.exp(d_stage)
        e_m = q * np.exp(-d_stage)
        w = GAUSS_WEIGHTS
        A = GAUSS_MATRIX
        sp = h * (e_p @ w)
        sm = h * (e_m @ w)
        dpm = h * h * np.einsum("sj,j,jk,sk->s", e_p, w, A, e_m)
        dmp = h * h * np.einsum("sj,j,jk,sk->s", e_m, w, A, e_p)
        total = sp * sm
        dpm = np.where(dpm > 0, dpm, np.maximum(total - dmp, 1e-300 * total))
        dmp = np.where(dmp > 0, dmp, np.maximum(total - dpm, 1e-300 * total))
        self.log_dp = ell_a + np.log(sp)
        self.log_dm = -ell_a + np.log(sm)
        self.log_dpm = np.log(dpm)
        self.log_dmp = np.log(dmp)

        # signed scale at sub-nodes, relative to x0
        i0 = self.i0_sub
        n = len(self.x_sub)
        log_abs_p = np.full(n, -np.inf)
        sign_p = np.zeros(n)
        log_abs_p[i0 + 1:] = np.logaddexp.accumulate(self.log_dp[i0:])
        sign_p[i0 + 1:] = 1.0
        if i0 > 0:
            log_abs_p[:i0] = np.logaddexp.accumulate(self.log_dp[:i0][::-1])[::-1]
            sign_p[:i0] = -1.0
        self.log_abs_p_sub = log_abs_p
        self.sign_p_sub = sign_p
        self._build_scale_tails()

    def _cell_logsum(self, log_vals):
        """Aggregate per-sub-cell log quantities to output cells."""
        return np.logaddexp.reduceat(log_vals, self.node_sub[:-1])

    def _build_scale_tails(self):
        """Distance in scale to each endpoint, or ``None`` if infinite there."""
        cell_dp = self._cell_logsum(self.log_dp)
        self.log_R = {}
        self.scale_finite = {}
        for side in ("alpha", "beta"):
            if side == "beta":
                incs = cell_dp[-8:]
                dl = np.log(self.comp.delta(self.nodes[-8:], "beta"))
            else:
                incs = cell_dp[:8][::-1]
                dl = np.log(self.comp.delta(self.nodes[:8][::-1], "alpha"))
            a = tail_exponents(incs, dl)[-5:]
            finite = bool(a.size and np.all(a > 0.05))
            self.scale_finite[side] = finite
            if not finite:
                self.log_R[side] = None
                continue
            step = dl[-1] - dl[-2]
            rho = math.exp(a[-1] * step)
            log_rem = incs[-1] + math.log(rho / (1.0 - rho))
            if side == "beta":
                acc = np.logaddexp.accumulate(self.log_dp[::-1])[::-1]
                acc = np.concatenate([acc, [-np.inf]])
            else:
                acc = np.concatenate([[-np.inf], np.logaddexp.accumulate(self.log_dp)])
            self.log_R[side] = np.logaddexp(acc, log_rem)

    # -- accessors -------------------------------------------------------

    @property
    def grid(self):
        """Output grid: tabulated nodes without the two guard nodes."""
        return self.nodes[1:-1]

    @property
    def grid_sub(self):
        return self.node_sub[1:-1]

    @property
    def i0(self):
        return self.i0_node - 1

    @property
    def n_subcells(self):
        return len(self.h)

    def log_abs_scale(self, side=None):
        """``log |p(x)|`` on the output grid, or ``log |p(endpoint) - p(x)|``.

        With ``side`` given, uses the affine distance to that endpoint when the
        scale is finite there and ``|p(x)|`` otherwise.
        """
        idx = self.grid_sub
        if side is not None and self.log_R.get(side) is not None:
            return self.log_R[side][idx]
        return self.log_abs_p_sub[idx]

    def scale_on_grid(self):
        idx = self.grid_sub
        with np.errstate(over="ignore"):
            return self.sign_p_sub[idx] * np.exp(self.log_abs_p_sub[idx])

    def transfer(self, rate):
        """Per-sub-cell transfer matrices for ``(f, df/dx)`` at rate ``rate``.

        Each sub-cell solves the Volterra form of the generator equation by
        Picard iteration on its Gauss stage values (collocation), with the
        scale derivative expressed relative to ``p'`` at the sub-cell start.
        """
        rate = float(rate)
        if rate in self._transfer_cache:
            return self._transfer_cache[rate]
        h = self.h
        # balanced variables (f, h f'): both off-diagonal blocks are O(h * lambda)
        P = np.exp(self.d_stage)
        Q = (h * h)[:, None] * rate * self.q_stage * np.exp(-self.d_stage)
        S = len(h)
        Z = np.broadcast_to(np.eye(2), (S, N_STAGES, 2, 2)).copy()
        A = GAUSS_MATRIX
        eye = np.eye(2)

        def rhs(Z):
            K = np.empty_like(Z)
            K[:, :, 0, :] = P[:, :, None] * Z[:, :, 1, :]
            K[:, :, 1, :] = Q[:, :, None] * Z[:, :, 0, :]
            return K

        converged = False
        for sweep in range(200):
            Z_new = eye + np.einsum("jk,skab->sjab", A, rhs(Z))
            change = np.max(np.abs(Z_new - Z), axis=(1, 2, 3))
            size = np.max(np.abs(Z_new), axis=(1, 2, 3))
            Z = Z_new
            if np.all(change <= 1e-10 * size):
                converged = True
                break
        if not converged:
            worst = int(np.argmax(change / size))
            raise SolverError(
                "Picard iteration did not converge within 200 sweeps",
                location=float(self.x_sub[worst]),
            )
        end = eye + np.einsum("k,skab->sab", GAUSS_WEIGHTS, rhs(Z))
        phi = end.copy()
        phi[:, 0, 1] *= h
        phi[:, 1, 0] /= h
        phi[:, 1, 1] = end[:, 1, 1]
        # convert the second component back to d/dx at the sub-cell end
        phi[:, 1, :] *= np.exp(self.d_end)[:, None]
        self._transfer_cache[rate] = phi
        return phi
