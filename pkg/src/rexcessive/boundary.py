"""Feller boundary classification.

An endpoint is accessible when the first Feller integral is finite.  An
inaccessible endpoint is natural or entrance according as the second one
diverges or converges.  For the right endpoint ``beta`` and a reference
point ``x``::

    access  = int_x^beta m([x, y[) p(dy)
    nature  = int_x^beta m([y, beta[) p(dy) = int_x^beta (p(z) - p(x)) m(dz)

and mirrored for ``alpha``.  Improper integrals are evaluated as partial sums
along truncation points that approach the endpoint geometrically in
compactified coordinates; convergence is judged from the tail of the partial
sums, and undecidable tails raise :class:`InconclusiveError`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from ._grid import GridConfig, Tabulation, tail_exponents
from .exceptions import InconclusiveError

DIVERGENCE_CAP = 1e12
N_TRUNCATION = 40
TAIL_WINDOW = 5
# increments decaying slower than delta**EXP_DIVERGE are treated as divergent,
# faster than delta**EXP_CONVERGE as convergent
EXP_DIVERGE = 0.02
EXP_CONVERGE = 0.05


class BoundaryKind(str, Enum):
    ACCESSIBLE = "Accessible"
    NATURAL = "InaccessibleNatural"
    ENTRANCE = "InaccessibleEntrance"

    def __str__(self):
        return self.value


def _side(side):
    side = str(side).lower()
    if side not in ("alpha", "beta"):
        raise ValueError(f"side must be 'alpha' or 'beta', got {side!r}")
    return side


@dataclass(frozen=True, eq=False)
class ExtendedRealVerdict:
    """Outcome of an improper integral: a value in ``[0, inf]`` plus evidence."""

    value: float
    diverged: bool
    partial_sums: np.ndarray
    truncation_points: np.ndarray
    log_partial_sums: np.ndarray = None
    tail_exponents: np.ndarray = None

    def as_dict(self):
        return {
            "value": self.value,
            "diverged": self.diverged,
            "partial_sums": [float(v) for v in self.partial_sums],
            "truncation_points": [float(v) for v in self.truncation_points],
        }


@dataclass(frozen=True, eq=False)
class BoundaryClass:
    kind: BoundaryKind
    test_values: tuple
    side: str
    access: ExtendedRealVerdict = None
    nature: ExtendedRealVerdict = None

    @property
    def accessible(self):
        return self.kind is BoundaryKind.ACCESSIBLE

    def as_dict(self):
        return {
            "side": self.side,
            "kind": self.kind.value,
            "I_access": self.test_values[0],
            "I_nature": self.test_values[1],
            "access": self.access.as_dict() if self.access else None,
            "nature": self.nature.as_dict() if self.nature else None,
        }


def _exclusive_cumlog(log_vals):
    """``log sum_{t < s} exp(v_t)`` for each ``s``."""
    out = np.empty_like(log_vals)
    out[0] = -np.inf
    if len(log_vals) > 1:
        out[1:] = np.logaddexp.accumulate(log_vals[:-1])
    return out


def truncation_indices(tab, start_sub, side, n_points=N_TRUNCATION):
    """Sub-node indices approaching ``side`` geometrically, starting at ``start_sub``."""
    x_start = tab.x_sub[start_sub]
    end_sub = tab.grid_sub[-1] if side == "beta" else tab.grid_sub[0]
    comp = tab.comp
    d_start = float(comp.delta(x_start, side))
    d_end = float(comp.delta(tab.x_sub[end_sub], side))
    if side == "beta":
        cand = np.arange(start_sub, end_sub + 1)
    else:
        cand = np.arange(start_sub, end_sub - 1, -1)
    log_d = np.log(comp.delta(tab.x_sub[cand], side))
    targets = np.log(d_start) + (np.log(d_end) - np.log(d_start)) * np.arange(n_points + 1) / n_points
    pos = np.searchsorted(-log_d, -targets)  # log_d is decreasing along cand
    pos = np.clip(pos, 0, len(cand) - 1)
    idx = np.unique(cand[pos]) if side == "beta" else np.unique(cand[pos])[::-1]
    if idx[0] != start_sub:
        idx = np.concatenate([[start_sub], idx])
    return idx


def decide_improper(log_incs, trunc_points, log_deltas, cap=DIVERGENCE_CAP, what="integral"):
    """Turn segment increments along a truncation sequence into a verdict.

    ``log_incs[n]`` is the log of the integral between truncation points
    ``n`` and ``n + 1``.  Divergence is declared when the partial sums exceed
    ``cap`` or the last increments stop decaying; convergence when they
    decay at least like a fixed power of the compactified distance.
    """
    log_incs = np.asarray(log_incs, dtype=float)
    log_S = np.concatenate([[-np.inf], np.logaddexp.accumulate(log_incs)]) if len(log_incs) else np.array([-np.inf])
    with np.errstate(over="ignore"):
        partial = np.exp(log_S)
    exps = tail_exponents(log_incs, log_deltas[1:]) if len(log_incs) > 1 else np.array([])
    tail = exps[-TAIL_WINDOW:]

    def verdict(value, diverged):
        return ExtendedRealVerdict(value=value, diverged=diverged, partial_sums=partial,
                                   truncation_points=np.asarray(trunc_points, dtype=float),
                                   log_partial_sums=log_S, tail_exponents=exps)

    if len(log_incs) == 0 or log_S[-1] == -np.inf:
        return verdict(0.0, False)
    if log_S[-1] > math.log(cap) or not np.isfinite(log_S[-1]):
        return verdict(math.inf, True)
    if log_incs[-1] == -np.inf or log_incs[-1] - log_S[-1] < math.log(1e-15):
        return verdict(float(partial[-1]), False)
    if len(tail) >= TAIL_WINDOW and np.all(tail <= EXP_DIVERGE):
        return verdict(math.inf, True)
    if len(tail) >= TAIL_WINDOW and np.all(tail >= EXP_CONVERGE):
        step = log_deltas[-1] - log_deltas[-2]
        rho = math.exp(tail[-1] * step)
        rem = math.exp(log_incs[-1]) * rho / (1.0 - rho)
        return verdict(float(partial[-1] + rem), False)
    raise InconclusiveError(
        f"{what}: partial sums neither settle nor exceed {cap:g} "
        f"(tail exponents {np.array2string(tail, precision=3)})",
        evidence=verdict(math.nan, False),
    )


def improper_from_contributions(tab, log_contrib, start_sub, side, n_points=N_TRUNCATION,
                                cap=DIVERGENCE_CAP, what="integral"):
    """Improper integral from per-sub-cell log contributions.

    ``log_contrib[s]`` is the log of the integral over sub-cell ``s``; the
    integral runs from sub-node ``start_sub`` toward ``side``.
    """
    idx = truncation_indices(tab, start_sub, side, n_points)
    csum = np.concatenate([[-np.inf], np.logaddexp.accumulate(log_contrib)])
    log_incs = []
    for lo, hi in zip(idx[:-1], idx[1:]):
        a, b = (lo, hi) if side == "beta" else (hi, lo)
        log_incs.append(_log_range_sum(log_contrib, csum, a, b))
    pts = tab.x_sub[idx]
    log_deltas = np.log(tab.comp.delta(pts, side))
    return decide_improper(np.array(log_incs), pts, log_deltas, cap, what)


def _log_range_sum(log_contrib, csum, a, b):
    # log sum of contributions over sub-cells a..b-1, without cancellation
    if b - a <= 64:
        seg = log_contrib[a:b]
        return float(np.logaddexp.reduce(seg)) if len(seg) else -np.inf
    return float(np.logaddexp.reduce(log_contrib[a:b]))


def feller_contributions(tab, start_sub, side, variant):
    """Per-sub-cell log contributions of the two Feller integrals."""
    if side == "beta":
        s = slice(start_sub, None)
        dp, dm = tab.log_dp[s], tab.log_dm[s]
        dpm, dmp = tab.log_dpm[s], tab.log_dmp[s]
        if variant == "access":
            inner = _exclusive_cumlog(dm)
            vals = np.logaddexp(inner + dp, dpm)
        else:
            inner = _exclusive_cumlog(dp)
            vals = np.logaddexp(inner + dm, dmp)
        out = np.full(len(tab.h), -np.inf)
        out[s] = vals
        return out
    s = slice(0, start_sub)
    dp, dm = tab.log_dp[s][::-1], tab.log_dm[s][::-1]
    dpm, dmp = tab.log_dpm[s][::-1], tab.log_dmp[s][::-1]
    if variant == "access":
        inner = _exclusive_cumlog(dm)
        vals = np.logaddexp(inner + dp, dmp)
    else:
        inner = _exclusive_cumlog(dp)
        vals = np.logaddexp(inner + dm, dpm)
    out = np.full(len(tab.h), -np.inf)
    out[s] = vals[::-1]
    return out


def _tabulation_for(ss, x_ref, tabulation):
    if tabulation is not None:
        hit = np.flatnonzero(tabulation.x_sub == x_ref)
        if hit.size:
            return tabulation, int(hit[0])
        ss = tabulation.ss
        config = tabulation.config
    else:
        config = GridConfig()
    extra = () if x_ref == ss.reference_point else (x_ref,)
    tab = Tabulation(ss, config, extra_nodes=extra)
    return tab, int(np.flatnonzero(tab.x_sub == x_ref)[0])


def improper_feller_integral(ss, x_ref=None, side="beta", variant="access", tabulation=None):
    """One of the two Feller integrals at ``side``, as an :class:`ExtendedRealVerdict`."""
    side = _side(side)
    if variant not in ("access", "nature"):
        raise ValueError("variant must be 'access' or 'nature'")
    x_ref = ss.reference_point if x_ref is None else float(x_ref)
    if not ss.interval.is_interior(x_ref):
        raise ValueError(f"x_ref={x_ref} is not interior")
    tab, start = _tabulation_for(ss, x_ref, tabulation)
    contrib = feller_contributions(tab, start, side, variant)
    return improper_from_contributions(tab, contrib, start, side,
                                       what=f"{variant} integral at {side}")


def classify_boundary(ss, side="beta", x_ref=None, tabulation=None) -> BoundaryClass:
    """Accessible, natural or entrance, with both Feller integrals recorded."""
    side = _side(side)
    x_ref = ss.reference_point if x_ref is None else float(x_ref)
    if not ss.interval.is_interior(x_ref):
        raise ValueError(f"x_ref={x_ref} is not interior")
    tab, _ = _tabulation_for(ss, x_ref, tabulation)
    access = improper_feller_integral(ss, x_ref, side, "access", tab)
    if not access.diverged:
        try:
            nature = improper_feller_integral(ss, x_ref, side, "nature", tab)
        except InconclusiveError as exc:
            nature = exc.evidence
        return BoundaryClass(BoundaryKind.ACCESSIBLE, (access.value, nature.value), side, access, nature)
    nature = improper_feller_integral(ss, x_ref, side, "nature", tab)
    kind = BoundaryKind.NATURAL if nature.diverged else BoundaryKind.ENTRANCE
    return BoundaryClass(kind, (access.value, nature.value), side, access, nature)
