"""scikit-learn style wrappers.

The "training data" of every estimator here is a diffusion (a
:class:`DiffusionSpec` or :class:`ScaleSpeed`); ``transform`` and ``predict``
then act on arrays of states or endpoint names.
"""
import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._grid import GridConfig
from ._validation import as_scale_speed, check_points, check_rate, check_rates, check_sides
from .boundary import BoundaryKind, classify_boundary
from .excessive import _direction, evaluate, make_tabulation, scale_derivative_at, solve_excessive
from .martingale import Verdict, full_report


class ExcessiveFunctionEstimator(TransformerMixin, BaseEstimator):
    """Solve for ``psi_r`` or ``phi_r`` and evaluate it at states.

    >>> from rexcessive import catalog
    >>> est = ExcessiveFunctionEstimator(rate=0.5).fit(catalog("brownian"))
    >>> round(float(est.transform([[1.0]])[0, 0]), 6)   # exp(x)
    2.718282
    """

    def __init__(self, rate=1.0, direction="increasing", n_nodes=2000):
        self.rate = rate
        self.direction = direction
        self.n_nodes = n_nodes

    def fit(self, X, y=None):
        ss = as_scale_speed(X)
        rate = check_rate(self.rate)
        direction = _direction(self.direction)
        tab = make_tabulation(ss, [rate], GridConfig(n_nodes=int(self.n_nodes), rate_max=rate.r))
        self.function_ = solve_excessive(ss, rate, direction, tab)
        self.grid_ = self.function_.grid
        self.interval_ = ss.interval
        return self

    def transform(self, X):
        check_is_fitted(self, "function_")
        x = check_points(X)
        return np.asarray(evaluate(self.function_, x), dtype=float).reshape(-1, 1)

    def scale_derivative(self, X):
        check_is_fitted(self, "function_")
        x = check_points(X)
        return np.asarray(scale_derivative_at(self.function_, x), dtype=float).reshape(-1, 1)


class BoundaryClassifier(BaseEstimator):
    """Feller classification of both endpoints; ``predict`` maps side names to kinds."""

    def __init__(self, x_ref=None):
        self.x_ref = x_ref

    def fit(self, X, y=None):
        ss = as_scale_speed(X)
        self.boundaries_ = {s: classify_boundary(ss, s, self.x_ref) for s in ("alpha", "beta")}
        self.classes_ = np.array([k.value for k in BoundaryKind])
        return self

    def predict(self, X):
        check_is_fitted(self, "boundaries_")
        return np.array([self.boundaries_[s].kind.value for s in check_sides(X)])


class MartingaleClassifier(BaseEstimator):
    """Martingale verdicts for the excessive processes, per initial state.

    ``predict`` returns one row per state with the verdicts for
    ``exp(-rt) psi_r(X_t)`` (stopped at ``beta``) and ``exp(-rt) phi_r(X_t)``
    (stopped at ``alpha``).  A start at an absorbing endpoint gives
    ``DegenerateZero``.
    """

    def __init__(self, rates=(0.5, 1.0), strict=True):
        self.rates = rates
        self.strict = strict

    def fit(self, X, y=None):
        rates = check_rates(self.rates)
        self.report_ = full_report(X, [r.r for r in rates], strict=self.strict)
        self.interval_ = self.report_.tabulation.interval
        self.verdicts_ = self.report_.verdicts
        self.kotani_ = self.report_.kotani.verdict.value
        return self

    def predict(self, X):
        check_is_fitted(self, "report_")
        iv = self.interval_
        x = check_points(X, iv)
        sides = self.report_.sides
        for side in ("alpha", "beta"):
            if not sides[side].boundary.accessible and np.any(x == iv.endpoint(side)):
                raise ValueError(f"{side} is inaccessible and not a valid initial state")
        out = np.empty((len(x), 2), dtype=object)
        for col, (side, other) in enumerate((("beta", "alpha"), ("alpha", "beta"))):
            base = sides[side].verdict.verdict.value
            # the process starting on an absorbing opposite endpoint stays at 0
            other_absorbing = sides[other].boundary.accessible
            edge = iv.endpoint(other)
            out[:, col] = np.where(other_absorbing & (x == edge), Verdict.DEGENERATE.value, base)
        return out
