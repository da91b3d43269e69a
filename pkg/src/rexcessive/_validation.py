"""Argument checks shared by the estimator layer and the CLI."""
import numpy as np
from sklearn.utils import check_array

from .diffusion import DiffusionSpec, ScaleSpeed, derive_scale_speed
from .excessive import DiscountRate, as_rate

SIDES = ("alpha", "beta")


def check_side(side):
    s = str(side).lower()
    if s not in SIDES:
        raise ValueError(f"side must be one of {SIDES}, got {side!r}")
    return s


def check_sides(sides):
    if isinstance(sides, str):
        sides = [sides]
    return [check_side(s) for s in np.ravel(np.asarray(sides, dtype=object))]


def check_rate(rate) -> DiscountRate:
    return as_rate(rate)


def check_rates(rates):
    if np.isscalar(rates):
        rates = [rates]
    out = [as_rate(r) for r in rates]
    if not out:
        raise ValueError("at least one rate is required")
    vals = [r.r for r in out]
    if len(set(vals)) != len(vals):
        raise ValueError("rates must be distinct")
    return out


def check_points(X, interval=None):
    """Flatten ``X`` (scalar, 1-d or single-column 2-d) to a float vector of states."""
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    arr = check_array(arr, dtype=np.float64, ensure_all_finite=True)
    if arr.shape[1] != 1:
        raise ValueError(f"expected one column of states, got {arr.shape[1]}")
    x = arr[:, 0]
    if interval is not None:
        inside = (x >= interval.alpha) & (x <= interval.beta)
        if not np.all(inside):
            raise ValueError(f"state {x[~inside][0]:g} lies outside {interval}")
    return x


def as_scale_speed(obj) -> ScaleSpeed:
    if isinstance(obj, ScaleSpeed):
        return obj
    if isinstance(obj, DiffusionSpec):
        return derive_scale_speed(obj)
    raise TypeError(f"expected a DiffusionSpec or ScaleSpeed, got {type(obj).__name__}")
