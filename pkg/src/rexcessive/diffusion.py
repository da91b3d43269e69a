"""One-dimensional regular diffusions, their scale functions and speed measures.

A diffusion is described by its state interval, a drift and a volatility.
Its scale density and speed density follow from the usual exponential
formula, anchored so that the scale function vanishes at a reference point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy import integrate

from ._compact import Compactifier
from .exceptions import ConfigError, QuadratureError

QUAD_EPSABS = 1e-12
QUAD_EPSREL = 1e-10
QUAD_LIMIT = 200


@dataclass(frozen=True)
class IntervalSpec:
    """State interval with endpoints ``alpha < beta`` (possibly infinite)."""

    alpha: float
    beta: float
    alpha_included: bool = False
    beta_included: bool = False

    def __post_init__(self):
        a, b = float(self.alpha), float(self.beta)
        if math.isnan(a) or math.isnan(b) or not a < b:
            raise ConfigError(f"interval endpoints must satisfy alpha < beta, got {a}, {b}")
        if (self.alpha_included and math.isinf(a)) or (self.beta_included and math.isinf(b)):
            raise ConfigError("an infinite endpoint cannot be included in the interval")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)

    def endpoint(self, side):
        return self.alpha if side == "alpha" else self.beta

    def is_finite(self, side):
        return math.isfinite(self.endpoint(side))

    def is_interior(self, x):
        x = np.asarray(x, dtype=float)
        return (x > self.alpha) & (x < self.beta)

    def __str__(self):
        lo = "[" if self.alpha_included else "]"
        hi = "]" if self.beta_included else "["
        return f"{lo}{self.alpha:g}, {self.beta:g}{hi}"


def _vectorized(fn):
    """Wrap a coefficient so that it maps arrays to arrays of the same shape."""

    def wrapped(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            y = fn(x)
        y = np.asarray(y, dtype=float)
        if y.shape != x.shape:
            if y.size == 1:
                y = np.full(x.shape, float(y))
            else:
                y = np.array([float(fn(float(v))) for v in x.ravel()]).reshape(x.shape)
        return y

    wrapped.__wrapped__ = fn
    return wrapped


@dataclass(frozen=True)
class DiffusionSpec:
    """A diffusion ``dX = drift(X) dt + volatility(X) dW`` on ``interval``.

    ``drift`` and ``volatility`` must accept numpy arrays.  ``volatility`` is
    checked to be finite and strictly positive on a spread of probe points.
    """

    interval: IntervalSpec
    drift: Callable
    volatility: Callable
    reference_point: float
    name: str = "custom"
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        x0 = float(self.reference_point)
        if not self.interval.is_interior(x0):
            raise ConfigError(f"reference point {x0} is not interior to {self.interval}")
        object.__setattr__(self, "reference_point", x0)
        object.__setattr__(self, "drift", _vectorized(self.drift))
        object.__setattr__(self, "volatility", _vectorized(self.volatility))
        object.__setattr__(self, "params", dict(self.params))
        probes = self.compactifier().probe_points(15)
        sig = self.volatility(probes)
        mu = self.drift(probes)
        bad = ~(np.isfinite(sig) & (sig > 0))
        if bad.any():
            raise ConfigError(
                f"volatility must be finite and > 0 on the interior; fails at x={probes[bad][0]:g}"
            )
        if not np.all(np.isfinite(mu)):
            raise ConfigError(f"drift is not finite at x={probes[~np.isfinite(mu)][0]:g}")

    def compactifier(self):
        return Compactifier(self.interval.alpha, self.interval.beta, self.reference_point)

    def with_reference_point(self, x0):
        return DiffusionSpec(self.interval, self.drift.__wrapped__, self.volatility.__wrapped__,
                             x0, self.name, self.params)


@dataclass(frozen=True)
class HittingTime:
    """First hitting time of ``target``; ``inf`` means not hit on the horizon."""

    target: float
    value: float

    def __post_init__(self):
        if not self.value >= 0:
            raise ValueError("hitting time must be nonnegative")

    @property
    def censored(self):
        return math.isinf(self.value)


def _quad(fn, a, b, what):
    if a == b:
        return 0.0
    with np.errstate(all="ignore"):
        try:
            val, err, info = integrate.quad(
                fn, a, b, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=QUAD_LIMIT, full_output=1
            )[:3]
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            raise QuadratureError(f"{what} failed on [{a:g}, {b:g}]: {exc}", (a, b)) from exc
    if not math.isfinite(val):
        raise QuadratureError(
            f"{what} is not finite on [{a:g}, {b:g}] (non-integrable coefficient singularity?)",
            (min(a, b), max(a, b)),
        )
    return val


@dataclass(frozen=True)
class ScaleSpeed:
    """Scale density ``p'``, scale ``p`` (``p(x0) = 0``) and speed density ``m'``.

    Two constructions are supported.  From coefficients, ``log p'`` is the
    integral of ``-2 drift / volatility**2`` from the reference point.  From
    densities, ``log p'`` is supplied directly.  In both cases
    ``speed_scale_product`` is ``m' p'``, i.e. ``2 / volatility**2``.

    Pointwise methods evaluate lazily with adaptive quadrature.  The solver and
    the Feller tests use a tabulated composite rule instead (see ``_grid``).
    """

    interval: IntervalSpec
    reference_point: float
    speed_scale_product: Callable
    log_scale_slope: Callable | None = None
    log_scale_density_fn: Callable | None = None
    diffusion: DiffusionSpec | None = None

    def compactifier(self):
        return Compactifier(self.interval.alpha, self.interval.beta, self.reference_point)

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if not np.all(self.interval.is_interior(x)):
            raise ValueError(f"points must be interior to {self.interval}")
        return x

    def log_scale_density(self, x):
        """``log p'(x)``, normalised so that ``p'(x0) = 1``."""
        x = self._check(x)
        x0 = self.reference_point
        if self.log_scale_density_fn is not None:
            ref = float(self.log_scale_density_fn(np.asarray(x0)))
            return np.asarray(self.log_scale_density_fn(x), dtype=float) - ref
        slope = self.log_scale_slope
        out = np.array([_quad(lambda u: float(slope(u)), x0, float(v), "log scale density")
                        for v in x.ravel()])
        return out.reshape(x.shape)

    def scale_density(self, x):
        return np.exp(self.log_scale_density(x))

    def speed_density(self, x):
        x = self._check(x)
        return np.exp(np.log(self.speed_scale_product(x)) - self.log_scale_density(x))

    def scale(self, x):
        """Signed ``p(x) = int_{x0}^x p'(u) du``."""
        x = self._check(x)
        x0 = self.reference_point
        out = np.array([
            _quad(lambda u: float(self.scale_density(u)), x0, float(v), "scale function")
            for v in x.ravel()
        ])
        return out.reshape(x.shape)

    @classmethod
    def from_densities(cls, interval, reference_point, scale_density, speed_density):
        """Build directly from ``p'`` and ``m'`` (both positive, vectorized)."""
        sd = _vectorized(scale_density)
        md = _vectorized(speed_density)
        return cls(
            interval=interval,
            reference_point=float(reference_point),
            speed_scale_product=lambda x: sd(x) * md(x),
            log_scale_density_fn=lambda x: np.log(sd(x)),
        )


def derive_scale_speed(spec: DiffusionSpec) -> ScaleSpeed:
    """Scale and speed of a coefficient-specified diffusion."""
    drift, vol = spec.drift, spec.volatility

    def slope(x):
        s = vol(x)
        return -2.0 * drift(x) / (s * s)

    def product(x):
        s = vol(x)
        return 2.0 / (s * s)

    return ScaleSpeed(
        interval=spec.interval,
        reference_point=spec.reference_point,
        speed_scale_product=product,
        log_scale_slope=slope,
        diffusion=spec,
    )


# -- catalog ---------------------------------------------------------------

_REQUIRED = {
    "brownian": (),
    "gbm": ("mu", "sigma"),
    "bessel": ("delta",),
    "cir": ("kappa", "theta", "sigma"),
    "ou": ("kappa", "theta", "sigma"),
}


def _positive(params, key, family):
    v = float(params[key])
    if not (math.isfinite(v) and v > 0):
        raise ConfigError(f"{family}: parameter {key!r} must be > 0, got {v}")
    return v


def _finite(params, key, family):
    v = float(params[key])
    if not math.isfinite(v):
        raise ConfigError(f"{family}: parameter {key!r} must be finite, got {v}")
    return v


def catalog(name: str, params: Mapping[str, float] | None = None) -> DiffusionSpec:
    """Canonical diffusions with known boundary behaviour.

    ``brownian`` takes optional ``mu``/``sigma``; every family accepts an
    optional ``x0`` overriding its default reference point.
    """
    params = dict(params or {})
    key = str(name).lower()
    if key not in _REQUIRED:
        raise ConfigError(f"unknown catalog family {name!r}; choose from {sorted(_REQUIRED)}")
    missing = [p for p in _REQUIRED[key] if p not in params]
    if missing:
        raise ConfigError(f"{key}: missing parameter(s) {', '.join(missing)}")
    try:
        x0 = float(params["x0"]) if "x0" in params else None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key}: x0 must be a number") from exc

    if key == "brownian":
        mu = _finite(params, "mu", key) if "mu" in params else 0.0
        sig = _positive(params, "sigma", key) if "sigma" in params else 1.0
        return DiffusionSpec(IntervalSpec(-math.inf, math.inf),
                             lambda x: mu + 0.0 * x, lambda x: sig + 0.0 * x,
                             0.0 if x0 is None else x0, key, {"mu": mu, "sigma": sig})
    if key == "gbm":
        mu = _finite(params, "mu", key)
        sig = _positive(params, "sigma", key)
        return DiffusionSpec(IntervalSpec(0.0, math.inf), lambda x: mu * x, lambda x: sig * x,
                             1.0 if x0 is None else x0, key, {"mu": mu, "sigma": sig})
    if key == "bessel":
        delta = _positive(params, "delta", key)
        c = (delta - 1.0) / 2.0
        return DiffusionSpec(IntervalSpec(0.0, math.inf), lambda x: c / x, lambda x: 1.0 + 0.0 * x,
                             1.0 if x0 is None else x0, key, {"delta": delta})
    if key == "cir":
        kappa = _positive(params, "kappa", key)
        theta = _positive(params, "theta", key)
        sig = _positive(params, "sigma", key)
        return DiffusionSpec(IntervalSpec(0.0, math.inf), lambda x: kappa * (theta - x),
                             lambda x: sig * np.sqrt(x), theta if x0 is None else x0, key,
                             {"kappa": kappa, "theta": theta, "sigma": sig})
    kappa = _positive(params, "kappa", key)
    theta = _finite(params, "theta", key)
    sig = _positive(params, "sigma", key)
    return DiffusionSpec(IntervalSpec(-math.inf, math.inf), lambda x: kappa * (theta - x),
                         lambda x: sig + 0.0 * x, theta if x0 is None else x0, key,
                         {"kappa": kappa, "theta": theta, "sigma": sig})
