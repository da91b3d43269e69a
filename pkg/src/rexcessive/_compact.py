"""Monotone compactification of an interval onto ]0, 1[.

Points are addressed by their compactified distance ``delta`` to one of the
endpoints.  Inverse maps are written in terms of ``delta`` directly so that
points extremely close to an endpoint (or extremely far out on an infinite
side) never pass through a ``u`` that has rounded to 0 or 1.
"""
import math

import numpy as np


class Compactifier:
    """Map ``]alpha, beta[`` onto ``]0, 1[`` increasingly.

    Both finite: affine.  One infinite end: Moebius map anchored at the finite
    end with scale ``|x0 - endpoint|``.  Both infinite: arctangent around
    ``x0`` with unit scale.
    """

    def __init__(self, alpha, beta, x0, scale=None):
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.x0 = float(x0)
        self.alpha_finite = math.isfinite(self.alpha)
        self.beta_finite = math.isfinite(self.beta)
        if self.alpha_finite and self.beta_finite:
            self.scale = self.beta - self.alpha
        elif self.alpha_finite:
            self.scale = self.x0 - self.alpha
        elif self.beta_finite:
            self.scale = self.beta - self.x0
        else:
            self.scale = 1.0 if scale is None else float(scale)

    def to_unit(self, x):
        x = np.asarray(x, dtype=float)
        a, b, c = self.alpha, self.beta, self.scale
        if self.alpha_finite and self.beta_finite:
            return (x - a) / c
        if self.alpha_finite:
            d = x - a
            return d / (d + c)
        if self.beta_finite:
            d = b - x
            return c / (d + c)
        return 0.5 + np.arctan((x - self.x0) / c) / math.pi

    def delta(self, x, side):
        """Compactified distance of ``x`` to the ``side`` endpoint."""
        x = np.asarray(x, dtype=float)
        a, b, c = self.alpha, self.beta, self.scale
        if self.alpha_finite and self.beta_finite:
            return (x - a) / c if side == "alpha" else (b - x) / c
        if self.alpha_finite:
            d = x - a
            return d / (d + c) if side == "alpha" else c / (d + c)
        if self.beta_finite:
            d = b - x
            return c / (d + c) if side == "alpha" else d / (d + c)
        z = (x - self.x0) / c
        if side == "alpha":
            return 0.5 + np.arctan(z) / math.pi
        return 0.5 - np.arctan(z) / math.pi

    def point(self, delta, side):
        """Inverse of :meth:`delta`."""
        d = np.asarray(delta, dtype=float)
        a, b, c = self.alpha, self.beta, self.scale
        if self.alpha_finite and self.beta_finite:
            return a + c * d if side == "alpha" else b - c * d
        if self.alpha_finite:
            if side == "alpha":
                return a + c * d / (1.0 - d)
            return a + c * (1.0 - d) / d
        if self.beta_finite:
            if side == "beta":
                return b - c * d / (1.0 - d)
            return b - c * (1.0 - d) / d
        # tan(pi (1/2 - d)) = 1 / tan(pi d), accurate for tiny d
        t = c / np.tan(math.pi * d)
        return self.x0 - t if side == "alpha" else self.x0 + t

    def probe_points(self, n=9):
        """A few interior points spread over the whole interval."""
        u = np.linspace(0.0, 1.0, n + 2)[1:-1]
        left = self.point(u[u <= 0.5], "alpha")
        right = self.point(1.0 - u[u > 0.5], "beta")
        pts = np.concatenate([left, right, [self.x0]])
        pts = pts[(pts > self.alpha) & (pts < self.beta) & np.isfinite(pts)]
        return np.unique(pts)
