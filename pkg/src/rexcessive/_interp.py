"""Shape-preserving cubic Hermite interpolation."""
import numpy as np
from scipy.interpolate import CubicHermiteSpline


def limit_slopes(x, y, slopes):
    """Fritsch-Carlson limiting of node slopes for monotone data.

    Slopes with the wrong sign are zeroed, and on each interval the pair of
    end slopes is shrunk into the circle of radius 3 (in units of the secant
    slope), which is sufficient for the cubic to be monotone there.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    m = np.array(slopes, dtype=float)
    secant = np.diff(y) / np.diff(x)
    for k, d in enumerate(secant):
        if d == 0.0:
            m[k] = 0.0
            m[k + 1] = 0.0
            continue
        if m[k] / d < 0:
            m[k] = 0.0
        if m[k + 1] / d < 0:
            m[k + 1] = 0.0
        a, b = m[k] / d, m[k + 1] / d
        r2 = a * a + b * b
        if r2 > 9.0:
            tau = 3.0 / np.sqrt(r2)
            m[k] = tau * a * d
            m[k + 1] = tau * b * d
    return m


class MonotoneHermite:
    """Cubic Hermite interpolant through ``(x, y)`` with limited slopes."""

    def __init__(self, x, y, slopes):
        self.x = np.asarray(x, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.slopes = limit_slopes(self.x, self.y, slopes)
        self._spline = CubicHermiteSpline(self.x, self.y, self.slopes, extrapolate=False)

    def __call__(self, xq):
        xq = np.asarray(xq, dtype=float)
        out = self._spline(xq)
        # hit the stored node values bit-exactly
        idx = np.searchsorted(self.x, xq)
        idx = np.clip(idx, 0, len(self.x) - 1)
        at_node = self.x[idx] == xq
        if np.any(at_node):
            out = np.where(at_node, self.y[idx], out)
        return out
