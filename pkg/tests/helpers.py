"""Shared test utilities that do not depend on solver internals."""
import numpy as np
from scipy.integrate import solve_ivp


def interior_slice(n, fraction=0.8):
    cut = int(round(n * (1 - fraction) / 2))
    return slice(cut, n - cut)


def ode_log_residual(spec, f, rate, n_segments=24, span=6, seed=0):
    """Largest |log f_ode - log f| over short segments started from solver data.

    On each segment the generator equation is integrated independently by
    ``solve_ivp`` in the variables ``(log f, f'/f)``, starting from the solver's
    value and slope at a grid node, and compared at a later node.
    """
    rng = np.random.default_rng(seed)
    grid = f.grid
    sl = interior_slice(len(grid))
    starts = rng.choice(np.arange(sl.start, sl.stop - span), size=n_segments, replace=False)
    tab = f.tabulation
    ell = tab.ell_sub[tab.grid_sub]
    worst = 0.0

    for i in starts:
        j = i + span
        x_i, L = grid[i], grid[j] - grid[i]
        # tau in [0, 1] with x = x_i + L tau; v = L f'/f keeps both components O(1)
        def rhs(tau, y):
            x = np.array(x_i + L * tau)
            b = float(spec.drift(x))
            s2 = float(spec.volatility(x)) ** 2
            v = y[1]
            return [v, 2.0 * L * (L * rate - b * v) / s2 - v * v]

        # integrate in the direction in which f dominates the other solution
        a, b = (i, j) if f.sign > 0 else (j, i)
        ta, tb = (0.0, 1.0) if f.sign > 0 else (1.0, 0.0)
        w0 = f.sign * np.exp(f.log_abs_scale_derivative[a] + ell[a] - f.log_values[a])
        sol = solve_ivp(rhs, (ta, tb), [f.log_values[a], L * w0], method="DOP853",
                        rtol=1e-13, atol=1e-14)
        assert sol.success, sol.message
        worst = max(worst, abs(sol.y[0, -1] - f.log_values[b]))
    return worst
