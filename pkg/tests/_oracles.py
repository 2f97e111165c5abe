"""Independent reference computations for the tests.

Nothing here reuses the package's discretization: manufactured solutions are
differentiated symbolically, the Hardy eigenvalue is found by shooting, and
the antitone projection is found by enumerating block structures.
"""

from itertools import combinations

import numpy as np
import sympy as sy
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

_th, _r = sy.symbols("theta r", positive=True)


def manufactured(decomp, profile):
    """(u, f) as numpy callables of (theta, r) with -Lap u = f and u = 0 on both profiles."""
    m, n = decomp.m, decomp.n
    N = m + n
    P = profile.params
    if "R1" in P:
        G1, G2 = sy.Float(P["R1"]), sy.Float(P["R2"])
    else:
        G2 = (1 / sy.Float(P["b_out"]) ** 2 + sy.sin(_th) ** 2 * (1 / sy.Float(P["a_out"]) ** 2 - 1 / sy.Float(P["b_out"]) ** 2)) ** sy.Rational(-1, 2)
        G1 = (1 / sy.Float(P["d_in"]) ** 2 + sy.sin(_th) ** 2 * (1 / sy.Float(P["c_in"]) ** 2 - 1 / sy.Float(P["d_in"]) ** 2)) ** sy.Rational(-1, 2)
    u = sy.sin(sy.pi * (_r - G1) / (G2 - G1)) * (2 + sy.cos(2 * _th))
    om = sy.cos(_th) ** (m - 1) * sy.sin(_th) ** (n - 1)
    lap = sy.diff(_r ** (N - 1) * sy.diff(u, _r), _r) / _r ** (N - 1) + sy.diff(om * sy.diff(u, _th), _th) / (om * _r**2)
    return sy.lambdify((_th, _r), u, "numpy"), sy.lambdify((_th, _r), -lap, "numpy")


def mms_errors(decomp, profile, sizes):
    """Max nodal error of the discrete Dirichlet solve against the manufactured solution."""
    from doublerev.discretization import assemble_laplacian, build_grid, dirichlet_solve

    fu, ff = manufactured(decomp, profile)
    errs = []
    for k in sizes:
        g = build_grid(decomp, profile, k, k)
        TH = np.broadcast_to(g.theta[:, None], g.shape)
        R = g.r[:, 1:-1]
        v = dirichlet_solve(assemble_laplacian(g), g.field(ff(TH, R)))
        errs.append(float(np.max(np.abs(v.values - fu(TH, R)))))
    return np.array(errs)


def observed_orders(errs):
    errs = np.asarray(errs)
    return np.log2(errs[:-1] / errs[1:])


def hardy_by_shooting(N, R1, R2):
    """Smallest lambda with -(r^(N-1) w')' = lambda r^(N-3) w, w(R1) = w(R2) = 0."""

    def end_value(lam):
        def f(r, y):
            return [y[1] / r ** (N - 1), -lam * r ** (N - 3) * y[0]]

        sol = solve_ivp(f, (R1, R2), [0.0, 1.0], method="DOP853", rtol=1e-12, atol=1e-14)
        return sol.y[0, -1]

    lo = ((N - 2) / 2) ** 2
    hi = lo + 1.0
    # walk up until w(R2) changes sign for the first time
    while end_value(hi) > 0:
        lo, hi = hi, hi * 2.0
    return brentq(end_value, lo, hi, xtol=1e-13, rtol=1e-14)


def brute_antitone(y, w):
    """Weighted least-squares nonincreasing fit by enumerating every block partition."""
    y = np.asarray(y, float)
    w = np.asarray(w, float)
    n = y.size
    best, best_val = None, np.inf
    for k in range(n):
        for cuts in combinations(range(1, n), k):
            bounds = (0, *cuts, n)
            fit = np.empty(n)
            for a, b in zip(bounds[:-1], bounds[1:]):
                fit[a:b] = np.sum(w[a:b] * y[a:b]) / np.sum(w[a:b])
            if np.any(np.diff(fit) > 1e-14):
                continue
            val = np.sum(w * (fit - y) ** 2)
            if val < best_val:
                best, best_val = fit, val
    return best


def random_cone_member(rng, grid, style):
    """Random member of the discrete cone.

    The recipe is nonincreasing along every rho-line, which is the cone on an
    annulus. On curved profiles it is passed through cone_project, the
    identity on members, so the result is a member on any grid.
    """
    from doublerev.cone import cone_project

    return cone_project(_rho_monotone(rng, grid, style))


def _rho_monotone(rng, grid, style):
    shape = grid.shape
    bump = np.sin(np.pi * grid.rho[None, 1:-1])
    if style == "rough":
        steps = rng.random(shape)
    elif style == "sparse":
        steps = rng.random(shape) * (rng.random(shape) < 0.2)
    else:
        c = rng.random(3)
        th = grid.theta[:, None] / grid.profile.theta_max
        return grid.field((c[0] + c[1] * np.cos(np.pi * th / 2) ** 2 + c[2] * (1 - th)) * bump)
    u = np.cumsum(steps[::-1], axis=0)[::-1]
    return grid.field(u * bump)
