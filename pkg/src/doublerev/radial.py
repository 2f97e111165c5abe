"""Positive radial solutions on an annulus by shooting.

Solves u'' + (N-1) u'/r + a(r) u^(p-1) = 0 on (R1, R2), u(R1) = u(R2) = 0,
with u > 0 inside. Independent of the 2D machinery; used as an oracle and as
the base state for the second-variation functional.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

__all__ = ["BracketError", "RadialSolution", "shoot_radial"]

log = logging.getLogger(__name__)


class BracketError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class RadialSolution:
    R1: float
    R2: float
    N: int
    p: float
    a_radial: Callable
    r: np.ndarray
    profile: np.ndarray
    slope: np.ndarray
    shoot_param: float
    zero: float
    dirichlet_integral: float
    potential_integral: float
    _sol: Callable = None

    def __call__(self, r):
        """u(r), clipped to zero outside [R1, R2]."""
        r = np.asarray(r, dtype=float)
        inside = (r >= self.R1) & (r <= self.R2)
        out = np.zeros_like(r)
        if np.any(inside):
            out[inside] = self._sol(np.clip(r[inside], self.R1, self.zero))[0]
        return np.maximum(out, 0.0)

    def derivative(self, r):
        r = np.asarray(r, dtype=float)
        return self._sol(np.clip(r, self.R1, self.zero))[1]

    def residual(self, degree: int = 80, r=None) -> float:
        """Sup-norm ODE residual of a Chebyshev interpolant of the profile,
        relative to sup |a u^(p-1)|.

        The interpolant is differentiated spectrally, so the check does not
        reuse the integrator's own derivative. Meaningful when u^(p-1) is
        smooth up to the boundary (integer p).
        """
        from numpy.polynomial import chebyshev as C

        k = np.arange(degree + 1)
        x = np.cos(np.pi * k / degree)
        rr = 0.5 * (self.R1 + self.R2) + 0.5 * (self.R2 - self.R1) * x
        coef = C.chebfit(x, self(rr), degree)
        scale = 2.0 / (self.R2 - self.R1)
        r = self.r[1:-1] if r is None else np.asarray(r, dtype=float)
        xe = (2 * r - self.R1 - self.R2) / (self.R2 - self.R1)
        u = C.chebval(xe, coef)
        du = C.chebval(xe, C.chebder(coef)) * scale
        d2u = C.chebval(xe, C.chebder(coef, 2)) * scale**2
        src = self.a_radial(r) * np.abs(u) ** (self.p - 2) * u
        res = d2u + (self.N - 1) * du / r + src
        return float(np.max(np.abs(res)) / np.max(np.abs(src)))


def _rhs(N, p, a_radial):
    def f(r, y):
        u, du = y[0], y[1]
        up = max(u, 0.0)
        src = a_radial(r) * up ** (p - 1)
        return [du, -(N - 1) * du / r - src, du * du * r ** (N - 1), a_radial(r) * up**p * r ** (N - 1)]

    return f


def _crossing(r, y):
    return y[0]


_crossing.terminal = True
_crossing.direction = -1


def _shoot(sigma, N, p, a_radial, R1, r_end, ode_tol, dense=False):
    return solve_ivp(
        _rhs(N, p, a_radial),
        (R1, r_end),
        [0.0, sigma, 0.0, 0.0],
        method="DOP853",
        rtol=ode_tol,
        atol=ode_tol * 1e-3,
        events=_crossing,
        dense_output=dense,
    )


def _first_zero(sigma, N, p, a_radial, R1, r_end, ode_tol):
    sol = _shoot(sigma, N, p, a_radial, R1, r_end, ode_tol)
    if sol.t_events[0].size:
        return float(sol.t_events[0][0])
    return r_end


def shoot_radial(
    N: int,
    R1: float,
    R2: float,
    p: float,
    a_radial: Callable | None = None,
    ode_tol: float = 1e-10,
    n_fine: int = 4001,
) -> RadialSolution:
    """Find u'(R1) = sigma > 0 whose trajectory first returns to zero at R2.

    The first zero moves inward as sigma grows, so sigma is bracketed by
    doubling/halving and then located by Brent's method on log(sigma).
    """
    if not p > 2:
        raise ValueError(f"p must exceed 2, got {p}")
    if not 0 < R1 < R2:
        raise ValueError(f"need 0 < R1 < R2, got {R1}, {R2}")
    if a_radial is None:
        a_radial = lambda r: 1.0  # noqa: E731
    r_end = R2 + 4.0 * (R2 - R1)

    def gap(log_sigma):
        return _first_zero(np.exp(log_sigma), N, p, a_radial, R1, r_end, ode_tol) - R2

    lo = hi = 0.0
    g_lo = g_hi = gap(0.0)
    for _ in range(200):
        if g_hi < 0:
            break
        hi += np.log(2.0)
        g_hi = gap(hi)
    else:
        raise BracketError(f"no sigma found whose first zero lies before R2 (largest tried {np.exp(hi):.3e})")
    if g_lo < 0:
        lo = hi
        for _ in range(200):
            lo -= np.log(2.0)
            g_lo = gap(lo)
            if g_lo > 0:
                break
        else:
            raise BracketError(f"no sigma found whose first zero lies beyond R2 (smallest tried {np.exp(lo):.3e})")
        hi = lo + np.log(2.0)
    log_sigma = brentq(gap, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=400)
    sigma = float(np.exp(log_sigma))

    sol = _shoot(sigma, N, p, a_radial, R1, r_end, ode_tol, dense=True)
    if not sol.t_events[0].size:
        raise BracketError("final trajectory lost its zero crossing")
    zero = float(sol.t_events[0][0])
    y_end = sol.y_events[0][0]
    r = np.linspace(R1, R2, n_fine)
    y = sol.sol(np.minimum(r, zero))
    prof = np.maximum(y[0], 0.0)
    prof[0] = 0.0
    prof[-1] = 0.0
    log.debug("shoot: sigma=%.12g zero=%.15g (target %.15g)", sigma, zero, R2)
    return RadialSolution(
        R1=float(R1),
        R2=float(R2),
        N=int(N),
        p=float(p),
        a_radial=a_radial,
        r=r,
        profile=prof,
        slope=y[1],
        shoot_param=sigma,
        zero=zero,
        dirichlet_integral=float(y_end[2]),
        potential_integral=float(y_end[3]),
        _sol=sol.sol,
    )
