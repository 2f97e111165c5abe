"""Angular Neumann eigenpair and the Hardy constant of an annulus.

Both are symmetric tridiagonal generalized problems K x = mu W x in flux
form. The smallest wanted eigenpair is found by inverse iteration (shift 0)
and polished by Rayleigh-quotient iteration.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import solve_banded

from .discretization import omega_cell_integrals
from .geometry import Decomposition

__all__ = [
    "EigenConvergenceError",
    "AngularEigenResult",
    "HardyResult",
    "ThinAnnulusRow",
    "ThinAnnulusSweep",
    "angular_eigen",
    "hardy_constant",
    "hardy_closed_form",
    "thin_annulus_sweep",
]

log = logging.getLogger(__name__)


class EigenConvergenceError(RuntimeError):
    def __init__(self, message, iterations, residual):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class _Tridiagonal:
    """K = tridiag(off, diag, off) with a diagonal mass W."""

    def __init__(self, diag, off, mass):
        self.diag = np.asarray(diag, dtype=float)
        self.off = np.asarray(off, dtype=float)
        self.mass = np.asarray(mass, dtype=float)

    def matvec(self, x):
        y = self.diag * x
        y[:-1] += self.off * x[1:]
        y[1:] += self.off * x[:-1]
        return y

    def solve(self, sigma, rhs, ground=False):
        """Solve (K - sigma W) x = rhs; with ``ground`` the first unknown is pinned to 0."""
        a = self.diag - sigma * self.mass
        off = self.off
        if ground:
            a, off, rhs = a[1:], off[1:], rhs[1:]
        ab = np.zeros((3, a.size))
        ab[0, 1:] = off
        ab[1] = a
        ab[2, :-1] = off
        x = solve_banded((1, 1), ab, rhs, check_finite=False)
        return np.concatenate([[0.0], x]) if ground else x

    def rayleigh(self, x):
        return float(x @ self.matvec(x)) / float(x @ (self.mass * x))

    def residual(self, x, mu):
        """Normwise backward error ||K x - mu W x|| / (||K x|| + |mu| ||W x||)."""
        kx = self.matvec(x)
        wx = self.mass * x
        return float(np.linalg.norm(kx - mu * wx) / (np.linalg.norm(kx) + abs(mu) * np.linalg.norm(wx)))


def _inverse_iteration(op: _Tridiagonal, x0, deflate_constant=False, tol=1e-12, max_iter=500):
    W = op.mass

    def clean(x):
        if deflate_constant:
            x = x - (W @ x) / W.sum()
        return x / np.sqrt(x @ (W * x))

    x = clean(np.asarray(x0, dtype=float))
    mu = op.rayleigh(x)
    # plain inverse iteration at shift 0 (grounded when the constant mode is in the kernel)
    for it in range(1, max_iter + 1):
        x = clean(op.solve(0.0, W * x, ground=deflate_constant))
        mu_new = op.rayleigh(x)
        converged = abs(mu_new - mu) <= 1e-6 * abs(mu_new)
        mu = mu_new
        if converged:
            break
    # Rayleigh-quotient polish. The vector converges more slowly than mu, so
    # stop on the residual; when the shift is numerically singular or the
    # step does not help, take a plain shift-0 step instead.
    res = op.residual(x, mu)
    for _ in range(60):
        if res <= tol:
            break
        try:
            y = op.solve(mu, W * x)
            ok = bool(np.all(np.isfinite(y)))
        except (np.linalg.LinAlgError, ValueError):
            ok = False
        if ok:
            x_new = clean(y)
            mu_new = op.rayleigh(x_new)
            res_new = op.residual(x_new, mu_new)
        if not ok or res_new >= res:
            x_new = clean(op.solve(0.0, W * x, ground=deflate_constant))
            mu_new = op.rayleigh(x_new)
            res_new = op.residual(x_new, mu_new)
        it += 1
        x, mu, res = x_new, mu_new, res_new
    if res > max(tol, 1e-9):
        raise EigenConvergenceError(f"eigen iteration stalled: residual {res:.3e} after {it} steps", it, res)
    return mu, x, it, res


@dataclass(frozen=True)
class AngularEigenResult:
    """Two lowest Neumann eigenpairs of -(omega psi')' = mu omega psi on (0, pi/2).

    ``psi1`` is normalized with ``weights`` (cell integrals of omega) and its
    sign fixed so that it increases from theta=0 to theta=pi/2, like the
    closed form (m-n)/N - cos(2 theta).
    """

    decomp: Decomposition
    theta: np.ndarray
    mu0: float
    mu1: float
    psi1: np.ndarray
    omega: np.ndarray
    weights: np.ndarray
    face_omega: np.ndarray
    iterations: int
    residual: float

    @property
    def dtheta(self) -> float:
        return float(self.theta[1] - self.theta[0])

    def inner(self, f, g) -> float:
        return float(np.sum(self.weights * f * g))

    def dirichlet(self, f) -> float:
        """Discrete int omega f'^2 dtheta, consistent with the eigen discretization."""
        return float(np.sum(self.face_omega * np.diff(f) ** 2) / self.dtheta)


def _angular_operator(decomp: Decomposition, n_theta: int, theta_max: float = np.pi / 2):
    dth = theta_max / n_theta
    theta = (np.arange(n_theta) + 0.5) * dth
    faces = np.arange(1, n_theta) * dth
    face_omega = decomp.omega(faces)
    k = face_omega / dth
    diag = np.zeros(n_theta)
    diag[:-1] += k
    diag[1:] += k
    weights = omega_cell_integrals(decomp, np.arange(n_theta + 1) * dth)
    return theta, face_omega, weights, _Tridiagonal(diag, -k, weights)


def angular_eigen(decomp: Decomposition, n_theta: int = 512) -> AngularEigenResult:
    if n_theta < 16:
        raise ValueError("n_theta must be at least 16")
    theta, face_omega, weights, op = _angular_operator(decomp, n_theta)
    mu1, psi, it, res = _inverse_iteration(op, -np.cos(2 * theta), deflate_constant=True)
    if psi[-1] < psi[0]:
        psi = -psi
    const = np.ones(n_theta)
    mu0 = op.rayleigh(const)
    return AngularEigenResult(
        decomp=decomp,
        theta=theta,
        mu0=float(mu0),
        mu1=float(mu1),
        psi1=psi,
        omega=decomp.omega(theta),
        weights=weights,
        face_omega=face_omega,
        iterations=it,
        residual=res,
    )


@dataclass(frozen=True)
class HardyResult:
    """Smallest eigenvalue of -(r^(N-1) w')' = lambda r^(N-3) w, w(R1)=w(R2)=0."""

    lambda1: float
    eigenfunction: np.ndarray
    r: np.ndarray
    R1: float
    R2: float
    N: int
    iterations: int = 0
    residual: float = 0.0

    def rayleigh_quotient(self, w=None) -> float:
        """Discrete Hardy quotient int w'^2 r^(N-1) / int w^2 r^(N-3) on the same stencil."""
        w = self.eigenfunction if w is None else np.asarray(w, dtype=float)
        r = self.r
        dr = r[1] - r[0]
        rf = 0.5 * (r[1:] + r[:-1])
        num = np.sum(rf ** (self.N - 1) * np.diff(w) ** 2) / dr
        den = np.sum(r[1:-1] ** (self.N - 3) * w[1:-1] ** 2) * dr
        return float(num / den)


def hardy_closed_form(N: int, R1: float, R2: float) -> float:
    """((N-2)/2)^2 + pi^2 / ln^2(R2/R1), from w = r^(-(N-2)/2) phi(ln r)."""
    return ((N - 2) / 2) ** 2 + np.pi**2 / np.log(R2 / R1) ** 2


def hardy_constant(N: int, R1: float, R2: float, n_r: int = 2048) -> HardyResult:
    if not 0 < R1 < R2:
        raise ValueError(f"need 0 < R1 < R2, got {R1}, {R2}")
    if n_r < 32:
        raise ValueError("n_r must be at least 32")
    r = np.linspace(R1, R2, n_r + 1)
    dr = r[1] - r[0]
    rf = (0.5 * (r[1:] + r[:-1])) ** (N - 1) / dr
    diag = rf[:-1] + rf[1:]
    off = -rf[1:-1]
    mass = r[1:-1] ** (N - 3) * dr
    op = _Tridiagonal(diag, off, mass)
    x0 = np.sin(np.pi * (r[1:-1] - R1) / (R2 - R1))
    lam, w, it, res = _inverse_iteration(op, x0)
    if w.sum() < 0:
        w = -w
    w_full = np.concatenate([[0.0], w, [0.0]])
    return HardyResult(float(lam), w_full, r, float(R1), float(R2), int(N), it, res)


@dataclass(frozen=True)
class ThinAnnulusRow:
    R: float
    gammaR: float
    lam: float
    lambda_over_R2: float
    deviation_from_pi2: float


@dataclass(frozen=True)
class ThinAnnulusSweep:
    rows: list
    deviation_decreasing: bool


def thin_annulus_sweep(
    N: int,
    R_list: Sequence[float],
    gamma: Callable[[float], float] = lambda R: R + 1.0,
    n_r: int = 2048,
) -> ThinAnnulusSweep:
    """Hardy constants of R < |x| < gamma(R); reports lambda_R / R^2 against pi^2."""
    rows = []
    for R in R_list:
        gR = float(gamma(R))
        if not gR > R:
            raise ValueError(f"gamma(R) must exceed R, got gamma({R}) = {gR}")
        res = hardy_constant(N, R, gR, n_r)
        q = res.lambda1 / R**2
        rows.append(ThinAnnulusRow(float(R), gR, res.lambda1, q, abs(q - np.pi**2)))
    dev = [row.deviation_from_pi2 for row in rows]
    decreasing = all(b < a for a, b in zip(dev, dev[1:]))
    return ThinAnnulusSweep(rows, decreasing)
