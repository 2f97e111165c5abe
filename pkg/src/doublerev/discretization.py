"""Mapped tensor grid, weighted Laplacian and quadrature on the reduced domain.

Nodes live at (theta_j, rho_i) with theta_j = (j + 1/2) dtheta (staggered, so
the angular weight never vanishes at a node) and rho_i = i / n_rho. The
physical radius is r = g1(theta) + rho * (g2(theta) - g1(theta)).

The operator is assembled from the Dirichlet energy

    int |grad u|^2 dmu,   dmu = r^(N-1) omega(theta) dr dtheta,

written in (theta, rho). With h = g2 - g1 and c = -(g1' + rho h') / h,

    |grad u|^2 = u_rho^2 (1/h^2 + c^2/r^2) + 2 c u_rho u_theta / r^2 + u_theta^2 / r^2.

Discretizing the energy (rather than the strong form) gives a stiffness
matrix K that is symmetric by construction; the weighted Laplacian is
L = M^-1 K with M the lumped node masses, so <Lu, v>_mu = u^T K v.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import Decomposition, DomainProfile

__all__ = [
    "Grid",
    "Field",
    "WeightedOperator",
    "LinearSolveError",
    "build_grid",
    "assemble_laplacian",
    "quadrature",
    "dirichlet_solve",
    "omega_cell_integrals",
]

log = logging.getLogger(__name__)

DIRECT_SOLVE_LIMIT = 200_000


_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


def omega_cell_integrals(decomp: Decomposition, edges) -> np.ndarray:
    """Integrals of cos^(m-1) sin^(n-1) between consecutive edges.

    Gauss-Legendre per cell. When m or n is at least 3 the weight vanishes to
    second order at an axis, and a midpoint mass would leave an O(1)
    truncation error in the end cell.
    """
    edges = np.asarray(edges, dtype=float)
    a, b = edges[:-1, None], edges[1:, None]
    x = 0.5 * (a + b) + 0.5 * (b - a) * _GL_X[None, :]
    return 0.5 * (b - a)[:, 0] * (decomp.omega(x) @ _GL_W)


class LinearSolveError(RuntimeError):
    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


@dataclass(frozen=True, eq=False)
class Grid:
    decomp: Decomposition
    profile: DomainProfile
    n_theta: int
    n_rho: int

    @property
    def dtheta(self) -> float:
        return self.profile.theta_max / self.n_theta

    @property
    def drho(self) -> float:
        return 1.0 / self.n_rho

    @property
    def h(self) -> float:
        """Mesh parameter in mapped coordinates."""
        return max(self.dtheta, self.drho)

    @cached_property
    def theta(self) -> np.ndarray:
        return (np.arange(self.n_theta) + 0.5) * self.dtheta

    @cached_property
    def rho(self) -> np.ndarray:
        return np.arange(self.n_rho + 1) * self.drho

    @property
    def shape(self) -> tuple:
        """Shape of the interior value array."""
        return (self.n_theta, self.n_rho - 1)

    @property
    def size(self) -> int:
        return self.n_theta * (self.n_rho - 1)

    def radius(self, theta, rho):
        g1 = self.profile.g1(theta)
        return g1 + rho * (self.profile.g2(theta) - g1)

    @cached_property
    def r(self) -> np.ndarray:
        """Physical radius at every node, shape (n_theta, n_rho + 1)."""
        return self.radius(self.theta[:, None], self.rho[None, :])

    @cached_property
    def s(self) -> np.ndarray:
        return self.r * np.cos(self.theta)[:, None]

    @cached_property
    def t(self) -> np.ndarray:
        return self.r * np.sin(self.theta)[:, None]

    def jacobian(self, theta, rho):
        """r^(N-1) omega(theta) (g2 - g1): density of dmu in (theta, rho)."""
        r = self.radius(theta, rho)
        return r ** (self.decomp.N - 1) * self.decomp.omega(theta) * self.profile.width(theta)

    @cached_property
    def omega_cells(self) -> np.ndarray:
        """Exact integrals of omega over the angular cells [j, j+1] * dtheta."""
        edges = np.arange(self.n_theta + 1) * self.dtheta
        return omega_cell_integrals(self.decomp, edges)

    @cached_property
    def node_weights(self) -> np.ndarray:
        """Product-rule weights, shape (n_theta, n_rho + 1).

        omega is integrated exactly over each angular cell, the remaining
        factor r^(N-1) (g2 - g1) is taken at the node; trapezoid in rho.
        """
        th = self.theta[:, None]
        w = self.r ** (self.decomp.N - 1) * self.profile.width(th) * self.omega_cells[:, None] * self.drho
        w[:, 0] *= 0.5
        w[:, -1] *= 0.5
        return w

    @cached_property
    def mass(self) -> np.ndarray:
        """Interior node weights, flattened in value order."""
        return self.node_weights[:, 1:-1].ravel()

    def field(self, values) -> "Field":
        return Field(self, np.asarray(values, dtype=float).reshape(self.shape))

    def zeros(self) -> "Field":
        return Field(self, np.zeros(self.shape))

    def sample(self, fn) -> "Field":
        """Field from fn(theta, rho) evaluated at interior nodes."""
        th = self.theta[:, None]
        rho = self.rho[None, 1:-1]
        return self.field(np.broadcast_to(fn(th, rho), self.shape))

    def sample_radial(self, fn) -> "Field":
        """Field from fn(r) at interior nodes."""
        return self.field(fn(self.r[:, 1:-1]))

    def describe(self) -> dict:
        return {
            "decomp": {"m": self.decomp.m, "n": self.decomp.n},
            "profile": self.profile.describe(),
            "n_theta": self.n_theta,
            "n_rho": self.n_rho,
        }

    def to_json(self) -> str:
        return json.dumps(self.describe(), indent=2)


@dataclass(frozen=True, eq=False)
class Field:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            v = v.reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite values")
        object.__setattr__(self, "values", v)

    @property
    def flat(self) -> np.ndarray:
        return self.values.ravel()

    def full(self) -> np.ndarray:
        """Values including the zero Dirichlet rows, shape (n_theta, n_rho + 1)."""
        out = np.zeros((self.grid.n_theta, self.grid.n_rho + 1))
        out[:, 1:-1] = self.values
        return out

    def sup(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def __mul__(self, c):
        return Field(self.grid, self.values * c)

    __rmul__ = __mul__


@dataclass(eq=False)
class WeightedOperator:
    """Stiffness K and lumped mass M on interior nodes; L = M^-1 K."""

    grid: Grid
    K: sp.csr_matrix
    mass: np.ndarray
    _lu: object = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return self.mass.size

    def apply(self, u) -> np.ndarray:
        """L u as a flat nodal array."""
        return (self.K @ np.ravel(u)) / self.mass

    def form(self, u, v) -> float:
        """Discrete weighted Dirichlet form <grad u, grad v>_mu."""
        return float(np.ravel(u) @ (self.K @ np.ravel(v)))

    def inner(self, u, v) -> float:
        return float(np.sum(self.mass * np.ravel(u) * np.ravel(v)))

    def norm(self, u) -> float:
        return float(np.sqrt(self.inner(u, u)))

    def factorized(self):
        if self._lu is None:
            self._lu = spla.splu(self.K.tocsc())
        return self._lu


def build_grid(decomp: Decomposition, profile: DomainProfile, n_theta: int, n_rho: int) -> Grid:
    if n_theta < 4 or n_rho < 4:
        raise ValueError(f"need n_theta >= 4 and n_rho >= 4, got {n_theta}, {n_rho}")
    grid = Grid(decomp, profile, int(n_theta), int(n_rho))
    width = profile.width(grid.theta)
    if np.any(width < 1e-12):
        raise ValueError("degenerate profile: g2 - g1 vanishes at an interior angular node")
    if np.any(profile.g1(grid.theta) <= 0):
        raise ValueError("inner profile must be positive")
    return grid


def _metric(grid: Grid, theta, rho):
    """Coefficients J*A, J*B, J*C of the energy density at (theta, rho), omega excluded."""
    prof = grid.profile
    g1 = prof.g1(theta)
    h = prof.g2(theta) - g1
    r = g1 + rho * h
    dh = prof.g2p(theta) - prof.g1p(theta)
    c = -(prof.g1p(theta) + rho * dh) / h
    J = r ** (grid.decomp.N - 1) * h
    return J * (1.0 / h**2 + c**2 / r**2), J * c / r**2, J / r**2


def _diff_rows(n_rows, cols_plus, cols_minus, n_cols, scale):
    rows = np.arange(n_rows)
    data = np.concatenate([np.full(n_rows, scale), np.full(n_rows, -scale)])
    return sp.csr_matrix(
        (data, (np.concatenate([rows, rows]), np.concatenate([cols_plus, cols_minus]))),
        shape=(n_rows, n_cols),
    )


def assemble_laplacian(grid: Grid, decomp: Decomposition | None = None) -> WeightedOperator:
    """Assemble K from edge (diagonal metric) and corner (cross metric) terms.

    Dirichlet rows rho in {0, 1} are eliminated; the theta ends carry no flux,
    which is the even reflection across the symmetry axes.
    """
    if decomp is not None and decomp != grid.decomp:
        raise ValueError("decomposition does not match the grid")
    nt, nr = grid.n_theta, grid.n_rho
    dth, drho = grid.dtheta, grid.drho
    th, rho = grid.theta, grid.rho
    n_full = nt * (nr + 1)
    idx = np.arange(n_full).reshape(nt, nr + 1)

    # rho-edges (theta_j, rho_{i+1/2})
    rho_mid = 0.5 * (rho[:-1] + rho[1:])
    A, _, _ = _metric(grid, th[:, None], rho_mid[None, :])
    # omega integrated over the cell, consistent with the node masses
    a_e = (A * grid.omega_cells[:, None] / drho).ravel()
    Gr = _diff_rows(a_e.size, idx[:, 1:].ravel(), idx[:, :-1].ravel(), n_full, 1.0)

    # theta-edges (theta_{j+1/2}, rho_i), interior rho only
    th_mid = 0.5 * (th[:-1] + th[1:])
    om_mid = grid.decomp.omega(th_mid)[:, None]
    _, _, C = _metric(grid, th_mid[:, None], rho[None, 1:-1])
    c_e = (om_mid * C * drho / dth).ravel()
    Gt = _diff_rows(c_e.size, idx[1:, 1:-1].ravel(), idx[:-1, 1:-1].ravel(), n_full, 1.0)

    K = Gr.T @ sp.diags(a_e) @ Gr + Gt.T @ sp.diags(c_e) @ Gt

    # corners (theta_{j+1/2}, rho_{i+1/2}); B vanishes identically on annuli
    _, B, _ = _metric(grid, th_mid[:, None], rho_mid[None, :])
    b = (om_mid * B * dth * drho).ravel()
    if np.any(b != 0.0) and nt > 1:
        n_c = b.size
        rows = np.repeat(np.arange(n_c), 4)
        c00, c01 = idx[:-1, :-1].ravel(), idx[:-1, 1:].ravel()
        c10, c11 = idx[1:, :-1].ravel(), idx[1:, 1:].ravel()
        cols = np.stack([c00, c01, c10, c11], axis=1).ravel()
        # averaged d/drho and d/dtheta at the corner
        P = sp.csr_matrix((np.tile([-0.5, 0.5, -0.5, 0.5], n_c) / drho, (rows, cols)), shape=(n_c, n_full))
        Q = sp.csr_matrix((np.tile([-0.5, -0.5, 0.5, 0.5], n_c) / dth, (rows, cols)), shape=(n_c, n_full))
        Bd = sp.diags(b)
        K = K + P.T @ Bd @ Q + Q.T @ Bd @ P

    interior = idx[:, 1:-1].ravel()
    K = sp.csr_matrix(K)[interior][:, interior]
    K = 0.5 * (K + K.T)  # exact symmetry after floating-point assembly
    K.sum_duplicates()
    mass = grid.mass
    if not np.all(mass > np.finfo(float).tiny):
        raise FloatingPointError("node weight omega(theta) r^(N-1) underflows; grid too fine or N too large")
    return WeightedOperator(grid=grid, K=sp.csr_matrix(K), mass=mass.copy())


def quadrature(grid: Grid, field_values) -> float:
    """Integral of v dmu. Accepts interior or full (boundary-including) arrays."""
    v = field_values.values if isinstance(field_values, Field) else np.asarray(field_values, dtype=float)
    if v.shape == grid.shape or v.size == grid.size:
        return float(np.sum(grid.mass * v.ravel()))
    v = v.reshape(grid.n_theta, grid.n_rho + 1)
    return float(np.sum(grid.node_weights * v))


def dirichlet_solve(op: WeightedOperator, rhs, method: str = "auto", lin_tol: float | None = None) -> Field:
    """Solve L v = rhs, i.e. K v = M rhs, with zero Dirichlet data."""
    f = rhs.flat if isinstance(rhs, Field) else np.ravel(np.asarray(rhs, dtype=float))
    if not np.all(np.isfinite(f)):
        raise ValueError("right-hand side is not finite")
    grid = op.grid
    if not np.any(f):
        return grid.zeros()
    b = op.mass * f
    if method == "auto":
        method = "direct" if op.size < DIRECT_SOLVE_LIMIT else "cg"
    rhs_norm = op.norm(f)
    if method == "direct":
        tol = 1e-10 if lin_tol is None else lin_tol
        lu = op.factorized()
        v = lu.solve(b)
        res = op.norm(op.apply(v) - f) / rhs_norm
        if res > tol:
            # one step of iterative refinement
            v = v + lu.solve(b - op.K @ v)
            res = op.norm(op.apply(v) - f) / rhs_norm
        if res > tol:
            raise LinearSolveError(f"direct solve residual {res:.3e} exceeds {tol:.1e}", 1, res)
    elif method == "cg":
        tol = 1e-8 if lin_tol is None else lin_tol
        diag = op.K.diagonal()
        pre = spla.LinearOperator(op.K.shape, matvec=lambda x: x / diag)
        # residual in the mu-norm of L v - f is ||M^-1 (K v - b)||_M; aim below it
        target = tol * rhs_norm * np.sqrt(op.mass.min())
        count = [0]

        def cb(_):
            count[0] += 1

        v, info = spla.cg(op.K, b, rtol=0.0, atol=target, M=pre, maxiter=20 * op.size, callback=cb)
        res = op.norm(op.apply(v) - f) / rhs_norm
        if info != 0 or res > tol:
            raise LinearSolveError(
                f"conjugate gradient did not converge after {count[0]} iterations (residual {res:.3e})",
                count[0],
                res,
            )
    else:
        raise ValueError(f"unknown method {method!r}")
    return grid.field(v)
