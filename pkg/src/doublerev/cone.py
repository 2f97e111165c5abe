"""The discrete cone: nonnegative fields that are nonincreasing in theta at fixed |x|.

Monotonicity is tested along arcs of constant physical radius. Node (j+1, i)
is compared with column j interpolated linearly in r at the same radius, with
the boundary zeros included and zero outside the column's radial range. When
every column shares the same radii (annuli) this is exactly the forward
difference along constant-rho lines.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np
from scipy.optimize import isotonic_regression

from .discretization import Field, Grid

__all__ = ["ConeDiagnostics", "cone_check", "cone_project", "antitone_regression", "arc_increments"]


@dataclass(frozen=True)
class _ArcMap:
    aligned: bool
    lo: np.ndarray  # (n_theta - 1, n_rho - 1) left bracket index into the full column
    t: np.ndarray  # interpolation weight of lo + 1
    inside: np.ndarray


_ARC_CACHE: "weakref.WeakKeyDictionary[Grid, _ArcMap]" = weakref.WeakKeyDictionary()


def _arc_map(grid: Grid) -> _ArcMap:
    cached = _ARC_CACHE.get(grid)
    if cached is not None:
        return cached
    r = grid.r
    aligned = bool(np.all(r[1:] == r[:1]))
    nt, ni = grid.n_theta, grid.n_rho - 1
    lo = np.zeros((max(nt - 1, 0), ni), dtype=int)
    t = np.zeros(lo.shape)
    inside = np.ones(lo.shape, dtype=bool)
    if not aligned:
        for j in range(nt - 1):
            col, target = r[j], r[j + 1, 1:-1]
            inside[j] = (target >= col[0]) & (target <= col[-1])
            k = np.clip(np.searchsorted(col, target, side="right") - 1, 0, col.size - 2)
            lo[j] = k
            t[j] = np.clip((target - col[k]) / (col[k + 1] - col[k]), 0.0, 1.0)
    out = _ArcMap(aligned, lo, t, inside)
    _ARC_CACHE[grid] = out
    return out


def _interp_column(full_col, arc: _ArcMap, j):
    lo, t = arc.lo[j], arc.t[j]
    vals = (1.0 - t) * full_col[lo] + t * full_col[lo + 1]
    return np.where(arc.inside[j], vals, 0.0)


def arc_increments(field: Field) -> np.ndarray:
    """u(theta_{j+1}, r) minus column j interpolated at the same r, shape (n_theta - 1, n_rho - 1)."""
    grid = field.grid
    u = field.values
    arc = _arc_map(grid)
    if arc.aligned:
        return np.diff(u, axis=0)
    full = np.zeros((grid.n_theta, grid.n_rho + 1))
    full[:, 1:-1] = u
    out = np.empty((grid.n_theta - 1, grid.n_rho - 1))
    for j in range(grid.n_theta - 1):
        out[j] = u[j + 1] - _interp_column(full[j], arc, j)
    return out


@dataclass(frozen=True)
class ConeDiagnostics:
    min_value: float
    max_theta_slope: float
    member: bool
    tol: float = 0.0


def cone_check(field: Field, tol: float | None = None) -> ConeDiagnostics:
    """Scan for negative values and for increases in theta at fixed radius.

    ``max_theta_slope`` is the largest arc increment divided by dtheta.
    The default tolerance is 1e-12 times the sup norm.
    """
    u = field.values
    if tol is None:
        tol = 1e-12 * field.sup()
    min_value = float(u.min()) if u.size else 0.0
    if u.shape[0] > 1:
        slope = float(np.max(arc_increments(field)) / field.grid.dtheta)
    else:
        slope = -np.inf
    member = min_value >= -tol and slope <= tol
    return ConeDiagnostics(min_value, slope, bool(member), float(tol))


def antitone_regression(y, w) -> np.ndarray:
    """Weighted least-squares nonincreasing fit (pool-adjacent-violators)."""
    y = np.asarray(y, dtype=float)
    if y.size <= 1:
        return y.copy()
    return isotonic_regression(y, weights=np.asarray(w, dtype=float), increasing=False).x


def cone_project(field: Field) -> Field:
    """Map a field into the cone; members are returned unchanged.

    On grids whose columns share their radii this is the nearest point in the
    weighted nodal L2(dmu) metric: each constant-rho line is fitted by
    antitone regression with the node masses as weights, then clamped at zero.
    Clamping keeps the order, so the composition is the projection onto the
    intersection.

    Otherwise the constraints couple neighbouring lines and no cheap metric
    projection exists. A sweep in theta is used instead: column j+1 is capped
    by the interpolated column j and clamped at zero. The result is in the
    cone, the map is order preserving and 1-Lipschitz in the max norm, and it
    is the identity on members.
    """
    grid = field.grid
    arc = _arc_map(grid)
    u = field.values.copy()
    if arc.aligned:
        w = grid.mass.reshape(grid.shape)
        if u.shape[0] > 1:
            bad = np.flatnonzero(np.any(np.diff(u, axis=0) > 0, axis=0))
            for i in bad:
                u[:, i] = antitone_regression(u[:, i], w[:, i])
        np.maximum(u, 0.0, out=u)
        return Field(grid, u)
    full = np.zeros((grid.n_theta, grid.n_rho + 1))
    full[0, 1:-1] = np.maximum(u[0], 0.0)
    for j in range(grid.n_theta - 1):
        cap = _interp_column(full[j], arc, j)
        full[j + 1, 1:-1] = np.maximum(np.minimum(u[j + 1], cap), 0.0)
    return Field(grid, full[:, 1:-1].copy())
