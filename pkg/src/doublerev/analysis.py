"""Symmetry breaking and multiplicity.

For a radial solution u(r) and an angular profile psi(theta), the
second-variation form along v = u psi factors into radial and angular
integrals:

    M(u, u psi) = A_psi * int (u_r^2 - (p-1) a u^p) r^(N-1) dr
                + D_psi * int u^2 r^(N-3) dr,

with A_psi = int psi^2 omega and D_psi = int psi'^2 omega. M < 0 for
psi = psi_1 shows the radial solution is not the constrained minimax point.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Optional

import numpy as np
from scipy.integrate import simpson

from .discretization import Field, Grid, build_grid
from .eigen import AngularEigenResult, angular_eigen, hardy_constant
from .geometry import Coefficient, Decomposition, constant_coefficient, make_annulus, radial_coefficient
from .radial import RadialSolution, shoot_radial
from .solver import ProblemSpec, SolveReport, mountain_pass, nonradiality

__all__ = [
    "GridIncompatibility",
    "SymmetryReport",
    "SecondVariation",
    "SweepEntry",
    "MultiplicitySweep",
    "NONRADIAL_THRESHOLD",
    "second_variation",
    "second_variation_M",
    "symmetry_report",
    "perturbed_init",
    "radial_init",
    "multiplicity_sweep",
    "nonradiality",
]

log = logging.getLogger(__name__)

# relative angular variation above which a solution is called nonradial
NONRADIAL_THRESHOLD = 1e-3


class GridIncompatibility(ValueError):
    """Radial and angular ingredients do not belong to the same problem."""


@dataclass(frozen=True)
class SecondVariation:
    value: float
    angular_mass: float
    angular_dirichlet: float
    radial_dirichlet: float
    radial_potential: float
    radial_hardy: float
    p: float

    @property
    def scale(self) -> float:
        """Magnitude of the competing terms; tolerances on M are taken relative to this."""
        return self.angular_mass * (self.radial_dirichlet + (self.p - 1) * self.radial_potential) + (
            self.angular_dirichlet * self.radial_hardy
        )


@dataclass(frozen=True)
class SymmetryReport:
    lambda1: float
    mu1: float
    criterion_lhs: float
    criterion_rhs: float
    criterion_holds: bool
    M_value: float
    M_scale: float
    nonradiality: float

    @property
    def nonradial(self) -> bool:
        return self.nonradiality >= NONRADIAL_THRESHOLD

    def as_dict(self) -> dict:
        return {
            "lambda1": self.lambda1,
            "mu1": self.mu1,
            "criterion_lhs": self.criterion_lhs,
            "criterion_rhs": self.criterion_rhs,
            "criterion_holds": self.criterion_holds,
            "M_value": self.M_value,
            "M_scale": self.M_scale,
            "nonradiality": self.nonradiality,
        }


def second_variation(
    decomp: Decomposition,
    radial: RadialSolution,
    psi1: AngularEigenResult,
    p: Optional[float] = None,
    a_radial: Optional[Callable] = None,
    psi=None,
) -> SecondVariation:
    """Tensor-quadrature evaluation of M(u, u psi) with its ingredients.

    ``psi`` defaults to the eigenfunction in ``psi1`` and otherwise must be
    given at ``psi1.theta``. Radial integrals use Simpson's rule on the
    shooting grid with the integrator's own u_r.
    """
    if psi1.decomp != decomp:
        raise GridIncompatibility(f"angular eigenpair is for {psi1.decomp}, not {decomp}")
    if radial.N != decomp.N:
        raise GridIncompatibility(f"radial solution has N={radial.N}, decomposition has N={decomp.N}")
    p = radial.p if p is None else float(p)
    a_radial = radial.a_radial if a_radial is None else a_radial
    psi = psi1.psi1 if psi is None else np.asarray(psi, dtype=float)
    if psi.shape != psi1.theta.shape:
        raise GridIncompatibility(f"psi has shape {psi.shape}, angular grid has {psi1.theta.shape}")

    r, u, ur = radial.r, radial.profile, radial.slope
    N = decomp.N
    a = np.broadcast_to(np.asarray(a_radial(r), dtype=float), r.shape)
    dirichlet = simpson(ur**2 * r ** (N - 1), x=r)
    potential = simpson(a * u**p * r ** (N - 1), x=r)
    hardy = simpson(u**2 * r ** (N - 3), x=r)
    A = psi1.inner(psi, psi)
    D = psi1.dirichlet(psi)
    value = A * (dirichlet - (p - 1) * potential) + D * hardy
    return SecondVariation(float(value), A, D, float(dirichlet), float(potential), float(hardy), p)


def second_variation_M(decomp, radial, psi1, p=None, a_radial=None, psi=None) -> float:
    return second_variation(decomp, radial, psi1, p, a_radial, psi).value


def _annulus_radii(profile) -> tuple[float, float]:
    if "R1" not in profile.params:
        raise GridIncompatibility("symmetry analysis needs an annulus")
    return profile.params["R1"], profile.params["R2"]


def symmetry_report(
    spec: ProblemSpec,
    solve: Optional[SolveReport],
    radial: RadialSolution,
    n_theta: int = 512,
    n_r: int = 2048,
) -> SymmetryReport:
    """lambda1 of the Hardy problem, the criterion p - 2 > 2N/lambda1, M and the observed nonradiality."""
    R1, R2 = _annulus_radii(spec.profile)
    N = spec.decomp.N
    lam = hardy_constant(N, R1, R2, n_r).lambda1
    eig = angular_eigen(spec.decomp, n_theta)
    sv = second_variation(spec.decomp, radial, eig, spec.p)
    lhs, rhs = spec.p - 2.0, 2.0 * N / lam
    nr = nonradiality(solve.solution) if solve is not None else float("nan")
    return SymmetryReport(lam, eig.mu1, lhs, rhs, bool(lhs > rhs), sv.value, sv.scale, nr)


def radial_init(grid: Grid, radial: RadialSolution) -> Field:
    return grid.sample_radial(radial)


def perturbed_init(grid: Grid, radial: RadialSolution, delta: float = 0.2, eig: Optional[AngularEigenResult] = None) -> Field:
    """u_rad(r) * (1 - delta psi1(theta) / max|psi1|).

    psi1 increases in theta, so the minus sign keeps the guess nonincreasing
    in theta, i.e. inside the cone, and positive for delta < 1.
    """
    if not 0 <= delta < 1:
        raise ValueError(f"delta must lie in [0, 1), got {delta}")
    if eig is None:
        eig = angular_eigen(grid.decomp, max(64, grid.n_theta))
    psi = np.interp(grid.theta, eig.theta, eig.psi1)
    psi = psi / np.max(np.abs(eig.psi1))
    base = grid.sample_radial(radial).values
    return grid.field(base * (1.0 - delta * psi)[:, None])


@dataclass(eq=False)
class SweepEntry:
    decomp: Decomposition
    solve: Optional[SolveReport]
    symmetry: Optional[SymmetryReport]
    error: str = ""

    @property
    def nonradial(self) -> bool:
        return self.symmetry is not None and self.solve is not None and self.solve.nonradiality >= NONRADIAL_THRESHOLD

    def row(self) -> dict:
        sym, sol = self.symmetry, self.solve
        nan = float("nan")
        return {
            "m": self.decomp.m,
            "n": self.decomp.n,
            "lambda1": sym.lambda1 if sym else nan,
            "criterion": sym.criterion_holds if sym else False,
            "M": sym.M_value if sym else nan,
            "nonradiality": sol.nonradiality if sol else nan,
            "energy": sol.energy.total if sol else nan,
            "converged": sol.converged if sol else False,
        }


@dataclass(eq=False)
class MultiplicitySweep:
    N: int
    p: float
    k: int
    window: tuple
    in_window: bool
    entries: list
    distinct: dict = field(default_factory=dict)

    def distinct_flags(self, index: int) -> str:
        """Semicolon-separated 'm,n=flag' for every partner of entry ``index``."""
        out = []
        for (i, j), flag in sorted(self.distinct.items()):
            if index in (i, j):
                other = self.entries[j if i == index else i].decomp
                out.append(f"{other.m}/{other.n}={'distinct' if flag else 'undecided'}")
        return ";".join(out)

    def rows(self) -> list:
        rows = []
        for idx, e in enumerate(self.entries):
            row = e.row()
            row["p"] = self.p
            row["distinct_flags"] = self.distinct_flags(idx)
            rows.append(row)
        return rows


def multiplicity_window(N: int, lambda1: float, k: int) -> tuple:
    hi = math.inf if k == 1 else (2.0 * k + 2.0) / (k - 1)
    return 2.0 + 2.0 * N / lambda1, hi


def multiplicity_sweep(
    N: int,
    R1: float,
    R2: float,
    p: float,
    a_radial=None,
    k: int = 1,
    n_theta: int = 64,
    n_rho: int = 256,
    delta: float = 0.2,
    **solver_kw,
) -> MultiplicitySweep:
    """One perturbed-init solve per decomposition (N - n, n), n = 1..k.

    Two members are flagged distinct when they cannot both be radial, i.e.
    at least one of them is observed nonradial: two solutions from different
    decompositions can only coincide if both are radial.
    """
    if not 1 <= k <= N // 2:
        raise ValueError(f"k must lie in 1..{N // 2} for N={N}, got {k}")
    if isinstance(a_radial, Coefficient):
        coef = a_radial
    elif a_radial is None:
        coef = constant_coefficient(1.0)
    else:
        coef = radial_coefficient(a_radial)
    if coef.radial is None:
        raise ValueError("multiplicity sweep needs a radial coefficient")
    lam = hardy_constant(N, R1, R2).lambda1
    window = multiplicity_window(N, lam, k)
    in_window = window[0] < p < window[1]
    if not in_window:
        log.warning("p=%g outside the multiplicity window (%g, %g)", p, *window)
    radial = shoot_radial(N, R1, R2, p, coef.radial)
    entries = []
    for n in range(1, k + 1):
        decomp = Decomposition(N - n, n)
        try:
            profile = make_annulus(decomp, R1, R2)
            spec = ProblemSpec(decomp, profile, coef, p)
            grid = build_grid(decomp, profile, n_theta, n_rho)
            init = perturbed_init(grid, radial, delta)
            rep = mountain_pass(spec, grid, init, **solver_kw)
            sym = symmetry_report(spec, rep, radial)
            entries.append(SweepEntry(decomp, rep, sym))
        except Exception as exc:  # recorded, sweep continues
            log.error("sweep entry (%d,%d) failed: %s", N - n, n, exc)
            entries.append(SweepEntry(decomp, None, None, f"{type(exc).__name__}: {exc}"))
    distinct = {}
    for i, j in combinations(range(len(entries)), 2):
        ei, ej = entries[i], entries[j]
        ok = ei.solve is not None and ej.solve is not None and ei.solve.converged and ej.solve.converged
        distinct[(i, j)] = bool(ok and (ei.nonradial or ej.nonradial))
    return MultiplicitySweep(N, float(p), k, window, in_window, entries, distinct)
