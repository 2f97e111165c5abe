"""Positive solutions of -Lap u = a(x) u^(p-1) on domains of double revolution.

Functions invariant under O(m) x O(n) reduce to the quarter plane (s, t) =
(|y|, |z|). The package discretizes the reduced problem on a mapped polar
grid, finds critical points in the cone of angularly nonincreasing functions,
and provides the radial, spectral and symmetry-breaking diagnostics around it.
"""

from .analysis import SymmetryReport, multiplicity_sweep, perturbed_init, second_variation_M, symmetry_report
from .cone import cone_check, cone_project
from .discretization import Field, Grid, assemble_laplacian, build_grid, dirichlet_solve, quadrature
from .eigen import angular_eigen, hardy_closed_form, hardy_constant, thin_annulus_sweep
from .geometry import (
    Coefficient,
    Decomposition,
    DomainProfile,
    ProfileKind,
    check_condition_A,
    constant_coefficient,
    henon_coefficient,
    make_annulus,
    make_ellipsoidal,
    make_torus,
    radial_coefficient,
    s_profile_coefficient,
    tabulated_coefficient,
)
from .radial import RadialSolution, shoot_radial
from .solver import ProblemSpec, SolveReport, energy, invariance_certify, mountain_pass, nehari_scale, nonradiality

__version__ = "0.1.0"
