"""Critical points of the energy restricted to the cone.

    E(u) = 1/2 int |grad u|^2 dmu - 1/p int a u_+^p dmu

is minimized over the Nehari set inside the discrete cone by projected
gradient descent in the H1 (weighted Dirichlet) metric. The H1 gradient of E
at u is u - T(u), where T(u) solves -Lap v = a u_+^(p-1); a fixed point of T
in the cone is a weak solution, which is how a computed critical point is
certified.
"""

from __future__ import annotations

import logging
import math
import weakref
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .cone import ConeDiagnostics, cone_check, cone_project
from .discretization import Field, Grid, WeightedOperator, assemble_laplacian
from .geometry import Coefficient, Decomposition, DomainProfile, ProfileKind, check_condition_A

__all__ = [
    "ExponentGates",
    "ProblemSpec",
    "Energy",
    "SolveReport",
    "Certificate",
    "NehariError",
    "exponent_gates",
    "energy",
    "nehari_scale",
    "mountain_pass",
    "invariance_certify",
    "nonradiality",
]

log = logging.getLogger(__name__)


class NehariError(ValueError):
    """The direction has no positive part, so no multiple of it reaches the Nehari set."""


def _ratio_threshold(k: int) -> float:
    return math.inf if k == 1 else 2.0 * (k + 1) / (k - 1)


@dataclass(frozen=True)
class ExponentGates:
    """Exponent ranges in which existence is proven for the given geometry."""

    threshold_n: float
    threshold_m: float
    critical: float
    case: Optional[int]
    bound: float
    within_proven_range: bool
    supercritical: bool

    @property
    def outside_proven_range(self) -> bool:
        return not self.within_proven_range

    def as_dict(self) -> dict:
        def num(x):
            return None if math.isinf(x) else x

        return {
            "threshold_2(n+1)/(n-1)": num(self.threshold_n),
            "threshold_2(m+1)/(m-1)": num(self.threshold_m),
            "critical_2N/(N-2)": num(self.critical),
            "case": self.case,
            "upper_bound": num(self.bound),
            "within_proven_range": self.within_proven_range,
            "outside_proven_range": self.outside_proven_range,
            "supercritical": self.supercritical,
        }


def exponent_gates(decomp: Decomposition, profile: DomainProfile, satisfies_A: bool, p: float) -> ExponentGates:
    """Case 1: annular with monotonicity, n <= m, (A): p < 2(n+1)/(n-1) (no bound if n = 1).
    Case 2: any annular domain: p < min of both thresholds.
    Case 3: toroidal with monotonicity, (A): p < 2(n+1)/(n-1).
    """
    m, n, N = decomp.m, decomp.n, decomp.N
    tn, tm = _ratio_threshold(n), _ratio_threshold(m)
    crit = math.inf if N <= 2 else 2.0 * N / (N - 2)
    case, bound = None, 2.0
    if profile.kind is ProfileKind.TOROIDAL_MONOTONE:
        if satisfies_A:
            case, bound = 3, tn
    elif profile.kind is ProfileKind.ANNULAR_MONOTONE and satisfies_A and n <= m:
        case, bound = 1, tn
    else:
        case, bound = 2, min(tn, tm)
    within = case is not None and 2.0 < p < bound
    return ExponentGates(tn, tm, crit, case, bound, within, p >= crit)


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    decomp: Decomposition
    profile: DomainProfile
    coefficient: Coefficient
    p: float
    gates: ExponentGates = field(init=False)

    def __post_init__(self):
        if not self.p > 2:
            raise ValueError(f"p must exceed 2, got {self.p}")
        coef = self.coefficient
        if coef.satisfies_A is None:
            coef = check_condition_A(coef, self.profile)
            object.__setattr__(self, "coefficient", coef)
        object.__setattr__(self, "gates", exponent_gates(self.decomp, self.profile, bool(coef.satisfies_A), self.p))

    @property
    def outside_proven_range(self) -> bool:
        return self.gates.outside_proven_range


@dataclass(frozen=True)
class Energy:
    psi: float
    phi: float

    @property
    def total(self) -> float:
        return self.psi - self.phi


@dataclass(frozen=True)
class Certificate:
    v: Field
    gap: float
    v_in_cone: bool
    cone: ConeDiagnostics


@dataclass(eq=False)
class SolveReport:
    solution: Field
    energy: Energy
    el_residual: float
    invariance_gap: float
    cone_u: ConeDiagnostics
    cone_v: ConeDiagnostics
    nonradiality: float
    iterations: int
    converged: bool
    outside_proven_range: bool
    message: str = ""
    history: dict = field(default_factory=dict)

    def scalars(self) -> dict:
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "energy_total": self.energy.total,
            "energy_psi": self.energy.psi,
            "energy_phi": self.energy.phi,
            "el_residual": self.el_residual,
            "invariance_gap": self.invariance_gap,
            "cone_u_member": self.cone_u.member,
            "cone_u_min_value": self.cone_u.min_value,
            "cone_u_max_theta_slope": self.cone_u.max_theta_slope,
            "cone_v_member": self.cone_v.member,
            "cone_v_max_theta_slope": self.cone_v.max_theta_slope,
            "nonradiality": self.nonradiality,
            "sup_norm": self.solution.sup(),
            "outside_proven_range": self.outside_proven_range,
            "message": self.message,
        }


# -- discrete problem --------------------------------------------------------

_operators: "weakref.WeakKeyDictionary[Grid, WeightedOperator]" = weakref.WeakKeyDictionary()


def operator_for(grid: Grid) -> WeightedOperator:
    op = _operators.get(grid)
    if op is None:
        op = assemble_laplacian(grid)
        _operators[grid] = op
    return op


class _Discrete:
    """Nodal arrays shared by the energy, the gradient and the invariance map."""

    def __init__(self, spec: ProblemSpec, grid: Grid):
        if grid.decomp != spec.decomp:
            raise ValueError("grid and problem use different decompositions")
        self.spec = spec
        self.grid = grid
        self.op = operator_for(grid)
        a = spec.coefficient(grid.s[:, 1:-1], grid.t[:, 1:-1]).ravel()
        if np.any(a < 0) or not np.all(np.isfinite(a)):
            raise ValueError("coefficient must be finite and nonnegative at the nodes")
        self.a = a
        self.p = float(spec.p)
        self.mass = self.op.mass

    def source(self, u):
        return self.a * np.maximum(u, 0.0) ** (self.p - 1)

    def dirichlet(self, u):
        return float(u @ (self.op.K @ u))

    def potential(self, u):
        return float(np.sum(self.mass * self.a * np.maximum(u, 0.0) ** self.p))

    def energy(self, u) -> Energy:
        return Energy(0.5 * self.dirichlet(u), self.potential(u) / self.p)

    def nehari(self, u) -> float:
        pot = self.potential(u)
        if not pot > 0:
            raise NehariError("int a u_+^p vanishes; the direction never reaches the Nehari set")
        return (self.dirichlet(u) / pot) ** (1.0 / (self.p - 2.0))

    def T(self, u):
        """Invariance map: solve K v = M a u_+^(p-1)."""
        f = self.source(u)
        if not np.any(f):
            return np.zeros_like(u), f
        return self.op.factorized().solve(self.mass * f), f

    def el_residual(self, u, f=None) -> float:
        f = self.source(u) if f is None else f
        fn = math.sqrt(float(np.sum(self.mass * f * f)))
        if fn == 0.0:
            return 0.0 if not np.any(u) else math.inf
        r = (self.op.K @ u) / self.mass - f
        return math.sqrt(float(np.sum(self.mass * r * r))) / fn

    def norm(self, u) -> float:
        return math.sqrt(float(np.sum(self.mass * u * u)))

    def project(self, u):
        return cone_project(self.grid.field(u)).flat.copy()

    def radial_average(self, u):
        """dmu-orthogonal projection onto theta-independent fields."""
        shape = self.grid.shape
        w = self.mass.reshape(shape)
        line = np.sum(w * u.reshape(shape), axis=0) / np.sum(w, axis=0)
        return np.broadcast_to(line, shape).ravel().copy()

    def radial_invariant(self) -> bool:
        """theta-independent fields are mapped to theta-independent fields by T."""
        return self.spec.profile.kind.annular and bool(self.spec.coefficient.radial)


def energy(spec: ProblemSpec, field: Field) -> Energy:
    return _Discrete(spec, field.grid).energy(field.flat)


def nehari_scale(spec: ProblemSpec, field: Field) -> float:
    """alpha with d/dtau E(tau alpha u) = 0 at tau = 1: alpha^(p-2) = int|grad u|^2 / int a u_+^p."""
    return _Discrete(spec, field.grid).nehari(field.flat)


def nonradiality(field: Field) -> float:
    """max over rho-lines of (max_theta u - min_theta u) / max u."""
    u = field.values
    top = float(np.max(u)) if u.size else 0.0
    if top <= 0.0:
        return 0.0
    return float(np.max(np.ptp(u, axis=0)) / top)


def _certify(disc: _Discrete, u) -> Certificate:
    v, _ = disc.T(u)
    un = disc.norm(u)
    gap = disc.norm(u - v) / un if un > 0 else 0.0
    vf = disc.grid.field(v)
    diag = cone_check(vf)
    return Certificate(vf, gap, diag.member, diag)


def invariance_certify(spec: ProblemSpec, grid: Grid, u: Field) -> Certificate:
    """v = T(u), relative dmu-distance between u and v, and cone membership of v."""
    return _certify(_Discrete(spec, grid), u.flat)


def mountain_pass(
    spec: ProblemSpec,
    grid: Grid,
    init: Field,
    max_iter: int = 5000,
    solver_tol: float = 1e-8,
    armijo: float = 1e-4,
    backtrack: float = 0.5,
    min_step: float = 1e-10,
    symmetry: str = "auto",
) -> SolveReport:
    """Projected H1-gradient descent on the Nehari set inside the cone.

    u_{k+1} = Nehari(P_K(u_k - s g_k)), g_k = u_k - T(u_k), with s halved
    until the Armijo condition on E holds (s = 1 is a plain fixed-point step).

    ``symmetry="radial"`` keeps every iterate theta-independent by averaging
    over theta. On an annulus with a = a(r) that subspace is invariant, but
    when the radial solution is unstable inside the cone, rounding noise alone
    pushes an unrestricted iteration off it. ``"auto"`` restricts exactly when
    the subspace is invariant and the initial guess already lies in it.
    """
    if symmetry not in ("auto", "radial", "none"):
        raise ValueError(f"symmetry must be 'auto', 'radial' or 'none', got {symmetry!r}")
    disc = _Discrete(spec, grid)
    if symmetry == "auto":
        radial = disc.radial_invariant() and nonradiality(init) <= 1e-14
    else:
        radial = symmetry == "radial"
    if radial and not disc.radial_invariant():
        log.warning("radial restriction requested on a problem that does not preserve it")
    sym = disc.radial_average if radial else (lambda v: v)
    u = sym(disc.project(init.flat))
    history = {"energy": [], "el_residual": [], "step": [], "symmetry": "radial" if radial else "none"}
    message = ""
    try:
        u = u * disc.nehari(u)
    except NehariError as exc:
        return _report(disc, u, 0, False, str(exc), history)
    E = disc.energy(u).total
    it = 0
    for it in range(1, max_iter + 1):
        Tu, f = disc.T(u)
        el = disc.el_residual(u, f)
        history["energy"].append(E)
        history["el_residual"].append(el)
        if el <= solver_tol:
            it -= 1
            break
        g = u - sym(Tu)
        slope = float(g @ (disc.op.K @ g))
        slack = 1e-13 * max(1.0, abs(E))
        s = 1.0
        accepted = False
        while s >= min_step:
            w = sym(disc.project(u - s * g))
            try:
                w = w * disc.nehari(w)
            except NehariError:
                s *= backtrack
                continue
            E_new = disc.energy(w).total
            if E_new <= E - armijo * s * slope + slack:
                accepted = True
                break
            s *= backtrack
        if not accepted:
            message = f"line search failed at iteration {it} (el_residual {el:.3e})"
            break
        history["step"].append(s)
        u, E = w, E_new
        if disc.norm(u) < 1e-10:
            message = "iterate collapsed to zero; restart from a different initial guess"
            break
    else:
        message = f"max_iter={max_iter} reached"
    return _report(disc, u, it, None, message, history, solver_tol)


def _report(disc: _Discrete, u, iterations, converged, message, history, solver_tol=1e-8) -> SolveReport:
    grid = disc.grid
    uf = grid.field(u)
    el = disc.el_residual(u)
    cert = _certify(disc, u)
    cone_u = cone_check(uf)
    if converged is None:
        converged = el <= solver_tol and cert.gap <= solver_tol and cone_u.member
    if converged and not message:
        message = "converged"
    return SolveReport(
        solution=uf,
        energy=disc.energy(u),
        el_residual=el,
        invariance_gap=cert.gap,
        cone_u=cone_u,
        cone_v=cert.cone,
        nonradiality=nonradiality(uf),
        iterations=iterations,
        converged=bool(converged),
        outside_proven_range=disc.spec.outside_proven_range,
        message=message,
        history=history,
    )
