"""Domains of double revolution in reduced polar coordinates.

A domain in R^N = R^m x R^n invariant under O(m) x O(n) is described by its
section in the (s, t) quarter plane, written in polar form as

    g1(theta) < r < g2(theta),   0 < theta < theta_max,

with s = r cos(theta), t = r sin(theta). The symmetry group itself is never
represented; everything downstream works on (theta, r).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

__all__ = [
    "Decomposition",
    "ProfileKind",
    "DomainProfile",
    "Coefficient",
    "make_annulus",
    "make_ellipsoidal",
    "make_torus",
    "check_monotone",
    "check_condition_A",
    "constant_coefficient",
    "henon_coefficient",
    "radial_coefficient",
    "s_profile_coefficient",
    "tabulated_coefficient",
]

ScalarFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Decomposition:
    """The split N = m + n."""

    m: int
    n: int

    def __post_init__(self):
        for name in ("m", "n"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "n", int(self.n))

    @property
    def N(self) -> int:
        return self.m + self.n

    def swapped(self) -> "Decomposition":
        return Decomposition(self.n, self.m)

    def omega(self, theta):
        """Angular weight cos^(m-1) sin^(n-1)."""
        theta = np.asarray(theta, dtype=float)
        return np.cos(theta) ** (self.m - 1) * np.sin(theta) ** (self.n - 1)


class ProfileKind(str, enum.Enum):
    ANNULAR_MONOTONE = "AnnularMonotone"
    ANNULAR_GENERAL = "AnnularGeneral"
    TOROIDAL_MONOTONE = "ToroidalMonotone"

    @property
    def annular(self) -> bool:
        return self is not ProfileKind.TOROIDAL_MONOTONE


def _numeric_derivative(g: ScalarFn, h: float = 1e-6) -> ScalarFn:
    def dg(theta):
        theta = np.asarray(theta, dtype=float)
        return (g(theta + h) - g(theta - h)) / (2 * h)

    return dg


@dataclass(frozen=True)
class DomainProfile:
    """Inner and outer boundary radii as functions of the polar angle.

    ``g1p``/``g2p`` are the angular derivatives; they are needed by the mapped
    grid. When omitted, central differences are used.
    ``params`` holds the constructor arguments so a profile can be described
    in config files and grid descriptors without serializing closures.
    """

    theta_max: float
    g1: ScalarFn
    g2: ScalarFn
    kind: ProfileKind
    monotone: bool
    g1p: Optional[ScalarFn] = None
    g2p: Optional[ScalarFn] = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.g1p is None:
            object.__setattr__(self, "g1p", _numeric_derivative(self.g1))
        if self.g2p is None:
            object.__setattr__(self, "g2p", _numeric_derivative(self.g2))

    def width(self, theta):
        return self.g2(theta) - self.g1(theta)

    def interior_samples(self, samples: int = 513) -> np.ndarray:
        # open interval; the torus closes at theta_max
        return (np.arange(samples) + 0.5) * self.theta_max / samples

    def describe(self) -> dict:
        return {"kind": self.kind.value, **self.params}


def _validate_annular(profile: DomainProfile, samples: int = 513, tol: float = 1e-8):
    th = np.linspace(0.0, profile.theta_max, samples)
    g1, g2 = profile.g1(th), profile.g2(th)
    if np.any(g1 <= 0):
        raise ValueError("inner profile must be positive")
    if np.any(g2 - g1 <= 0):
        raise ValueError("g2 must exceed g1 on the closed angular interval (not an annular region)")
    ends = np.array([0.0, profile.theta_max])
    slopes = np.concatenate([profile.g1p(ends), profile.g2p(ends)])
    if np.max(np.abs(slopes)) > tol * (1.0 + np.max(g2)):
        raise ValueError("annular profiles need zero slope at theta=0 and theta=theta_max")


def make_annulus(decomp: Decomposition, R1: float, R2: float) -> DomainProfile:
    if not R1 > 0:
        raise ValueError(f"R1 must be positive, got {R1}")
    if not R2 > R1:
        raise ValueError(f"R2 must exceed R1, got R1={R1}, R2={R2}")
    R1, R2 = float(R1), float(R2)
    zero = lambda th: np.zeros_like(np.asarray(th, dtype=float))  # noqa: E731
    return DomainProfile(
        theta_max=np.pi / 2,
        g1=lambda th: np.full_like(np.asarray(th, dtype=float), R1),
        g2=lambda th: np.full_like(np.asarray(th, dtype=float), R2),
        g1p=zero,
        g2p=zero,
        kind=ProfileKind.ANNULAR_MONOTONE,
        monotone=True,
        params={"R1": R1, "R2": R2},
    )


def _ellipse_radius(axis0: float, axis_half_pi: float):
    """r(theta) for an ellipse with r(0)=axis0 and r(pi/2)=axis_half_pi."""
    k = 1.0 / axis_half_pi**2 - 1.0 / axis0**2

    def g(th):
        th = np.asarray(th, dtype=float)
        return (1.0 / axis0**2 + np.sin(th) ** 2 * k) ** -0.5

    def gp(th):
        th = np.asarray(th, dtype=float)
        q = 1.0 / axis0**2 + np.sin(th) ** 2 * k
        return -0.5 * q**-1.5 * 2 * np.sin(th) * np.cos(th) * k

    return g, gp


def make_ellipsoidal(
    decomp: Decomposition, a_out: float, b_out: float, c_in: float, d_in: float
) -> DomainProfile:
    """Region between two ellipsoids of double revolution.

    g2 runs from b_out at theta=0 to a_out at theta=pi/2, and g1 from d_in to
    c_in, so the ordering d <= c < a <= b gives an annular domain with
    monotonicity.
    """
    radii = (a_out, b_out, c_in, d_in)
    if min(radii) <= 0:
        raise ValueError(f"all semi-axes must be positive, got {radii}")
    g2, g2p = _ellipse_radius(float(b_out), float(a_out))
    g1, g1p = _ellipse_radius(float(d_in), float(c_in))
    monotone = d_in <= c_in and a_out <= b_out
    profile = DomainProfile(
        theta_max=np.pi / 2,
        g1=g1,
        g2=g2,
        g1p=g1p,
        g2p=g2p,
        kind=ProfileKind.ANNULAR_MONOTONE if monotone else ProfileKind.ANNULAR_GENERAL,
        monotone=monotone,
        params={"a_out": float(a_out), "b_out": float(b_out), "c_in": float(c_in), "d_in": float(d_in)},
    )
    _validate_annular(profile)
    return profile


def make_torus(decomp: Decomposition, a_center: float, b_minor: float) -> DomainProfile:
    """Section (s - a)^2 + t^2 < b^2, closing at sin(theta0) = b/a."""
    if not b_minor > 0:
        raise ValueError(f"b_minor must be positive, got {b_minor}")
    if not a_center > b_minor:
        raise ValueError("a_center must exceed b_minor, otherwise the profile reaches s=0")
    a, b = float(a_center), float(b_minor)
    theta0 = float(np.arcsin(b / a))

    def root(th):
        th = np.asarray(th, dtype=float)
        return np.sqrt(np.maximum(b**2 - a**2 * np.sin(th) ** 2, 0.0))

    def droot(th):
        th = np.asarray(th, dtype=float)
        q = root(th)
        with np.errstate(divide="ignore", invalid="ignore"):
            return -(a**2) * np.sin(th) * np.cos(th) / q

    return DomainProfile(
        theta_max=theta0,
        g1=lambda th: a * np.cos(th) - root(th),
        g2=lambda th: a * np.cos(th) + root(th),
        g1p=lambda th: -a * np.sin(th) - droot(th),
        g2p=lambda th: -a * np.sin(th) + droot(th),
        kind=ProfileKind.TOROIDAL_MONOTONE,
        monotone=True,
        params={"a_center": a, "b_minor": b},
    )


def check_monotone(profile: DomainProfile, samples: int = 513, tol: float = 1e-12) -> bool:
    """True iff g1 is nondecreasing and g2 nonincreasing on the sampled interval."""
    if samples < 3:
        raise ValueError("need at least 3 samples")
    th = np.linspace(0.0, profile.theta_max, samples)
    d1 = np.diff(profile.g1(th))
    d2 = np.diff(profile.g2(th))
    return bool(np.all(d1 >= -tol) and np.all(d2 <= tol))


# -- coefficients -----------------------------------------------------------


@dataclass(frozen=True)
class Coefficient:
    """a(s, t) >= 0, with the result of the condition-(A) check.

    ``satisfies_A`` is None until :func:`check_condition_A` has been run
    against a domain. ``radial`` is set for coefficients that depend on
    |x| only; it is what the 1D shooting solver consumes.
    """

    a: Callable[[np.ndarray, np.ndarray], np.ndarray]
    grad: Optional[Callable[[np.ndarray, np.ndarray], tuple]] = None
    satisfies_A: Optional[bool] = None
    radial: Optional[Callable[[np.ndarray], np.ndarray]] = None
    spec: dict = field(default_factory=dict)

    @property
    def gradient_available(self) -> bool:
        return self.grad is not None

    def __call__(self, s, t):
        return self.a(np.asarray(s, dtype=float), np.asarray(t, dtype=float))


def constant_coefficient(c: float = 1.0) -> Coefficient:
    c = float(c)
    return Coefficient(
        a=lambda s, t: np.full(np.broadcast(s, t).shape, c),
        grad=lambda s, t: (np.zeros(np.broadcast(s, t).shape), np.zeros(np.broadcast(s, t).shape)),
        radial=lambda r: np.full_like(np.asarray(r, dtype=float), c),
        spec={"type": "const", "value": c},
    )


def henon_coefficient(alpha: float, scale: float = 1.0) -> Coefficient:
    """a(x) = scale * |x|^alpha."""
    alpha, scale = float(alpha), float(scale)

    def a(s, t):
        return scale * (s * s + t * t) ** (alpha / 2)

    def grad(s, t):
        q = scale * alpha * (s * s + t * t) ** (alpha / 2 - 1)
        return q * s, q * t

    return Coefficient(
        a=a,
        grad=grad,
        radial=lambda r: scale * np.asarray(r, dtype=float) ** alpha,
        spec={"type": "power", "alpha": alpha, "scale": scale},
    )


def radial_coefficient(fn: Callable, name: str = "radial") -> Coefficient:
    """a(x) = fn(|x|). Condition (A) holds identically since s a_t - t a_s = 0."""

    def a(s, t):
        return np.asarray(fn(np.hypot(s, t)), dtype=float) * np.ones(np.broadcast(s, t).shape)

    return Coefficient(a=a, satisfies_A=True, radial=fn, spec={"type": name})


def s_profile_coefficient(h: Callable, dh: Optional[Callable] = None, name: str = "custom") -> Coefficient:
    """a(s, t) = h(s); satisfies (A) when h is nondecreasing."""
    grad = None
    if dh is not None:
        grad = lambda s, t: (dh(s), np.zeros(np.broadcast(s, t).shape))  # noqa: E731
    return Coefficient(
        a=lambda s, t: h(s) * np.ones(np.broadcast(s, t).shape),
        grad=grad,
        spec={"type": "s-profile", "h": name},
    )


def tabulated_coefficient(s_nodes, t_nodes, values) -> Coefficient:
    """Bilinear interpolation of a table values[i, j] = a(s_i, t_j)."""
    from scipy.interpolate import RegularGridInterpolator

    s_nodes = np.asarray(s_nodes, dtype=float)
    t_nodes = np.asarray(t_nodes, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.shape != (s_nodes.size, t_nodes.size):
        raise ValueError(f"table shape {values.shape} does not match nodes ({s_nodes.size}, {t_nodes.size})")
    if np.any(values < 0):
        raise ValueError("tabulated coefficient must be nonnegative")
    interp = RegularGridInterpolator((s_nodes, t_nodes), values, method="linear", bounds_error=False, fill_value=None)

    def a(s, t):
        s, t = np.broadcast_arrays(s, t)
        pts = np.stack([s.ravel(), t.ravel()], axis=-1)
        return interp(pts).reshape(s.shape)

    return Coefficient(a=a, spec={"type": "tabulated", "shape": list(values.shape)})


def check_condition_A(
    coef: Coefficient, profile: DomainProfile, samples: int = 129, fd_step: float = 1e-6
) -> Coefficient:
    """Sample a on the closure of the reduced domain and test s*a_t - t*a_s <= tol.

    Returns a copy of ``coef`` with ``satisfies_A`` filled in. Raises if a is
    negative somewhere on the samples.
    """
    th = np.linspace(0.0, profile.theta_max, samples)
    rho = np.linspace(0.0, 1.0, samples)
    TH, RHO = np.meshgrid(th, rho, indexing="ij")
    r = profile.g1(TH) + RHO * (profile.g2(TH) - profile.g1(TH))
    s, t = r * np.cos(TH), r * np.sin(TH)
    vals = coef(s, t)
    if not np.all(np.isfinite(vals)):
        raise ValueError("coefficient is not finite on the domain")
    if np.any(vals < 0):
        raise ValueError("coefficient must be nonnegative on the domain")
    if coef.grad is not None:
        a_s, a_t = coef.grad(s, t)
    else:
        a_s = (coef(s + fd_step, t) - coef(s - fd_step, t)) / (2 * fd_step)
        a_t = (coef(s, t + fd_step) - coef(s, t - fd_step)) / (2 * fd_step)
    grad_max = float(np.max(np.hypot(a_s, a_t)))
    tol_A = 1e-10 * (1.0 + grad_max)
    if coef.grad is None:
        # finite-difference slack on top of the rounding slack
        tol_A += fd_step * (1.0 + np.max(np.abs(vals))) * float(np.max(r))
    ok = bool(np.all(s * a_t - t * a_s <= tol_A))
    return replace(coef, satisfies_A=ok)
