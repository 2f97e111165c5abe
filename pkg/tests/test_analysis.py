import numpy as np
import pytest
from scipy.integrate import simpson

from doublerev.analysis import (
    NONRADIAL_THRESHOLD,
    GridIncompatibility,
    multiplicity_sweep,
    multiplicity_window,
    perturbed_init,
    second_variation,
    symmetry_report,
)
from doublerev.cone import cone_check
from doublerev.discretization import build_grid
from doublerev.eigen import angular_eigen
from doublerev.geometry import Decomposition, constant_coefficient, make_annulus
from doublerev.radial import shoot_radial
from doublerev.solver import ProblemSpec, energy, nonradiality

D31 = Decomposition(3, 1)


class TestSecondVariation:
    def test_constant_psi_identity(self, breaking_setup):
        # psi = 1: M = (2 - p) int a u^p r^(N-1) * int omega, by the energy identity
        spec, rad, _ = breaking_setup
        eig = angular_eigen(D31, 256)
        sv = second_variation(D31, rad, eig, psi=np.ones_like(eig.theta))
        r = rad.r
        expected = (2 - spec.p) * simpson(rad.profile**spec.p * r**3, x=r) * eig.inner(np.ones_like(eig.theta), np.ones_like(eig.theta))
        assert sv.angular_dirichlet == 0.0
        assert sv.value == pytest.approx(expected, rel=1e-6)

    def test_negative_under_criterion(self, breaking_setup):
        spec, rad, lam = breaking_setup
        eig = angular_eigen(D31, 512)
        sv = second_variation(D31, rad, eig)
        assert spec.p - 2 > 8 / lam
        assert sv.value < -1e-6 * sv.scale

    def test_near_two_sign_recorded(self):
        # close to p = 2 the criterion fails; M is still computed, whatever its sign
        spec = ProblemSpec(D31, make_annulus(D31, 1, 2), constant_coefficient(), 2.2)
        rep = symmetry_report(spec, None, shoot_radial(4, 1.0, 2.0, 2.2), n_theta=128, n_r=512)
        assert not rep.criterion_holds
        assert np.isfinite(rep.M_value) and rep.M_scale > 0

    def test_psi1_orthogonal_to_constants(self):
        eig = angular_eigen(D31, 512)
        assert abs(eig.inner(eig.psi1, np.ones_like(eig.psi1))) <= 1e-8

    def test_mismatched_inputs(self, breaking_setup):
        _, rad, _ = breaking_setup
        with pytest.raises(GridIncompatibility):
            second_variation(Decomposition(2, 2), rad, angular_eigen(D31, 64))
        with pytest.raises(GridIncompatibility):
            second_variation(Decomposition(2, 1), rad, angular_eigen(Decomposition(2, 1), 64))
        with pytest.raises(GridIncompatibility):
            second_variation(D31, rad, angular_eigen(D31, 64), psi=np.ones(3))


class TestNonradiality:
    def test_theta_constant_field(self):
        grid = build_grid(D31, make_annulus(D31, 1, 2), 16, 32)
        u = grid.sample_radial(lambda r: np.sin(np.pi * (r - 1)))
        assert nonradiality(u) < 1e-10

    def test_angular_variation_measured(self):
        grid = build_grid(D31, make_annulus(D31, 1, 2), 16, 32)
        u = grid.sample(lambda th, rho: np.sin(np.pi * rho) * (2 - np.cos(th)))
        assert nonradiality(u) > NONRADIAL_THRESHOLD

    def test_perturbed_init_in_cone(self, breaking_setup):
        _, rad, _ = breaking_setup
        grid = build_grid(D31, make_annulus(D31, 1, 2), 32, 64)
        init = perturbed_init(grid, rad, 0.2)
        assert cone_check(init).member and np.all(init.values > 0)
        assert nonradiality(init) > 0.1

    def test_perturbed_init_rejects_delta(self, breaking_setup):
        grid = build_grid(D31, make_annulus(D31, 1, 2), 8, 8)
        with pytest.raises(ValueError):
            perturbed_init(grid, breaking_setup[1], 1.0)


class TestSymmetryReport:
    def test_criterion_false_still_reported(self):
        d = Decomposition(2, 1)
        spec = ProblemSpec(d, make_annulus(d, 1, 2), constant_coefficient(), 2.2)
        rep = symmetry_report(spec, None, shoot_radial(3, 1.0, 2.0, 2.2), n_theta=128, n_r=512)
        assert not rep.criterion_holds
        assert rep.criterion_lhs == pytest.approx(0.2)
        assert rep.criterion_rhs == pytest.approx(6 / rep.lambda1)
        assert rep.mu1 == pytest.approx(6.0, rel=1e-3)
        assert np.isnan(rep.nonradiality) and not rep.nonradial

    def test_needs_annulus(self):
        from doublerev.geometry import make_ellipsoidal

        d = Decomposition(2, 1)
        spec = ProblemSpec(d, make_ellipsoidal(d, 2, 3, 1, 0.5), constant_coefficient(), 3.0)
        with pytest.raises(GridIncompatibility):
            symmetry_report(spec, None, shoot_radial(3, 1.0, 2.0, 3.0))


@pytest.mark.slow
def test_breaking_lowers_energy(breaking_setup):
    from doublerev.solver import mountain_pass

    spec, rad, _ = breaking_setup
    grid = build_grid(D31, spec.profile, 32, 128)
    rep = mountain_pass(spec, grid, perturbed_init(grid, rad))
    assert rep.converged and rep.nonradiality >= NONRADIAL_THRESHOLD
    assert rep.energy.total < energy(spec, grid.sample_radial(rad)).total


class TestSweep:
    def test_window(self):
        lo, hi = multiplicity_window(4, 8.0, 2)
        assert lo == pytest.approx(3.0) and hi == pytest.approx(6.0)
        assert multiplicity_window(4, 8.0, 1)[1] == np.inf

    @pytest.mark.parametrize("k", [0, 3])
    def test_k_range(self, k):
        with pytest.raises(ValueError):
            multiplicity_sweep(4, 1.0, 2.0, 3.0, k=k)

    def test_single_decomposition(self):
        sweep = multiplicity_sweep(3, 1.0, 2.0, 4.0, k=1, n_theta=16, n_rho=48)
        assert len(sweep.entries) == 1 and sweep.distinct == {}
        e = sweep.entries[0]
        assert (e.decomp.m, e.decomp.n) == (2, 1)
        assert e.solve.converged
        row = sweep.rows()[0]
        assert row["distinct_flags"] == "" and row["p"] == 4.0

    def test_nonradial_coefficient_rejected(self):
        from doublerev.geometry import Coefficient

        with pytest.raises(ValueError):
            multiplicity_sweep(4, 1.0, 2.0, 3.0, a_radial=Coefficient(a=lambda s, t: 1 + t))
