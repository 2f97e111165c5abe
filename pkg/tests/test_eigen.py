import numpy as np
import pytest
from _oracles import hardy_by_shooting, observed_orders

from doublerev.eigen import angular_eigen, hardy_closed_form, hardy_constant, thin_annulus_sweep
from doublerev.geometry import Decomposition


def closed_psi(eig):
    d = eig.decomp
    psi = (d.m - d.n) / d.N - np.cos(2 * eig.theta)
    return psi / np.sqrt(eig.inner(psi, psi))


class TestAngular:
    @pytest.mark.parametrize("m,n", [(1, 1), (2, 1), (1, 2), (3, 2), (4, 4), (6, 1)])
    def test_invariants(self, m, n):
        eig = angular_eigen(Decomposition(m, n), 256)
        assert abs(eig.mu0) <= 1e-8 * eig.mu1
        assert eig.mu0 <= eig.mu1
        assert abs(eig.inner(eig.psi1, np.ones_like(eig.psi1))) <= 1e-10
        assert eig.inner(eig.psi1, eig.psi1) == pytest.approx(1.0, abs=1e-12)
        # second eigenfunction: exactly one sign change
        assert np.count_nonzero(np.diff(np.sign(eig.psi1))) == 1

    def test_n3_value(self):
        eig = angular_eigen(Decomposition(2, 1), 512)
        assert eig.mu1 == pytest.approx(6.0, rel=1e-4)

    def test_m1n1_shape(self):
        eig = angular_eigen(Decomposition(1, 1), 512)
        assert np.max(np.abs(eig.psi1 - closed_psi(eig))) < 1e-4

    @pytest.mark.parametrize("m", range(1, 7))
    @pytest.mark.parametrize("n", range(1, 7))
    def test_closed_form_order(self, m, n):
        d = Decomposition(m, n)
        errs = [abs(angular_eigen(d, k).mu1 - 2 * d.N) for k in (32, 64, 128)]
        assert np.all(observed_orders(errs) >= 1.8), errs

    def test_rejects_coarse(self):
        with pytest.raises(ValueError):
            angular_eigen(Decomposition(1, 1), 8)

    def test_dirichlet_matches_rayleigh(self):
        eig = angular_eigen(Decomposition(3, 1), 256)
        assert eig.dirichlet(eig.psi1) == pytest.approx(eig.mu1, rel=1e-9)


class TestHardy:
    def test_n2_closed_form(self):
        res = hardy_constant(2, 1.0, np.e, 2048)
        assert res.lambda1 == pytest.approx(np.pi**2, rel=1e-4)

    @pytest.mark.parametrize("N", [3, 4, 7])
    def test_log_substitution_any_N(self, N):
        assert hardy_constant(N, 1.0, 2.0).lambda1 == pytest.approx(hardy_closed_form(N, 1.0, 2.0), rel=1e-5)

    def test_n3_against_shooting(self):
        assert hardy_constant(3, 1.0, 2.0).lambda1 == pytest.approx(hardy_by_shooting(3, 1.0, 2.0), rel=1e-4)

    def test_random_triples_against_shooting(self, rng):
        for _ in range(5):
            N = int(rng.integers(2, 8))
            R1 = float(rng.uniform(0.3, 2.0))
            R2 = R1 * float(rng.uniform(1.3, 4.0))
            assert hardy_constant(N, R1, R2).lambda1 == pytest.approx(hardy_by_shooting(N, R1, R2), rel=1e-4)

    @pytest.mark.parametrize("N,R1,R2", [(3, 1, 2), (5, 0.5, 10), (2, 1, 1.1)])
    def test_invariants(self, N, R1, R2):
        res = hardy_constant(N, R1, R2)
        assert res.lambda1 > (N - 2) ** 2 / 4
        assert res.rayleigh_quotient() == pytest.approx(res.lambda1, rel=1e-8)
        w = res.eigenfunction
        assert w[0] == 0 and w[-1] == 0 and np.all(w[1:-1] > 0)

    def test_decreasing_in_outer_radius(self):
        lams = [hardy_constant(3, 1.0, R2).lambda1 for R2 in (1.5, 2, 3, 5, 9)]
        assert np.all(np.diff(lams) < 0)

    @pytest.mark.parametrize("R1,R2,n_r", [(0, 1, 64), (2, 1, 64), (1, 2, 16)])
    def test_rejects(self, R1, R2, n_r):
        with pytest.raises(ValueError):
            hardy_constant(3, R1, R2, n_r)


class TestThinAnnulus:
    def test_approaches_pi2(self):
        sweep = thin_annulus_sweep(3, [10, 50, 100], lambda R: R + 1)
        assert sweep.deviation_decreasing
        assert sweep.rows[-1].deviation_from_pi2 < 0.02 * np.pi**2

    def test_scaled_form_same_limit(self):
        sweep = thin_annulus_sweep(3, [10, 50, 100], lambda R: R * (1 + 1 / R))
        assert sweep.deviation_decreasing

    def test_rescaled_unit_annulus(self):
        # lambda is scale invariant: (R, R+1) and (1, 1+1/R) give the same constant
        R = 20.0
        a = hardy_constant(3, R, R + 1).lambda1
        b = hardy_constant(3, 1.0, 1 + 1 / R).lambda1
        assert a == pytest.approx(b, rel=1e-9)

    def test_doubling_radius_recorded(self):
        row = thin_annulus_sweep(3, [10.0], lambda R: 2 * R).rows[0]
        assert row.gammaR == 20.0
        assert row.deviation_from_pi2 > 1.0

    def test_rejects_gamma(self):
        with pytest.raises(ValueError):
            thin_annulus_sweep(3, [2.0], lambda R: R)
