import numpy as np
import pytest

from conftest import sm_unif
from steadystate.errors import HypothesisViolated
from steadystate.fixedpoint import route_for
from steadystate.models import Environment, SelectionMutationModel, total_mass
from steadystate.selmut import (KernelMatrix, is_strictly_positive, kernel_assemble, kernel_l1_norm,
                                kernel_spectral_radius, reproduction_radius, sm_eigen_density,
                                sm_spectral_bound, solve_selmut, trapezoid_weights)

E = Environment


@pytest.fixture(scope="module")
def solved(sm):
    return solve_selmut(sm)


class TestKernel:
    def test_no_births(self):
        K = kernel_assemble(sm_unif(16, beta="0"), E(0, 0), 0.0)
        assert np.all(K.matrix == 0)

    def test_closed_form_at_origin(self, sm):
        K = kernel_assemble(sm, E(0, 0), 0.0)
        x, w = K.grid.nodes, trapezoid_weights(K.grid)
        expected = 0.5 * 3.0 * (2.0 - x) * w
        np.testing.assert_allclose(K.matrix, np.broadcast_to(expected, K.matrix.shape), rtol=1e-12, atol=1e-15)
        assert np.linalg.matrix_rank(K.matrix) == 1

    @pytest.mark.parametrize("lam", [10.0, 100.0])
    def test_norm_bound(self, sm, lam):
        K = kernel_assemble(sm, E(0, 0), lam)
        assert kernel_l1_norm(K) <= (3.0 / lam) * (1 + 1e-12)

    def test_nonnegative(self, sm):
        rng = np.random.default_rng(7)
        for _ in range(5):
            K = kernel_assemble(sm, E(*rng.uniform(0, 5, 2)), rng.uniform(-0.5, 5))
            assert np.all(K.matrix >= 0)

    def test_grids_must_coincide(self, sm):
        with pytest.raises(ValueError):
            kernel_assemble(sm, E(0, 0), 0.0, 32, 64)


class TestRadius:
    def test_origin(self, sm):
        assert abs(reproduction_radius(sm, E(0, 0)) - 3.0) <= 1e-6

    def test_steady_environment(self, sm):
        assert abs(reproduction_radius(sm, E(1, 1)) - 1.0) <= 1e-6

    def test_zero_kernel(self, sm):
        K = kernel_assemble(sm, E(0, 0), 0.0)
        res = kernel_spectral_radius(KernelMatrix(np.zeros_like(K.matrix), K.grid, K.weights))
        assert res.radius == 0.0 and "StrictPositivityFailure" in res.flags

    def test_unit_weighted_eigenfunction(self, sm):
        K = kernel_assemble(sm, E(0.5, 2.0), 0.1)
        res = kernel_spectral_radius(K)
        assert K.weights @ res.eigen.values == pytest.approx(1.0, abs=1e-12)
        assert np.all(res.eigen.values >= 0)

    def test_decreasing_in_lam(self, sm):
        r = [reproduction_radius(sm, E(0.3, 0.3), lam) for lam in np.linspace(-0.5, 5, 12)]
        assert all(a > b for a, b in zip(r, r[1:]))


class TestBound:
    def test_zero(self, sm):
        assert abs(sm_spectral_bound(sm, E(1, 1))) <= 1e-10

    def test_signs(self, sm):
        assert sm_spectral_bound(sm, E(0, 0)) > 0
        assert reproduction_radius(sm, E(5, 5)) == pytest.approx(3 / 11, abs=1e-9)
        assert sm_spectral_bound(sm, E(5, 5)) < 0


class TestEigenDensity:
    def test_flat(self, sm):
        u = sm_eigen_density(sm, E(1, 1), 0.0)
        np.testing.assert_allclose(u.values, 0.25, rtol=0, atol=1e-12)
        assert total_mass(u) == pytest.approx(1.0, abs=1e-12)

    def test_decays_with_age(self):
        model = SelectionMutationModel(2.0, "0.5", "30/(1 + E1 + E2)", "3", n_cells=32)
        u = sm_eigen_density(model, E(0.5, 0.5), sm_spectral_bound(model, E(0.5, 0.5)))
        assert np.all(np.diff(u.values, axis=1) < 0)


class TestSolve:
    def test_uniform_kernel(self, solved):
        assert (solved.environment.e1, solved.environment.e2) == pytest.approx((1, 1), abs=1e-4)
        np.testing.assert_allclose(solved.profile.values, 0.5, rtol=0, atol=1e-4)

    def test_diagnostics(self, solved):
        d = solved.diagnostics
        assert abs(d["R_value"] - 1) <= 1e-8
        assert d["env_consistency"] <= 1e-8
        assert d["boundary_residual"] <= 1e-8
        assert d["flags"] == []

    def test_subcritical(self):
        with pytest.raises(HypothesisViolated):
            solve_selmut(sm_unif(16, beta="0.5/(1 + E1 + E2)"))

    def test_kernel_must_be_a_density(self):
        with pytest.raises(HypothesisViolated) as info:
            solve_selmut(sm_unif(16, kernel="1"))
        assert "KernelNotDensity" in {v["kind"] for v in info.value.details["violations"]}

    def test_zero_rows_warn(self, caplog):
        model = sm_unif(16, kernel="2*max(0, 1 - l)")
        K = kernel_assemble(model, E(0, 0), 0.0)
        assert not is_strictly_positive(K)
        with caplog.at_level("WARNING"):
            route_for(model).preflight()
        assert "irreducib" in caplog.text
