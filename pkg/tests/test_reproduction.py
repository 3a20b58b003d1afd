import numpy as np
import pytest

from conftest import ja_const
from steadystate.errors import HypothesisViolated
from steadystate.fixedpoint import solve_steady_state
from steadystate.models import ConsumerResourceModel, Environment, JuvenileAdultModel
from steadystate.reproduction import (cr_balance_residual, ja_ratio_residual, net_reproduction_cr,
                                      net_reproduction_ja, solve_scalar_system)

E = Environment


class TestNetReproduction:
    @pytest.mark.parametrize("env, value", [(E(0, 0), 3.0), (E(1, 1), 1.0), (E(3, 0), 0.75)])
    def test_ja(self, ja, env, value):
        assert net_reproduction_ja(ja, env) == pytest.approx(value, abs=1e-10)

    @pytest.mark.parametrize("Q", [0.0, 1.0, 7.5])
    def test_cr_independent_of_resource(self, cr, Q):
        assert net_reproduction_cr(cr, E(0, Q)) == pytest.approx(3.0, abs=1e-12)
        assert net_reproduction_cr(cr, E(2, Q)) == pytest.approx(1.0, abs=1e-12)

    def test_no_births(self):
        m = JuvenileAdultModel(1.0, 2.0, "0", "0", "1", n_cells=100)
        assert net_reproduction_ja(m, E(0.5, 0.5)) == 0.0
        c = ConsumerResourceModel(1.0, "0", "0", "1", "1", "3 - Q", n_cells=100)
        assert net_reproduction_cr(c, E(0.5, 0.5)) == 0.0

    def test_with_mortality_and_growth(self):
        m = JuvenileAdultModel(1.0, 2.0, "3*indicator(1, 2, s)", "1", "2", n_cells=2000)
        # int_1^2 (3/2) exp(-s/2) ds
        exact = 3.0 * (np.exp(-0.5) - np.exp(-1.0))
        assert net_reproduction_ja(m, E(0, 0)) == pytest.approx(exact, abs=1e-12)


class TestResiduals:
    def test_ja_balanced(self, ja):
        assert abs(ja_ratio_residual(ja, E(1, 1))) <= 1e-10

    def test_ja_off_ratio(self, ja):
        assert ja_ratio_residual(ja, E(2, 1)) == pytest.approx(1.0, abs=1e-10)

    def test_ja_on_axis(self, ja):
        assert ja_ratio_residual(ja, E(1.5, 0)) > 0

    @pytest.mark.parametrize("env, value", [(E(2, 1), 0.0), (E(2, 2), 0.0), (E(2, 3), 2.0)])
    def test_cr(self, cr, env, value):
        assert cr_balance_residual(cr, env) == pytest.approx(value, abs=1e-10)


class TestScalarSystem:
    def test_ja_single_solution(self, ja):
        res = solve_scalar_system(ja)
        assert len(res.solutions) == 1
        env = res.solutions[0].environment
        assert env.e1 == pytest.approx(1.0, abs=1e-6) and env.e2 == pytest.approx(1.0, abs=1e-6)

    def test_cr_two_solutions(self, cr):
        res = solve_scalar_system(cr)
        found = sorted(((s.environment.e1, s.environment.e2) for s in res.solutions), key=lambda e: e[1])
        np.testing.assert_allclose(found, [(2, 1), (2, 2)], atol=1e-6)
        assert res.curve.truncated  # R does not depend on Q, so steep rays leave the box

    def test_subcritical(self):
        with pytest.raises(HypothesisViolated):
            solve_scalar_system(ja_const(400, beta="0.5*indicator(1, 2, s)/(1 + E1 + E2)"))

    def test_solution_residuals(self, cr):
        tol = 1e-10
        for s in solve_scalar_system(cr, tol).solutions:
            assert s.R_residual <= tol
            assert s.balance_residual <= tol * (1 + s.environment.norm1())

    def test_negative_growth_flagged(self):
        # f(Q) = 1 - Q crosses zero at Q = 1; the balance P = Q f(Q) has roots on both sides
        model = ConsumerResourceModel(1.0, "3/(1 + E1)", "0", "1", "-1", "1 - Q", n_cells=200)
        res = solve_scalar_system(model)
        flagged = [s for s in res.solutions if "NegativeResourceGrowth" in s.flags]
        assert flagged and all(s.environment.e2 > 1 for s in flagged)

    def test_cross_route(self):
        model = JuvenileAdultModel(1.0, 2.0, "3*indicator(1, 2, s)/(1 + E1 + 2*E2)", "0.2 + 0.1*s",
                                   "1 + 0.5*s/(1 + E1)", n_cells=1000)
        scalar = solve_scalar_system(model).solutions
        fixed = solve_steady_state(model, "irreducible").environment
        assert len(scalar) == 1
        assert scalar[0].environment.e1 == pytest.approx(fixed.e1, abs=1e-5)
        assert scalar[0].environment.e2 == pytest.approx(fixed.e2, abs=1e-5)
