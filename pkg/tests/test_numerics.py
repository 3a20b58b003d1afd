import math

import numpy as np
import pytest
import scipy.integrate
from hypothesis import given, settings
from hypothesis import strategies as st

from steadystate.errors import GridMisaligned, NoBracket, NotMetzler
from steadystate.numerics import (Grid, GridFn, SampledField, aligned_grid, bisect_root, brent_root,
                                  cumulative_integral, integrate, is_irreducible, numerical_rank,
                                  perron_rightmost)


def fn(lower, upper, n, f):
    g = Grid(lower, upper, n)
    return GridFn(g, f(g.nodes))


class TestGrid:
    def test_nodes_and_spacing(self):
        g = Grid(0.0, 2.0, 4)
        assert g.h == 0.5
        np.testing.assert_array_equal(g.nodes, [0.0, 0.5, 1.0, 1.5, 2.0])

    def test_nodes_read_only(self):
        with pytest.raises(ValueError):
            Grid(0.0, 1.0, 4).nodes[0] = 3.0

    @pytest.mark.parametrize("args", [(1.0, 1.0, 4), (2.0, 1.0, 4), (0.0, 1.0, 1), (0.0, 1.0, 2.5)])
    def test_invalid(self, args):
        with pytest.raises(ValueError):
            Grid(*args)

    def test_index_of(self):
        g = Grid(0.0, 3.0, 300)
        assert g.index_of(1.0) == 100
        with pytest.raises(GridMisaligned):
            g.index_of(1.005)

    def test_aligned_grid_puts_breakpoints_on_nodes(self):
        g = aligned_grid(0.0, 3.0, 200, (1.0, 2.0))
        assert g.n_cells >= 200 and g.n_cells % 3 == 0
        g.index_of(1.0), g.index_of(2.0)

    def test_gridfn_length_and_finiteness(self):
        g = Grid(0.0, 1.0, 4)
        with pytest.raises(ValueError):
            GridFn(g, np.ones(4))
        with pytest.raises(ValueError):
            GridFn(g, np.array([0, 1, np.nan, 1, 1.0]))


class TestIntegrate:
    def test_zero(self):
        assert integrate(fn(0, 2, 100, np.zeros_like)) == 0.0

    def test_constant_exact(self):
        assert integrate(fn(0, 2, 100, np.ones_like)) == pytest.approx(2.0, abs=1e-14)

    def test_exponential(self):
        val = integrate(fn(0, 2, 2000, lambda s: np.exp(-s)))
        assert abs(val - (1 - math.exp(-2))) <= 1e-12

    def test_cubic_exact_on_even_cells(self):
        val = integrate(fn(0, 2, 6, lambda s: s**3 - 2 * s**2 + 1))
        assert val == pytest.approx(4.0 - 16.0 / 3.0 + 2.0, abs=1e-13)

    def test_odd_cells_fall_back_to_trapezoid(self):
        f = fn(0, 1, 5, lambda s: s**2)
        x = f.grid.nodes
        assert integrate(f) == pytest.approx(scipy.integrate.trapezoid(x**2, x), abs=1e-15)

    @settings(max_examples=40, deadline=None)
    @given(a=st.floats(-5, 5), b=st.floats(-5, 5), n=st.integers(2, 60))
    def test_linear(self, a, b, n):
        g = Grid(0.0, 1.5, n)
        f, h = np.sin(3 * g.nodes), np.exp(g.nodes)
        lhs = integrate(GridFn(g, a * f + b * h))
        rhs = a * integrate(GridFn(g, f)) + b * integrate(GridFn(g, h))
        assert lhs == pytest.approx(rhs, abs=1e-12 * (1 + abs(a) + abs(b)) * 10)


class TestCumulative:
    def test_zero(self):
        assert np.all(cumulative_integral(fn(0, 2, 10, np.zeros_like)).values == 0)

    def test_constant_is_identity(self):
        f = fn(0, 2, 64, np.ones_like)
        np.testing.assert_allclose(cumulative_integral(f).values, f.grid.nodes, rtol=0, atol=1e-14)

    def test_linear(self):
        g = cumulative_integral(fn(0, 1, 1000, lambda s: s))
        assert abs(g.values[-1] - 0.5) <= 1e-6
        assert g.values[0] == 0.0

    def test_endpoint_matches_trapezoid_integral(self):
        f = fn(0, 1, 7, lambda s: np.cos(s))
        assert cumulative_integral(f).values[-1] == pytest.approx(integrate(f), abs=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.floats(0, 10), min_size=3, max_size=40))
    def test_monotone_for_nonnegative(self, vals):
        g = Grid(0.0, 1.0, len(vals) - 1)
        c = cumulative_integral(GridFn(g, np.array(vals))).values
        assert np.all(np.diff(c) >= 0)


@pytest.mark.parametrize("solver", [bisect_root, brent_root])
class TestRoots:
    def test_linear(self, solver):
        assert solver(lambda x: x - 1, 0.0, 2.0, 1e-12) == pytest.approx(1.0, abs=1e-12)

    def test_sqrt2(self, solver):
        assert solver(lambda x: x * x - 2, 0.0, 2.0, 1e-12) == pytest.approx(math.sqrt(2), abs=1e-12)

    def test_no_bracket(self, solver):
        with pytest.raises(NoBracket):
            solver(lambda x: x + 1, 0.0, 2.0, 1e-12)

    def test_root_at_endpoint(self, solver):
        assert solver(lambda x: x, 0.0, 1.0) == 0.0

    def test_deterministic(self, solver):
        f = lambda x: math.cos(x) - x
        assert solver(f, 0.0, 1.0) == solver(f, 0.0, 1.0)

    @settings(max_examples=40, deadline=None)
    @given(root=st.floats(-3, 3), k=st.floats(0.1, 10))
    def test_monotone_within_tol(self, solver, root, k):
        x = solver(lambda x: k * (x - root) ** 3 + (x - root), -4.0, 4.0, 1e-12)
        assert abs(x - root) <= 2e-12


class TestPerron:
    def test_diagonal(self):
        res = perron_rightmost(np.diag([-1.0, -2.0]))
        assert res.value == pytest.approx(-1.0, abs=1e-9)
        np.testing.assert_allclose(res.vector, [1.0, 0.0], atol=1e-9)
        assert not res.irreducible

    def test_swap(self):
        res = perron_rightmost(np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert res.value == pytest.approx(1.0, abs=1e-9)
        np.testing.assert_allclose(res.vector, [0.5, 0.5], atol=1e-9)

    def test_metzler_two_by_two(self):
        M = np.array([[-1.0, 2.0], [3.0, -4.0]])
        res = perron_rightmost(M)
        assert res.value == pytest.approx((-5 + math.sqrt(33)) / 2, abs=1e-8)
        assert np.all(res.vector > 0) and res.vector.sum() == pytest.approx(1.0)

    def test_not_metzler(self):
        with pytest.raises(NotMetzler):
            perron_rightmost(np.array([[0.0, -1.0], [1.0, 0.0]]))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(2, 6).flatmap(lambda n: st.lists(st.floats(0.01, 5), min_size=n * n, max_size=n * n)))
    def test_eigen_residual(self, entries):
        n = int(round(math.sqrt(len(entries))))
        M = np.array(entries).reshape(n, n) - 3.0 * np.eye(n)
        res = perron_rightmost(M, tol=1e-10)
        assert np.abs(M @ res.vector - res.value * res.vector).sum() <= 1e-9 * (1 + abs(res.value))
        assert res.value == pytest.approx(max(np.linalg.eigvals(M).real), abs=1e-7)


def test_irreducibility_pattern():
    assert is_irreducible(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert not is_irreducible(np.array([[1.0, 0.0], [1.0, 1.0]]))


def test_numerical_rank():
    A = np.array([[1.0, 2.0], [2.0, 4.0 + 1e-12]])
    assert numerical_rank(A, 1e-8) == 1
    assert numerical_rank(np.eye(3), 1e-8) == 3


def test_sampled_field_keeps_one_sided_limits():
    a = SampledField(np.array([1.0, 2.0, 3.0]), np.array([1.0, 1.5, 3.0]), np.array([1.0, 2.5, 3.0]))
    b = a * 2.0 + 1.0
    np.testing.assert_array_equal(b.left, [3.0, 4.0, 7.0])
    np.testing.assert_array_equal(b.right, [3.0, 6.0, 7.0])
