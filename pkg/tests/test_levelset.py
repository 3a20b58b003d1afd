import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from steadystate.errors import BadOrigin, NoOuterSignChange
from steadystate.levelset import (HALF_PI, LevelCurve, Ray, SimplexPoint, bracket_on_ray, count_zeros,
                                  point_on_ray, project_to_curve, simplex_of_theta, theta_of_simplex,
                                  trace_zero_set)
from steadystate.models import Environment
from steadystate.spectral import spectral_bound

E = Environment
line = lambda e: 2.0 - e.e1 - e.e2
circle = lambda e: 1.0 - e.e1**2 - e.e2**2


class TestBracket:
    def test_diagonal(self):
        assert bracket_on_ray(line, math.pi / 4, 10.0, 1e-12) == pytest.approx(math.sqrt(2), abs=1e-12)

    def test_axis(self):
        assert bracket_on_ray(line, 0.0, 10.0, 1e-12) == pytest.approx(2.0, abs=1e-12)

    def test_no_outer_sign_change(self):
        with pytest.raises(NoOuterSignChange):
            bracket_on_ray(lambda e: 1.0, 0.3, 10.0)

    def test_bad_origin(self):
        with pytest.raises(BadOrigin):
            bracket_on_ray(lambda e: -1.0, 0.3, 10.0)

    def test_innermost_and_all_zeros(self):
        # zeros at radius 1, 2 and 3, negative beyond 3
        f = lambda e: -(math.hypot(e.e1, e.e2) - 1) * (math.hypot(e.e1, e.e2) - 2) * (math.hypot(e.e1, e.e2) - 3)
        assert bracket_on_ray(f, 0.7, 10.0) == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(bracket_on_ray(f, 0.7, 10.0, all_roots=True), [1, 2, 3], atol=1e-12)
        assert count_zeros(f, 0.7, 10.0) == 3

    @settings(max_examples=40, deadline=None)
    @given(a=st.floats(0.2, 5), b=st.floats(0.2, 5), theta=st.floats(0, HALF_PI))
    def test_scan_refinement_invariance(self, a, b, theta):
        sigma = lambda e: 1.0 - (e.e1 / a) ** 2 - (e.e2 / b) ** 3
        coarse = bracket_on_ray(sigma, theta, 10.0, 1e-12)
        fine = bracket_on_ray(sigma, theta, 10.0, 1e-12, steps=256)
        assert fine == pytest.approx(coarse, abs=2e-12)

    def test_flat_zero_warns(self, caplog):
        f = lambda e: max(0.0, 1.0 - e.e1) if e.e1 < 1.0 else (-1.0 if e.e1 > 1.5 else 0.0)
        with caplog.at_level("WARNING"):
            bracket_on_ray(f, 0.0, 10.0, 1e-12)
        assert "flat" in caplog.text


class TestTrace:
    def test_line(self):
        curve = trace_zero_set(line, 101, 10.0, 1e-12)
        assert len(curve.samples) == 101
        assert max(abs(s.point.e1 + s.point.e2 - 2) for s in curve.samples) <= 1e-8

    def test_circle(self):
        curve = trace_zero_set(circle, 65, 10.0, 1e-12)
        assert max(abs(math.hypot(*s.point) - 1) for s in curve.samples) <= 1e-8

    def test_axes_and_order(self):
        curve = trace_zero_set(line, 33, 10.0)
        assert curve.thetas[0] == 0.0 and curve.thetas[-1] == HALF_PI
        assert np.all(np.diff(curve.thetas) > 0)
        assert curve.samples[0].point == E(2, 0) and curve.samples[-1].point == E(0, 2)

    def test_failing_ray_reported(self):
        sigma = lambda e: 1.0 - e.e1  # never negative along the e2 axis
        with pytest.raises(NoOuterSignChange) as info:
            trace_zero_set(sigma, 9, 10.0)
        assert info.value.details["theta"] == pytest.approx(HALF_PI)

    def test_truncation(self):
        curve = trace_zero_set(lambda e: 1.0 - e.e1, 9, 10.0, allow_truncation=True)
        assert HALF_PI in curve.truncated and len(curve.samples) < 9

    def test_residual_scaled_by_lipschitz(self):
        sigma = lambda e: 3.0 - 2.0 * e.e1 - e.e2**2
        curve = trace_zero_set(sigma, 33, 10.0, 1e-12)
        for s in curve.samples:
            assert abs(s.sigma_residual) <= 1e-12 * 50

    def test_spectral_bound_of_juvenile_adult(self, ja):
        sigma = lambda e: spectral_bound(ja, e).bound
        curve = trace_zero_set(sigma, 17, 10.0)
        assert max(abs(s.point.e1 + s.point.e2 - 2) for s in curve.samples) <= 1e-6


class TestProject:
    curve = trace_zero_set(line, 65, 10.0, 1e-12)

    @pytest.mark.parametrize("point, expected", [(E(3, 3), (1, 1)), (E(2, 0), (2, 0)), (E(0, 5), (0, 2))])
    def test_examples(self, point, expected):
        q = project_to_curve(point, self.curve)
        assert (q.e1, q.e2) == pytest.approx(expected, abs=1e-9)

    def test_idempotent_on_samples(self):
        for s in self.curve.samples[::7]:
            assert project_to_curve(s.point, self.curve) == s.point

    def test_origin_rejected(self):
        with pytest.raises(ValueError):
            project_to_curve(E(0, 0), self.curve)


def test_simplex_and_rays():
    for t in (0.0, 0.25, 0.5, 1.0):
        assert simplex_of_theta(theta_of_simplex(t)) == pytest.approx(t, abs=1e-15)
    with pytest.raises(ValueError):
        SimplexPoint(1.5)
    with pytest.raises(ValueError):
        Ray(-0.1)
    assert point_on_ray(HALF_PI, 2.0) == E(0, 2)
