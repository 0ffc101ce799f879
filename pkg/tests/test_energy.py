import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.optimize import fsolve

from pelastica.energy import (
    EnergyBreakdown,
    FlowParams,
    circle_gradient_coefficient,
    circle_radius_rate,
    evaluate_energy,
    scale_invariant_norm,
    stationary_radius,
    total_absolute_curvature,
)
from pelastica.errors import ConfigError
from pelastica.generators import circle, fourier


class TestFlowParams:
    @pytest.mark.parametrize(
        "kwargs, key",
        [
            (dict(p=1.5, delta=0, epsilon=0, lam=1), "p"),
            (dict(p=2, delta=-1, epsilon=0, lam=1), "delta"),
            (dict(p=2, delta=0, epsilon=-1, lam=1), "epsilon"),
            (dict(p=2, delta=0, epsilon=0, lam=0), "lambda"),
            (dict(p=2, delta=0, epsilon=0, lam=math.nan), "lambda"),
        ],
    )
    def test_invalid_values_name_the_key(self, kwargs, key):
        with pytest.raises(ConfigError) as info:
            FlowParams(**kwargs)
        assert info.value.key == key

    def test_degenerate_flag(self):
        assert FlowParams(2, 0, 0.1, 1).degenerate
        assert FlowParams(2, 0.1, 0, 1).degenerate
        assert not FlowParams(2, 0.1, 0.1, 1).degenerate


class TestEvaluateEnergy:
    def test_unit_circle_closed_form(self, unit_circle):
        e = evaluate_energy(unit_circle, FlowParams(2, 0, 0.3, 1))
        assert abs(e.bending_reg) < 1e-12
        assert abs(e.p_elastic - math.pi) < 1e-12
        assert abs(e.length - 2 * math.pi) < 1e-12
        assert abs(e.total - 3 * math.pi) < 1e-11

    @pytest.mark.parametrize("R, p, delta", [(0.5, 2, 0.3), (2.0, 3, 0.0), (1.3, 2.5, 1.0), (4.0, 4, 0.1)])
    def test_circle_p_elastic(self, R, p, delta):
        e = evaluate_energy(circle(128, R), FlowParams(p, delta, 0, 1))
        expected = 2 * math.pi * R / p * (1 / R**2 + delta**2) ** (p / 2)
        assert e.p_elastic == pytest.approx(expected, rel=1e-12)

    def test_total_is_the_stated_combination(self, wobbly):
        params = FlowParams(3, 0.2, 0.07, 0.9)
        e = evaluate_energy(wobbly, params)
        assert e.total == params.epsilon * e.bending_reg + e.p_elastic + params.lam * e.length
        assert min(e.bending_reg, e.p_elastic, e.length) >= 0

    @pytest.mark.parametrize("p", [2, 3, 4.5])
    def test_delta_increases_p_elastic(self, wobbly, p):
        values = [evaluate_energy(wobbly, FlowParams(p, d, 0, 1)).p_elastic for d in (0, 0.01, 0.1, 1)]
        assert values == sorted(values)

    @pytest.mark.parametrize("p", [2, 3, 4])
    def test_delta_limit_is_quadratic(self, wobbly, p):
        base = evaluate_energy(wobbly, FlowParams(p, 0, 0, 1)).p_elastic
        ratios = [(evaluate_energy(wobbly, FlowParams(p, d, 0, 1)).p_elastic - base) / d**2 for d in (1e-2, 1e-3)]
        assert ratios[1] == pytest.approx(ratios[0], rel=1e-3)

    def test_csv_row_round_trips(self, wobbly):
        e = evaluate_energy(wobbly, FlowParams(3, 0.1, 0.1, 1))
        values = [float(v) for v in e.csv_row(0.25).split(",")]
        assert values == [0.25, e.bending_reg, e.p_elastic, e.length, e.total]
        assert EnergyBreakdown.CSV_HEADER == "t,bending_reg,p_elastic,length,total"


class TestScaleInvariantNorm:
    @pytest.mark.parametrize("R", [0.1, 1.0, 7.0])
    def test_circle_value_is_two_pi(self, R):
        assert scale_invariant_norm(circle(128, R), 0, 2) == pytest.approx(2 * math.pi, rel=1e-12)

    def test_circle_higher_derivatives_vanish(self, unit_circle):
        assert scale_invariant_norm(unit_circle, 1, 2) < 1e-8

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 10_000), sigma=st.sampled_from([0.5, 2.0, 10.0]),
           i=st.integers(0, 3), q=st.sampled_from([1.0, 2.0, 3.5]))
    def test_invariant_under_rescaling(self, seed, sigma, i, q):
        c = fourier(128, seed=seed, modes=3, amp=0.05)
        assert scale_invariant_norm(c.scaled(sigma), i, q) == pytest.approx(scale_invariant_norm(c, i, q), rel=1e-6)


class TestFenchel:
    def test_ellipse_total_curvature_against_quadrature(self, ellipse21):
        a, b = 2.0, 1.0
        # curvature times speed of (a cos t, b sin t), integrated adaptively
        integrand = lambda t: a * b / (a**2 * math.sin(t) ** 2 + b**2 * math.cos(t) ** 2)
        oracle, _ = quad(integrand, 0, 2 * math.pi, epsabs=1e-13, epsrel=1e-13)
        assert total_absolute_curvature(ellipse21) == pytest.approx(oracle, abs=1e-10)
        # a convex planar curve attains Fenchel's bound
        assert oracle == pytest.approx(2 * math.pi, abs=1e-10)

    @pytest.mark.parametrize("seed", range(5))
    def test_random_curves(self, seed):
        c = fourier(256, seed=seed, modes=5, amp=0.2, n=2 + seed % 2)
        assert total_absolute_curvature(c) >= 2 * math.pi - 1e-8


class TestCircleReduction:
    @pytest.mark.parametrize("p, lam", [(2, 0.5), (3, 1.0), (2.5, 2.0), (4, 0.3)])
    def test_closed_form_radius_at_delta_zero(self, p, lam):
        R = stationary_radius(p, 0, lam)
        assert abs(circle_gradient_coefficient(1 / R, p, 0, lam)) < 1e-12

    def test_p2_half_lambda_gives_unit_radius(self):
        assert stationary_radius(2, 0, 0.5) == pytest.approx(1.0, abs=1e-15)

    @pytest.mark.parametrize("p, delta, lam", [(2, 1e-3, 0.5), (3, 0.1, 1.0), (4, 1.0, 0.7), (2.5, 0.5, 2.0)])
    def test_regularized_radius_against_fsolve(self, p, delta, lam):
        R = stationary_radius(p, delta, lam)
        start = stationary_radius(p, 0, lam)
        oracle = fsolve(lambda r: [circle_gradient_coefficient(1 / r[0], p, delta, lam)], [start], xtol=1e-12)[0]
        assert R == pytest.approx(oracle, rel=1e-10)

    def test_gradient_matches_discrete_gradient_on_circle(self):
        from pelastica.curve import build_geometry
        from pelastica.variations import assemble_gradient

        R, params = 1.3, FlowParams(3, 0.2, 0.01, 0.8)
        geo = build_geometry(circle(64, R))
        grad = assemble_gradient(geo, params).vectors
        G = circle_gradient_coefficient(1 / R, params.p, params.delta, params.lam)
        np.testing.assert_allclose(grad, G * geo.curvature, atol=1e-9)

    def test_rate_sign(self):
        # a small circle has too much bending energy and expands
        assert circle_radius_rate(0.5, 2, 0, 0.5) > 0
        assert circle_radius_rate(2.0, 2, 0, 0.5) < 0
