import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pelastica.curve import build_geometry
from pelastica.diagnostics import (
    CheckRow,
    DiagnosticsReport,
    besov_seminorm,
    besov_seminorm_naive,
    curvature_flux,
    fd_gradient_oracle,
    fenchel_and_length_bounds,
    higher_regularity_check,
    higher_regularity_terms,
    interpolation_check,
    interpolation_ratio,
    monotonicity_property_test,
    stationarity_check,
)
from pelastica.energy import FlowParams, evaluate_energy, stationary_radius
from pelastica.generators import circle, fourier, random_smooth_field
from pelastica.variations import delta_energy


def nested_loop_seminorm(u, s, q, w):
    """Definition of the discrete Besov seminorm, written out with scalar loops."""
    N = len(u)
    best = 0.0
    for k in range(1, N // 2 + 1):
        acc = 0.0
        for j in range(N):
            a, b = u[(j + k) % N], u[j]
            acc += w[j] * sum((ai - bi) ** 2 for ai, bi in zip(np.atleast_1d(a), np.atleast_1d(b))) ** (q / 2)
        best = max(best, acc ** (1 / q) / (k / N) ** s)
    return best


class TestBesov:
    def test_constant_field(self):
        assert besov_seminorm(np.ones((64, 3)), 0.3, 2).seminorm == 0.0

    def test_sine_on_unit_circle(self):
        N = 128
        geo = build_geometry(circle(N))
        u = np.sin(2 * np.pi * np.arange(N) / N)
        est = besov_seminorm(u, 0.5, 2, geo.ds)
        assert est.seminorm == pytest.approx(nested_loop_seminorm(u, 0.5, 2, geo.ds), rel=1e-12)
        assert 0 < est.argmax_shift <= 0.5

    def test_package_reference_agrees_with_test_oracle(self, rng):
        u = rng.standard_normal((48, 2))
        w = rng.uniform(0.5, 1.5, 48) / 48
        assert besov_seminorm_naive(u, 0.4, 3, w) == pytest.approx(nested_loop_seminorm(u, 0.4, 3, w), rel=1e-12)

    @pytest.mark.parametrize("chunk", [1, 7, 64])
    def test_chunking_does_not_change_result(self, rng, chunk):
        u = rng.standard_normal((100, 2))
        ref = besov_seminorm(u, 0.25, 2).seminorm
        assert besov_seminorm(u, 0.25, 2, chunk=chunk).seminorm == ref

    @pytest.mark.parametrize("s, q", [(0, 2), (1, 2), (0.5, 0.5)])
    def test_invalid_exponents(self, s, q):
        with pytest.raises(ValueError):
            besov_seminorm(np.zeros(32), s, q)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), c=st.floats(-100, 100).filter(lambda c: c == 0 or abs(c) > 1e-6), s=st.floats(0.05, 0.95), q=st.sampled_from([1.0, 2.0, 3.0]))
    def test_homogeneity(self, seed, c, s, q):
        u = np.random.default_rng(seed).standard_normal((64, 2))
        a = besov_seminorm(c * u, s, q).seminorm
        assert a == pytest.approx(abs(c) * besov_seminorm(u, s, q).seminorm, rel=1e-12, abs=1e-300)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), s=st.floats(0.05, 0.95), q=st.sampled_from([1.0, 2.0, 4.0]))
    def test_subadditivity(self, seed, s, q):
        rng = np.random.default_rng(seed)
        u, v = rng.standard_normal((64, 3)), rng.standard_normal((64, 3))
        w = rng.uniform(0.1, 1.0, 64)
        lhs = besov_seminorm(u + v, s, q, w).seminorm
        assert lhs <= besov_seminorm(u, s, q, w).seminorm + besov_seminorm(v, s, q, w).seminorm + 1e-12


class TestHigherRegularity:
    def test_stationary_circle(self):
        params = FlowParams(2, 0.01, 0.01, 0.5)
        geo = build_geometry(circle(128, stationary_radius(2, 0.01, 0.5)))
        terms = higher_regularity_terms(geo, params, np.zeros((128, 2)))
        assert terms["rhs"] == 1.0
        w = geo.ds
        third = geo.full_derivs[2]
        l2 = math.sqrt(np.sum(w * np.sum(third**2, axis=1)))
        expected = params.epsilon * (l2 + nested_loop_seminorm(third, 0.25, 2, w)) ** 2
        assert terms["bending_term"] == pytest.approx(expected, rel=1e-12)
        assert math.isfinite(terms["ratio"])

    def test_linear_in_epsilon(self, wobbly):
        g = np.zeros((256, 2))
        a = higher_regularity_terms(wobbly, FlowParams(3, 0.1, 0.2, 1), g)
        b = higher_regularity_terms(wobbly, FlowParams(3, 0.1, 0.1, 1), g)
        assert b["bending_term"] == pytest.approx(a["bending_term"] / 2, rel=1e-14)
        assert b["kappa_term"] == a["kappa_term"]

    def test_check_row(self, wobbly):
        row = higher_regularity_check(wobbly, FlowParams(3, 0.1, 0.1, 1), cap=1e6)
        assert row.passed and row.lhs >= 0


class TestInterpolation:
    def test_circle_ratio_is_zero(self, unit_circle):
        assert interpolation_ratio(unit_circle, 1, 2, 2) < 1e-8

    def test_direct_evaluation(self, wobbly):
        geo = build_geometry(wobbly)
        L, ds = geo.length, geo.ds

        def norm(i, q):
            mag = np.linalg.norm(geo.normal_derivs[i], axis=1)
            return L ** (i + 1 - 1 / q) * np.sum(ds * mag**q) ** (1 / q)

        alpha = (1 + 0.5 - 0.5) / 2
        expected = norm(1, 2) / (norm(0, 2) ** (1 - alpha) * (norm(0, 2) + norm(1, 2) + norm(2, 2)) ** alpha)
        assert interpolation_ratio(wobbly, 1, 2, 2) == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("sigma", [0.1, 10.0])
    def test_rescaling(self, wobbly, sigma):
        for i, k, q in [(1, 2, 2), (2, 3, 2), (1, 2, 4)]:
            assert interpolation_ratio(wobbly.scaled(sigma), i, k, q) == pytest.approx(
                interpolation_ratio(wobbly, i, k, q), rel=1e-6)

    def test_invalid_indices(self, wobbly):
        with pytest.raises(ValueError):
            interpolation_ratio(wobbly, 2, 2, 2)
        with pytest.raises(ValueError):
            interpolation_ratio(wobbly, 0, 2, 1.5)

    def test_row_name(self, wobbly):
        assert interpolation_check(wobbly, 1, 3, 2).name == "interpolation_i1_k3_q2"


class TestFenchelAndLength:
    def test_unit_circle_equality(self, unit_circle):
        params = FlowParams(2, 0, 0, 1)
        rows = fenchel_and_length_bounds(unit_circle, params, evaluate_energy(unit_circle, params).total)
        assert [r.name for r in rows] == ["fenchel", "length_lower", "length_upper"]
        assert abs(rows[0].rhs - 2 * math.pi) < 1e-8
        assert all(r.passed for r in rows)

    def test_length_bounds_on_random_curve(self, wobbly):
        params = FlowParams(3, 0.1, 0.01, 0.5)
        rows = fenchel_and_length_bounds(wobbly, params, evaluate_energy(wobbly, params).total)
        assert all(r.passed for r in rows)


class TestMonotonicity:
    def test_p2_is_the_identity_map(self):
        row = monotonicity_property_test(2, 0.7, trials=2000, seed=1)
        # Phi(z) = z, so lhs = |w-v|^2 = 4 * bound
        assert row.rhs == pytest.approx(4 * row.lhs, rel=1e-12)

    @pytest.mark.parametrize("p, delta", [(2, 0), (3, 0.1), (4, 1)])
    def test_equal_arguments(self, rng, p, delta):
        w = rng.standard_normal((5, 3))
        diff = curvature_flux(w, p, delta) - curvature_flux(w.copy(), p, delta)
        assert np.all(np.einsum("ij,ij->i", diff, w - w) == 0)

    def test_flux_is_identity_at_p2(self, rng):
        w = rng.standard_normal((5, 3))
        np.testing.assert_array_equal(curvature_flux(w, 2, 0.3), w)

    def test_p3_delta_tenth_in_r3(self):
        row = monotonicity_property_test(3, 0.1, trials=100_000, seed=0, n=3)
        assert row.info["worst_margin"] >= -1e-12
        assert row.passed

    def test_worker_count_does_not_change_result(self):
        a = monotonicity_property_test(2.5, 0.0, trials=10_000, seed=4, n=5, workers=1)
        b = monotonicity_property_test(2.5, 0.0, trials=10_000, seed=4, n=5, workers=3)
        assert (a.lhs, a.rhs, a.info["worst_margin"]) == (b.lhs, b.rhs, b.info["worst_margin"])


class TestFdOracle:
    def test_translation(self, wobbly):
        params = FlowParams(3, 0.1, 0.1, 1)
        V = np.tile([1.0, 2.0], (256, 1))
        assert abs(fd_gradient_oracle(wobbly, params, V)) < 1e-9 * (1 + evaluate_energy(wobbly, params).total)

    def test_second_order_in_h(self, wobbly, rng):
        params = FlowParams(3, 0.1, 0.0, 1)
        V = random_smooth_field(256, 2, rng)
        exact = delta_energy(wobbly, V, params)
        errs = [abs(fd_gradient_oracle(wobbly, params, V, h) - exact) for h in (1e-2, 1e-3)]
        assert errs[0] / errs[1] == pytest.approx(100, rel=0.1)

    def test_richardson_is_more_accurate(self, wobbly, rng):
        params = FlowParams(3, 0.1, 0.0, 1)
        V = random_smooth_field(256, 2, rng)
        exact = delta_energy(wobbly, V, params)
        plain = abs(fd_gradient_oracle(wobbly, params, V, 1e-2) - exact)
        extrapolated = abs(fd_gradient_oracle(wobbly, params, V, 1e-2, richardson=True) - exact)
        assert extrapolated < plain / 10


class TestReport:
    def test_row_semantics(self):
        assert CheckRow("a", 1.0, 2.0).passed
        assert CheckRow("a", 2.0 + 1e-9, 2.0, tol=1e-8).passed
        assert not CheckRow("a", 3.0, 2.0).passed
        assert CheckRow("a", 3.0, 2.0).margin == -1.0

    def test_csv(self):
        rep = DiagnosticsReport([CheckRow("x", 0.5, 1.0)], {"p": 2})
        assert rep.to_csv() == "# p=2\ncheck_name,lhs,rhs,margin,pass\nx,0.5,1,0.5,1\n"

    def test_stationarity_on_critical_circle(self):
        params = FlowParams(3, 0.0, 0.0, 1.0)
        c = circle(64, stationary_radius(3, 0, 1.0))
        assert stationarity_check(c, params, 1e-5).passed
