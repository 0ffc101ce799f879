"""Batteries of checks shared by the command line and the test suite."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .curve import build_geometry, project_normal
from .diagnostics import (
    CheckRow,
    besov_seminorm,
    besov_seminorm_naive,
    fd_gradient_oracle,
    fenchel_and_length_bounds,
    higher_regularity_check,
    interpolation_ratio,
    monotonicity_property_test,
)
from .energy import FlowParams, evaluate_energy
from .generators import fourier, random_smooth_field
from .variations import assemble_gradient, delta_energy, l2_pairing

GRADCHECK_P = (2.0, 3.0, 4.0)
GRADCHECK_DELTA = (0.1, 1.0)
GRADCHECK_EPSILON = (0.0, 0.1)
# Amplitude of the random test curves; larger values leave sharp curvature
# features that N = 512 samples do not resolve.
TEST_CURVE_MODES = 5
TEST_CURVE_AMP = 0.05
INTERPOLATION_CASES = ((1, 2, 2.0), (1, 3, 2.0), (2, 3, 2.0), (1, 2, 4.0))


@dataclass(frozen=True)
class GradcheckRow:
    curve: int
    n: int
    p: float
    delta: float
    epsilon: float
    field: int
    kind: str
    analytic: float
    fd: float

    @property
    def rel_err(self) -> float:
        return abs(self.analytic - self.fd) / (1.0 + abs(self.fd))

    CSV_HEADER = "curve,n,p,delta,epsilon,field,kind,analytic,fd,rel_err"

    def csv_row(self) -> str:
        head = f"{self.curve},{self.n},{self.p:g},{self.delta:g},{self.epsilon:g},{self.field},{self.kind}"
        return f"{head},{self.analytic:.17g},{self.fd:.17g},{self.rel_err:.17g}"


def random_test_curve(N: int, seed: int, n: int):
    return fourier(N, seed, modes=TEST_CURVE_MODES, amp=TEST_CURVE_AMP, n=n)


def gradcheck_sweep(curves: int = 10, fields: int = 5, N: int = 512, seed: int = 0, lam: float = 1.0) -> list:
    """Compare the gradient pairing and the first variation against finite differences.

    For each seeded curve (ambient dimension alternating 2 and 3) and each
    ``(p, delta, epsilon)`` of the sweep, ``fields`` random normal fields
    test ``<grad E, V>`` (kind ``gradient``) and as many unprojected fields
    test ``delta_F + delta_Ep + lambda delta_length`` (kind ``variation``).
    """
    rows = []
    for c in range(curves):
        n = 2 + c % 2
        curve = random_test_curve(N, seed + c, n)
        geo = build_geometry(curve)
        rng = np.random.default_rng([seed, c])
        normal = [project_normal(random_smooth_field(N, n, rng), geo.tangent) for _ in range(fields)]
        free = [random_smooth_field(N, n, rng) for _ in range(fields)]
        for p in GRADCHECK_P:
            for delta in GRADCHECK_DELTA:
                for eps in GRADCHECK_EPSILON:
                    params = FlowParams(p, delta, eps, lam)
                    grad = assemble_gradient(geo, params).vectors
                    for f, V in enumerate(normal):
                        fd = fd_gradient_oracle(curve, params, V)
                        rows.append(GradcheckRow(c, n, p, delta, eps, f, "gradient", l2_pairing(geo, grad, V), fd))
                    for f, V in enumerate(free):
                        fd = fd_gradient_oracle(curve, params, V)
                        rows.append(GradcheckRow(c, n, p, delta, eps, f, "variation", delta_energy(geo, V, params), fd))
    return rows


def gradcheck_csv(rows) -> str:
    return "\n".join([GradcheckRow.CSV_HEADER] + [r.csv_row() for r in rows]) + "\n"


# -- diagnostic suites ---------------------------------------------------------

def monotonicity_suite(p: float, delta: float, trials: int, seed: int) -> list:
    return [monotonicity_property_test(p, delta, trials, seed=seed + n, n=n) for n in (2, 3, 5)]


def besov_suite(fields: int, seed: int, N: int = 64) -> list:
    """Optimized Besov seminorm against the nested-loop definition."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(fields):
        u = rng.standard_normal((N, 2))
        w = rng.uniform(0.5, 1.5, N) / N
        s, q = rng.uniform(0.1, 0.9), rng.choice([1.0, 2.0, 3.0])
        fast = besov_seminorm(u, s, q, w).seminorm
        slow = besov_seminorm_naive(u, s, q, w)
        worst = max(worst, abs(fast - slow) / slow)
    return [CheckRow("besov_vs_naive", worst, 0.0, 1e-12)]


def interpolation_suite(curves: int, seed: int, cap: float, N: int = 256) -> list:
    """Interpolation ratios over random curves, and their invariance under rescaling."""
    rows = []
    for i, k, q in INTERPOLATION_CASES:
        worst, drift = 0.0, 0.0
        for c in range(curves):
            curve = random_test_curve(N, seed + c, 2 + c % 2)
            ratio = interpolation_ratio(curve, i, k, q)
            worst = max(worst, ratio)
            for sigma in (0.1, 10.0):
                drift = max(drift, abs(interpolation_ratio(curve.scaled(sigma), i, k, q) / ratio - 1.0))
        rows.append(CheckRow(f"interpolation_i{i}_k{k}_q{q:g}", worst, cap))
        rows.append(CheckRow(f"interpolation_scaling_i{i}_k{k}_q{q:g}", drift, 0.0, 1e-6))
    return rows


def curve_suite(curve, params: FlowParams, regularity_cap: float) -> list:
    E0 = evaluate_energy(curve, params).total
    return fenchel_and_length_bounds(curve, params, E0) + [higher_regularity_check(curve, params, cap=regularity_cap)]


def check_suites(curve, params: FlowParams, seed: int, trials: int, curves: int, regularity_cap: float,
                 interpolation_cap: float, workers: int = 1) -> list:
    """Run the independent suites, possibly in parallel; rows come back in a fixed order."""
    jobs = [
        lambda: monotonicity_suite(params.p, params.delta, trials, seed),
        lambda: besov_suite(20, seed),
        lambda: interpolation_suite(curves, seed, interpolation_cap),
        lambda: curve_suite(curve, params, regularity_cap),
    ]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda job: job(), jobs))
    else:
        parts = [job() for job in jobs]
    return [row for part in parts for row in part]
