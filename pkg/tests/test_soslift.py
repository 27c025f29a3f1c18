import math

import numpy as np
import pytest

from swstab.errors import EngineSizeCap
from swstab.soslift import (
    LiftBasis,
    lift_dimension,
    lift_matrix,
    lift_rows,
    lift_vector,
    lift_witness,
    lifted_p_step,
)
from swstab.synthesis import SolverConfig, k_step, p_step
from swstab.system import BENCHMARK_P


def test_basis_order_and_coefficients():
    b = LiftBasis(2, 2)
    assert b.exponents == ((2, 0), (1, 1), (0, 2))
    np.testing.assert_allclose(lift_vector(np.array([1.0, 1.0]), b), [1, math.sqrt(2), 1])


def test_dimension_formula():
    for n in range(1, 5):
        for d in range(1, 5):
            assert LiftBasis(n, d).D == lift_dimension(n, d) == math.comb(n + d - 1, d)


def test_diagonal_lift():
    np.testing.assert_allclose(lift_matrix(np.diag([2.0, 3.0]), LiftBasis(2, 2)),
                               np.diag([4.0, 6.0, 9.0]), atol=1e-12)


def test_witness_reproduces_power_of_quadratic(rng):
    b = LiftBasis(2, 3)
    W = lift_witness(BENCHMARK_P, b)
    for _ in range(10):
        x = rng.standard_normal(2)
        fx = lift_vector(x, b)
        assert fx @ W @ fx == pytest.approx((x @ BENCHMARK_P @ x) ** 3, rel=1e-10)


def test_lift_rows_matches_vector(rng):
    b = LiftBasis(3, 2)
    X = rng.standard_normal((5, 3))
    F = lift_rows(X, b)
    for x, f in zip(X, F):
        np.testing.assert_allclose(lift_vector(x, b), f)


def test_size_cap(bench_data, bench_sys):
    with pytest.raises(EngineSizeCap):
        lifted_p_step(np.zeros((1, 2)), bench_data, bench_sys.B, LiftBasis(2, 3), 1.0, max_dim=3)


def test_lifted_p_step_rate_exponent(bench_sys, bench_data):
    cfg = SolverConfig()
    K, g0 = k_step(np.eye(2), bench_data, bench_sys.B)
    P, g = p_step(K, bench_data, bench_sys.B, g0, cfg)
    b = LiftBasis(2, 2)
    _, g2 = lifted_p_step(K, bench_data, bench_sys.B, b, g, cfg, rate_exponent="2d",
                          P_start=lift_witness(P, b))
    assert g2 <= g + 1e-4
    with pytest.raises(ValueError):
        lifted_p_step(K, bench_data, bench_sys.B, b, g, cfg, rate_exponent="3")
