import math

import numpy as np
import pytest

from swstab.certification import (
    Certificate,
    certify,
    decay_ratios,
    jsr_bracket,
    theorem_bound,
    whitebox_cqlf_bound,
)
from swstab.errors import BudgetExceeded
from swstab.geometry import ConfidenceQuery, cap_measure_inv
from swstab.numerics import growth_rate
from swstab.synthesis import SynthesisResult
from swstab.system import BENCHMARK_GAMMA, BENCHMARK_K, BENCHMARK_P


def test_theorem_bound_formula():
    theta = cap_measure_inv(2, 0.05)
    kappa = np.linalg.cond(BENCHMARK_P)
    expected = BENCHMARK_GAMMA / (1 - kappa * (1 - math.cos(theta)))
    assert theorem_bound(BENCHMARK_GAMMA, BENCHMARK_P, 0.05) == pytest.approx(expected, rel=1e-10)


def test_theorem_bound_identity_is_exact():
    assert theorem_bound(0.7, np.eye(3), 0.3) == pytest.approx(0.7 / math.cos(cap_measure_inv(3, 0.3)))


def test_theorem_bound_infinite_when_shrink_exceeds_one():
    assert theorem_bound(0.5, np.diag([1.0, 1e6]), 0.5) == math.inf


def test_certify_benchmark_solution():
    res = SynthesisResult(BENCHMARK_GAMMA, BENCHMARK_P, BENCHMARK_K, [BENCHMARK_GAMMA], 0, True)
    cert = certify(res, ConfidenceQuery(2, 3, 1000, beta=0.01))
    assert cert.confidence == pytest.approx(0.99, abs=1e-9)
    assert cert.finite and not cert.vacuous
    assert cert.bound == pytest.approx(0.9063, abs=1e-3)
    again = Certificate.from_dict(cert.to_dict())
    assert again == cert


def test_certificate_serializes_infinity():
    cert = Certificate(0.9, 1e6, 0.5, 0.7, 0.9, math.inf, 10)
    d = cert.to_dict()
    assert d["bound"] == "inf"
    assert Certificate.from_dict(d).bound == math.inf
    assert cert.vacuous


def test_certify_one_dimension():
    res = SynthesisResult(0.5, np.eye(1), np.zeros((1, 1)), [0.5], 0, True)
    cert = certify(res, ConfidenceQuery(1, 2, 20, beta=0.01))
    assert cert.bound == 0.5
    assert cert.confidence == pytest.approx(1 - 2 * 0.5**20)


def test_whitebox_single_matrix_matches_spectral_radius(rng):
    A = rng.standard_normal((3, 3))
    gamma, P = whitebox_cqlf_bound([A])
    lo, hi = growth_rate(A)
    assert gamma == pytest.approx(hi, abs=2e-6)
    assert np.linalg.eigvalsh(P)[0] == pytest.approx(1.0, abs=1e-9)
    assert np.linalg.eigvalsh(gamma**2 * P - A.T @ P @ A)[0] >= -1e-6 * np.abs(P).max()


def test_whitebox_rotation_pair():
    c, s = np.cos(0.4), np.sin(0.4)
    R = 0.8 * np.array([[c, -s], [s, c]])
    gamma, _ = whitebox_cqlf_bound([R, R.T])
    assert gamma == pytest.approx(0.8, abs=2e-6)


def test_jsr_bracket_normal_pair():
    c, s = np.cos(0.4), np.sin(0.4)
    R = 0.8 * np.array([[c, -s], [s, c]])
    lo, hi = jsr_bracket([R, R.T], 6)
    assert lo == pytest.approx(0.8, abs=1e-9) and hi == pytest.approx(0.8, abs=1e-9)


def test_jsr_bracket_orders_bounds(rng):
    mats = [rng.standard_normal((2, 2)) for _ in range(3)]
    lo, hi = jsr_bracket(mats, 5)
    assert lo <= hi
    gamma, _ = whitebox_cqlf_bound(mats)
    assert lo <= gamma + 1e-6


def test_jsr_bracket_budget():
    with pytest.raises(BudgetExceeded):
        jsr_bracket([np.eye(2)] * 4, 12, max_products=1000)


def test_decay_ratios_skip_origin():
    traj = np.array([[1.0, 0.0], [0.5, 0.0], [0.0, 0.0], [0.0, 0.0]])
    r = decay_ratios(traj, np.eye(2))
    np.testing.assert_allclose(r, [0.5, 0.0])
