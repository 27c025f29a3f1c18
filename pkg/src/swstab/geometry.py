"""Spherical-cap measure, covering/packing bounds and the sample-size bound.

``cap_measure(n, theta)`` is the uniform measure of the symmetric cap
``{v in S^(n-1) : |x.v| >= cos(theta)}``. It equals the regularized
incomplete beta function ``I(sin^2 theta; (n-1)/2, 1/2)``, evaluated here by
a continued fraction so the package does not depend on scipy for it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import NoSolution, OutOfRange

HALF_PI = 0.5 * math.pi
_CF_EPS = 1e-16
_CF_TINY = 1e-300
_CF_MAXIT = 10_000


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for I_x(a, b) (modified Lentz)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_TINY:
        d = _CF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAXIT + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction stalled (a={a}, b={b}, x={x})")


def betainc_reg(a: float, b: float, x: float, xc: float | None = None) -> float:
    """Regularized incomplete beta ``I(x; a, b)``.

    ``xc`` may carry ``1 - x`` computed without cancellation (e.g. ``cos^2``
    when ``x = sin^2``). Uses the usual swap to ``1 - I(1 - x; b, a)`` for
    ``x > (a + 1) / (a + b + 2)``, where the fraction converges slowly.
    """
    if a <= 0 or b <= 0:
        raise OutOfRange("a and b must be positive")
    if xc is None:
        xc = 1.0 - x
    if x <= 0.0:
        return 0.0
    if xc <= 0.0:
        return 1.0
    if x > (a + 1.0) / (a + b + 2.0):
        return 1.0 - betainc_reg(b, a, xc, x)
    log_front = (a * math.log(x) + b * math.log(xc)
                 + math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b))
    return math.exp(log_front) * _betacf(a, b, x) / a


def _check_dim(n) -> int:
    if int(n) != n or n < 2:
        raise OutOfRange(f"dimension must be an integer >= 2, got {n}")
    return int(n)


def cap_measure(n: int, theta: float) -> float:
    """Uniform measure of a symmetric spherical cap of half-angle ``theta``."""
    n = _check_dim(n)
    if not 0.0 <= theta <= HALF_PI:
        raise OutOfRange(f"theta={theta} outside [0, pi/2]")
    if theta == 0.0:
        return 0.0
    s, c = math.sin(theta), math.cos(theta)
    return betainc_reg(0.5 * (n - 1), 0.5, s * s, c * c)


def cap_measure_inv(n: int, eps: float) -> float:
    """Angle ``theta`` with ``cap_measure(n, theta) == eps``, by bisection.

    Bisects until the bracket stops shrinking, so the result is as accurate
    as the forward evaluation allows.
    """
    n = _check_dim(n)
    if not 0.0 < eps < 1.0:
        raise OutOfRange(f"eps={eps} outside (0, 1)")
    lo, hi = 0.0, HALF_PI
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if cap_measure(n, mid) < eps:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def packing_bound(n: int, eps: float) -> float:
    """Upper bound ``1 / delta(theta / 2)``, ``theta = delta^-1(eps)``, on the
    covering and packing numbers of the sphere at level ``eps``."""
    theta = cap_measure_inv(n, eps)
    return 1.0 / cap_measure(n, 0.5 * theta)


def _check_counts(M, N):
    if int(M) != M or M < 1:
        raise OutOfRange(f"mode count must be a positive integer, got {M}")
    if int(N) != N or N < 1:
        raise OutOfRange(f"sample count must be a positive integer, got {N}")


def confidence_chain(n: int, M: int, N: int, eps: float) -> dict:
    """Every intermediate quantity of the violation bound, for audit trails."""
    _check_counts(M, N)
    theta = cap_measure_inv(n, eps)
    half = cap_measure(n, 0.5 * theta)
    quarter = cap_measure(n, 0.25 * theta)
    if quarter == 0.0:
        beta = math.inf
    else:
        beta = M * math.exp(N * math.log1p(-half / M)) / quarter
    return {"epsilon": eps, "theta": theta, "delta_half": half,
            "delta_quarter": quarter, "beta": beta}


def confidence_violation(n: int, M: int, N: int, eps: float) -> float:
    """Probability bound that ``N`` uniform samples of ``S x {1..M}`` fail to
    be an ``eps``-covering: ``M (1 - delta(theta/2)/M)^N / delta(theta/4)``.

    The value can exceed 1, in which case the bound says nothing; it is
    returned unchanged.
    """
    return confidence_chain(n, M, N, eps)["beta"]


EPS_HI = 1.0 - 1e-12


def epsilon_for_confidence(n: int, M: int, N: int, beta: float) -> float:
    """Smallest ``eps`` whose violation bound does not exceed ``beta``.

    The bound decreases in ``eps``, so plain bisection applies. The returned
    value sits on the safe side (bound <= beta) and matches ``beta`` to
    within the resolution of double precision.

    Raises
    ------
    NoSolution
        If even ``eps`` close to 1 leaves the bound above ``beta``. The
        exception's ``min_beta`` is the best level reachable with ``N``.
    """
    if not 0.0 < beta < 1.0:
        raise OutOfRange(f"beta={beta} outside (0, 1)")
    floor = confidence_violation(n, M, N, EPS_HI)
    if floor > beta:
        raise NoSolution(
            f"N={N} samples cannot reach beta={beta} (best attainable {floor:.6g})",
            min_beta=floor,
        )
    lo, hi = 0.0, EPS_HI
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if confidence_violation(n, M, N, mid) > beta:
            lo = mid
        else:
            hi = mid
    return hi


@dataclass(frozen=True)
class CapSpec:
    n: int
    theta: float

    def __post_init__(self):
        _check_dim(self.n)
        if not 0.0 <= self.theta <= HALF_PI:
            raise OutOfRange(f"theta={self.theta} outside [0, pi/2]")

    @property
    def measure(self) -> float:
        return cap_measure(self.n, self.theta)


@dataclass(frozen=True)
class ConfidenceQuery:
    """Sample-size question: give ``epsilon`` or ``beta``, the other is derived.

    If both are given, ``epsilon`` is used and ``beta`` is ignored.
    """

    n: int
    M: int
    N: int
    epsilon: float | None = None
    beta: float | None = None

    def __post_init__(self):
        if self.epsilon is None and self.beta is None:
            raise ValueError("ConfidenceQuery needs epsilon or beta")

    def resolve_epsilon(self) -> float:
        if self.epsilon is not None:
            return self.epsilon
        return epsilon_for_confidence(self.n, self.M, self.N, self.beta)
