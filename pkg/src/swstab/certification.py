"""Probabilistic JSR certificates and white-box reference values.

A certificate turns a sampled solution ``(gamma, P, K)`` into the bound

    gamma_bar = gamma / (1 - kappa(P) * (1 - cos(theta))),  theta = delta^-1(eps),

which holds with probability at least ``1 - beta(eps; N)`` over the draw of
the data. It is infinite when ``kappa(P) * (1 - cos(theta)) >= 1``.

``whitebox_cqlf_bound`` and ``jsr_bracket`` need the true mode matrices and
exist to validate certificates in tests and experiments.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import BudgetExceeded, DimensionMismatch, OutOfRange
from .geometry import ConfidenceQuery, cap_measure_inv, confidence_violation
from .numerics import (
    AffineMatrixConstraint,
    DEFAULT_RADIUS,
    DEFAULT_TOL,
    condition_number,
    conic_feasible,
    growth_rate,
    growth_rate_batch,
    sym_eigs,
    symmetrize,
)
from .synthesis import SynthesisResult, _identity_floor, _sym_basis, vec_to_sym

MAX_PRODUCTS = 10**6


@dataclass(frozen=True)
class Certificate:
    gamma_sampled: float
    kappa: float
    epsilon: float
    theta: float
    confidence: float
    bound: float
    N: int

    @property
    def finite(self) -> bool:
        return math.isfinite(self.bound)

    @property
    def vacuous(self) -> bool:
        """True when the certificate does not establish stability."""
        return not self.bound < 1.0

    def to_dict(self) -> dict:
        d = asdict(self)
        if not self.finite:
            d["bound"] = "inf"
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Certificate":
        d = dict(d)
        d["bound"] = math.inf if d["bound"] == "inf" else float(d["bound"])
        return cls(**d)

    def summary(self) -> str:
        bound = f"{self.bound:.6g}" if self.finite else "inf"
        verdict = "stable" if not self.vacuous else "not certified"
        return (f"JSR <= {bound} with confidence {self.confidence:.6g} "
                f"({verdict}; gamma={self.gamma_sampled:.6g}, kappa={self.kappa:.6g}, "
                f"eps={self.epsilon:.6g}, N={self.N})")


def _bound(gamma: float, kappa: float, theta: float) -> float:
    shrink = kappa * (1.0 - math.cos(theta))
    if shrink >= 1.0:
        return math.inf
    return gamma / (1.0 - shrink)


def theorem_bound(gamma: float, P, eps: float) -> float:
    """``gamma / (1 - kappa(P)(1 - cos(delta^-1(eps))))`` or ``math.inf``."""
    P = symmetrize(P)
    if not 0.0 < eps < 1.0:
        raise OutOfRange(f"eps={eps} outside (0, 1)")
    n = P.shape[0]
    theta = 0.0 if n == 1 else cap_measure_inv(n, eps)
    return _bound(gamma, condition_number(P), theta)


def certify(result: SynthesisResult, query: ConfidenceQuery) -> Certificate:
    """Attach a confidence-qualified JSR bound to a synthesis result.

    In one dimension the unit sphere is ``{-1, +1}`` and every sample covers
    it, so the covering angle is zero and the violation probability reduces
    to ``M (1 - 1/M)^N`` (some mode never observed).
    """
    P = symmetrize(result.P)
    n = P.shape[0]
    if query.n != n:
        raise DimensionMismatch(f"query dimension {query.n} but P is {n}x{n}")
    kappa = condition_number(P)
    gamma = float(result.gamma)
    if n == 1:
        eps = query.epsilon if query.epsilon is not None else float("nan")
        theta = 0.0
        beta = query.M * (1.0 - 1.0 / query.M) ** query.N
    else:
        eps = query.resolve_epsilon()
        theta = cap_measure_inv(n, eps)
        beta = confidence_violation(n, query.M, query.N, eps)
    return Certificate(
        gamma_sampled=gamma,
        kappa=kappa,
        epsilon=eps,
        theta=theta,
        confidence=1.0 - beta,
        bound=_bound(gamma, kappa, theta),
        N=int(query.N),
    )


# ---------------------------------------------------------------------------
# White-box references


def _lyapunov_constraints(matrices, gamma: float, D: int):
    J, Kk = _sym_basis(D)
    E = np.zeros((J.size, D, D))
    idx = np.arange(J.size)
    E[idx, J, Kk] = 1.0
    E[idx, Kk, J] = 1.0
    stack = np.stack(matrices)
    # gamma^2 P - A^T P A, one stacked constraint per matrix
    AtEA = np.einsum("kba,ibc,kcd->ikad", stack, E, stack)
    coeff = gamma * gamma * E[:, None] - AtEA
    return [_identity_floor(D, J, Kk),
            AffineMatrixConstraint(np.zeros((len(matrices), D, D)), coeff)]


def whitebox_cqlf_bound(matrices, tol: float = 1e-6, radius_bound: float = DEFAULT_RADIUS,
                        feas_tol: float = DEFAULT_TOL):
    """Smallest ``gamma`` with a common ``P >= I`` such that
    ``A^T P A <= gamma^2 P`` for every ``A`` in ``matrices``.

    Bisection between the largest spectral-radius lower bound of the
    individual matrices and the largest spectral norm (where ``P = I``
    works). Returns ``(gamma_star, P)`` with ``lambda_min(P) == 1``.
    """
    matrices = [np.asarray(A, dtype=float) for A in matrices]
    if not matrices:
        raise ValueError("need at least one matrix")
    D = matrices[0].shape[0]
    for A in matrices:
        if A.shape != (D, D):
            raise DimensionMismatch("matrices must share one square shape")
    dim = D * (D + 1) // 2

    def check(g, center=None):
        return conic_feasible(_lyapunov_constraints(matrices, g, D), dim,
                              radius_bound=radius_bound, tol=feas_tol, center=center)

    hi = max(float(np.linalg.norm(A, 2)) for A in matrices) * (1.0 + 1e-9) + tol
    lo = max(growth_rate(A, 20)[0] for A in matrices)
    res = check(hi)
    while not res.feasible:  # cannot happen in exact arithmetic; widen and retry
        hi *= 1.5
        res = check(hi)
    best = res.point
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        res = check(mid, best)
        if res.feasible:
            hi, best = mid, res.point
        else:
            lo = mid
    P = vec_to_sym(best, D)
    return hi, symmetrize(P / sym_eigs(P)[0])


def jsr_bracket(matrices, depth: int, max_products: int = MAX_PRODUCTS,
                budget: int = 16) -> tuple[float, float]:
    """Bracket the joint spectral radius by enumerating all products.

    ``lower`` is the largest ``rho(product)^(1/k)`` lower estimate over all
    products of length ``k <= depth``; ``upper`` is the smallest over ``k`` of
    the largest ``||product||_2^(1/k)``.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    stack = np.stack([np.asarray(A, dtype=float) for A in matrices])
    M = stack.shape[0]
    total = sum(M**k for k in range(1, depth + 1))
    if total > max_products:
        raise BudgetExceeded(f"{total} products exceed the cap of {max_products}")
    lower, upper = 0.0, math.inf
    level = stack
    for k in range(1, depth + 1):
        if k > 1:
            level = np.einsum("aij,bjk->abik", stack, level).reshape(-1, *stack.shape[1:])
        norms = np.linalg.norm(level, ord=2, axis=(1, 2))
        upper = min(upper, float(norms.max()) ** (1.0 / k))
        lo, _ = growth_rate_batch(level, budget)
        lower = max(lower, float(lo.max()) ** (1.0 / k))
    return min(lower, upper), upper


def decay_ratios(trajectory, P) -> np.ndarray:
    """Per-step ``sqrt(x(t+1)^T P x(t+1) / x(t)^T P x(t))`` along a trajectory.

    Steps starting from the origin are skipped.
    """
    X = np.asarray(trajectory, dtype=float)
    P = symmetrize(P)
    v = np.einsum("ti,ij,tj->t", X, P, X)
    ok = v[:-1] > 0
    return np.sqrt(v[1:][ok] / v[:-1][ok])
