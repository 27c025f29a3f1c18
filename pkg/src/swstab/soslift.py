"""Degree-d lifts and the lifted Lyapunov step.

The d-lift of ``x`` lists every degree-d monomial scaled as
``sqrt(d! / (a_1! ... a_n!)) * x^a``, so that ``|x^[d]| = |x|^d``. The
exponents ``a`` are in graded lexicographic order, highest power of ``x_1``
first; for ``n = 2, d = 2`` the basis is ``(x1^2, sqrt(2) x1 x2, x2^2)``.
This order is frozen: lifted matrices written to disk depend on it.

Only the Lyapunov step is lifted (gain fixed). With ``K`` fixed the lifted
sampled constraints stay linear in the lifted ``P``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations_with_replacement

import numpy as np

from .errors import DimensionMismatch, EngineSizeCap
from .numerics import cholesky
from .synthesis import SolverConfig, closed_loop_successors, rate_bisection

MAX_LIFT_DIM = 30
_FIT_SEED = 20240607


@dataclass(frozen=True)
class LiftBasis:
    n: int
    d: int

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise ValueError("need n >= 1 and d >= 1")
        exps = []
        for combo in combinations_with_replacement(range(self.n), self.d):
            alpha = [0] * self.n
            for i in combo:
                alpha[i] += 1
            exps.append(tuple(alpha))
        coeffs = [
            math.sqrt(math.factorial(self.d) / math.prod(math.factorial(a) for a in alpha))
            for alpha in exps
        ]
        object.__setattr__(self, "exponents", tuple(exps))
        object.__setattr__(self, "coefficients", np.array(coeffs))

    @property
    def D(self) -> int:
        return len(self.exponents)


def lift_dimension(n: int, d: int) -> int:
    """Number of degree-d monomials in n variables."""
    return math.comb(n + d - 1, d)


def lift_rows(X, basis: LiftBasis) -> np.ndarray:
    """d-lift of each row of ``X`` (shape (N, n) -> (N, D))."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != basis.n:
        raise DimensionMismatch(f"vectors of length {X.shape[1]}, basis expects {basis.n}")
    alpha = np.array(basis.exponents)  # (D, n)
    return basis.coefficients * np.prod(X[:, None, :] ** alpha[None], axis=2)


def lift_vector(x, basis: LiftBasis) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (basis.n,):
        raise DimensionMismatch(f"vector of shape {x.shape}, basis expects ({basis.n},)")
    return lift_rows(x[None], basis)[0]


def lift_matrix(A, basis: LiftBasis) -> np.ndarray:
    """The D x D matrix mapping ``x^[d]`` to ``(A x)^[d]``.

    Fitted from the defining identity on a fixed set of random points
    (twice as many as unknown columns) by least squares; the map is exactly
    linear, so the fit is exact up to rounding.
    """
    A = np.asarray(A, dtype=float)
    if A.shape != (basis.n, basis.n):
        raise DimensionMismatch(f"matrix of shape {A.shape}, basis expects n={basis.n}")
    rng = np.random.Generator(np.random.PCG64(_FIT_SEED))
    pts = rng.standard_normal((2 * basis.D, basis.n))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    src = lift_rows(pts, basis)
    dst = lift_rows(pts @ A.T, basis)
    sol, *_ = np.linalg.lstsq(src, dst, rcond=None)
    return sol.T


def lift_witness(P, basis: LiftBasis) -> np.ndarray:
    """Lifted Lyapunov matrix ``(L^[d])^T L^[d]`` from a quadratic ``P = L^T L``.

    ``f^[d]^T W f^[d] == (f^T P f)^d``, so ``W`` certifies the same rate in
    the lifted problem (with exponent 2d).
    """
    Ld = lift_matrix(cholesky(P), basis)
    W = Ld.T @ Ld
    return 0.5 * (W + W.T)


def lifted_p_step(K, data, B, basis: LiftBasis, gamma_init: float,
                  cfg: SolverConfig | None = None, rate_exponent: str = "2d",
                  P_start=None, max_dim: int = MAX_LIFT_DIM):
    """Lyapunov step on lifted samples: smallest ``gamma`` admitting ``P >= I``
    (D x D) with ``z^[d]^T P z^[d] <= gamma^e x^[d]^T P x^[d]`` for every sample.

    ``rate_exponent`` selects ``e``: ``"2d"`` (default, so the result bounds the
    joint spectral radius directly) or ``"2"``. Returns ``(P, gamma_d)``.
    """
    if basis.D > max_dim:
        raise EngineSizeCap(f"lifted dimension {basis.D} exceeds the cap of {max_dim}")
    if rate_exponent not in ("2d", "2"):
        raise ValueError("rate_exponent must be '2d' or '2'")
    cfg = cfg or SolverConfig()
    X, Z = closed_loop_successors(K, data, B)
    if X.shape[1] != basis.n:
        raise DimensionMismatch(f"data dimension {X.shape[1]}, basis expects {basis.n}")
    exponent = 2.0 * basis.d if rate_exponent == "2d" else 2.0
    return rate_bisection(lift_rows(X, basis), lift_rows(Z, basis), exponent,
                          gamma_init, cfg, P_start)
