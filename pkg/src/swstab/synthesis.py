"""Sampled stabilization: gain step, Lyapunov step and their alternation.

The sampled problem asks for ``gamma``, ``P >= I`` and ``K`` with

    z_i^T P z_i <= gamma^2 x_i^T P x_i,    z_i = y_i + B K x_i,

for every data pair. It is bilinear in ``(P, K)``; with ``P`` fixed it is a
convex minimax in ``K`` (:func:`k_step`), with ``K`` fixed a family of
linear matrix inequalities in ``P`` searched by bisection on ``gamma``
(:func:`p_step`). :func:`alternate` runs the two in turn starting from
``P = I``.

Data may be given as a :class:`~swstab.system.SampleSet` or as an ``(X, Y)``
pair of arrays. Rows are rescaled to unit ``x`` before solving; the problem
is homogeneous, so this only affects conditioning.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateData, DimensionMismatch, InfeasibleAtInit
from .numerics import (
    AffineMatrixConstraint,
    DEFAULT_RADIUS,
    DEFAULT_TOL,
    cholesky,
    conic_feasible,
    ellipsoid_minimize,
    sym_eigs,
    symmetrize,
)

log = logging.getLogger(__name__)

DEGENERATE_NORM = 1e-12


@dataclass(frozen=True)
class SolverConfig:
    eps_tol: float = 0.1
    inner_tol: float = 1e-6
    max_outer: int = 50
    bisection_tol: float = 1e-6
    radius_bound: float = DEFAULT_RADIUS
    feas_tol: float = DEFAULT_TOL

    def __post_init__(self):
        for name in ("eps_tol", "inner_tol", "bisection_tol", "radius_bound", "feas_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_outer < 1:
            raise ValueError("max_outer must be >= 1")


@dataclass
class SynthesisResult:
    gamma: float
    P: np.ndarray
    K: np.ndarray
    trace: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    sos: dict | None = None

    def to_dict(self) -> dict:
        out = {
            "gamma": float(self.gamma),
            "K": np.asarray(self.K).tolist(),
            "P": np.asarray(self.P).tolist(),
            "trace": [float(g) for g in self.trace],
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
        }
        if self.sos is not None:
            out["sos"] = dict(self.sos)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "SynthesisResult":
        return cls(
            gamma=float(d["gamma"]),
            P=np.array(d["P"], dtype=float),
            K=np.atleast_2d(np.array(d["K"], dtype=float)),
            trace=list(d.get("trace", [])),
            iterations=int(d.get("iterations", 0)),
            converged=bool(d.get("converged", False)),
            sos=d.get("sos"),
        )


def _arrays(data):
    if hasattr(data, "X") and hasattr(data, "Y"):
        X, Y = data.X, data.Y
    else:
        X, Y = data
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape != Y.shape or X.shape[0] == 0:
        raise DimensionMismatch(f"need matching non-empty X, Y; got {X.shape}, {Y.shape}")
    return X, Y


def normalized(data):
    """Data rows divided by ``|x_i|`` (unit states, scaled successors)."""
    X, Y = _arrays(data)
    r = np.linalg.norm(X, axis=1)
    if np.any(r <= DEGENERATE_NORM):
        raise DegenerateData("data contains a (numerically) zero state")
    return X / r[:, None], Y / r[:, None]


def _input_matrix(B, n: int) -> np.ndarray:
    B = np.asarray(B, dtype=float)
    if B.ndim == 1:
        B = B.reshape(-1, 1)
    if B.ndim != 2 or B.shape[0] != n:
        raise DimensionMismatch(f"B of shape {B.shape} incompatible with n={n}")
    return B


def closed_loop_successors(K, data, B):
    """Normalized pairs ``(x_i, y_i + B K x_i)``."""
    X, Y = normalized(data)
    B = _input_matrix(B, X.shape[1])
    K = np.asarray(K, dtype=float).reshape(B.shape[1], X.shape[1])
    return X, Y + X @ (B @ K).T


def sampled_residual(gamma, P, K, data, B) -> float:
    """``max_i z_i^T P z_i - gamma^2 x_i^T P x_i`` on the data as given.

    Positive means at least one sampled constraint is violated.
    """
    X, Y = _arrays(data)
    B = _input_matrix(B, X.shape[1])
    K = np.asarray(K, dtype=float).reshape(B.shape[1], X.shape[1])
    P = symmetrize(P)
    Z = Y + X @ (B @ K).T
    xPx = np.einsum("ij,jk,ik->i", X, P, X)
    zPz = np.einsum("ij,jk,ik->i", Z, P, Z)
    return float(np.max(zPz - gamma * gamma * xPx))


def k_step(P, data, B, tol: float = 1e-6):
    """Best gain for a fixed Lyapunov matrix.

    With ``P = L^T L`` the problem is ``min_K max_i |L z_i| / |L x_i|``, a
    maximum of norms of affine functions of ``K``. It is solved by the
    ellipsoid method on ``vec(K)`` restricted to the directions that actually
    move the residuals, inside a ball whose radius is derived from the value
    at ``K = 0`` (so it provably contains a minimizer).

    Returns ``(K, gamma)`` with ``gamma`` within ``tol`` of the optimum.
    """
    X, Y = normalized(data)
    N, n = X.shape
    B = _input_matrix(B, n)
    m = B.shape[1]
    L = cholesky(P)
    nx = np.linalg.norm(X @ L.T, axis=1)
    if np.any(nx <= DEGENERATE_NORM):
        raise DegenerateData("|L x_i| vanishes for some sample")
    C = (Y @ L.T) / nx[:, None]
    LB = L @ B
    # G[i] @ vec(K) == L B K x_i / |L x_i|, vec row-major.
    G = np.einsum("am,ij->iamj", LB, X).reshape(N, n, m * n) / nx[:, None, None]

    def value(k):
        R = C + G @ k
        r = np.linalg.norm(R, axis=1)
        i = int(np.argmax(r))
        return float(r[i]), i, R[i]

    f0 = value(np.zeros(m * n))[0]
    K0 = np.zeros((m, n))
    if f0 == 0.0:
        return K0, 0.0
    _, s, Vt = np.linalg.svd(G.reshape(N * n, m * n), full_matrices=False)
    rank = int(np.sum(s > 1e-10 * s[0])) if s.size and s[0] > 0 else 0
    if rank == 0:
        return K0, f0
    V = Vt[:rank].T
    radius = 2.0 * f0 * math.sqrt(N) / s[rank - 1] * 1.01

    def func(w):
        k = V @ w
        f, i, Ri = value(k)
        if f == 0.0:
            return 0.0, np.zeros(rank)
        return f, V.T @ (G[i].T @ Ri) / f

    res = ellipsoid_minimize(func, np.zeros(rank), radius, tol)
    if not res.converged:
        log.warning("k_step: ellipsoid stopped with gap %.3e", res.fun - res.lower)
    return (V @ res.x).reshape(m, n), float(res.fun)


# ---------------------------------------------------------------------------
# Lyapunov step


def _sym_basis(D: int):
    """Index pairs (j <= k) for the free entries of a D x D symmetric matrix."""
    J, Kk = np.triu_indices(D)
    return J, Kk


def vec_to_sym(v, D: int) -> np.ndarray:
    J, Kk = _sym_basis(D)
    P = np.zeros((D, D))
    P[J, Kk] = v
    P[Kk, J] = v
    return P


def sym_to_vec(P) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    J, Kk = _sym_basis(P.shape[0])
    return P[J, Kk].copy()


def _quadratic_rows(F, J, Kk) -> np.ndarray:
    """Row i gives the coefficients of ``f_i^T P f_i`` in the free entries of P."""
    w = np.where(J == Kk, 1.0, 2.0)
    return w * F[:, J] * F[:, Kk]


def _identity_floor(D: int, J, Kk) -> AffineMatrixConstraint:
    """``P - I >= 0`` in the free-entry parameterization."""
    E = np.zeros((J.size, D, D))
    idx = np.arange(J.size)
    E[idx, J, Kk] = 1.0
    E[idx, Kk, J] = 1.0
    return AffineMatrixConstraint(-np.eye(D), E)


class RateFeasibility:
    """Decides, for a trial rate, whether some ``P >= I`` satisfies
    ``f(z_i)^T P f(z_i) <= rate^e f(x_i)^T P f(x_i)`` for all samples.

    ``f`` is a feature map (identity for the quadratic case, the d-lift for
    the polynomial case) applied beforehand; ``e`` is the rate exponent.
    """

    def __init__(self, FX, FZ, exponent: float, cfg: SolverConfig):
        self.D = FX.shape[1]
        J, Kk = _sym_basis(self.D)
        self.QX = _quadratic_rows(FX, J, Kk)
        self.QZ = _quadratic_rows(FZ, J, Kk)
        self.floor = _identity_floor(self.D, J, Kk)
        self.exponent = exponent
        self.cfg = cfg
        self.dim = J.size

    def check(self, gamma: float, center=None):
        coeff = gamma**self.exponent * self.QX - self.QZ  # (N, dim)
        samples = AffineMatrixConstraint(
            np.zeros((coeff.shape[0], 1, 1)), coeff.T[:, :, None, None]
        )
        return conic_feasible(
            [self.floor, samples], self.dim,
            radius_bound=self.cfg.radius_bound, tol=self.cfg.feas_tol, center=center,
        )


def rate_bisection(FX, FZ, exponent: float, gamma_init: float, cfg: SolverConfig,
                   P_start=None):
    """Smallest certified rate in ``[0, gamma_init]`` and its witness ``P``.

    The returned ``P`` is rescaled so that its smallest eigenvalue is 1.
    """
    oracle = RateFeasibility(FX, FZ, exponent, cfg)
    center = None if P_start is None else sym_to_vec(P_start)
    hi = float(gamma_init)
    res = oracle.check(hi, center)
    if not res.feasible:
        hi = hi + cfg.bisection_tol
        res = oracle.check(hi, center)
    if not res.feasible:
        raise InfeasibleAtInit(
            f"rate {gamma_init:.6g} is not certifiably feasible (best margin {res.margin:.3e})"
        )
    best = res.point
    lo = 0.0
    while hi - lo > cfg.bisection_tol:
        mid = 0.5 * (lo + hi)
        res = oracle.check(mid, best)
        if res.feasible:
            hi, best = mid, res.point
        else:
            lo = mid
    P = vec_to_sym(best, oracle.D)
    P = symmetrize(P / sym_eigs(P)[0])
    return P, hi


def p_step(K, data, B, gamma_init: float, cfg: SolverConfig | None = None, P_start=None):
    """Best Lyapunov matrix for a fixed gain, by bisection on the rate.

    ``gamma_init`` must be feasible (the value of the preceding gain step is);
    otherwise :class:`InfeasibleAtInit` is raised. Returns ``(P, gamma)``
    with ``lambda_min(P) == 1``.
    """
    cfg = cfg or SolverConfig()
    X, Z = closed_loop_successors(K, data, B)
    return rate_bisection(X, Z, 2.0, gamma_init, cfg, P_start)


def alternate(data, B, cfg: SolverConfig | None = None) -> SynthesisResult:
    """Alternating minimization between the gain and the Lyapunov matrix.

    Starts from ``P = I``, then repeats (Lyapunov step, gain step) until two
    consecutive rates differ by less than ``cfg.eps_tol`` or ``cfg.max_outer``
    rounds have run. The last iterate is always sampled-feasible.
    """
    cfg = cfg or SolverConfig()
    X, _ = normalized(data)
    n = X.shape[1]
    P = np.eye(n)
    K, gamma = k_step(P, data, B, cfg.inner_tol)
    trace = [gamma]
    if gamma == 0.0:
        return SynthesisResult(0.0, P, K, trace, 0, True)
    converged = False
    it = 0
    for it in range(1, cfg.max_outer + 1):
        P, _ = p_step(K, data, B, gamma, cfg, P_start=P)
        K, new_gamma = k_step(P, data, B, cfg.inner_tol)
        trace.append(new_gamma)
        done = abs(new_gamma - gamma) < cfg.eps_tol
        gamma = new_gamma
        if done:
            converged = True
            break
    if not converged:
        log.warning("alternate: no convergence after %d rounds (gamma=%.6g)", it, gamma)
    return SynthesisResult(gamma, P, K, trace, it, converged)
