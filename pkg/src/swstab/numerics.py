"""Dense symmetric linear algebra and a small convex feasibility engine.

Everything here works on plain ``numpy`` arrays. Symmetric matrices are
kept exactly symmetric (``symmetrize``) so that downstream eigenvalue and
margin computations never see storage drift.

The feasibility engine is a deep-cut ellipsoid method. It is meant for
small decision vectors (a few dozen entries at most), which covers the
quadratic Lyapunov problems for n <= 6 and small lifted problems.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BadDimension, NoConvergence, NotPositiveDefinite

PIVOT_TOL = 1e-12
JACOBI_TOL = 1e-12
DEFAULT_RADIUS = 1e6
DEFAULT_TOL = 1e-7


def symmetrize(P) -> np.ndarray:
    """Return ``(P + P.T) / 2`` as a float array; exactly symmetric."""
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise BadDimension(f"expected a square matrix, got shape {P.shape}")
    return 0.5 * (P + P.T)


def _check_square(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise BadDimension(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


def cholesky(P) -> np.ndarray:
    """Factor a positive definite matrix as ``P = L.T @ L``.

    Note the convention: the *transpose* comes first. Most references write
    ``P = L @ L.T``; here ``L`` is lower triangular with a positive diagonal
    and ``L.T @ L`` reproduces ``P``. This is the factor for which
    ``x.T @ P @ x == ||L @ x||**2``, which is how it is used in the solver.

    Raises
    ------
    NotPositiveDefinite
        If a pivot drops to ``1e-12`` (relative to the largest diagonal
        entry) or below.
    """
    P = _check_square(P)
    n = P.shape[0]
    # Standard G @ G.T factorization of the index-reversed matrix, then flip
    # back: P = J G G^T J, and L = J G^T J is lower triangular with L^T L = P.
    R = symmetrize(P)[::-1, ::-1]
    scale = max(1.0, float(np.max(np.abs(np.diag(R))))) if n else 1.0
    G = np.zeros_like(R)
    for j in range(n):
        pivot = R[j, j] - G[j, :j] @ G[j, :j]
        if pivot <= PIVOT_TOL * scale:
            raise NotPositiveDefinite(f"pivot {pivot:.3e} at column {j}")
        G[j, j] = math.sqrt(pivot)
        G[j + 1:, j] = (R[j + 1:, j] - G[j + 1:, :j] @ G[j, :j]) / G[j, j]
    return np.ascontiguousarray(G.T[::-1, ::-1])


def sym_eigs(P, vectors: bool = False, max_sweeps: int = 100):
    """Eigenvalues (ascending) of a symmetric matrix by cyclic Jacobi.

    With ``vectors=True`` returns ``(w, V)`` where column ``V[:, i]`` pairs
    with ``w[i]``.
    """
    a = symmetrize(P).copy()
    n = a.shape[0]
    V = np.eye(n)
    scale = np.linalg.norm(a)
    if scale == 0.0 or n == 1:
        w = np.diag(a).copy()
        return (w, V) if vectors else w
    for _ in range(max_sweeps):
        off = float(np.linalg.norm(a - np.diag(np.diag(a))))
        if off <= JACOBI_TOL * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(tau) > 1e150:  # tau^2 would overflow
                    t = 0.5 / tau
                else:
                    t = math.copysign(1.0, tau) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                ap, aq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap, aq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = a[q, p] = 0.0
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    else:
        raise NoConvergence(f"Jacobi did not converge in {max_sweeps} sweeps")
    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    w = w[order]
    return (w, V[:, order]) if vectors else w


def condition_number(P) -> float:
    """``lambda_max(P) / lambda_min(P)`` for a positive definite ``P``."""
    w = sym_eigs(P)
    if w[0] <= 0.0:
        raise NotPositiveDefinite(f"smallest eigenvalue {w[0]:.3e}")
    return float(w[-1] / w[0])


def growth_rate_batch(As, budget: int = 30):
    """Vectorized :func:`growth_rate` over a stack of square matrices.

    Returns two arrays ``(lower, upper)`` of length ``len(As)``.
    """
    As = np.asarray(As, dtype=float)
    if As.ndim != 3 or As.shape[1] != As.shape[2]:
        raise BadDimension(f"expected a stack of square matrices, got {As.shape}")
    if budget < 1:
        raise ValueError("budget must be >= 1")
    count, n = As.shape[0], As.shape[1]
    nrm = np.linalg.norm(As, ord=2, axis=(1, 2))
    alive = nrm > 0.0
    upper = nrm.copy()
    lower = np.zeros(count)
    if not np.any(alive):
        return lower, upper
    # Work with A^(2^j) = exp(ell) * C, ||C||_2 = 1, so powers never overflow.
    C = np.zeros_like(As)
    C[alive] = As[alive] / nrm[alive, None, None]
    ell = np.full(count, -np.inf)
    ell[alive] = np.log(nrm[alive])
    with np.errstate(divide="ignore"):
        tr0 = np.abs(np.trace(As, axis1=1, axis2=2)) / n
        det0 = np.abs(np.linalg.det(As)) ** (1.0 / n)
    lower = np.maximum(tr0, det0)
    for j in range(1, budget + 1):
        k = 2.0**j
        C = C @ C
        nu = np.linalg.norm(C, ord=2, axis=(1, 2))
        died = alive & (nu == 0.0)
        # A^k == 0 means A is nilpotent: spectral radius is exactly zero.
        upper[died] = 0.0
        lower[died] = 0.0
        alive &= nu > 0.0
        if not np.any(alive):
            break
        C[alive] /= nu[alive, None, None]
        ell[alive] = 2.0 * ell[alive] + np.log(nu[alive])
        upper[alive] = np.minimum(upper[alive], np.exp(ell[alive] / k))
        t = np.abs(np.trace(C, axis1=1, axis2=2)) / n
        ok = alive & (t > 0.0)
        lower[ok] = np.maximum(lower[ok], np.exp((ell[ok] + np.log(t[ok])) / k))
    return np.minimum(lower, upper), upper


def growth_rate(A, budget: int = 30) -> tuple[float, float]:
    """Bracket the spectral radius of ``A`` using repeated squaring.

    The upper end is ``min_j ||A^(2^j)||_2^(1/2^j)``. The lower end is the
    largest of ``|trace(A^(2^j)) / n|^(1/2^j)`` and ``|det A|^(1/n)``, both of
    which are provably below the spectral radius. Powers are renormalized at
    every squaring so the computation cannot overflow.
    """
    A = _check_square(A)
    lo, hi = growth_rate_batch(A[None], budget)
    return float(lo[0]), float(hi[0])


# ---------------------------------------------------------------------------
# Feasibility engine


@dataclass(frozen=True)
class AffineMatrixConstraint:
    """The matrix inequality ``constant + sum_i v[i] * coefficients[i] >= 0``.

    ``constant`` has shape ``(r, r)`` and ``coefficients`` shape
    ``(dim, r, r)``. A stack of ``K`` constraints of the same order can be
    given in one object with shapes ``(K, r, r)`` and ``(dim, K, r, r)``;
    this is much faster than ``K`` separate objects.
    """

    constant: np.ndarray
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.constant, dtype=float)
        g = np.asarray(self.coefficients, dtype=float)
        if c.ndim == 2:
            c = c[None]
            if g.ndim != 3:
                raise BadDimension("coefficients must have shape (dim, r, r)")
            g = g[:, None]
        if c.ndim != 3 or c.shape[1] != c.shape[2]:
            raise BadDimension(f"bad constant shape {c.shape}")
        if g.ndim != 4 or g.shape[1:] != c.shape:
            raise BadDimension(
                f"coefficient shape {g.shape} does not match constant {c.shape}"
            )
        c = 0.5 * (c + np.swapaxes(c, -1, -2))
        g = 0.5 * (g + np.swapaxes(g, -1, -2))
        object.__setattr__(self, "constant", c)
        object.__setattr__(self, "coefficients", g)

    @property
    def order(self) -> int:
        return self.constant.shape[1]

    @property
    def dim(self) -> int:
        return self.coefficients.shape[0]

    @property
    def count(self) -> int:
        return self.constant.shape[0]

    def evaluate(self, v) -> np.ndarray:
        """Stack of matrices ``constant + sum v_i coefficients_i``, shape (K, r, r)."""
        return self.constant + np.tensordot(np.asarray(v, float), self.coefficients, axes=1)

    def margins(self, v) -> np.ndarray:
        """Minimum eigenvalue of each stacked constraint at ``v``."""
        F = self.evaluate(v)
        if self.order == 1:
            return F[:, 0, 0]
        return np.linalg.eigvalsh(F)[:, 0]


class _Batch:
    """Constraint stack in a layout that is cheap to evaluate repeatedly."""

    def __init__(self, con: AffineMatrixConstraint):
        self.order = con.order
        if self.order == 1:
            self.c = con.constant[:, 0, 0]
            self.G = np.ascontiguousarray(con.coefficients[:, :, 0, 0].T)  # (K, dim)
        else:
            self.c = con.constant
            self.G = np.ascontiguousarray(np.moveaxis(con.coefficients, 0, -1))

    def worst(self, v):
        """Return (margin, normal) of the most violated constraint at ``v``.

        ``normal`` is the gradient in ``v`` of ``u.T F(v) u`` with ``u`` the
        bottom eigenvector, i.e. a supporting hyperplane of the feasible set.
        """
        if self.order == 1:
            m = self.c + self.G @ v
            k = int(np.argmin(m))
            return float(m[k]), self.G[k]
        F = self.c + self.G @ v
        w, U = np.linalg.eigh(F)
        k = int(np.argmin(w[:, 0]))
        u = U[k, :, 0]
        return float(w[k, 0]), np.einsum("a,abi,b->i", u, self.G[k], u)


class _Ellipsoid:
    """Ellipsoid ``{c + F u : ||u|| <= 1}`` kept in factored form.

    Updating the factor rather than the shape matrix ``F F^T`` keeps the
    ellipsoid positive definite through thousands of cuts.
    """

    def __init__(self, center, radius: float):
        self.c = np.array(center, dtype=float)
        self.n = self.c.size
        self.F = radius * np.eye(self.n)
        self.logdet = self.n * math.log(radius)

    @property
    def volume_radius(self) -> float:
        return math.exp(self.logdet / self.n)

    def width(self, g) -> float:
        """``sqrt(g^T F F^T g)``: half the extent of the ellipsoid along g."""
        return float(np.linalg.norm(self.F.T @ g))

    def cut(self, g, alpha: float) -> bool:
        """Keep ``{v : g.(v - c) <= -alpha * width(g)}``. False if that is empty."""
        Fg = self.F.T @ g
        s = float(np.linalg.norm(Fg))
        if s == 0.0 or alpha >= 1.0:
            return False
        alpha = max(alpha, 0.0)
        n = self.n
        p = Fg / s
        Fp = self.F @ p
        tau = (1.0 + n * alpha) / (n + 1.0)
        self.c = self.c - tau * Fp
        if n == 1:
            shrink = 0.5 * (1.0 - alpha)
            self.F = self.F * shrink
            self.logdet += math.log(shrink)
            return True
        sigma = 2.0 * (1.0 + n * alpha) / ((n + 1.0) * (1.0 + alpha))
        delta = n * n / (n * n - 1.0) * (1.0 - alpha * alpha)
        root = math.sqrt(max(1.0 - sigma, 0.0))
        if root == 0.0 or delta <= 0.0:
            return False
        self.F = math.sqrt(delta) * (self.F - (1.0 - root) * np.outer(Fp, p))
        self.logdet += 0.5 * n * math.log(delta) + math.log(root)
        return True


def _iteration_budget(n: int, radius: float, stop: float) -> int:
    ratio = math.log(max(radius / stop, math.e))
    if n == 1:
        return int(2 * ratio / math.log(2.0)) + 20
    return int(2.0 * 2 * n * (n + 1) * ratio) + 100


@dataclass
class FeasibilityResult:
    """Outcome of :func:`conic_feasible`.

    ``feasible`` is True only when ``point`` satisfies every constraint with
    minimum eigenvalue >= ``tol``. A False result means "nothing found within
    the search radius at that tolerance"; it is not a proof of infeasibility.
    """

    feasible: bool
    point: np.ndarray | None
    margin: float
    iterations: int
    reason: str = ""
    best_point: np.ndarray | None = field(default=None, repr=False)


def conic_feasible(
    constraints,
    dim: int,
    radius_bound: float = DEFAULT_RADIUS,
    tol: float = DEFAULT_TOL,
    center=None,
    stop_radius: float | None = None,
    max_iter: int | None = None,
) -> FeasibilityResult:
    """Search for ``v`` with every constraint's minimum eigenvalue >= ``tol``.

    Deep-cut ellipsoid method started from the ball of radius
    ``radius_bound`` around ``center`` (the origin by default). The
    separating hyperplane at each step comes from the bottom eigenvector of
    the most violated constraint. The search gives up once the ellipsoid
    volume corresponds to a ball smaller than ``stop_radius`` (default
    ``tol``), or when a deep cut leaves nothing.
    """
    constraints = list(constraints)
    for con in constraints:
        if con.dim != dim:
            raise BadDimension(f"constraint has {con.dim} coefficients, expected {dim}")
    batches = [_Batch(con) for con in constraints if con.count > 0]
    center = np.zeros(dim) if center is None else np.asarray(center, float).copy()
    if center.shape != (dim,):
        raise BadDimension(f"center has shape {center.shape}, expected ({dim},)")

    def worst(v):
        best_m, best_a = math.inf, None
        for b in batches:
            m, a = b.worst(v)
            if m < best_m:
                best_m, best_a = m, a
        return best_m, best_a

    if not batches:
        return FeasibilityResult(True, center, math.inf, 0)
    if dim == 0:
        m, _ = worst(center)
        ok = m >= tol
        return FeasibilityResult(ok, center if ok else None, m, 0,
                                 "" if ok else "no decision variables")

    stop = tol if stop_radius is None else stop_radius
    budget = max_iter or _iteration_budget(dim, radius_bound, stop)
    E = _Ellipsoid(center, radius_bound)
    best_margin, best_point = -math.inf, center.copy()
    for it in range(1, budget + 1):
        m, a = worst(E.c)
        if m > best_margin:
            best_margin, best_point = m, E.c.copy()
        if m >= tol:
            return FeasibilityResult(True, E.c.copy(), m, it)
        s = E.width(a)
        if s == 0.0:
            return FeasibilityResult(False, None, best_margin, it,
                                     "violated constraint is independent of v", best_point)
        if not E.cut(-a, (tol - m) / s):
            return FeasibilityResult(False, None, best_margin, it,
                                     "deep cut emptied the ellipsoid", best_point)
        if E.volume_radius < stop:
            return FeasibilityResult(False, None, best_margin, it,
                                     "ellipsoid volume below stop radius", best_point)
    return FeasibilityResult(False, None, best_margin, budget,
                             "iteration budget exhausted", best_point)


@dataclass
class MinimizeResult:
    x: np.ndarray
    fun: float
    lower: float
    iterations: int
    converged: bool


def ellipsoid_minimize(func, center, radius: float, tol: float,
                       max_iter: int | None = None) -> MinimizeResult:
    """Minimize a convex function over the ball ``||v - center|| <= radius``.

    ``func(v)`` returns ``(value, subgradient)``. Stops once the best value
    found is provably within ``tol`` of the minimum over the ball, using the
    bound ``f* >= f(c) - sqrt(g^T H g)`` valid at every iterate.
    """
    center = np.asarray(center, dtype=float)
    n = center.size
    E = _Ellipsoid(center, radius)
    budget = max_iter or _iteration_budget(n, radius, tol) * 2
    best_f, best_x, lower = math.inf, center.copy(), -math.inf
    for it in range(1, budget + 1):
        f, g = func(E.c)
        if f < best_f:
            best_f, best_x = f, E.c.copy()
        s = E.width(g)
        lower = max(lower, f - s)
        if best_f - lower <= tol:
            return MinimizeResult(best_x, best_f, lower, it, True)
        if not E.cut(g, (f - best_f) / s):
            return MinimizeResult(best_x, best_f, lower, it, True)
    return MinimizeResult(best_x, best_f, lower, budget, False)
