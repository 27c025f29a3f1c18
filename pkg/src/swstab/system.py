"""Switched linear systems, the black-box sampling oracle, and data files.

A :class:`SwitchedSystem` is ground truth: only the sampler, the simulator
and white-box validators ever look at its mode matrices. The synthesis code
sees a :class:`SampleSet`, i.e. pairs ``(x_i, y_i)`` with ``y_i = A_s x_i``
for a hidden mode ``s``.

Randomness uses numpy's PCG64 seeded through ``SeedSequence(seed)``, split
with ``spawn`` into independent child streams. ``sample_dataset`` uses child
0 for states and child 1 for modes; ``simulate_closed_loop`` uses child 0
for the switching sequence. The stream layout is part of the file-format
contract: the same seed gives the same dataset on every platform.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BadMode, DegenerateState, DimensionMismatch

log = logging.getLogger(__name__)

DEGENERATE_NORM = 1e-12


@dataclass(frozen=True, eq=False)
class SwitchedSystem:
    """``x(t+1) = A_{s(t)} x(t) + B u(t)`` with modes ``A_1..A_M``."""

    modes: tuple
    B: np.ndarray

    def __post_init__(self):
        modes = tuple(np.array(A, dtype=float) for A in self.modes)
        B = np.array(self.B, dtype=float)
        if not modes:
            raise DimensionMismatch("a switched system needs at least one mode")
        n = modes[0].shape[0]
        for A in modes:
            if A.shape != (n, n):
                raise DimensionMismatch(f"mode matrix of shape {A.shape}, expected ({n}, {n})")
        if B.ndim == 1:
            B = B.reshape(n, 1)
        if B.ndim != 2 or B.shape[0] != n:
            raise DimensionMismatch(f"B of shape {B.shape} does not have {n} rows")
        for a in (*modes, B):
            a.setflags(write=False)
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "B", B)

    def __eq__(self, other):
        if not isinstance(other, SwitchedSystem):
            return NotImplemented
        return (len(self.modes) == len(other.modes) and np.array_equal(self.B, other.B)
                and all(np.array_equal(a, b) for a, b in zip(self.modes, other.modes)))

    @property
    def n(self) -> int:
        return self.modes[0].shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def M(self) -> int:
        return len(self.modes)

    def closed_loop(self, K) -> list[np.ndarray]:
        """The matrices ``A_i + B K``."""
        K = np.asarray(K, dtype=float).reshape(self.m, self.n)
        return [A + self.B @ K for A in self.modes]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "M": self.M,
            "A": [A.tolist() for A in self.modes],
            "B": self.B.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SwitchedSystem":
        sys = cls(tuple(d["A"]), d["B"])
        for key, value in (("n", sys.n), ("m", sys.m), ("M", sys.M)):
            if key in d and int(d[key]) != value:
                raise DimensionMismatch(f"declared {key}={d[key]} but matrices give {value}")
        return sys


def benchmark_system() -> SwitchedSystem:
    """The three-mode planar system used as the running benchmark."""
    return SwitchedSystem(
        (
            [[1.2, 0.9], [-0.1, 0.8]],
            [[1.8, 3.2], [-0.5, -0.16]],
            [[-0.7, -1.2], [0.6, 1.4]],
        ),
        [[1.0], [1.0]],
    )


# Reference solution for the benchmark above (for validation only).
BENCHMARK_K = np.array([[-0.2886, -0.7086]])
BENCHMARK_P = np.array([[4.3990, 6.7572], [6.7572, 14.4331]])
BENCHMARK_GAMMA = 0.8365


def random_stabilizable_system(n: int, M: int, seed: int, contraction: float = 0.8,
                               gain_scale: float = 1.0) -> SwitchedSystem:
    """Random system that is stabilizable by construction.

    Draws closed-loop modes ``F_i`` sharing the Lyapunov matrix ``I`` (each
    has spectral norm ``contraction``) and a random gain ``K0``; the open-loop
    modes are ``F_i - B K0`` with ``B = 1_n``, so ``K0`` stabilizes them.
    """
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    B = np.ones((n, 1))
    K0 = gain_scale * rng.standard_normal((1, n))
    modes = []
    for _ in range(M):
        F = rng.standard_normal((n, n))
        F *= contraction / np.linalg.norm(F, 2)
        modes.append(F - B @ K0)
    return SwitchedSystem(tuple(modes), B)


def load_system(path) -> SwitchedSystem:
    with open(path, encoding="utf-8") as fh:
        return SwitchedSystem.from_dict(json.load(fh))


def save_system(sys: SwitchedSystem, path) -> None:
    Path(path).write_text(json.dumps(sys.to_dict(), indent=2) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class SamplePair:
    x: np.ndarray
    y: np.ndarray


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Solver-visible data: unit states ``X`` (N, n) and successors ``Y`` (N, n).

    The mode that produced each successor is not part of the data. When the
    set comes from :func:`sample_dataset` the labels are kept on a private
    attribute for white-box tests only (see :func:`hidden_modes`); they are
    never written to disk.
    """

    X: np.ndarray
    Y: np.ndarray
    seed: int | None = None
    M_declared: int | None = None
    rejected: tuple = ()
    _modes: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        X = np.atleast_2d(np.array(self.X, dtype=float))
        Y = np.atleast_2d(np.array(self.Y, dtype=float))
        if X.shape != Y.shape:
            raise DimensionMismatch(f"X {X.shape} and Y {Y.shape} differ")
        norms = np.linalg.norm(X, axis=1)
        if X.shape[0] and np.any(np.abs(norms - 1.0) > 1e-12):
            raise ValueError("sample states must lie on the unit sphere; use normalize_dataset")
        X.setflags(write=False)
        Y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def N(self) -> int:
        return self.X.shape[0]

    @property
    def n(self) -> int:
        return self.X.shape[1]

    @property
    def pairs(self) -> list[SamplePair]:
        return [SamplePair(x, y) for x, y in zip(self.X, self.Y)]

    def __len__(self) -> int:
        return self.N

    def __eq__(self, other):
        if not isinstance(other, SampleSet):
            return NotImplemented
        return (np.array_equal(self.X, other.X) and np.array_equal(self.Y, other.Y)
                and self.seed == other.seed and self.M_declared == other.M_declared)


def hidden_modes(data: SampleSet) -> np.ndarray:
    """Zero-based mode labels behind a sampled data set. Test use only."""
    if data._modes is None:
        raise LookupError("this data set carries no hidden mode labels")
    return data._modes


def _rng(seed) -> list[np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(2)
    return [np.random.Generator(np.random.PCG64(s)) for s in children]


def step(sys: SwitchedSystem, x, mode: int, u=None) -> np.ndarray:
    """One step of the open-loop dynamics; ``mode`` is 1-based."""
    if not 1 <= int(mode) <= sys.M:
        raise BadMode(f"mode {mode} outside 1..{sys.M}")
    x = np.asarray(x, dtype=float)
    if x.shape != (sys.n,):
        raise DimensionMismatch(f"state of shape {x.shape}, expected ({sys.n},)")
    u = np.zeros(sys.m) if u is None else np.atleast_1d(np.asarray(u, dtype=float))
    if u.shape != (sys.m,):
        raise DimensionMismatch(f"input of shape {u.shape}, expected ({sys.m},)")
    return sys.modes[int(mode) - 1] @ x + sys.B @ u


def uniform_sphere(rng: np.random.Generator, count: int, n: int) -> np.ndarray:
    """``count`` points uniform on the unit sphere in R^n (normalized Gaussians)."""
    G = rng.standard_normal((count, n))
    norms = np.linalg.norm(G, axis=1)
    while np.any(norms == 0.0):  # probability zero, but cheap to guard
        bad = norms == 0.0
        G[bad] = rng.standard_normal((int(bad.sum()), n))
        norms = np.linalg.norm(G, axis=1)
    return G / norms[:, None]


def sample_dataset(sys: SwitchedSystem, N: int, seed: int) -> SampleSet:
    """Draw ``N`` uniform unit states and uniform hidden modes, record successors."""
    if N < 1:
        raise ValueError("N must be >= 1")
    state_rng, mode_rng = _rng(seed)
    X = uniform_sphere(state_rng, N, sys.n)
    modes = mode_rng.integers(0, sys.M, size=N)
    stack = np.stack(sys.modes)
    Y = np.einsum("kij,kj->ki", stack[modes], X)
    modes.setflags(write=False)
    return SampleSet(X, Y, seed=seed, M_declared=sys.M, _modes=modes)


def normalize_dataset(raw, B, M_declared: int | None = None) -> SampleSet:
    """Turn input-state rows ``(x, x_plus, u)`` into unit-sphere sample pairs.

    Each row becomes ``(x / |x|, (x_plus - B u) / |x|)``. Rows whose state
    norm is at most 1e-12 are dropped and their indices recorded in
    ``SampleSet.rejected``.
    """
    B = np.asarray(B, dtype=float)
    if B.ndim == 1:
        B = B.reshape(-1, 1)
    xs, ys, rejected = [], [], []
    for i, row in enumerate(raw):
        x, x_plus, u = (np.atleast_1d(np.asarray(a, dtype=float)) for a in row)
        if x.shape != x_plus.shape or B.shape != (x.size, u.size):
            raise DimensionMismatch(f"row {i}: inconsistent shapes")
        r = np.linalg.norm(x)
        if r <= DEGENERATE_NORM:
            log.warning("row %d rejected: state norm %.3e", i, r)
            rejected.append(i)
            continue
        xs.append(x / r)
        ys.append((x_plus - B @ u) / r)
    if not xs:
        raise DegenerateState("every row has a (numerically) zero state")
    return SampleSet(np.array(xs), np.array(ys), M_declared=M_declared,
                     rejected=tuple(rejected))


def simulate_closed_loop(sys: SwitchedSystem, K, x0, T: int, seed: int) -> np.ndarray:
    """States ``x(0..T)`` of ``x(t+1) = (A_{s(t)} + B K) x(t)``, ``s(t)`` i.i.d. uniform."""
    if T < 0:
        raise ValueError("T must be >= 0")
    K = np.asarray(K, dtype=float)
    if K.shape != (sys.m, sys.n):
        raise DimensionMismatch(f"K of shape {K.shape}, expected ({sys.m}, {sys.n})")
    x = np.asarray(x0, dtype=float)
    if x.shape != (sys.n,):
        raise DimensionMismatch(f"x0 of shape {x.shape}, expected ({sys.n},)")
    switch_rng, _ = _rng(seed)
    modes = switch_rng.integers(0, sys.M, size=T)
    closed = sys.closed_loop(K)
    out = np.empty((T + 1, sys.n))
    out[0] = x
    for t in range(T):
        x = closed[modes[t]] @ x
        out[t + 1] = x
    return out


# ---------------------------------------------------------------------------
# Dataset files: CSV with header x_1..x_n,y_1..y_n, 17 significant digits.


def save_dataset(data: SampleSet, path) -> None:
    n = data.n
    header = [f"x_{i + 1}" for i in range(n)] + [f"y_{i + 1}" for i in range(n)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for x, y in zip(data.X, data.Y):
            w.writerow([f"{v:.17g}" for v in (*x, *y)])


def load_dataset(path, M_declared: int | None = None) -> SampleSet:
    """Read a dataset CSV. Rows whose state is not unit-norm are rescaled."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty dataset file")
    header, body = rows[0], rows[1:]
    if len(header) % 2:
        raise ValueError(f"{path}: header must have 2n columns")
    n = len(header) // 2
    expected = [f"x_{i + 1}" for i in range(n)] + [f"y_{i + 1}" for i in range(n)]
    if [h.strip() for h in header] != expected:
        raise ValueError(f"{path}: unexpected header {header}")
    if not body:
        raise ValueError(f"{path}: no data rows")
    arr = np.array([[float(v) for v in row] for row in body if row])
    X, Y = arr[:, :n], arr[:, n:]
    norms = np.linalg.norm(X, axis=1)
    if np.all(np.abs(norms - 1.0) <= 1e-12):
        return SampleSet(X, Y, M_declared=M_declared)
    raw = [(x, y, np.zeros(0)) for x, y in zip(X, Y)]
    return normalize_dataset(raw, np.zeros((n, 0)), M_declared=M_declared)
