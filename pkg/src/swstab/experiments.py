"""Reproduction data: cap curves, closed-loop trajectories, sample-size sweeps.

These produce plain rows; writing them to CSV is the CLI's job.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .certification import certify, whitebox_cqlf_bound
from .geometry import ConfidenceQuery, cap_measure
from .synthesis import SolverConfig, alternate
from .system import SwitchedSystem, sample_dataset, simulate_closed_loop, uniform_sphere


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministic child seed for a sub-stream identified by ``keys``."""
    ss = np.random.SeedSequence([int(seed), *(int(k) for k in keys)])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def max_workers(cells: int) -> int:
    env = os.environ.get("STAB_MAX_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(cap, cells))


def capcurve(dims=(2, 3, 5, 10, 20), points: int = 91):
    """Header and rows ``theta, delta_n...`` on a uniform grid over [0, pi/2]."""
    header = ["theta"] + [f"delta_n{n}" for n in dims]
    rows = []
    for theta in np.linspace(0.0, 0.5 * math.pi, points):
        theta = min(float(theta), 0.5 * math.pi)
        rows.append([theta] + [cap_measure(n, theta) for n in dims])
    return header, rows


def trajectories(sys: SwitchedSystem, K, count: int, T: int, seed: int) -> list[np.ndarray]:
    """``count`` closed-loop runs of length ``T`` from random unit initial states."""
    init_rng = np.random.Generator(np.random.PCG64(derive_seed(seed, 0)))
    x0s = uniform_sphere(init_rng, count, sys.n)
    return [simulate_closed_loop(sys, K, x0s[i], T, derive_seed(seed, 1, i))
            for i in range(count)]


SWEEP_COLUMNS = ["N", "rep", "epsilon", "gamma", "kappa", "bound", "gamma_star"]


def sweep_cell(sys: SwitchedSystem, N: int, rep: int, seed: int, beta: float,
               cfg: SolverConfig) -> dict:
    data = sample_dataset(sys, N, derive_seed(seed, N, rep))
    result = alternate(data, sys.B, cfg)
    cert = certify(result, ConfidenceQuery(sys.n, sys.M, N, beta=beta))
    gamma_star, _ = whitebox_cqlf_bound(sys.closed_loop(result.K))
    return {"N": N, "rep": rep, "epsilon": cert.epsilon, "gamma": result.gamma,
            "kappa": cert.kappa, "bound": cert.bound, "gamma_star": gamma_star}


def _cell(args):
    return sweep_cell(*args)


def sweep(sys: SwitchedSystem, Ns, reps: int, seed: int, beta: float = 0.01,
          cfg: SolverConfig | None = None) -> list[dict]:
    """Synthesize and certify for every ``(N, rep)`` cell; rows sorted by (N, rep)."""
    cfg = cfg or SolverConfig()
    cells = [(sys, int(N), rep, seed, beta, cfg) for N in Ns for rep in range(reps)]
    workers = max_workers(len(cells))
    if workers == 1:
        rows = [_cell(c) for c in cells]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_cell, cells))
    return sorted(rows, key=lambda r: (r["N"], r["rep"]))


def median_by_N(rows, key: str = "bound") -> dict:
    out = {}
    for N in sorted({r["N"] for r in rows}):
        out[N] = float(np.median([r[key] for r in rows if r["N"] == N]))
    return out
