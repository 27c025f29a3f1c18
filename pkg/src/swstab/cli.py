"""Command-line interface.

Exit codes: 0 success (for ``synthesize``/``certify``: a certificate with
bound < 1), 1 usage or I/O error, 2 solver failure, 3 certificate vacuous.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

from . import experiments
from .certification import Certificate, certify, jsr_bracket, whitebox_cqlf_bound
from .errors import NoSolution, StabError
from .geometry import ConfidenceQuery, confidence_chain
from .soslift import LiftBasis, lift_witness, lifted_p_step
from .synthesis import SolverConfig, SynthesisResult, alternate
from .system import load_dataset, load_system, sample_dataset, save_dataset

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_VACUOUS = 0, 1, 2, 3

class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _open_unit(text):
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"expected a value in (0, 1), got {text}")
    return value


def _int_list(text):
    return [_positive_int(t) for t in text.split(",") if t]


def _fmt(v):
    if isinstance(v, float):
        return "inf" if math.isinf(v) else f"{v:.17g}"
    return str(v)


def _write_csv(path, header, rows):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _write_json(path, payload):
    text = json.dumps(payload, indent=2) + "\n"
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text, encoding="utf-8")


def _config(args) -> SolverConfig:
    return SolverConfig(eps_tol=args.eps_tol, inner_tol=args.inner_tol,
                        bisection_tol=min(args.inner_tol, 1e-6))


def _cert_exit(cert: Certificate) -> int:
    return EXIT_VACUOUS if cert.vacuous else EXIT_OK


def cmd_sample(args) -> int:
    system = load_system(args.system)
    data = sample_dataset(system, args.N, args.seed)
    save_dataset(data, args.out)
    print(f"wrote {data.N} samples (n={data.n}, seed={args.seed}) to {args.out}")
    return EXIT_OK


def cmd_synthesize(args) -> int:
    system = load_system(args.system)
    data = load_dataset(args.dataset, M_declared=system.M)
    if data.n != system.n:
        raise UsageError(f"dataset has n={data.n} but system has n={system.n}")
    cfg = _config(args)
    result = alternate(data, system.B, cfg)
    if args.sos_degree:
        basis = LiftBasis(system.n, args.sos_degree)
        _, gamma_d = lifted_p_step(result.K, data, system.B, basis, result.gamma, cfg,
                                   P_start=lift_witness(result.P, basis))
        result.sos = {"d": basis.d, "D": basis.D, "gamma_d": gamma_d}
    payload = result.to_dict()
    payload["N"] = data.N
    payload["M"] = system.M
    try:
        cert = certify(result, ConfidenceQuery(system.n, system.M, data.N, beta=args.beta))
    except NoSolution as exc:
        payload["certificate"] = None
        payload["error"] = str(exc)
        payload["min_beta"] = exc.min_beta
        _write_json(args.out, payload)
        print(f"error: {exc}; smallest attainable beta is {exc.min_beta:.6g}", file=sys.stderr)
        return EXIT_SOLVER
    payload["certificate"] = cert.to_dict()
    if system.n > 1:
        payload["confidence_chain"] = confidence_chain(system.n, system.M, data.N, cert.epsilon)
    _write_json(args.out, payload)
    print(f"gamma={result.gamma:.6g} after {result.iterations} rounds; {cert.summary()}")
    return _cert_exit(cert)


def _load_result(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def cmd_certify(args) -> int:
    payload = _load_result(args.result)
    result = SynthesisResult.from_dict(payload)
    n = result.P.shape[0]
    N = args.N or payload.get("N")
    M = args.modes or payload.get("M")
    if args.system:
        M = load_system(args.system).M
    if not N or not M:
        raise UsageError("need -N and the mode count (--modes or --system)")
    query = ConfidenceQuery(n, int(M), int(N), epsilon=args.epsilon, beta=args.beta)
    try:
        cert = certify(result, query)
    except NoSolution as exc:
        print(f"error: {exc}; smallest attainable beta is {exc.min_beta:.6g}", file=sys.stderr)
        return EXIT_SOLVER
    _write_json(args.out, cert.to_dict())
    print(cert.summary(), file=sys.stderr if args.out in (None, "-") else sys.stdout)
    return _cert_exit(cert)


def cmd_whitebox(args) -> int:
    system = load_system(args.system)
    result = SynthesisResult.from_dict(_load_result(args.result))
    closed = system.closed_loop(result.K)
    gamma_star, P = whitebox_cqlf_bound(closed)
    lower, upper = jsr_bracket(closed, args.depth)
    _write_json(args.out, {"gamma_star": gamma_star, "P": P.tolist(),
                           "jsr_lower": lower, "jsr_upper": upper, "depth": args.depth})
    return EXIT_OK


def cmd_capcurve(args) -> int:
    header, rows = experiments.capcurve(args.dims, args.points)
    _write_csv(args.out, header, rows)
    return EXIT_OK


def cmd_trajectories(args) -> int:
    system = load_system(args.system)
    result = SynthesisResult.from_dict(_load_result(args.result))
    runs = experiments.trajectories(system, result.K, args.count, args.T, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    header = ["t"] + [f"x_{i + 1}" for i in range(system.n)]
    for i, run in enumerate(runs):
        _write_csv(out / f"traj_{i:03d}.csv", header, [[t, *x] for t, x in enumerate(run)])
    print(f"wrote {len(runs)} trajectories to {out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    system = load_system(args.system)
    rows = experiments.sweep(system, args.Ns, args.reps, args.seed, args.beta, _config(args))
    cols = experiments.SWEEP_COLUMNS
    _write_csv(args.out, cols, [[r[c] for c in cols] for r in rows])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="swstab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def solver_flags(p):
        p.add_argument("--eps-tol", type=float, default=0.1)
        p.add_argument("--inner-tol", type=float, default=1e-6)

    p = sub.add_parser("sample", help="draw a data set from a system file")
    p.add_argument("--system", required=True)
    p.add_argument("-N", type=_positive_int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("synthesize", help="run the alternating solver and certify")
    p.add_argument("--system", required=True, help="system file (only B and M are used)")
    p.add_argument("--dataset", required=True)
    p.add_argument("--beta", type=_open_unit, default=0.01)
    p.add_argument("--sos-degree", type=_positive_int)
    p.add_argument("--out")
    solver_flags(p)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("certify", help="certificate for an existing result file")
    p.add_argument("--result", required=True)
    p.add_argument("--system")
    p.add_argument("--modes", type=_positive_int)
    p.add_argument("-N", type=_positive_int)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--beta", type=_open_unit, default=None)
    g.add_argument("--epsilon", type=_open_unit, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("whitebox", help="true-model reference values for a result")
    p.add_argument("--system", required=True)
    p.add_argument("--result", required=True)
    p.add_argument("--depth", type=_positive_int, default=8)
    p.add_argument("--out")
    p.set_defaults(func=cmd_whitebox)

    p = sub.add_parser("capcurve", help="cap measure curves")
    p.add_argument("--dims", type=_int_list, default=[2, 3, 5, 10, 20])
    p.add_argument("--points", type=_positive_int, default=91)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_capcurve)

    p = sub.add_parser("trajectories", help="random closed-loop trajectories")
    p.add_argument("--system", required=True)
    p.add_argument("--result", required=True)
    p.add_argument("--count", type=_positive_int, default=10)
    p.add_argument("-T", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_trajectories)

    p = sub.add_parser("sweep", help="certified bound versus sample size")
    p.add_argument("--system", required=True)
    p.add_argument("--Ns", type=_int_list, default=[100, 300, 1000, 3000])
    p.add_argument("--reps", type=_positive_int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--beta", type=_open_unit, default=0.01)
    p.add_argument("--out", required=True)
    solver_flags(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "command", None) == "certify" and args.beta is None and args.epsilon is None:
        args.beta = 0.01
    try:
        return args.func(args)
    except StabError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (UsageError, OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

if __name__ == "__main__":
    sys.exit(main())
