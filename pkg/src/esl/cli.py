"""Command-line entry point: ``esl <verb> [options]``.

Exit codes: 0 success, 1 a check failed, 2 usage error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .constructions import matrix_general, matrix_m7
from .info import capacity, pr_fidelity_bound_n7, quantum_fidelity_bound, trace_fidelity
from .io import MatrixFormatError, dumps, load_config, matrix_to_dict, read_matrix, write_matrix
from .linalg import haar_random_unitary
from .protocols import simulate_assisted, strategy_general, strategy_n7
from .psdrank import certify
from . import suite

log = logging.getLogger("esl")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3

DEFAULTS = {
    "seed": 0,
    "tol": 1e-10,
    "restarts": 50,
    "max_iters": 500,
    "pr_samples": 10_000,
    "prop1_samples": 1000,
}


class UsageError(Exception):
    pass


def _setting(args, cfg, name):
    value = getattr(args, name, None)
    if value is not None:
        return value
    return cfg.get(name, DEFAULTS.get(name))


def _family_matrix(family, p, d):
    if family == "m7":
        if p is None:
            raise UsageError("family m7 needs --p")
        return matrix_m7(p)
    if family == "general":
        if d is None:
            raise UsageError("family general needs --d")
        return matrix_general(d)
    raise UsageError(f"unknown family {family!r}")


def _labels(n):
    return [f"y{j + 1}" for j in range(n)]


def _emit(report: dict, out):
    text = dumps(report)
    if out is None:
        sys.stdout.write(text)
    else:
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)


def _report(experiment, seed, parameters, **body):
    return {"experiment": experiment, "tool_version": __version__, "seed": seed,
            "parameters": parameters, **body}


def cmd_build_matrix(args, cfg):
    fmt = args.format or "json"
    m = _family_matrix(args.family, args.p, args.d)
    if args.out is None:
        raise UsageError("build-matrix needs --out")
    write_matrix(args.out, m, fmt=fmt, labels=_labels(m.shape[1]) if fmt == "json" else None,
                 header=args.header)
    return EXIT_OK


def cmd_simulate(args, cfg):
    seed = _setting(args, cfg, "seed")
    rotation = None if args.rotation_seed is None else args.rotation_seed
    if args.channel == "n7":
        if args.p is None:
            raise UsageError("channel n7 needs --p")
        u = None if rotation is None else haar_random_unitary(7, rotation)
        v, s = strategy_n7(args.p, u)
        target = matrix_m7(args.p)
    elif args.channel == "general":
        if args.d is None:
            raise UsageError("channel general needs --d")
        u = None if rotation is None else haar_random_unitary(args.d ** 2 - 1, rotation)
        v, s = strategy_general(args.d, u)
        target = matrix_general(args.d)
    else:
        raise UsageError(f"unknown channel {args.channel!r}")
    sim = simulate_assisted(v, s)
    dev = float(np.max(np.abs(sim - target)))
    passed = dev <= 1e-12
    report = _report(
        "simulate", seed,
        {"channel": args.channel, "p": args.p, "d": args.d, "rotation_seed": args.rotation_seed},
        matrices={"simulated": matrix_to_dict(sim, _labels(sim.shape[1]))},
        results={"max_deviation": dev},
        checks=[{"name": "matches_closed_form", "passed": passed, "value": dev, "tolerance": 1e-12}],
        passed=passed,
    )
    _emit(report, args.out)
    return EXIT_OK if passed else EXIT_FAIL


def cmd_certify(args, cfg):
    seed = _setting(args, cfg, "seed")
    m = read_matrix(args.matrix)
    cert = certify(m, seed=seed, restarts=_setting(args, cfg, "restarts"),
                   max_iters=_setting(args, cfg, "max_iters"),
                   local_witness=(args.hints == "auto"))
    passed = cert.verdict == "equal"
    report = _report("certify", seed, {"matrix": str(args.matrix), "hints": args.hints},
                     certificate=cert.to_dict(), passed=passed)
    _emit(report, args.out)
    return EXIT_OK if passed else EXIT_FAIL


def _matrix_arg(args):
    if args.matrix is not None:
        return read_matrix(args.matrix)
    if args.d is not None:
        return matrix_general(args.d)
    return matrix_m7(1.0 if args.p is None else args.p)


def cmd_fidelity(args, cfg):
    seed = _setting(args, cfg, "seed")
    m = _matrix_arg(args)
    tr = trace_fidelity(m)
    k = m.shape[0] - 1
    bound_k = quantum_fidelity_bound(k) if k >= 1 else 0.0
    pr_bound, chain = pr_fidelity_bound_n7()
    report = _report(
        "fidelity", seed, {"matrix": None if args.matrix is None else str(args.matrix),
                           "p": args.p, "d": args.d},
        results={"trace": tr, "qudit_bound_one_below": bound_k,
                 "exceeds_qudit_bound_one_below": tr > bound_k,
                 "pr_bound_n7": pr_bound, "pr_bound_chain": [c[0] for c in chain]},
    )
    _emit(report, args.out)
    return EXIT_OK


def cmd_capacity(args, cfg):
    seed = _setting(args, cfg, "seed")
    m = _matrix_arg(args)
    support = None
    if args.support:
        support = [int(s) - 1 for s in args.support.split(",")]
    cap, dist = capacity(m, tol=_setting(args, cfg, "tol"), support=support)
    report = _report("capacity", seed,
                     {"matrix": None if args.matrix is None else str(args.matrix), "p": args.p,
                      "d": args.d, "support": args.support, "tol": _setting(args, cfg, "tol")},
                     results={"capacity_bits": cap, "input_distribution": dist.tolist()})
    _emit(report, args.out)
    return EXIT_OK


def cmd_pr_sample(args, cfg):
    seed = _setting(args, cfg, "seed")
    samples = args.samples if args.samples is not None else _setting(args, cfg, "pr_samples")
    check = suite.check_pr_consistency(seed, samples)
    report = _report("pr-sample", seed, {"samples": samples}, checks=[check.to_dict()],
                     passed=check.passed)
    _emit(report, args.out)
    return EXIT_OK if check.passed else EXIT_FAIL


def cmd_paper_suite(args, cfg):
    seed = _setting(args, cfg, "seed")
    report = suite.run_paper_suite(
        seed=seed,
        restarts=_setting(args, cfg, "restarts"),
        pr_samples=_setting(args, cfg, "pr_samples"),
        prop1_samples=_setting(args, cfg, "prop1_samples"),
        parallel=args.parallel,
        m7_file=args.m7_file,
    )
    for c in report["checks"]:
        log.info("[%s] %s", "PASS" if c["passed"] else "FAIL", c["name"])
    out_dir = Path(args.out or "paper-suite-out")
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "paper-suite.json").write_text(dumps(report))
    write_matrix(out_dir / "m7_p1.json", matrix_m7(1.0), labels=_labels(7))
    for d in suite.GENERAL_DS:
        write_matrix(out_dir / f"general_d{d}.json", matrix_general(d), labels=_labels(d * d - 1))
    return EXIT_OK if report["passed"] else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", default=None, help="output file (directory for paper-suite)")
    common.add_argument("--parallel", action="store_true", help="run solver restarts concurrently")
    common.add_argument("--restarts", type=int, default=None)
    common.add_argument("--tol", type=float, default=None)
    common.add_argument("--config", default=None, help="key=value file (default: $ESL_CONFIG)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="esl", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-matrix", parents=[common], help="write M7(p) or M_{k_d} to a file")
    p.add_argument("family", choices=["m7", "general"])
    p.add_argument("--p", type=float)
    p.add_argument("--d", type=int)
    p.add_argument("--format", choices=["json", "csv"])
    p.add_argument("--header", action="store_true", help="CSV header row")
    p.set_defaults(func=cmd_build_matrix)

    p = sub.add_parser("simulate", parents=[common], help="simulate the minimal-assistance protocol")
    p.add_argument("channel", choices=["n7", "general"])
    p.add_argument("--p", type=float)
    p.add_argument("--d", type=int)
    p.add_argument("--rotation-seed", type=int, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("certify", parents=[common], help="PSD-rank certificate for a matrix file")
    p.add_argument("matrix")
    p.add_argument("--hints", choices=["auto", "none"], default="auto")
    p.set_defaults(func=cmd_certify)

    for name, func, text in (("fidelity", cmd_fidelity, "trace fidelity and bounds"),
                             ("capacity", cmd_capacity, "Blahut-Arimoto capacity")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("matrix", nargs="?")
        p.add_argument("--p", type=float)
        p.add_argument("--d", type=int)
        if name == "capacity":
            p.add_argument("--support", help="comma-separated 1-based inputs to allow")
        p.set_defaults(func=func)

    p = sub.add_parser("pr-sample", parents=[common], help="random PR-box strategies vs SR + 1 cbit")
    p.add_argument("--samples", type=int)
    p.set_defaults(func=cmd_pr_sample)

    p = sub.add_parser("paper-suite", parents=[common], help="run every reproduction check")
    p.add_argument("--pr-samples", type=int)
    p.add_argument("--prop1-samples", type=int)
    p.add_argument("--m7-file", default=None, help="also validate this M7 matrix file")
    p.set_defaults(func=cmd_paper_suite)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
    except OSError as exc:
        log.error("cannot read config: %s", exc)
        return EXIT_IO
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    try:
        return args.func(args, cfg)
    except (UsageError, ValueError) as exc:
        if isinstance(exc, MatrixFormatError):
            log.error("malformed matrix file: %s", exc)
            return EXIT_IO
        log.error("%s", exc)
        return EXIT_USAGE
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
