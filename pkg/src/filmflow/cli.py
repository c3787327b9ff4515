"""Command-line front end: ``filmflow {run,sweep,dump-coeffs,verify}``.

Exit codes: 0 success, 2 configuration or I/O error, 3 solver failure,
4 a verification check failed.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigInvalid, FilmFlowError, IoFailure

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_CHECK = 0, 2, 3, 4


def _load(args):
    """Resolve ``--config`` as a file, or as the name of a built-in scenario."""
    from .harness import load_config
    from .scenarios import BUILTIN, builtin

    if args.config is None:
        raise ConfigInvalid("--config is required", "<cli>")
    src = args.config
    if not Path(src).exists() and src in BUILTIN:
        raw = builtin(src)
    else:
        raw = src
    cfg = load_config(raw)
    if args.seed is not None:
        cfg.raw["seed"] = cfg.seed = args.seed
    return cfg


def _cmd_run(args):
    from .harness import run_scenario

    manifest = run_scenario(_load(args), args.out)
    print(manifest)
    return EXIT_OK


def _cmd_sweep(args):
    from .harness import run_epsilon_sweep

    cfg = _load(args)
    out = args.out or cfg.output or f"out/{cfg.name}_sweep"
    rep = run_epsilon_sweep(cfg, out=out, threads=args.threads)
    for row in rep.rows():
        print(f"eps={row['eps']:<8g} err_inf={row['err_inf']:.4e} closure={row['closure']:.4e}")
    print("slopes: " + ", ".join(f"{k}={v:.3f}" for k, v in rep.slopes.items()))
    return EXIT_OK


def _cmd_dump(args):
    from .harness import dump_coefficients

    cfg = _load(args)
    path = Path(args.out) / "coefficients.csv" if args.out else None
    print(dump_coefficients(cfg, t=args.time, path=path))
    return EXIT_OK


def _cmd_verify(args):
    from .verification import run_full, run_quick

    seed = 0 if args.seed is None else args.seed
    results = run_quick(seed) if args.quick else run_full(seed, args.threads)
    for r in results:
        print(r.line())
    if args.out:
        out = Path(args.out)
        try:
            out.mkdir(parents=True, exist_ok=True)
            payload = [{"name": r.name, "passed": r.passed, "detail": r.detail} for r in results]
            (out / "verify.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        except OSError as exc:
            raise IoFailure(f"cannot write {out}: {exc}") from None
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario JSON file or built-in scenario name")
    common.add_argument("--out", help="output directory")
    common.add_argument("--threads", type=int, default=1, help="parallel sweep members (default 1)")
    common.add_argument("--seed", type=int, help="seed for randomized sampling, recorded in the manifest")

    parser = argparse.ArgumentParser(prog="filmflow", description="Thin viscous film solvers and convergence harness.")
    sub = parser.add_subparsers(dest="verb", required=True)
    sub.add_parser("run", parents=[common], help="run one scenario").set_defaults(fn=_cmd_run)
    sub.add_parser("sweep", parents=[common], help="film-ratio convergence sweep").set_defaults(fn=_cmd_sweep)
    dump = sub.add_parser("dump-coeffs", parents=[common], help="write the coefficient table as CSV")
    dump.add_argument("--time", type=float, default=None, help="evaluation time (default: config t0)")
    dump.set_defaults(fn=_cmd_dump)
    ver = sub.add_parser("verify", parents=[common], help="run the built-in oracle suites")
    ver.add_argument("--quick", action="store_true", help="skip the film-ratio sweeps")
    ver.set_defaults(fn=_cmd_verify)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be positive", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must fit in an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.fn(args)
    except (ConfigInvalid, IoFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FilmFlowError as exc:
        print(f"solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
