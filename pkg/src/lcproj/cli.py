"""Command-line front end.

Exit codes: 0 success (or sweep passed), 1 usage or input error, 2 domain
error (single-atom input), 3 sweep ran but its pass criterion failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .density import PiecewiseLogLinearDensity
from .dist import DiscreteDistribution, NotInP1
from .experiments import ConfigError, SweepConfig, resolve_jobs, run_sweep
from .metrics import delta_cdf, hellinger_sq, wasserstein1
from .solver import SolverOptions, project

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN, EXIT_FAILED = 0, 1, 2, 3

SEED_HELP = ("random seed; overrides the config file's seed "
             "(command line > config file > default 0)")


class InputError(Exception):
    pass


def _read_json(path: str):
    try:
        text = sys.stdin.read() if path == "-" else Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from exc


def _load_distribution(path: str) -> DiscreteDistribution:
    obj = _read_json(path)
    if not isinstance(obj, dict) or "atoms" not in obj:
        raise InputError(f"{path}: expected a distribution object with 'atoms'")
    try:
        return DiscreteDistribution.from_json(obj)
    except (ValueError, TypeError) as exc:
        raise InputError(f"{path}: {exc}") from exc


def _load_density(path: str) -> PiecewiseLogLinearDensity:
    obj = _read_json(path)
    if isinstance(obj, dict) and isinstance(obj.get("density"), dict):
        obj = obj["density"]  # a saved projection result
    if not isinstance(obj, dict) or "knots" not in obj:
        raise InputError(f"{path}: expected a density object with 'knots' and 'logvals'")
    try:
        return PiecewiseLogLinearDensity.from_json(obj)
    except (ValueError, TypeError) as exc:
        raise InputError(f"{path}: {exc}") from exc


def _emit(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=None if out is None else 2)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _error(kind: str, message: str) -> None:
    print(json.dumps({"error": kind, "message": message}))


def cmd_project(args) -> int:
    if args.seed is not None:
        print("warning: --seed has no effect on project (the projection is deterministic)",
              file=sys.stderr)
    P = _load_distribution(args.input)
    opts = SolverOptions(grad_tol=args.grad_tol, max_iter=args.max_iter)
    try:
        result = project(P, opts)
    except NotInP1 as exc:
        _error("NotInP1", str(exc))
        return EXIT_DOMAIN
    _emit(result.to_json(), args.out)
    return EXIT_OK


def cmd_distance(args) -> int:
    if args.kind == "hellinger":
        f, g = (_load_density(p) for p in args.inputs)
        value = hellinger_sq(f, g) ** 0.5
    else:
        P, Q = (_load_distribution(p) for p in args.inputs)
        value = wasserstein1(P, Q) if args.kind == "wasserstein" else delta_cdf(P, Q)
    _emit({"kind": args.kind, "value": value}, args.out)
    return EXIT_OK


def _finish_sweep(cfg: SweepConfig, args) -> int:
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.validate()
    out = args.out or cfg.output or f"{cfg.kind}.csv"
    jobs = resolve_jobs(args.jobs)
    try:
        report = run_sweep(cfg, jobs=jobs)
    except NotInP1 as exc:
        _error("NotInP1", str(exc))
        return EXIT_DOMAIN
    csv_path, summary_path = report.write(out)
    print(json.dumps({**report.summary(), "csv": str(csv_path), "summary": str(summary_path)}))
    return EXIT_OK if report.passed else EXIT_FAILED


def cmd_sweep(args) -> int:
    raw = _read_json(args.config)
    try:
        cfg = SweepConfig.from_dict(raw)
    except ConfigError as exc:
        _error("InvalidConfig", str(exc))
        return EXIT_USAGE
    except TypeError as exc:
        _error("InvalidConfig", str(exc))
        return EXIT_USAGE
    return _finish_sweep(cfg, args)


def cmd_battery(args) -> int:
    if args.config:
        raw = _read_json(args.config)
        raw.setdefault("kind", "property_battery")
        try:
            cfg = SweepConfig.from_dict(raw)
        except (ConfigError, TypeError) as exc:
            _error("InvalidConfig", str(exc))
            return EXIT_USAGE
        if cfg.kind != "property_battery":
            _error("InvalidConfig", "kind: battery expects property_battery")
            return EXIT_USAGE
    else:
        cfg = SweepConfig(kind="property_battery", corpus_size=args.size)
    return _finish_sweep(cfg, args)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lcproj",
        description="Log-concave projection of discrete distributions, distances, and sweeps.",
        epilog="Exit codes: 0 ok/pass, 1 usage or input error, 2 single-atom input, "
               "3 sweep criterion failed.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("project", help="project a distribution JSON onto log-concave densities")
    p.add_argument("--in", dest="input", required=True, help="distribution JSON ('-' for stdin)")
    p.add_argument("--out", help="write the result here instead of standard output")
    p.add_argument("--seed", type=int, help="accepted for uniformity; ignored")
    p.add_argument("--grad-tol", type=float, default=SolverOptions.grad_tol)
    p.add_argument("--max-iter", type=int, default=SolverOptions.max_iter)
    p.set_defaults(func=cmd_project)

    d = sub.add_parser("distance", help="distance between two distributions or two densities")
    d.add_argument("--kind", required=True, choices=("wasserstein", "hellinger", "delta_cdf"),
                   help="wasserstein/delta_cdf take distributions, hellinger takes densities")
    d.add_argument("inputs", nargs=2, metavar="FILE")
    d.add_argument("--out")
    d.set_defaults(func=cmd_distance)

    for name, helptext in (("sweep", "run an experiment sweep from a JSON config"),
                           ("battery", "run the property battery")):
        s = sub.add_parser(name, help=helptext)
        if name == "sweep":
            s.add_argument("config", help="SweepConfig JSON")
            s.set_defaults(func=cmd_sweep)
        else:
            s.add_argument("--config", help="optional SweepConfig JSON")
            s.add_argument("--size", type=int, default=500, help="random corpus size")
            s.set_defaults(func=cmd_battery)
        s.add_argument("--out", help="CSV path; the summary goes next to it as .summary.json")
        s.add_argument("--seed", type=int, help=SEED_HELP)
        s.add_argument("--jobs", type=int,
                       help="worker processes (default: $LCPROJ_JOBS, else logical CPU count)")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except InputError as exc:
        _error("InvalidInput", str(exc))
        return EXIT_USAGE
    except ConfigError as exc:
        _error("InvalidConfig", str(exc))
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
