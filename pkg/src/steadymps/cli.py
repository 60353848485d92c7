"""Command line front end.

    python -m steadymps solve --model ising-local -p Delta=0 -N 10
    python -m steadymps sweep config.yaml --workers 2
    python -m steadymps gap --model dicke -p g=0.05,1 -N 3,4
    python -m steadymps extrapolate results/sweep_xxx.csv --column mz2_staggered --where Delta=0

Exit codes: 0 success, 1 invalid input, 2 every solve failed.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys

import yaml

from .analysis import (
    OUTPUT_ENV,
    ConfigError,
    RunConfig,
    default_output_dir,
    extrapolate_csv,
    gap_table,
    run_sweep,
)
from .models import MODELS

EXIT_OK, EXIT_INVALID, EXIT_ALL_FAILED = 0, 1, 2


def _value(text: str):
    # YAML scalar rules: 0.5 -> float, 3 -> int, abc -> str
    return yaml.safe_load(text)


def _params(items) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"parameter {item!r} is not of the form name=value[,value...]")
        k, v = item.split("=", 1)
        out[k.strip()] = [_value(x) for x in v.split(",")]
    return out


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from None


def _solver_overrides(args) -> dict:
    doc = {}
    if getattr(args, "schedule", None):
        doc["solver.bond_schedule"] = _ints(args.schedule)
    if getattr(args, "seed", None) is not None:
        doc["solver.rng_seed"] = args.seed
    if getattr(args, "no_probe", False):
        doc["solver.probe_degeneracy"] = False
    return doc


def _report(result) -> int:
    for r in result.rows:
        params = " ".join(f"{k}={r[k]}" for k in r if k not in
                          ("model", "N", "status", "reason") and k in result.provenance["config"])
        print(f"N={r['N']} {params} status={r['status']} D={r['D_final']} "
              f"eigenvalue={r['eigenvalue']} purity={r['purity']}")
    print(f"wrote {result.csv_path}")
    return EXIT_ALL_FAILED if result.all_failed else EXIT_OK


def cmd_solve(args) -> int:
    doc = {"model": args.model, "N": _ints(args.N)[:1], **_params(args.param)}
    for k, v in doc.items():
        if isinstance(v, list) and k != "N" and len(v) != 1:
            raise ConfigError(f"solve takes a single value for {k}; use sweep for grids")
    doc.update(_solver_overrides(args))
    doc["output"] = args.output
    doc["checkpoints"] = args.checkpoints
    return _report(run_sweep(RunConfig.from_mapping(doc)))


def cmd_sweep(args) -> int:
    overrides = {"output": args.output, "workers": args.workers, "guess": args.guess}
    cfg = RunConfig.load(args.config, **overrides, **_solver_overrides(args))
    return _report(run_sweep(cfg))


def cmd_gap(args) -> int:
    rows = gap_table(args.model, _params(args.param), _ints(args.N), args.threshold)
    w = csv.DictWriter(sys.stdout, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return EXIT_OK


def cmd_extrapolate(args) -> int:
    where = {k: v[0] for k, v in _params(args.where).items()}
    (a, b, rms), pts = extrapolate_csv(args.csv, args.column, where,
                                       max_eigenvalue=args.max_eigenvalue)
    print(f"points: {len(pts)}  ({', '.join(f'N={n}: {v:.6g}' for n, v in pts)})")
    print(f"intercept {a:.10g}  slope {b:.10g}  rms residual {rms:.3g}")
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # usage errors are validation failures; exit code 2 means every solve failed
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="steadymps", description="Variational MPS steady states of spin-chain Lindbladians.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    def solver_flags(sp):
        sp.add_argument("--schedule", help="bond schedule, e.g. 1,2,4,8")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--no-probe", action="store_true", help="skip the degeneracy probe")
        sp.add_argument("--output", default=None,
                        help=f"output directory (default ${OUTPUT_ENV} or 'results')")

    s = sub.add_parser("solve", help="solve a single point")
    s.add_argument("--model", required=True, choices=sorted(MODELS))
    s.add_argument("-p", "--param", action="append", help="name=value")
    s.add_argument("-N", required=True, help="chain length")
    s.add_argument("--checkpoints", action="store_true")
    solver_flags(s)
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("sweep", help="solve a parameter grid from a YAML config")
    s.add_argument("config")
    s.add_argument("--workers", type=int)
    s.add_argument("--guess", choices=["fresh", "reuse-neighbor"])
    solver_flags(s)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("gap", help="exact L^+L gap table (short chains)")
    s.add_argument("--model", required=True, choices=sorted(MODELS))
    s.add_argument("-p", "--param", action="append", help="name=v1,v2,...")
    s.add_argument("-N", required=True, help="chain lengths, e.g. 3,4")
    s.add_argument("--threshold", type=float, default=1e-9)
    s.set_defaults(func=cmd_gap)

    s = sub.add_parser("extrapolate", help="fit a CSV column linearly in 1/N")
    s.add_argument("csv")
    s.add_argument("--column", required=True)
    s.add_argument("--where", action="append", help="name=value row filter")
    s.add_argument("--max-eigenvalue", type=float,
                   help="also use unconverged rows whose eigenvalue is at most this")
    s.set_defaults(func=cmd_extrapolate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s")
    if getattr(args, "output", "unset") is None and args.verb in ("solve", "sweep"):
        args.output = default_output_dir() if args.verb == "solve" else None
    try:
        return args.func(args)
    except (ConfigError, ValueError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
