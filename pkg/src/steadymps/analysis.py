"""Parameter sweeps, finite-size extrapolation and result files.

A sweep is described by a flat YAML document, for example::

    model: ising-local
    N: [10, 20]
    Delta: [-4, -2, 0, 2, 4]
    guess: reuse-neighbor
    solver.bond_schedule: [1, 2, 4, 6, 8, 12, 16, 20]
    solver.rng_seed: 0

Keys without a reserved meaning are model parameters; scalars are
single-point grids.  Keys prefixed ``solver.`` set :class:`SolverConfig`
fields.  Results go to ``sweep_<hash>.csv`` (one row per grid point, failures
included) and ``sweep_<hash>.log.jsonl`` in the output directory, where the
hash is taken over the canonical form of the physics-relevant keys.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import itertools
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .ed import gap_ldagl
from .models import MODELS, make_model
from .observables import ObservableRecord, summary
from .solver import (
    PhysicalityAssertionError,
    SolverConfig,
    SolverError,
    WarmupError,
    solve,
)
from .tensor import IterationLimitError

log = logging.getLogger(__name__)

OUTPUT_ENV = "STEADYMPS_OUTPUT"
GUESS_POLICIES = ("fresh", "reuse-neighbor")
# keys that never affect results and are left out of the config hash
_UNHASHED = {"output", "workers"}
_RESERVED = {"model", "N", "guess", "output", "checkpoints", "workers"}

OBSERVABLE_COLUMNS = (
    "purity", "mz2_staggered",
    "sx2", "sx2_total", "sy2", "sy2_total", "sz2", "sz2_total",
    "mean_sx", "mean_sy", "mean_sz",
)


class ConfigError(ValueError):
    pass


def default_output_dir() -> str:
    return os.environ.get(OUTPUT_ENV, "results")


@dataclass
class RunConfig:
    model: str
    grid: dict
    sizes: list
    solver: SolverConfig = field(default_factory=SolverConfig)
    guess: str = "fresh"
    output: str = field(default_factory=default_output_dir)
    checkpoints: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}; choose from {sorted(MODELS)}")
        if not self.sizes:
            raise ConfigError("N list is empty")
        if any(int(n) != n or n < 2 for n in self.sizes):
            raise ConfigError(f"chain lengths must be integers >= 2, got {self.sizes}")
        self.sizes = [int(n) for n in self.sizes]
        grid = {}
        for k, v in self.grid.items():
            vals = list(v) if isinstance(v, (list, tuple)) else [v]
            if not vals:
                raise ConfigError(f"grid for {k!r} is empty")
            grid[k] = vals
        self.grid = grid
        allowed = {f.name for f in dataclasses.fields(MODELS[self.model][0])} - {"n_sites"}
        unknown = set(grid) - allowed
        if unknown:
            raise ConfigError(f"unknown parameters for {self.model}: {sorted(unknown)}")
        if self.guess not in GUESS_POLICIES:
            raise ConfigError(f"guess policy must be one of {GUESS_POLICIES}, got {self.guess!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @classmethod
    def from_mapping(cls, doc: dict, **overrides) -> "RunConfig":
        doc = {**doc, **{k: v for k, v in overrides.items() if v is not None}}
        if "model" not in doc:
            raise ConfigError("config has no 'model' key")
        if "N" not in doc:
            raise ConfigError("config has no 'N' key")
        solver_kw, grid = {}, {}
        for k, v in doc.items():
            if k.startswith("solver."):
                name = k[len("solver."):]
                if isinstance(v, list):
                    v = tuple(v)
                solver_kw[name] = v
            elif k not in _RESERVED:
                grid[k] = v
        try:
            scfg = SolverConfig(**solver_kw)
        except TypeError as exc:
            raise ConfigError(f"bad solver option: {exc}") from None
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        sizes = doc["N"] if isinstance(doc["N"], list) else [doc["N"]]
        return cls(model=doc["model"], grid=grid, sizes=sizes, solver=scfg,
                   guess=doc.get("guess", "fresh"),
                   output=doc.get("output", default_output_dir()),
                   checkpoints=bool(doc.get("checkpoints", False)),
                   workers=int(doc.get("workers", 1)))

    @classmethod
    def load(cls, path, **overrides) -> "RunConfig":
        with open(path) as fh:
            doc = yaml.safe_load(fh)
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: expected a key-value document")
        return cls.from_mapping(doc, **overrides)

    def to_mapping(self) -> dict:
        doc = {"model": self.model, "N": list(self.sizes), "guess": self.guess,
               "output": self.output, "checkpoints": self.checkpoints, "workers": self.workers}
        doc.update({k: list(v) for k, v in self.grid.items()})
        for f in dataclasses.fields(SolverConfig):
            v = getattr(self.solver, f.name)
            doc[f"solver.{f.name}"] = list(v) if isinstance(v, tuple) else v
        return doc

    def canonical(self) -> str:
        doc = {k: v for k, v in self.to_mapping().items() if k not in _UNHASHED}
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    def points(self) -> list:
        """Grid points as (N, params) in grid order: N outermost, then the
        parameters in sorted-name order with values as listed."""
        names = sorted(self.grid)
        combos = list(itertools.product(*(self.grid[k] for k in names)))
        return [(n, dict(zip(names, c))) for n in self.sizes for c in combos]


@dataclass
class SweepResult:
    rows: list
    records: list
    provenance: dict
    csv_path: Path | None = None
    log_path: Path | None = None

    @property
    def all_failed(self) -> bool:
        # degenerate and unconverged points are flagged results, not successes
        return bool(self.rows) and all(r["status"] != "converged" for r in self.rows)


def _status(report) -> str:
    if report.degenerate:
        return "degenerate"
    return "converged" if report.converged else "unconverged"


def _solve_point(model_name, n, params, scfg, guess, checkpoint_dir):
    """Solve one grid point.  Returns (row, records, event, state)."""
    t0 = time.perf_counter()
    row = {"model": model_name, **params, "N": n}
    empty = {c: "" for c in OBSERVABLE_COLUMNS}
    state = None
    records = []
    try:
        model = make_model(model_name, n_sites=n, **params)
        if checkpoint_dir is not None:
            Path(checkpoint_dir).mkdir(parents=True, exist_ok=True)
        rep = solve(model, scfg, guess=guess, checkpoint_dir=checkpoint_dir)
        state = rep.raw_state
        records = summary(rep.state, {"model": model_name, **params})
        obs = {r.name: r.value for r in records}
        row.update(status=_status(rep), D_final=rep.bond_dim, eigenvalue=rep.final_eigenvalue,
                   restarts=rep.restarts_used, probe_eigenvalue=rep.probe_eigenvalue,
                   reason=rep.reason, **{c: obs[c] for c in OBSERVABLE_COLUMNS})
    except PhysicalityAssertionError as exc:
        rep = exc.report
        row.update(status="unphysical", D_final=rep.bond_dim, eigenvalue=rep.final_eigenvalue,
                   restarts=rep.restarts_used, probe_eigenvalue="", reason=str(exc), **empty)
    except WarmupError as exc:
        row.update(status="warmup-failed", D_final=1, eigenvalue="", restarts=len(exc.candidates),
                   probe_eigenvalue="", reason=str(exc), **empty)
    except (SolverError, IterationLimitError, ArithmeticError) as exc:
        row.update(status="error", D_final="", eigenvalue="", restarts="", probe_eigenvalue="",
                   reason=f"{type(exc).__name__}: {exc}", **empty)
    event = {"model": model_name, "N": n, "params": params, "status": row["status"],
             "reason": row["reason"], "eigenvalue": row["eigenvalue"], "D_final": row["D_final"],
             "wall_seconds": round(time.perf_counter() - t0, 3)}
    return row, records, event, state


def _run_chain(model_name, jobs, scfg, reuse, ckpt_root):
    """Solve a sequence of points; under ``reuse`` each seeds the next."""
    out = []
    guess = None
    for idx, n, params in jobs:
        ckpt = None if ckpt_root is None else str(Path(ckpt_root) / f"point_{idx:04d}")
        row, records, event, state = _solve_point(model_name, n, params, scfg,
                                                  guess if reuse else None, ckpt)
        if reuse and state is not None:
            guess = state
        out.append((idx, row, records, event))
    return out


def _format(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def run_sweep(cfg: RunConfig) -> SweepResult:
    """Solve every grid point and write the CSV and log files."""
    outdir = Path(cfg.output)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"output directory {outdir} is not writable: {exc}") from None
    if not os.access(outdir, os.W_OK):
        raise ConfigError(f"output directory {outdir} is not writable")
    h = cfg.config_hash()
    stem = outdir / f"sweep_{h}"
    ckpt_root = str(outdir / f"checkpoints_{h}") if cfg.checkpoints else None

    points = cfg.points()
    reuse = cfg.guess == "reuse-neighbor"
    if reuse:
        # one chain per N: neighbors in parameter space share a chain length
        chains = [[(i, n, p) for i, (n, p) in enumerate(points) if n == size] for size in cfg.sizes]
    else:
        chains = [[(i, n, p)] for i, (n, p) in enumerate(points)]

    results = []
    if cfg.workers > 1 and len(chains) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            futures = [pool.submit(_run_chain, cfg.model, c, cfg.solver, reuse, ckpt_root)
                       for c in chains]
            for f in futures:
                results.extend(f.result())
    else:
        for c in chains:
            results.extend(_run_chain(cfg.model, c, cfg.solver, reuse, ckpt_root))
    results.sort(key=lambda x: x[0])

    provenance = {"config_hash": h, "code_version": __version__, "seed": cfg.solver.rng_seed,
                  "config": json.loads(cfg.canonical())}
    names = sorted(cfg.grid)
    header = (["model"] + names + ["N", "status", "D_final", "eigenvalue", "restarts",
                                   "probe_eigenvalue"] + list(OBSERVABLE_COLUMNS) + ["reason"])
    rows = [r for _, r, _, _ in results]
    records: list[ObservableRecord] = [rec for _, _, recs, _ in results for rec in recs]

    csv_path = stem.with_suffix(".csv")
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_format(r.get(c)) for c in header])
    log_path = Path(f"{stem}.log.jsonl")
    with open(log_path, "w") as fh:
        fh.write(json.dumps({"event": "sweep", **provenance}, sort_keys=True) + "\n")
        for _, _, _, ev in results:
            fh.write(json.dumps({"event": "point", **ev}, sort_keys=True, default=str) + "\n")
    with open(stem.with_suffix(".meta.json"), "w") as fh:
        json.dump(provenance, fh, sort_keys=True, indent=1)
    log.info("sweep %s: %d points written to %s", h, len(rows), csv_path)
    return SweepResult(rows, records, provenance, csv_path, log_path)


def extrapolate_1overN(points):
    """Least-squares fit ``value = intercept + slope / N``.

    Returns ``(intercept, slope, rms_residual)``.
    """
    pts = [(float(n), float(v)) for n, v in points]
    if len({n for n, _ in pts}) < 2:
        raise ValueError("need at least two distinct N")
    x = np.array([1.0 / n for n, _ in pts])
    y = np.array([v for _, v in pts])
    a = np.stack([np.ones_like(x), x], axis=1)
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    rms = float(np.sqrt(np.mean((a @ coef - y) ** 2)))
    return float(coef[0]), float(coef[1]), rms


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def extrapolate_csv(path, column: str, where: dict | None = None, statuses=("converged",),
                    max_eigenvalue: float | None = None):
    """Extrapolate ``column`` against 1/N from a sweep CSV.

    Rows are kept if their status is in ``statuses``, or, when
    ``max_eigenvalue`` is given, if they are ``unconverged`` with a final
    eigenvalue at or below it (accepted on the eigenvalue but not yet stable
    in D).  ``where`` filters by value (compared as floats when possible).
    """
    where = where or {}
    pts = []
    for r in read_csv(path):
        accepted = r["status"] in statuses
        if not accepted and max_eigenvalue is not None and r["status"] == "unconverged":
            accepted = r["eigenvalue"] != "" and float(r["eigenvalue"]) <= max_eigenvalue
        if not accepted:
            continue
        if column not in r:
            raise KeyError(f"no column {column!r} in {path}")
        if not all(_same(r.get(k), v) for k, v in where.items()):
            continue
        if r[column] == "":
            continue
        pts.append((int(r["N"]), float(r[column])))
    return extrapolate_1overN(pts), pts


def _same(a, b) -> bool:
    if a is None:
        return False
    try:
        return float(a) == float(b)
    except (TypeError, ValueError):
        return str(a) == str(b)


def gap_table(model_name: str, grid: dict, sizes, threshold: float = 1e-9) -> list[dict]:
    """Dense L^+L gap and null-space dimension for each (N, parameter) point."""
    cfg = RunConfig(model_name, grid, list(sizes), output=".")
    rows = []
    for n, params in cfg.points():
        gap, null_dim = gap_ldagl(make_model(model_name, n_sites=n, **params), threshold)
        rows.append({"model": model_name, **params, "N": n, "gap": gap, "null_dim": null_dim})
    return rows
