"""Experiment configs, method x seed grids, trace files and external objectives.

Config is one JSON document::

    {
      "objective": "branin",                 # or {"external": "python3 job.py", "timeout": 3600}
      "bounds": [[-5, 10], [0, 15]],         # optional for builtin objectives
      "priors": [{"kind": "truncated_normal", "mu": 3.9, "sigma": 0.25}, "uniform"],
      "methods": ["warped_bo", "standard_bo", "prior_search"],
      "acquisition": {"kind": "ei"},         # or {"kind": "ucb", "delta": 0.1, "mode": "simplified"}
      "n_init": 4, "budget": 34, "runs": 10, "base_seed": 0,
      "direction": "minimize", "output_dir": "results/branin",
      "noise_var": 1e-6, "refit_every": 1,
      "maximizer": {"candidates": 2000, "restarts": 10, "iterations": 200}
    }

Prior bounds always come from ``bounds``; descriptors only carry shape
parameters.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import queue
import shlex
import subprocess
import threading
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from warpbo.acquisition import AcquisitionSpec, MaximizerBudget
from warpbo.bench import BENCHMARKS
from warpbo.driver import (
    BoConfig,
    Direction,
    ObjectiveError,
    RunResult,
    TraceRecord,
    initial_design,
    run_bo,
    run_prior_search,
    seed_streams,
)
from warpbo.warp import PriorSpec, WarpMap

logger = logging.getLogger(__name__)

METHODS = ("warped_bo", "standard_bo", "prior_search")
DEFAULT_TIMEOUT = 3600.0


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the offending field."""


@dataclass(frozen=True)
class ExperimentConfig:
    objective: str | None
    external: str | None
    bounds: tuple[tuple[float, float], ...]
    priors: tuple[PriorSpec, ...]
    methods: tuple[str, ...]
    acquisition: AcquisitionSpec
    n_init: int = 4
    budget: int = 40
    runs: int = 10
    base_seed: int = 0
    direction: Direction = Direction.MINIMIZE
    output_dir: str = "results"
    noise_var: float = 1e-6
    refit_every: int = 1
    maximizer: MaximizerBudget = field(default_factory=MaximizerBudget)
    timeout: float = DEFAULT_TIMEOUT

    @property
    def dim(self) -> int:
        return len(self.bounds)

    def warp(self) -> WarpMap:
        return WarpMap(self.priors)

    def bo_config(self, seed: int) -> BoConfig:
        return BoConfig(n_init=self.n_init, budget=self.budget, acquisition=self.acquisition,
                        direction=self.direction, seed=seed, maximizer_budget=self.maximizer,
                        noise_var=self.noise_var, refit_every=self.refit_every)

    def seeds(self) -> list[int]:
        return [self.base_seed + i for i in range(self.runs)]


def _require(cond: bool, name: str, message: str) -> None:
    if not cond:
        raise ConfigError(f"{name}: {message}")


def _parse_prior(desc: Any, bound: Sequence[float], index: int) -> PriorSpec:
    name = f"priors[{index}]"
    a, b = bound
    if desc in (None, "uniform"):
        return PriorSpec.uniform(a, b)
    _require(isinstance(desc, dict), name, f"expected 'uniform' or an object, got {desc!r}")
    kind = desc.get("kind", "uniform")
    try:
        if kind == "uniform":
            return PriorSpec.uniform(a, b)
        if kind == "truncated_normal":
            return PriorSpec.truncated_normal(float(desc["mu"]), float(desc["sigma"]), a, b)
        if kind == "truncated_gamma":
            return PriorSpec.truncated_gamma(float(desc["alpha"]), float(desc["beta"]), a, b)
    except KeyError as exc:
        raise ConfigError(f"{name}: missing parameter {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: {exc}") from None
    raise ConfigError(f"{name}: unknown prior kind {kind!r}")


def parse_config(raw: dict, objective_cmd: str | None = None) -> ExperimentConfig:
    """Validate a decoded JSON config."""
    _require(isinstance(raw, dict), "config", "top level must be a JSON object")
    objective = raw.get("objective")
    external = None
    timeout = DEFAULT_TIMEOUT
    # A builtin name still supplies default bounds when --objective-cmd replaces it.
    default_bounds = BENCHMARKS[objective].bounds if isinstance(objective, str) and objective in BENCHMARKS else None
    if objective_cmd is not None:
        objective, external = None, objective_cmd
    elif isinstance(objective, dict):
        external = objective.get("external")
        _require(isinstance(external, str) and external.strip(), "objective.external",
                 "must be a non-empty command line")
        timeout = float(objective.get("timeout", DEFAULT_TIMEOUT))
        _require(timeout > 0, "objective.timeout", "must be positive")
        objective = None
    else:
        _require(objective in BENCHMARKS, "objective",
                 f"unknown objective {objective!r}; choose from {sorted(BENCHMARKS)} or {{'external': ...}}")

    bounds = raw.get("bounds")
    if bounds is None:
        bounds = default_bounds
    _require(isinstance(bounds, (list, tuple)) and len(bounds) > 0, "bounds",
             "must be a non-empty list of [a, b] pairs")
    try:
        bounds = tuple((float(a), float(b)) for a, b in bounds)
    except (TypeError, ValueError):
        raise ConfigError("bounds: every entry must be a pair of numbers") from None
    for i, (a, b) in enumerate(bounds):
        _require(math.isfinite(a) and math.isfinite(b) and a < b, f"bounds[{i}]",
                 f"need finite a < b, got {[a, b]}")
    if objective is not None:
        _require(len(bounds) == BENCHMARKS[objective].dim, "bounds",
                 f"{objective} is {BENCHMARKS[objective].dim}-dimensional, got {len(bounds)} bounds")

    priors = raw.get("priors", "uniform")
    if priors == "uniform":
        priors = ["uniform"] * len(bounds)
    _require(isinstance(priors, list), "priors", "must be a list or 'uniform'")
    _require(len(priors) == len(bounds), "priors",
             f"length {len(priors)} does not match bounds length {len(bounds)}")
    priors = tuple(_parse_prior(p, bd, i) for i, (p, bd) in enumerate(zip(priors, bounds)))

    methods = raw.get("methods", list(METHODS))
    _require(isinstance(methods, list) and len(methods) > 0, "methods", "must be a non-empty list")
    for m in methods:
        _require(m in METHODS, "methods", f"unknown method {m!r}; choose from {list(METHODS)}")

    acq = raw.get("acquisition", {"kind": "ei"})
    if isinstance(acq, str):
        acq = {"kind": acq}
    try:
        acquisition = AcquisitionSpec(kind=acq.get("kind", "ei"), delta=float(acq.get("delta", 0.1)),
                                      ucb_mode=acq.get("mode", "simplified"),
                                      a=float(acq.get("a", 1.0)), b=float(acq.get("b", 1.0)),
                                      r=None if acq.get("r") is None else float(acq["r"]))
    except (AttributeError, TypeError, ValueError) as exc:
        raise ConfigError(f"acquisition: {exc}") from None

    ints = {}
    for key, default in (("n_init", 4), ("budget", 40), ("runs", 10), ("base_seed", 0), ("refit_every", 1)):
        value = raw.get(key, default)
        _require(isinstance(value, int) and not isinstance(value, bool), key, f"must be an integer, got {value!r}")
        ints[key] = value
    _require(ints["n_init"] >= 1, "n_init", "must be >= 1")
    _require(ints["budget"] >= ints["n_init"], "budget", "must be >= n_init")
    _require(ints["runs"] >= 1, "runs", "must be >= 1")
    _require(ints["refit_every"] >= 1, "refit_every", "must be >= 1")

    try:
        direction = Direction(raw.get("direction", "minimize"))
    except ValueError:
        raise ConfigError(f"direction: expected 'minimize' or 'maximize', got {raw.get('direction')!r}") from None
    noise_var = raw.get("noise_var", 1e-6)
    _require(isinstance(noise_var, (int, float)) and noise_var >= 0, "noise_var", "must be >= 0")
    mx = raw.get("maximizer", {})
    _require(isinstance(mx, dict), "maximizer", "must be an object")
    try:
        maximizer = MaximizerBudget(**mx)
    except TypeError as exc:
        raise ConfigError(f"maximizer: {exc}") from None

    return ExperimentConfig(
        objective=objective, external=external, bounds=bounds, priors=priors,
        methods=tuple(methods), acquisition=acquisition, direction=direction,
        output_dir=str(raw.get("output_dir", "results")), noise_var=float(noise_var),
        maximizer=maximizer, timeout=timeout, **ints,
    )


def load_config(path, objective_cmd: str | None = None) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: not valid JSON ({exc})") from None
    return parse_config(raw, objective_cmd)


class ExternalObjective:
    """Black box served by a long-lived child process.

    Each evaluation writes ``{"x": [...]}`` plus a newline to the child's stdin
    and reads one line holding a decimal float from its stdout.
    """

    def __init__(self, command: str | Sequence[str], timeout: float = DEFAULT_TIMEOUT):
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        self.timeout = timeout
        self._proc = subprocess.Popen(
            self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            text=True, encoding="utf-8", bufsize=1,
        )
        self._lines: queue.Queue = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

    def _pump(self):
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(None)

    def __call__(self, x) -> float:
        request = json.dumps({"x": [float(v) for v in np.asarray(x, dtype=float)]})
        try:
            self._proc.stdin.write(request + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError):
            raise ObjectiveError(f"child {self.command} exited with code {self._proc.poll()}") from None
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            raise ObjectiveError(f"child {self.command} did not reply within {self.timeout} s") from None
        if line is None:
            raise ObjectiveError(f"child {self.command} exited with code {self._proc.wait()}")
        reply = line.strip()
        try:
            value = float(reply)
        except ValueError:
            raise ObjectiveError(f"unparseable reply {reply!r} from child {self.command}") from None
        if not math.isfinite(value):
            raise ObjectiveError(f"non-finite reply {reply!r} from child {self.command}")
        return value

    def close(self):
        if self._proc.poll() is None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def external_objective(command, timeout: float = DEFAULT_TIMEOUT) -> ExternalObjective:
    return ExternalObjective(command, timeout)


# --- trace files -------------------------------------------------------------

def trace_path(output_dir, method: str, seed: int) -> Path:
    return Path(output_dir) / f"trace_{method}_seed{seed}.csv"


def aggregate_path(output_dir, method: str) -> Path:
    return Path(output_dir) / f"aggregate_{method}.csv"


def write_trace(path, result: RunResult, dim: int) -> None:
    # repr() gives the shortest string that round-trips to the same double.
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iter"] + [f"x_{i}" for i in range(dim)] + ["y", "best"])
        for rec in result.trace:
            writer.writerow([rec.iteration] + [repr(float(v)) for v in rec.point]
                            + [repr(float(rec.value)), repr(float(rec.best))])


def read_trace(path) -> list[TraceRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    dim = len(header) - 3
    return [TraceRecord(int(r[0]), tuple(float(v) for v in r[1:1 + dim]), float(r[-2]), float(r[-1]))
            for r in body]


@dataclass(frozen=True)
class AggregateRow:
    iteration: int
    mean_best: float
    stderr_best: float


def aggregate(traces: Iterable[Sequence[TraceRecord]]) -> list[AggregateRow]:
    """Mean and standard error (sample std / sqrt(runs)) of best-so-far per iteration."""
    traces = [list(t) for t in traces]
    if not traces:
        raise ValueError("aggregate needs at least one trace")
    lengths = {len(t) for t in traces}
    if len(lengths) != 1:
        raise ValueError(f"traces have different lengths: {sorted(lengths)}")
    best = np.array([[r.best for r in t] for t in traces])
    runs = best.shape[0]
    mean = best.mean(axis=0)
    stderr = best.std(axis=0, ddof=1) / math.sqrt(runs) if runs > 1 else np.zeros(best.shape[1])
    return [AggregateRow(i + 1, float(m), float(s)) for i, (m, s) in enumerate(zip(mean, stderr))]


def write_aggregate(path, rows: Sequence[AggregateRow]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iter", "mean_best", "stderr_best"])
        for row in rows:
            writer.writerow([row.iteration, repr(float(row.mean_best)), repr(float(row.stderr_best))])


def aggregate_directory(directory) -> dict[str, list[AggregateRow]]:
    """Aggregate every ``trace_<method>_seed<k>.csv`` in ``directory`` by method."""
    directory = Path(directory)
    grouped: dict[str, list[Path]] = {}
    for path in sorted(directory.glob("trace_*_seed*.csv")):
        method = path.stem[len("trace_"):path.stem.rindex("_seed")]
        grouped.setdefault(method, []).append(path)
    out = {}
    for method, paths in sorted(grouped.items()):
        rows = aggregate(read_trace(p) for p in paths)
        write_aggregate(aggregate_path(directory, method), rows)
        out[method] = rows
    return out


# --- running -------------------------------------------------------------------

def run_cell(config: ExperimentConfig, method: str, seed: int) -> RunResult:
    """One (method, seed) run; the initial design depends only on the seed."""
    bounds = np.array(config.bounds)
    design_rng, _ = seed_streams(seed)
    initial = initial_design(bounds, config.n_init, design_rng)
    bo_config = config.bo_config(seed)
    if config.external is not None:
        objective = ExternalObjective(config.external, config.timeout)
    else:
        objective = BENCHMARKS[config.objective]
    try:
        if method == "warped_bo":
            return run_bo(objective, bounds, config.warp(), bo_config, initial)
        if method == "standard_bo":
            return run_bo(objective, bounds, WarpMap.uniform(bounds), bo_config, initial)
        if method == "prior_search":
            return run_prior_search(objective, bounds, config.warp(), bo_config, initial)
        raise ValueError(f"unknown method {method!r}")
    finally:
        if isinstance(objective, ExternalObjective):
            objective.close()


def _run_and_write(config: ExperimentConfig, method: str, seed: int, output_dir: str) -> str | None:
    try:
        result = run_cell(config, method, seed)
    except Exception as exc:
        return f"{type(exc).__name__}: {exc}"
    write_trace(trace_path(output_dir, method, seed), result, config.dim)
    return result.error


def run_experiment(config: ExperimentConfig, output_dir=None, jobs: int = 1) -> list[tuple[str, int, str]]:
    """Run every (method, seed) cell, write traces and per-method aggregates.

    Returns the failed cells as ``(method, seed, message)``; aggregates are only
    written for methods whose runs all succeeded.
    """
    output_dir = Path(output_dir or config.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    cells = [(m, s) for m in config.methods for s in config.seeds()]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_and_write, config, m, s, str(output_dir)) for m, s in cells]
            errors = [f.result() for f in futures]
    else:
        errors = [_run_and_write(config, m, s, str(output_dir)) for m, s in cells]
    failures = [(m, s, e) for (m, s), e in zip(cells, errors) if e is not None]
    failed_methods = {m for m, _, _ in failures}
    for method in config.methods:
        if method in failed_methods:
            continue
        rows = aggregate(read_trace(trace_path(output_dir, method, s)) for s in config.seeds())
        write_aggregate(aggregate_path(output_dir, method), rows)
    return failures
