"""The optimisation loop, its baselines and run bookkeeping."""

from __future__ import annotations

import enum
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from warpbo.acquisition import AcquisitionSpec, MaximizerBudget, maximize_acquisition
from warpbo.gp import Dataset, KernelParams, fit, fit_lengthscale_mle
from warpbo.warp import PriorSpec, WarpMap, inverse_cdf

logger = logging.getLogger(__name__)

DUPLICATE_TOL = 1e-9
DUPLICATE_JITTER = 1e-6


class Direction(str, enum.Enum):
    MAXIMIZE = "maximize"
    MINIMIZE = "minimize"


class ObjectiveError(RuntimeError):
    """The black-box objective failed or returned a non-finite value."""


@dataclass(frozen=True)
class BoConfig:
    n_init: int = 4
    budget: int = 40
    acquisition: AcquisitionSpec = field(default_factory=AcquisitionSpec)
    direction: Direction = Direction.MINIMIZE
    seed: int = 0
    maximizer_budget: MaximizerBudget = field(default_factory=MaximizerBudget)
    noise_var: float = 1e-6
    refit_every: int = 1

    def __post_init__(self):
        object.__setattr__(self, "direction", Direction(self.direction))
        if self.n_init < 1:
            raise ValueError(f"n_init must be >= 1, got {self.n_init}")
        if self.budget < self.n_init:
            raise ValueError(f"budget ({self.budget}) must be >= n_init ({self.n_init})")
        if self.refit_every < 1:
            raise ValueError("refit_every must be >= 1")


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    point: tuple[float, ...]
    value: float
    best: float


@dataclass
class RunResult:
    trace: list[TraceRecord]
    seed: int
    config: BoConfig | None = None
    wall_times: list[float] = field(default_factory=list)
    error: str | None = None

    @property
    def best_so_far(self) -> np.ndarray:
        return np.array([r.best for r in self.trace])

    @property
    def points(self) -> np.ndarray:
        return np.array([r.point for r in self.trace])

    @property
    def values(self) -> np.ndarray:
        return np.array([r.value for r in self.trace])


def seed_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent generators for the shared initial design and for the method itself."""
    design, method = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(design), np.random.default_rng(method)


def initial_design(bounds, n_init: int, rng: np.random.Generator) -> np.ndarray:
    """``n_init`` i.i.d. uniform points in the box."""
    bounds = np.asarray(bounds, dtype=float)
    if n_init < 1:
        raise ValueError(f"n_init must be >= 1, got {n_init}")
    lower, upper = bounds[:, 0], bounds[:, 1]
    return lower + rng.random((n_init, bounds.shape[0])) * (upper - lower)


class _Recorder:
    def __init__(self, objective, direction: Direction):
        self.objective = objective
        self.direction = direction
        self.trace: list[TraceRecord] = []
        self.wall_times: list[float] = []
        self._started = time.perf_counter()

    def evaluate(self, x: np.ndarray) -> float:
        value = self.objective(np.array(x, dtype=float))
        try:
            value = float(value)
        except (TypeError, ValueError):
            raise ObjectiveError(f"objective returned non-numeric value {value!r}") from None
        if not math.isfinite(value):
            raise ObjectiveError(f"objective returned non-finite value {value!r} at x={list(x)}")
        if not self.trace:
            best = value
        elif self.direction is Direction.MINIMIZE:
            best = min(self.trace[-1].best, value)
        else:
            best = max(self.trace[-1].best, value)
        self.trace.append(TraceRecord(len(self.trace) + 1, tuple(float(v) for v in x), value, best))
        now = time.perf_counter()
        self.wall_times.append(now - self._started)
        self._started = now
        return value


def _signed(values, direction: Direction) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    return -values if direction is Direction.MINIMIZE else values


def _dedupe(x: np.ndarray, points: np.ndarray, bounds: np.ndarray, rng) -> np.ndarray:
    lower, upper = bounds[:, 0], bounds[:, 1]
    if np.min(np.max(np.abs(points - x), axis=1)) > DUPLICATE_TOL:
        return x
    jitter = rng.uniform(-1.0, 1.0, size=x.shape) * DUPLICATE_JITTER * (upper - lower)
    moved = x + jitter
    # Reflect rather than clip, otherwise a duplicate on a face stays put.
    outside = (moved < lower) | (moved > upper)
    moved[outside] = x[outside] - jitter[outside]
    return np.clip(moved, lower, upper)


def run_bo(objective: Callable[[np.ndarray], float], bounds, warp: WarpMap | None,
           config: BoConfig, initial: np.ndarray | None = None) -> RunResult:
    """Bayesian optimisation with the prior folded into the GP kernel.

    ``warp=None`` runs on raw coordinates with the plain SE kernel. When
    ``initial`` is omitted the initial design is drawn from the seed's design
    stream, so different methods with the same seed start from the same points.
    Errors from the objective or the GP stop the run; the partial trace is
    returned with ``error`` set.
    """
    bounds = np.asarray(bounds, dtype=float)
    if warp is not None:
        warp.check_bounds(bounds)
    design_rng, rng = seed_streams(config.seed)
    if initial is None:
        initial = initial_design(bounds, config.n_init, design_rng)
    recorder = _Recorder(objective, config.direction)
    acquisition = config.acquisition.for_box(bounds)
    params = KernelParams(amplitude=1.0, lengthscale=0.2, noise_var=config.noise_var)
    try:
        for x in initial:
            recorder.evaluate(x)
        data = Dataset(np.array(initial, dtype=float), _signed([r.value for r in recorder.trace], config.direction))
        for step in range(config.budget - len(initial)):
            if step % config.refit_every == 0:
                params = fit_lengthscale_mle(data, warp, params)
            model = fit(data, warp, params)
            incumbent = float(np.max(data.values))
            proposal = maximize_acquisition(model, bounds, acquisition, incumbent, len(data),
                                            config.maximizer_budget, rng)
            x = _dedupe(proposal.point, data.points, bounds, rng)
            y = recorder.evaluate(x)
            data = data.append(x, _signed(y, config.direction))
            logger.debug("iter %d: x=%s y=%.6g l=%.3g", len(data), x, y, params.lengthscale)
    except Exception as exc:  # partial trace is the contract
        logger.warning("run (seed %d) stopped after %d evaluations: %s", config.seed,
                       len(recorder.trace), exc)
        return RunResult(recorder.trace, config.seed, config, recorder.wall_times,
                         f"{type(exc).__name__}: {exc}")
    return RunResult(recorder.trace, config.seed, config, recorder.wall_times)


def run_prior_search(objective: Callable[[np.ndarray], float], bounds, warp: WarpMap,
                     config: BoConfig, initial: np.ndarray | None = None) -> RunResult:
    """Draw evaluation points i.i.d. from the prior.

    With ``initial`` supplied those points are evaluated first and only the
    remaining ``budget - len(initial)`` points come from the prior.
    """
    bounds = np.asarray(bounds, dtype=float)
    warp.check_bounds(bounds)
    _, rng = seed_streams(config.seed)
    recorder = _Recorder(objective, config.direction)
    initial = np.empty((0, warp.dim)) if initial is None else np.asarray(initial, dtype=float)
    draws = sample_prior(warp, config.budget - len(initial), rng)
    try:
        for x in np.vstack([initial, draws]):
            recorder.evaluate(x)
    except Exception as exc:
        return RunResult(recorder.trace, config.seed, config, recorder.wall_times,
                         f"{type(exc).__name__}: {exc}")
    return RunResult(recorder.trace, config.seed, config, recorder.wall_times)


def sample_prior(warp: WarpMap, n: int, rng: np.random.Generator) -> np.ndarray:
    """Inverse-transform samples, one column per dimension."""
    u = rng.random((n, warp.dim))
    out = np.empty_like(u)
    for m, prior in enumerate(warp.dims):
        out[:, m] = inverse_cdf(prior, u[:, m])
    return out


def make_shifted_prior(bounds, true_opt: Sequence[float], offset_fraction: float,
                       sigma: float) -> WarpMap:
    """Truncated-normal priors centred ``offset_fraction`` of each box side away from ``true_opt``."""
    bounds = np.asarray(bounds, dtype=float)
    true_opt = np.asarray(true_opt, dtype=float)
    if not 0.0 <= offset_fraction < 1.0:
        raise ValueError(f"offset_fraction must lie in [0, 1), got {offset_fraction}")
    if np.any(true_opt < bounds[:, 0]) or np.any(true_opt > bounds[:, 1]):
        raise ValueError(f"true optimum {true_opt.tolist()} outside the box")
    dims = []
    for (a, b), opt in zip(bounds, true_opt):
        mu = min(max(opt + offset_fraction * (b - a), a), b)
        dims.append(PriorSpec.truncated_normal(mu, sigma, a, b))
    return WarpMap(tuple(dims))
