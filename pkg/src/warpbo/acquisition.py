"""Expected improvement, GP-UCB and the inner acquisition maximiser."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from warpbo.gp import GpModel
from warpbo.special import erfc

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_SQRT2 = math.sqrt(2.0)


class AcquisitionKind(str, enum.Enum):
    EI = "ei"
    UCB = "ucb"


class UcbMode(str, enum.Enum):
    SIMPLIFIED = "simplified"
    PAPER_FORMULA = "paper_formula"


@dataclass(frozen=True)
class AcquisitionSpec:
    """Which acquisition to maximise and its constants.

    ``a``, ``b`` and ``r`` only matter for ``UcbMode.PAPER_FORMULA``;
    ``r=None`` means "longest side of the search box".
    """

    kind: AcquisitionKind = AcquisitionKind.EI
    delta: float = 0.1
    ucb_mode: UcbMode = UcbMode.SIMPLIFIED
    a: float = 1.0
    b: float = 1.0
    r: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", AcquisitionKind(self.kind))
        object.__setattr__(self, "ucb_mode", UcbMode(self.ucb_mode))
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if self.a <= 0 or self.b <= 0 or (self.r is not None and self.r <= 0):
            raise ValueError("UCB constants a, b, r must be positive")

    def for_box(self, bounds) -> "AcquisitionSpec":
        if self.r is not None:
            return self
        bounds = np.asarray(bounds, dtype=float)
        return replace(self, r=float(np.max(bounds[:, 1] - bounds[:, 0])))


@dataclass(frozen=True)
class MaximizerBudget:
    candidates: int = 2000
    restarts: int = 10
    iterations: int = 200
    simplex_fraction: float = 0.02


@dataclass(frozen=True)
class Proposal:
    point: np.ndarray
    acq_value: float
    restarts_used: int


def std_normal_pdf_cdf(z):
    """Standard normal density and distribution function."""
    z = np.asarray(z, dtype=float)
    with np.errstate(over="ignore"):
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * z * z)
    cdf = 0.5 * erfc(-z / _SQRT2)
    if z.ndim == 0:
        return float(pdf), float(cdf)
    return pdf, cdf


def expected_improvement(mean, sd, incumbent):
    """Closed-form EI for maximisation; zero wherever ``sd == 0``."""
    scalar = np.ndim(mean) == 0 and np.ndim(sd) == 0
    mean, sd = np.broadcast_arrays(np.asarray(mean, dtype=float), np.asarray(sd, dtype=float))
    improvement = mean - incumbent
    out = np.zeros(mean.shape)
    pos = sd > 0
    if np.any(pos):
        with np.errstate(over="ignore"):
            # A subnormal sd sends z to +-inf, which is the right limit.
            z = improvement[pos] / sd[pos]
        pdf, cdf = std_normal_pdf_cdf(z)
        out[pos] = np.maximum(improvement[pos] * cdf + sd[pos] * pdf, 0.0)
    return float(out) if scalar else out


def ucb_gamma(n: int, d: int, spec: AcquisitionSpec) -> float:
    """Exploration weight of GP-UCB at iteration ``n`` in ``d`` dimensions.

    ``pi_n`` is taken as ``pi^2 n^2 / 6``.
    """
    if n < 1 or d < 1:
        raise ValueError(f"ucb_gamma needs n >= 1 and d >= 1, got n={n}, d={d}")
    delta = spec.delta
    if spec.ucb_mode is UcbMode.SIMPLIFIED:
        return 2.0 * math.log(d * n * n * math.pi ** 2 / (6.0 * delta))
    if spec.r is None:
        raise ValueError("paper-formula UCB needs r; call spec.for_box(bounds) first")
    pi_n = math.pi ** 2 * n * n / 6.0
    inner = d * n * spec.b * spec.r * math.sqrt(math.log(2.0 * d * spec.a / delta))
    return 2.0 * math.log(2.0 * pi_n / delta) + 4.0 * d * math.log(inner)


def acquisition_values(model: GpModel, points, spec: AcquisitionSpec, incumbent: float,
                       n: int) -> np.ndarray:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    mean, var = model.predict(points)
    sd = np.sqrt(var)
    if spec.kind is AcquisitionKind.EI:
        return expected_improvement(mean, sd, incumbent)
    gamma = ucb_gamma(n, points.shape[1], spec)
    return mean + math.sqrt(max(gamma, 0.0)) * sd


def acquisition_value(model: GpModel, x, spec: AcquisitionSpec, incumbent: float, n: int) -> float:
    return float(acquisition_values(model, x, spec, incumbent, n)[0])


def nelder_mead_batch(func, starts: np.ndarray, lower: np.ndarray, upper: np.ndarray,
                      iterations: int = 200, simplex_fraction: float = 0.02,
                      xtol: float = 1e-6, ftol: float = 1e-9):
    """Minimise ``func`` from several starting points at once.

    ``func`` maps an ``(m, d)`` array to ``m`` values. Each start gets its own
    simplex (axis-aligned, edge ``simplex_fraction`` of the box side); the
    simplices advance in lockstep so every step is a single batched call.
    Reflection 1, expansion 2, contraction 0.5, shrink 0.5. Trial points are
    clipped to the box.

    A start stops counting once its simplex shrinks below ``xtol`` of the
    longest box side or its values agree to ``ftol`` relative; the loop ends
    when every start has stopped or after ``iterations`` steps.

    Returns the best vertex and its value for each start.
    """
    k, d = starts.shape
    step = simplex_fraction * (upper - lower)
    simplex = np.repeat(starts[:, None, :], d + 1, axis=1)
    for j in range(d):
        # Step inward when the start sits on the upper face.
        s = np.where(starts[:, j] + step[j] <= upper[j], step[j], -step[j])
        simplex[:, j + 1, j] += s
    simplex = np.clip(simplex, lower, upper)
    fvals = func(simplex.reshape(-1, d)).reshape(k, d + 1)
    rows = np.arange(k)

    for _ in range(iterations):
        order = np.argsort(fvals, axis=1, kind="stable")
        simplex = np.take_along_axis(simplex, order[:, :, None], axis=1)
        fvals = np.take_along_axis(fvals, order, axis=1)
        best, worst, second = fvals[:, 0], fvals[:, -1], fvals[:, -2]
        centroid = simplex[:, :-1, :].mean(axis=1)
        xw = simplex[:, -1, :]

        xr = np.clip(centroid + (centroid - xw), lower, upper)
        fr = func(xr)
        new_x, new_f = xr.copy(), fr.copy()
        shrink = np.zeros(k, dtype=bool)

        expand = fr < best
        if expand.any():
            xe = np.clip(centroid[expand] + 2.0 * (centroid[expand] - xw[expand]), lower, upper)
            fe = func(xe)
            take = fe < fr[expand]
            idx = rows[expand][take]
            new_x[idx], new_f[idx] = xe[take], fe[take]

        contract = fr >= second
        if contract.any():
            outside = contract & (fr < worst)
            xc = np.where(outside[:, None], centroid + 0.5 * (xr - centroid),
                          centroid + 0.5 * (xw - centroid))
            xc = np.clip(xc[contract], lower, upper)
            fc = func(xc)
            ref = np.where(outside, fr, worst)[contract]
            accept = np.where(outside[contract], fc <= ref, fc < ref)
            idx = rows[contract]
            new_x[idx[accept]], new_f[idx[accept]] = xc[accept], fc[accept]
            shrink[idx[~accept]] = True

        simplex[:, -1, :] = np.where(shrink[:, None], simplex[:, -1, :], new_x)
        fvals[:, -1] = np.where(shrink, fvals[:, -1], new_f)
        if shrink.any():
            sub = simplex[shrink]
            sub[:, 1:, :] = np.clip(sub[:, :1, :] + 0.5 * (sub[:, 1:, :] - sub[:, :1, :]), lower, upper)
            simplex[shrink] = sub
            fvals[shrink, 1:] = func(sub[:, 1:, :].reshape(-1, d)).reshape(-1, d)

        xspread = np.max(np.abs(simplex - simplex[:, :1, :]), axis=(1, 2))
        fspread = np.max(fvals, axis=1) - np.min(fvals, axis=1)
        done = (xspread <= xtol * np.max(upper - lower)) | (fspread <= ftol * np.abs(fvals[:, 0]))
        if np.all(done):
            break

    i = np.argmin(fvals, axis=1)
    return simplex[rows, i], fvals[rows, i]


def maximize_acquisition(model: GpModel, bounds, spec: AcquisitionSpec, incumbent: float, n: int,
                         budget: MaximizerBudget, rng: np.random.Generator) -> Proposal:
    """Random candidates followed by Nelder-Mead refinement of the best few.

    The search runs in original coordinates; the warp only enters through the
    model's kernel.
    """
    bounds = np.asarray(bounds, dtype=float)
    lower, upper = bounds[:, 0], bounds[:, 1]
    spec = spec.for_box(bounds)
    candidates = lower + rng.random((budget.candidates, bounds.shape[0])) * (upper - lower)
    values = acquisition_values(model, candidates, spec, incumbent, n)
    top = np.argsort(-values, kind="stable")[: budget.restarts]
    best_x, best_v = candidates[top[0]], float(values[top[0]])

    def negative(points):
        return -acquisition_values(model, points, spec, incumbent, n)

    xs, fs = nelder_mead_batch(negative, candidates[top], lower, upper,
                               budget.iterations, budget.simplex_fraction)
    j = int(np.argmin(fs))
    if -fs[j] > best_v:
        best_x, best_v = xs[j], float(-fs[j])
    return Proposal(np.clip(best_x, lower, upper), best_v, len(top))
