"""Gaussian-process regression with a squared-exponential kernel on warped inputs.

Inputs are pushed through a :class:`~warpbo.warp.WarpMap` before the kernel
sees them, so the kernel is ``amplitude * exp(-|Phi(x) - Phi(x')|^2 / (2 l^2))``
with one shared lengthscale in warped units. Passing ``warp=None`` skips the
transform and gives the plain SE kernel on raw coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import solve_triangular

from warpbo.warp import WarpMap, warp_points

JITTER_LADDER = (1e-10, 1e-9, 1e-8, 1e-7, 1e-6)
LENGTHSCALE_GRID = tuple(np.geomspace(0.01, 2.0, 50))
Y_STD_FLOOR = 1e-12
_LOG_2PI = math.log(2.0 * math.pi)


class FitError(RuntimeError):
    """Cholesky factorisation failed for every rung of the jitter ladder."""


@dataclass(frozen=True)
class KernelParams:
    amplitude: float = 1.0
    lengthscale: float = 0.2
    noise_var: float = 1e-6

    def __post_init__(self):
        for name in ("amplitude", "lengthscale", "noise_var"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"KernelParams.{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        if self.amplitude <= 0 or self.lengthscale <= 0 or self.noise_var < 0:
            raise ValueError(f"invalid kernel parameters {self}")


@dataclass(frozen=True)
class Dataset:
    """Observed ``(x_i, y_i)`` pairs in original coordinates."""

    points: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        points = np.atleast_2d(np.asarray(self.points, dtype=float))
        values = np.asarray(self.values, dtype=float).reshape(-1)
        if points.shape[0] != values.shape[0]:
            raise ValueError(f"{points.shape[0]} points but {values.shape[0]} values")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.shape[0]

    def append(self, x, y) -> "Dataset":
        return Dataset(np.vstack([self.points, np.asarray(x, dtype=float)[None, :]]),
                       np.append(self.values, float(y)))


def _warp(warp: WarpMap | None, points) -> np.ndarray:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    return points if warp is None else warp_points(warp, points)


def _sqdist(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    # Explicit differences keep the Gram matrix exactly symmetric.
    diff = u[:, None, :] - v[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _se(sqdist, params: KernelParams):
    return params.amplitude * np.exp(-sqdist / (2.0 * params.lengthscale ** 2))


def se_kernel(u, u2, params: KernelParams) -> float:
    """Squared-exponential covariance between two points."""
    u = np.asarray(u, dtype=float).reshape(1, -1)
    u2 = np.asarray(u2, dtype=float).reshape(1, -1)
    if u.shape != u2.shape:
        raise ValueError(f"dimension mismatch: {u.shape[1]} vs {u2.shape[1]}")
    return float(_se(_sqdist(u, u2), params)[0, 0])


def warped_kernel(x, x2, warp: WarpMap | None, params: KernelParams) -> float:
    """SE kernel evaluated on the CDF-warped coordinates of ``x`` and ``x2``."""
    return se_kernel(_warp(warp, x)[0], _warp(warp, x2)[0], params)


def cross_kernel(points, points2, warp: WarpMap | None, params: KernelParams) -> np.ndarray:
    return _se(_sqdist(_warp(warp, points), _warp(warp, points2)), params)


def gram_matrix(data: Dataset, warp: WarpMap | None, params: KernelParams) -> np.ndarray:
    u = _warp(warp, data.points)
    return _se(_sqdist(u, u), params)


def _cholesky(matrix: np.ndarray) -> np.ndarray:
    """Cholesky with escalating diagonal jitter."""
    for jitter in (0.0,) + JITTER_LADDER:
        try:
            chol = np.linalg.cholesky(matrix + jitter * np.eye(matrix.shape[0]) if jitter else matrix)
        except np.linalg.LinAlgError:
            continue
        if np.all(np.isfinite(chol)):
            return chol
    raise FitError(
        f"Cholesky failed for {matrix.shape[0]}x{matrix.shape[0]} matrix after jitter "
        f"ladder {JITTER_LADDER[0]:g} -> {JITTER_LADDER[-1]:g} was exhausted"
    )


def _standardise(values: np.ndarray) -> tuple[np.ndarray, float, float]:
    mean = float(np.mean(values))
    std = max(float(np.std(values)), Y_STD_FLOOR)
    return (values - mean) / std, mean, std


@dataclass(frozen=True)
class GpModel:
    """Fitted posterior; immutable once built."""

    params: KernelParams
    warp: WarpMap | None
    warped_points: np.ndarray
    chol: np.ndarray
    weights: np.ndarray
    y_mean: float
    y_std: float

    def predict(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Predictive mean and (latent) variance at an ``(m, d)`` array of points."""
        u = _warp(self.warp, points)
        k = _se(_sqdist(u, self.warped_points), self.params)
        mean = k @ self.weights
        v = solve_triangular(self.chol, k.T, lower=True, check_finite=False)
        var = np.maximum(self.params.amplitude - np.einsum("ij,ij->j", v, v), 0.0)
        return self.y_mean + self.y_std * mean, var * self.y_std ** 2


def fit(data: Dataset, warp: WarpMap | None, params: KernelParams) -> GpModel:
    """Condition the GP on standardised observations."""
    if len(data) < 1:
        raise ValueError("cannot fit a GP to an empty dataset")
    y, y_mean, y_std = _standardise(data.values)
    u = _warp(warp, data.points)
    gram = _se(_sqdist(u, u), params)
    chol = _cholesky(gram + params.noise_var * np.eye(len(data)))
    weights = solve_triangular(chol.T, solve_triangular(chol, y, lower=True), lower=False)
    return GpModel(params, warp, u, chol, weights, y_mean, y_std)


def predict(model: GpModel, x) -> tuple[float, float]:
    mean, var = model.predict(np.asarray(x, dtype=float).reshape(1, -1))
    return float(mean[0]), float(var[0])


def _lml(sqdist: np.ndarray, y: np.ndarray, params: KernelParams) -> float:
    n = y.shape[0]
    chol = _cholesky(_se(sqdist, params) + params.noise_var * np.eye(n))
    alpha = solve_triangular(chol, y, lower=True, check_finite=False)
    return float(-0.5 * alpha @ alpha - np.sum(np.log(np.diag(chol))) - 0.5 * n * _LOG_2PI)


def log_marginal_likelihood(data: Dataset, warp: WarpMap | None, params: KernelParams) -> float:
    """Log evidence of the standardised observations under ``params``."""
    y, _, _ = _standardise(data.values)
    u = _warp(warp, data.points)
    return _lml(_sqdist(u, u), y, params)


def fit_lengthscale_mle(data: Dataset, warp: WarpMap | None, base: KernelParams,
                        grid=LENGTHSCALE_GRID) -> KernelParams:
    """Grid-search the lengthscale that maximises the marginal likelihood.

    Ties go to the larger lengthscale. Only ``lengthscale`` is changed.
    """
    if len(data) < 2:
        raise ValueError("lengthscale MLE needs at least two observations")
    y, _, _ = _standardise(data.values)
    u = _warp(warp, data.points)
    sqdist = _sqdist(u, u)
    best, best_lml = None, -math.inf
    for lengthscale in sorted(grid, reverse=True):
        candidate = replace(base, lengthscale=float(lengthscale))
        try:
            value = _lml(sqdist, y, candidate)
        except FitError:
            continue
        if best is None or value > best_lml:
            best, best_lml = candidate, value
    if best is None:
        raise FitError(f"every lengthscale in the grid of {len(grid)} failed to factorise")
    return best
