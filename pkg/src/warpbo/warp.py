"""Per-dimension priors over the optimum location and the CDF warping they induce.

A :class:`WarpMap` holds one :class:`PriorSpec` per search-space dimension.
Pushing a point through the per-dimension CDFs sends the box onto the unit
cube, stretching the regions the prior considers likely and squeezing the
rest.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from warpbo.special import (
    DomainError,
    erfc,
    reg_lower_incomplete_gamma,
    reg_upper_incomplete_gamma,
)

# Queries this close outside [a, b] (relative to b - a) are snapped onto the box.
BOUNDARY_SLACK = 1e-12
BISECTION_STEPS = 60

_SQRT2 = math.sqrt(2.0)


class PriorKind(str, enum.Enum):
    UNIFORM = "uniform"
    TRUNCATED_NORMAL = "truncated_normal"
    TRUNCATED_GAMMA = "truncated_gamma"


@dataclass(frozen=True)
class PriorSpec:
    """Prior belief about where the optimum lies along one dimension.

    ``mu``/``sigma`` parametrise the truncated normal and ``alpha``/``beta``
    (shape, inverse scale) the truncated gamma; both are restricted to
    ``[a, b]`` and renormalised.
    """

    kind: PriorKind
    a: float
    b: float
    mu: float = 0.0
    sigma: float = 1.0
    alpha: float = 1.0
    beta: float = 1.0
    _endpoints: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", PriorKind(self.kind))
        for name in ("a", "b", "mu", "sigma", "alpha", "beta"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"PriorSpec.{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        if not self.a < self.b:
            raise ValueError(f"PriorSpec needs a < b, got a={self.a}, b={self.b}")
        if self.kind is PriorKind.TRUNCATED_NORMAL and not self.sigma > 0:
            raise ValueError(f"truncated normal needs sigma > 0, got {self.sigma}")
        if self.kind is PriorKind.TRUNCATED_GAMMA:
            if not (self.alpha > 0 and self.beta > 0):
                raise ValueError(
                    f"truncated gamma needs alpha > 0 and beta > 0, got {self.alpha}, {self.beta}"
                )
            if self.a < 0:
                raise ValueError(f"truncated gamma needs a >= 0, got a={self.a}")
        # Every point of (a, b) must keep non-zero optimum likelihood, otherwise
        # the warp collapses whole intervals and the optimiser can never reach them.
        if not _mass(self) > 0.0:
            raise ValueError(f"prior {self} puts no probability mass on (a, b)")
        object.__setattr__(self, "_endpoints", _endpoints(self))

    @classmethod
    def uniform(cls, a: float, b: float) -> "PriorSpec":
        return cls(PriorKind.UNIFORM, a, b)

    @classmethod
    def truncated_normal(cls, mu: float, sigma: float, a: float, b: float) -> "PriorSpec":
        return cls(PriorKind.TRUNCATED_NORMAL, a, b, mu=mu, sigma=sigma)

    @classmethod
    def truncated_gamma(cls, alpha: float, beta: float, a: float, b: float) -> "PriorSpec":
        return cls(PriorKind.TRUNCATED_GAMMA, a, b, alpha=alpha, beta=beta)


def _normal_upper_side(prior: PriorSpec) -> bool:
    # Whole support right of the mode: use survival functions to avoid 1 - 1.
    return prior.a >= prior.mu


def _gamma_upper_side(prior: PriorSpec) -> bool:
    return prior.beta * prior.a >= prior.alpha + 1.0


def _raw_cdf(prior: PriorSpec, x):
    """Untruncated CDF (or survival function on the upper side) at ``x``."""
    if prior.kind is PriorKind.UNIFORM:
        return x
    if prior.kind is PriorKind.TRUNCATED_NORMAL:
        z = (x - prior.mu) / (prior.sigma * _SQRT2)
        return erfc(z) if _normal_upper_side(prior) else erfc(-z)
    if _gamma_upper_side(prior):
        return reg_upper_incomplete_gamma(prior.alpha, prior.beta * x)
    return reg_lower_incomplete_gamma(prior.alpha, prior.beta * x)


def _endpoints(prior: PriorSpec) -> tuple[float, float]:
    """``(value at a, signed mass)`` so that ``cdf = (raw(x) - value_a) / mass``."""
    fa, fb = _raw_cdf(prior, prior.a), _raw_cdf(prior, prior.b)
    return fa, fb - fa


def _mass(prior: PriorSpec) -> float:
    fa, mass = _endpoints(prior)
    upper = (prior.kind is PriorKind.TRUNCATED_NORMAL and _normal_upper_side(prior)) or (
        prior.kind is PriorKind.TRUNCATED_GAMMA and _gamma_upper_side(prior))
    return -mass if upper else mass


def _check_support(prior: PriorSpec, x: np.ndarray) -> np.ndarray:
    slack = BOUNDARY_SLACK * (prior.b - prior.a)
    bad = ~((x >= prior.a - slack) & (x <= prior.b + slack))
    if np.any(bad):
        offending = np.asarray(x)[bad].ravel()[0]
        raise DomainError(f"x={offending!r} outside prior support [{prior.a}, {prior.b}]")
    return np.clip(x, prior.a, prior.b)


def cdf(prior: PriorSpec, x):
    """Evaluate the prior CDF on ``[a, b]``.

    Scalar or array ``x``. Values are pinned to exactly 0 at ``a`` and 1 at
    ``b``. Raises :class:`DomainError` for ``x`` outside the support.
    """
    scalar = np.ndim(x) == 0
    x = _check_support(prior, np.asarray(x, dtype=float))
    a, b = prior.a, prior.b
    fa, mass = prior._endpoints
    u = (_raw_cdf(prior, x) - fa) / mass
    u = np.clip(u, 0.0, 1.0)
    u = np.where(x <= a, 0.0, np.where(x >= b, 1.0, u))
    return float(u) if scalar else u


def inverse_cdf(prior: PriorSpec, u):
    """Quantile function by bisection on the monotone CDF.

    Works for scalar or array ``u`` in ``[0, 1]``; uses the same 60-step
    bisection for every prior kind.
    """
    scalar = np.ndim(u) == 0
    u = np.asarray(u, dtype=float)
    if np.any(~((u >= 0.0) & (u <= 1.0))):
        raise DomainError(f"inverse_cdf needs u in [0, 1], got {u!r}")
    if prior.kind is PriorKind.UNIFORM:
        x = prior.a + u * (prior.b - prior.a)
        x = np.where(u >= 1.0, prior.b, x)
        return float(x) if scalar else x
    lo = np.full(u.shape, prior.a)
    hi = np.full(u.shape, prior.b)
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        below = cdf(prior, mid) < u
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    x = 0.5 * (lo + hi)
    x = np.where(u <= 0.0, prior.a, np.where(u >= 1.0, prior.b, x))
    return float(x) if scalar else x


@dataclass(frozen=True)
class WarpMap:
    """One prior per dimension; maps the search box onto the unit cube."""

    dims: tuple[PriorSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(self.dims))
        if not self.dims:
            raise ValueError("WarpMap needs at least one dimension")

    @property
    def dim(self) -> int:
        return len(self.dims)

    @property
    def bounds(self) -> np.ndarray:
        return np.array([[p.a, p.b] for p in self.dims])

    @classmethod
    def uniform(cls, bounds) -> "WarpMap":
        return cls(tuple(PriorSpec.uniform(a, b) for a, b in np.asarray(bounds, dtype=float)))

    def check_bounds(self, bounds) -> None:
        bounds = np.asarray(bounds, dtype=float)
        if bounds.shape != (self.dim, 2):
            raise ValueError(f"warp has {self.dim} dimensions, bounds have shape {bounds.shape}")
        if not np.array_equal(bounds, self.bounds):
            raise ValueError(f"warp support {self.bounds.tolist()} differs from box {bounds.tolist()}")

    def __call__(self, points) -> np.ndarray:
        return warp_points(self, points)


def warp_points(warp: WarpMap, points) -> np.ndarray:
    """Warp an ``(n, d)`` array (or a single ``d``-vector) into ``[0, 1]^d``."""
    points = np.asarray(points, dtype=float)
    single = points.ndim == 1
    pts = np.atleast_2d(points)
    if pts.shape[1] != warp.dim:
        raise ValueError(f"expected {warp.dim}-dimensional points, got shape {points.shape}")
    out = np.empty_like(pts)
    for m, prior in enumerate(warp.dims):
        try:
            out[:, m] = cdf(prior, pts[:, m])
        except DomainError as exc:
            raise DomainError(f"dimension {m}: {exc}") from exc
    return out[0] if single else out


def warp_point(warp: WarpMap, x: Sequence[float]) -> np.ndarray:
    return warp_points(warp, np.asarray(x, dtype=float).reshape(-1))
