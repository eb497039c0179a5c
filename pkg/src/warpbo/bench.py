"""Synthetic objectives with known minima."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

GAUSSIAN3D_CENTRE = np.array([0.2, 0.2, 0.2])


def gaussian3d(x) -> float:
    """``1 - exp(-|x - mu|^2 / 2)`` with ``mu = (0.2, 0.2, 0.2)``; minimum 0 at ``mu``."""
    x = np.asarray(x, dtype=float)
    diff = x - GAUSSIAN3D_CENTRE
    return float(1.0 - math.exp(-0.5 * float(diff @ diff)))


def branin(x) -> float:
    """Branin-Hoo function; three global minima of about 0.397887."""
    x1, x2 = (float(v) for v in x)
    a, b, c = 1.0, 5.1 / (4.0 * math.pi ** 2), 5.0 / math.pi
    r, s, t = 6.0, 10.0, 1.0 / (8.0 * math.pi)
    return a * (x2 - b * x1 ** 2 + c * x1 - r) ** 2 + s * (1.0 - t) * math.cos(x1) + s


def levy2d(x) -> float:
    """Two-dimensional Levy function; minimum 0 at (1, 1)."""
    w = 1.0 + (np.asarray(x, dtype=float) - 1.0) / 4.0
    w1, w2 = float(w[0]), float(w[1])
    return (math.sin(math.pi * w1) ** 2
            + (w1 - 1.0) ** 2 * (1.0 + 10.0 * math.sin(math.pi * w1 + 1.0) ** 2)
            + (w2 - 1.0) ** 2 * (1.0 + math.sin(2.0 * math.pi * w2) ** 2))


BRANIN_MIN = 10.0 / (8.0 * math.pi)


@dataclass(frozen=True)
class Benchmark:
    name: str
    func: Callable[[np.ndarray], float]
    bounds: tuple[tuple[float, float], ...]
    known_min_value: float
    known_minimizers: tuple[tuple[float, ...], ...] = field(default=())

    @property
    def dim(self) -> int:
        return len(self.bounds)

    def __call__(self, x) -> float:
        return self.func(x)


BENCHMARKS = {
    "gaussian3d": Benchmark("gaussian3d", gaussian3d, ((-2.0, 2.0),) * 3, 0.0,
                            ((0.2, 0.2, 0.2),)),
    "branin": Benchmark("branin", branin, ((-5.0, 10.0), (0.0, 15.0)), BRANIN_MIN,
                        ((-math.pi, 12.275), (math.pi, 2.275), (3.0 * math.pi, 2.475))),
    "levy2d": Benchmark("levy2d", levy2d, ((-10.0, 10.0), (-10.0, 10.0)), 0.0, ((1.0, 1.0),)),
}


def get_benchmark(name: str) -> Benchmark:
    try:
        return BENCHMARKS[name]
    except KeyError:
        raise KeyError(f"unknown objective {name!r}; choose from {sorted(BENCHMARKS)}") from None
