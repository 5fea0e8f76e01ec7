# app/lab/laws/entries.py
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SQRT3 = float(np.sqrt(3.0))


@dataclass(frozen=True)
class GaussianEntries:
    name: str = "gaussian"

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return rng.standard_normal(size)


@dataclass(frozen=True)
class RademacherEntries:
    name: str = "rademacher"

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return 2.0 * rng.integers(0, 2, size=size).astype(float) - 1.0


@dataclass(frozen=True)
class UniformEntries:
    """Uniform on [-sqrt(3), sqrt(3)]: bounded, variance one, no atoms."""
    name: str = "uniform"

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return rng.uniform(-SQRT3, SQRT3, size=size)
