# app/lab/laws/initial.py
"""Initial message densities, all centred with variance v0."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GaussInit:
    v0: float
    name: str = "gauss"

    def pdf(self, s: np.ndarray) -> np.ndarray:
        return np.exp(-0.5 * s**2 / self.v0) / np.sqrt(2.0 * np.pi * self.v0)


@dataclass(frozen=True)
class UniformInit:
    v0: float
    name: str = "uniform"

    def pdf(self, s: np.ndarray) -> np.ndarray:
        half = np.sqrt(3.0 * self.v0)
        out = np.where(np.abs(s) < half, 0.5 / half, 0.0)
        # half weight on the jump keeps trapezoid moments second order
        return np.where(np.isclose(np.abs(s), half, rtol=0.0, atol=1e-12), 0.25 / half, out)


@dataclass(frozen=True)
class LaplaceInit:
    v0: float
    name: str = "laplace"

    def pdf(self, s: np.ndarray) -> np.ndarray:
        b = np.sqrt(self.v0 / 2.0)
        return np.exp(-np.abs(s) / b) / (2.0 * b)


@dataclass(frozen=True)
class SkewInit:
    """Exponential shifted to mean zero; third cumulant 2 * v0**1.5."""
    v0: float
    name: str = "skew"

    def pdf(self, s: np.ndarray) -> np.ndarray:
        scale = np.sqrt(self.v0)
        u = s / scale + 1.0
        out = np.where(u > 0.0, np.exp(-np.clip(u, 0.0, None)) / scale, 0.0)
        return np.where(np.isclose(u, 0.0, rtol=0.0, atol=1e-12), 0.5 / scale, out)
