from typing import Protocol

import numpy as np


class EntryLaw(Protocol):
    """Centred, unit-variance, atomless law for matrix entries (scaled by callers)."""
    name: str

    def sample(self, rng: np.random.Generator, size) -> np.ndarray: ...


class InitialLaw(Protocol):
    """Mean-zero initial message density with variance ``v0``."""
    name: str
    v0: float

    def pdf(self, s: np.ndarray) -> np.ndarray: ...
