# app/lab/ensemble.py
"""Random problem instances: the matrix A (m x n) and the outcome vector y."""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..core.errors import EnsembleError
from .laws.loader import create_entry_law
from .seeding import OUTCOME_STREAM, SUPPORT_STREAM, rng_for

log = logging.getLogger(__name__)

MAX_RESAMPLE = 100


class Family(str, Enum):
    gaussian = "gaussian"
    rademacher = "rademacher"
    uniform = "uniform"


class OutcomeMode(str, Enum):
    uniform_box = "uniform_box"
    planted = "planted"


class EnsembleSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    family: Family = Family.gaussian
    m: int = Field(gt=0)
    n: int = Field(gt=0)
    seed: int = Field(default=0, ge=0, lt=2**64)

    @model_validator(mode="after")
    def _check_dims(self) -> EnsembleSpec:
        if self.m >= self.n:
            raise ValueError(f"need m < n, got m={self.m}, n={self.n}")
        return self

    @property
    def delta(self) -> float:
        return self.m / self.n


@dataclass(frozen=True)
class ProblemInstance:
    a: np.ndarray
    y: np.ndarray
    spec: EnsembleSpec | None = None
    delta: float = field(init=False)

    def __post_init__(self) -> None:
        a = np.array(self.a, dtype=float)
        y = np.array(self.y, dtype=float)
        if a.ndim != 2 or y.ndim != 1 or a.shape[0] != y.shape[0]:
            raise EnsembleError(f"shape mismatch: a{a.shape}, y{y.shape}")
        a.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "delta", a.shape[0] / a.shape[1])

    @property
    def m(self) -> int:
        return self.a.shape[0]

    @property
    def n(self) -> int:
        return self.a.shape[1]

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(np.asarray([self.m, self.n], dtype="<i8").tobytes())
        h.update(np.ascontiguousarray(self.a, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(self.y, dtype="<f8").tobytes())
        return h.hexdigest()


def check_instance(inst: ProblemInstance) -> None:
    """Enforce the hypotheses the iterations are analysed under."""
    if inst.m >= inst.n:
        raise EnsembleError(f"need m < n, got {inst.a.shape}")
    if np.any(inst.a == 0.0):
        raise EnsembleError("matrix has exact zero entries")
    if np.max(np.abs(inst.y), initial=0.0) > 1.0:
        raise EnsembleError("outcome violates max |y_b| <= 1")


# --------------------------
# Sampling
# --------------------------
def sample_matrix(spec: EnsembleSpec) -> np.ndarray:
    law = create_entry_law(spec.family.value)
    rng = rng_for(spec.seed)
    scale = 1.0 / np.sqrt(spec.m)
    a = law.sample(rng, (spec.m, spec.n)) * scale
    for _ in range(MAX_RESAMPLE):
        zeros = a == 0.0
        if not zeros.any():
            return a
        log.debug("resampling %d zero entries", int(zeros.sum()))
        a[zeros] = law.sample(rng, int(zeros.sum())) * scale
    raise EnsembleError(f"zero entries persist after {MAX_RESAMPLE} resamples")


def planted_outcome(a: np.ndarray, x0: np.ndarray) -> np.ndarray:
    y = np.asarray(a, dtype=float) @ np.asarray(x0, dtype=float)
    peak = np.max(np.abs(y), initial=0.0)
    return y / peak if peak > 1.0 else y


def sample_outcome(
    spec: EnsembleSpec,
    mode: OutcomeMode | str = OutcomeMode.uniform_box,
    a: np.ndarray | None = None,
    x0: np.ndarray | None = None,
) -> np.ndarray:
    mode = OutcomeMode(mode)
    if mode is OutcomeMode.uniform_box:
        return rng_for(spec.seed, OUTCOME_STREAM).uniform(-1.0, 1.0, size=spec.m)

    if a is None:
        a = sample_matrix(spec)
    if x0 is None:
        rng = rng_for(spec.seed, SUPPORT_STREAM)
        k = max(1, spec.n // 10)
        x0 = np.zeros(spec.n)
        x0[rng.choice(spec.n, size=k, replace=False)] = rng.standard_normal(k)
    return planted_outcome(a, x0)


def build_instance(
    spec: EnsembleSpec, mode: OutcomeMode | str = OutcomeMode.uniform_box
) -> ProblemInstance:
    a = sample_matrix(spec)
    inst = ProblemInstance(a=a, y=sample_outcome(spec, mode, a=a), spec=spec)
    check_instance(inst)
    return inst


# --------------------------
# Diagnostics
# --------------------------
@dataclass(frozen=True)
class ConcentrationReport:
    max_row_dev: float
    max_col_dev: float


def row_col_concentration(a: np.ndarray, delta: float | None = None) -> ConcentrationReport:
    """Deviation of column norms from 1 and of row norms from 1/delta."""
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        raise EnsembleError("empty matrix")
    delta = a.shape[0] / a.shape[1] if delta is None else delta
    sq = a**2
    return ConcentrationReport(
        max_row_dev=float(np.max(np.abs(sq.sum(axis=0) - 1.0))),
        max_col_dev=float(np.max(np.abs(sq.sum(axis=1) - 1.0 / delta))),
    )
