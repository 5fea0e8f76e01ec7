# app/lab/schema.py
"""Study configuration.

Flat config format: one ``key = value`` per line, ``#`` starts a comment, blank
lines are skipped, keys are ExperimentConfig field names, lists are comma
separated (``n_list = 100, 200, 400``). Values are parsed by pydantic.
"""
from __future__ import annotations

from enum import Enum
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..core.config import settings
from .ensemble import Family, OutcomeMode

LIST_FIELDS = {"n_list"}


class Experiment(str, Enum):
    bp_variance = "bp_variance"
    bp_consensus = "bp_consensus"
    shadow = "shadow"
    amp_convergence = "amp_convergence"
    chaos = "chaos"
    density_gauss_gap = "density_gauss_gap"
    tails = "tails"
    edgeworth_tails = "edgeworth_tails"
    concentration = "concentration"


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    experiment: Experiment
    n_list: list[int]
    delta: float = Field(default=0.5, gt=0.0, lt=1.0)
    # fixed number of factors for every N; None means round(delta * N)
    m: int | None = Field(default=None, ge=1)
    beta: float = Field(default=1.0, ge=0.0)
    v0: float = Field(default=1.0, gt=0.0)
    q: float = Field(default=2.0, gt=0.0)
    seeds: int = Field(default=30, ge=1)
    out_dir: Path = settings.out_dir
    tmax: int = Field(default=8, ge=1)
    family: Family = Family.gaussian
    init: str = "uniform"
    outcome: OutcomeMode = OutcomeMode.uniform_box
    grid_points: int = Field(default=256, ge=16)
    base_seed: int = Field(default=0, ge=0)
    threads: int = Field(default=settings.threads, ge=1)
    trials: int = Field(default=100_000, ge=1)
    p: int = Field(default=3, ge=1)
    alpha: float = -0.5
    dat: bool = False
    plot: bool = False

    @field_validator("n_list")
    @classmethod
    def _increasing(cls, v: list[int]) -> list[int]:
        if not v:
            raise ValueError("n_list must not be empty")
        if any(n < 2 for n in v):
            raise ValueError("every N must be at least 2")
        if any(b <= a for a, b in zip(v, v[1:], strict=False)):
            raise ValueError("n_list must be strictly increasing")
        return v

    @field_validator("init")
    @classmethod
    def _known_init(cls, v: str) -> str:
        if v not in settings.allowed_inits:
            raise ValueError(f"init must be one of {settings.allowed_inits}")
        return v

    @model_validator(mode="after")
    def _m_below_n(self) -> ExperimentConfig:
        if self.m is not None and self.m >= self.n_list[0]:
            raise ValueError(f"fixed m={self.m} must be below every N")
        return self


def parse_flat_config(text: str) -> dict:
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in LIST_FIELDS:
            out[key] = [item.strip() for item in value.split(",") if item.strip()]
        else:
            out[key] = value
    return out


def load_config(path: Path | None = None, **overrides) -> ExperimentConfig:
    """Read a flat config file (optional) and apply non-None overrides on top."""
    data = parse_flat_config(Path(path).read_text(encoding="utf-8")) if path else {}
    data.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**data)
