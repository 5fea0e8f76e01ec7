from __future__ import annotations

import os
from pathlib import Path

from pydantic import BaseModel


class Settings(BaseModel):
    data_dir: Path = Path(os.getenv("DATA_DIR", "data")).resolve()
    out_dir: Path = Path(os.getenv("BPAMP_OUT_DIR", "data/out")).resolve()
    instances_dir: Path = Path(os.getenv("INSTANCES_DIR", "data/instances")).resolve()
    studies_dir: Path = Path(os.getenv("STUDIES_DIR", "data/studies")).resolve()
    charts_dir: Path = Path(os.getenv("CHARTS_DIR", "data/charts")).resolve()
    db_path: Path = Path(os.getenv("DB_PATH", "data/bpamp.sqlite")).resolve()

    log_level: str = os.getenv("LOG_LEVEL", "INFO").upper()
    threads: int = int(os.getenv("BPAMP_THREADS", "1"))

    # numerical guards
    chaos_term_cap: int = int(float(os.getenv("CHAOS_TERM_CAP", "1e8")))
    power_iters: int = int(os.getenv("POWER_ITERS", "50"))
    power_tol: float = float(os.getenv("POWER_TOL", "1e-8"))
    grid_points: int = int(os.getenv("GRID_POINTS", "512"))
    max_grid_points: int = int(os.getenv("MAX_GRID_POINTS", "1024"))
    max_density_n: int = int(os.getenv("MAX_DENSITY_N", "32"))

    # defaults offered by the API / CLI
    default_delta: float = float(os.getenv("DEFAULT_DELTA", "0.5"))
    default_beta: float = float(os.getenv("DEFAULT_BETA", "1.0"))
    default_v0: float = float(os.getenv("DEFAULT_V0", "1.0"))
    allowed_families: list[str] = ["gaussian", "rademacher", "uniform"]
    allowed_inits: list[str] = ["gauss", "uniform", "laplace", "skew"]


settings = Settings()
for p in (settings.data_dir, settings.out_dir, settings.instances_dir,
          settings.studies_dir, settings.charts_dir):
    p.mkdir(parents=True, exist_ok=True)
