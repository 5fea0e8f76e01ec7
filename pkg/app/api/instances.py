# app/api/instances.py
"""Stored problem instances and single runs on them.

Instances live in INSTANCES_DIR as ``<id>.csv`` plus manifest, where the id is
the first 16 hex digits of the content hash.
"""
from __future__ import annotations

import logging
import math
import tempfile
from pathlib import Path

from fastapi import APIRouter, File, HTTPException, UploadFile
from pydantic import BaseModel, Field

from ..core.config import settings
from ..lab.amp_solver import run_amp
from ..lab.ensemble import EnsembleSpec, Family, OutcomeMode, ProblemInstance, build_instance
from ..lab.gaussian_bp import run_bp
from ..lab.io import instance_manifest, read_instance, write_instance
from ..lab.schedule import VarianceSchedule

log = logging.getLogger(__name__)

router = APIRouter(tags=["instances"])


class GenerateRequest(BaseModel):
    family: Family = Family.gaussian
    m: int = Field(gt=0)
    n: int = Field(gt=0)
    seed: int = Field(default=0, ge=0)
    outcome: OutcomeMode = OutcomeMode.uniform_box


class RunRequest(BaseModel):
    beta: float = Field(default=settings.default_beta, ge=0.0)
    v0: float = Field(default=settings.default_v0, gt=0.0)
    tmax: int = Field(default=8, ge=1, le=500)


def _store(inst: ProblemInstance) -> dict:
    inst_id = inst.content_hash()[:16]
    write_instance(inst, settings.instances_dir / f"{inst_id}.csv")
    return {"id": inst_id, **instance_manifest(inst)}


def _load(inst_id: str) -> ProblemInstance:
    if not inst_id.isalnum():
        raise HTTPException(400, "invalid instance id")
    path = settings.instances_dir / f"{inst_id}.csv"
    if not path.exists():
        raise HTTPException(404, "instance not found")
    return read_instance(path)


def _records(df) -> list[dict]:
    return [{k: (None if isinstance(v, float) and not math.isfinite(v) else v)
             for k, v in row.items()} for row in df.to_dict(orient="records")]


@router.post("/instances")
def generate_instance(req: GenerateRequest):
    spec = EnsembleSpec(family=req.family, m=req.m, n=req.n, seed=req.seed)
    return _store(build_instance(spec, req.outcome))


@router.post("/instances/upload")
async def upload_instance(file: UploadFile = File(...)):
    with tempfile.TemporaryDirectory() as tmp:
        dest = Path(tmp) / "upload.csv"
        dest.write_bytes(await file.read())
        inst = read_instance(dest)
    log.info("uploaded %s as %dx%d instance", file.filename, inst.m, inst.n)
    return _store(inst)


@router.get("/instances/{inst_id}")
def get_instance(inst_id: str):
    return {"id": inst_id, **instance_manifest(_load(inst_id))}


@router.post("/instances/{inst_id}/amp")
def amp_run(inst_id: str, req: RunRequest):
    inst = _load(inst_id)
    sched = VarianceSchedule(v0=req.v0, beta=req.beta, delta=inst.delta)
    trace = run_amp(inst, sched, req.tmax)
    return {"guaranteed": trace.guaranteed, "diverged": trace.diverged,
            "rows": _records(trace.frame())}


@router.post("/instances/{inst_id}/bp")
def bp_run(inst_id: str, req: RunRequest):
    inst = _load(inst_id)
    trace = run_bp(inst, req.beta, req.v0, req.tmax)
    return {"rows": _records(trace.summary)}
