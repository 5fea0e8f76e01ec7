# app/api/studies.py
import asyncio
import logging
import uuid

from fastapi import APIRouter, HTTPException

from ..core.config import settings
from ..core.sse import event_bus
from ..lab.pipeline import run_experiment
from ..lab.schema import ExperimentConfig
from ..models.db import Job, get_session, set_status

log = logging.getLogger(__name__)

router = APIRouter(tags=["studies"])

_tasks: set[asyncio.Task] = set()


async def run_study_job(job_id: str, cfg: ExperimentConfig) -> None:
    try:
        set_status(job_id, "running")
        await event_bus.publish(job_id, f"Running {cfg.experiment.value} for N={cfg.n_list}")
        result = await asyncio.to_thread(
            run_experiment, cfg, lambda msg: event_bus.publish_threadsafe(job_id, msg)
        )
        set_status(job_id, "done", out_dir=str(result.out_dir), failures=result.failures)
    except Exception as e:
        log.exception("study job %s failed", job_id)
        set_status(job_id, "error", message=str(e))
        await event_bus.publish(job_id, f"ERROR: {e}")


@router.post("/studies")
async def start_study(cfg: ExperimentConfig):
    job_id = str(uuid.uuid4())
    # clients never choose where files land
    cfg = cfg.model_copy(update={"out_dir": settings.studies_dir / job_id})
    with get_session() as s:
        s.add(Job(id=job_id, status="queued", experiment=cfg.experiment.value))
        s.commit()
    task = asyncio.create_task(run_study_job(job_id, cfg))
    _tasks.add(task)
    task.add_done_callback(_tasks.discard)
    return {"job_id": job_id}


@router.get("/status/{job_id}")
def get_status(job_id: str):
    with get_session() as s:
        j = s.get(Job, job_id)
        if not j:
            raise HTTPException(404, "job not found")
        return {"id": j.id, "status": j.status, "message": j.message,
                "experiment": j.experiment, "failures": j.failures}
