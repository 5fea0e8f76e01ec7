# app/api/schedule.py
from dataclasses import asdict

from fastapi import APIRouter, HTTPException, Query

from ..core.errors import ScheduleError
from ..lab.schedule import VarianceSchedule

router = APIRouter(tags=["schedule"])


@router.get("/schedule")
def get_schedule(
    delta: float = Query(..., gt=0.0, lt=1.0),
    beta: float = Query(1.0, ge=0.0),
    v0: float = Query(1.0, gt=0.0),
    tmax: int = Query(10, ge=0, le=200),
):
    try:
        sched = VarianceSchedule(v0=v0, beta=beta, delta=delta)
        table = sched.table(tmax)
    except ScheduleError as e:
        raise HTTPException(400, str(e)) from e
    # NaN is not valid JSON
    table = table.astype(object).where(table.notna(), None)
    return {"rates": asdict(sched.contraction_rates()), "rows": table.to_dict(orient="records")}
