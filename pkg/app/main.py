# app/main.py
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import ValidationError

from .api import config, download, health, instances, schedule, sse, studies
from .core.errors import LabError
from .core.logging import setup_logging
from .models.db import init_db

setup_logging()
init_db()

app = FastAPI(title="BP/AMP Lab")

app.include_router(health.router,    prefix="/api")
app.include_router(config.router,    prefix="/api")
app.include_router(schedule.router,  prefix="/api")
app.include_router(instances.router, prefix="/api")
app.include_router(studies.router,   prefix="/api")
app.include_router(sse.router,       prefix="/api")
app.include_router(download.router,  prefix="/api")


@app.exception_handler(LabError)
@app.exception_handler(RequestValidationError)
@app.exception_handler(ValidationError)
async def bad_input(request: Request, exc: Exception):
    return JSONResponse(status_code=400, content={"detail": str(exc)})
