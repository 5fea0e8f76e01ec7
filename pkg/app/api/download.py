# app/api/download.py
from __future__ import annotations

import io
import zipfile
from pathlib import Path

from fastapi import APIRouter, HTTPException
from fastapi.responses import StreamingResponse

from ..models.db import Job, get_session

router = APIRouter(tags=["download"])


def _study_files(job_id: str) -> tuple[Path, list[Path]]:
    with get_session() as s:
        job = s.get(Job, job_id)
    if job is None:
        raise HTTPException(404, "job not found")
    if job.status != "done" or not job.out_dir:
        raise HTTPException(409, f"job is {job.status}")
    root = Path(job.out_dir)
    files = sorted(p for p in root.iterdir() if p.is_file()) if root.is_dir() else []
    if not files:
        raise HTTPException(404, "no study files")
    return root, files


@router.get("/download/{job_id}")
def download_study(job_id: str):
    root, files = _study_files(job_id)
    fname = f"{root.name}_{job_id[:8]}.zip"
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        for fp in files:
            zf.write(fp, arcname=f"{root.name}/{fp.name}")
    buf.seek(0)
    headers = {"Content-Disposition": f'attachment; filename="{fname}"'}
    return StreamingResponse(buf, media_type="application/zip", headers=headers)
