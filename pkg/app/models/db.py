from datetime import datetime, timezone

from sqlmodel import Field, Session, SQLModel, create_engine

from ..core.config import settings

engine = create_engine(f"sqlite:///{settings.db_path}", echo=False)


def _now() -> datetime:
    return datetime.now(timezone.utc)


class Job(SQLModel, table=True):
    """One background study."""

    id: str = Field(primary_key=True)
    status: str = "queued"
    created_at: datetime = Field(default_factory=_now)
    updated_at: datetime = Field(default_factory=_now)
    message: str | None = None
    experiment: str | None = None
    out_dir: str | None = None
    failures: int | None = None


def init_db() -> None:
    SQLModel.metadata.create_all(engine)


def get_session() -> Session:
    return Session(engine)


def set_status(job_id: str, status: str, **fields) -> None:
    with get_session() as s:
        job = s.get(Job, job_id)
        job.status = status
        for key, value in fields.items():
            setattr(job, key, value)
        job.updated_at = _now()
        s.add(job)
        s.commit()
