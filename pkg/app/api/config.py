from fastapi import APIRouter

from ..core.config import settings
from ..lab.schema import Experiment

router = APIRouter()


@router.get("/config")
def get_config():
    return {
        "allowed_families": settings.allowed_families,
        "allowed_inits": settings.allowed_inits,
        "experiments": [e.value for e in Experiment],
        "defaults": {
            "delta": settings.default_delta,
            "beta": settings.default_beta,
            "v0": settings.default_v0,
            "threads": settings.threads,
            "grid_points": settings.grid_points,
            "max_density_n": settings.max_density_n,
            "chaos_term_cap": settings.chaos_term_cap,
        },
    }
