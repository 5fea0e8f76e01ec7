import os
import tempfile

# settings are read once at import time; point every directory at a scratch area first
_SCRATCH = tempfile.mkdtemp(prefix="bpamp-tests-")
for _key, _sub in (
    ("DATA_DIR", "data"),
    ("BPAMP_OUT_DIR", "out"),
    ("INSTANCES_DIR", "instances"),
    ("STUDIES_DIR", "studies"),
    ("CHARTS_DIR", "charts"),
):
    os.environ.setdefault(_key, os.path.join(_SCRATCH, _sub))
os.environ.setdefault("DB_PATH", os.path.join(_SCRATCH, "bpamp.sqlite"))

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from app.lab.ensemble import EnsembleSpec, ProblemInstance, build_instance  # noqa: E402


@pytest.fixture
def hand_instance() -> ProblemInstance:
    """2 x 3 instance with hand-picked entries."""
    a = np.array([[0.9, -0.4, 0.3], [0.2, 0.7, -0.5]])
    y = np.array([0.5, -0.3])
    return ProblemInstance(a=a, y=y)


@pytest.fixture
def make_instance():
    def build(m: int, n: int, seed: int = 0, family: str = "gaussian") -> ProblemInstance:
        return build_instance(EnsembleSpec(family=family, m=m, n=n, seed=seed))

    return build
