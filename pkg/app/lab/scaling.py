# app/lab/scaling.py
"""Log-log fits that operationalise O(N^alpha) claims."""
from __future__ import annotations

import logging
from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np
from sklearn.linear_model import LinearRegression
from sklearn.metrics import r2_score

from ..core.errors import FitError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    r2: float
    n_points: int


def loglog_fit(x: np.ndarray, y: np.ndarray) -> ScalingFit:
    """OLS of log y on log x; inputs must be positive."""
    lx = np.log(np.asarray(x, dtype=float)).reshape(-1, 1)
    ly = np.log(np.asarray(y, dtype=float))
    model = LinearRegression().fit(lx, ly)
    pred = model.predict(lx)
    # r2_score is undefined for a constant target; an exact constant fits perfectly
    r2 = float(r2_score(ly, pred)) if np.ptp(ly) > 0 else 1.0
    return ScalingFit(float(model.coef_[0]), float(model.intercept_), r2, len(ly))


def fit_scaling(points: Iterable[tuple[float, float]]) -> ScalingFit:
    pts = [(float(n), float(e)) for n, e in points]
    kept = [(n, e) for n, e in pts if n > 0 and e > 0 and np.isfinite(e)]
    if len(kept) < len(pts):
        log.warning("dropped %d nonpositive points from scaling fit", len(pts) - len(kept))
    if len(kept) < 3:
        raise FitError(f"need at least 3 positive points, have {len(kept)}")
    ns, errs = zip(*kept, strict=True)
    return loglog_fit(np.array(ns), np.array(errs))


def exceedance_rates(values: np.ndarray, n: int, alpha: float = -0.5) -> tuple[float, float]:
    """Fractions of replicates above N^alpha and N^(alpha + 0.1)."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return float("nan"), float("nan")
    return float(np.mean(values > n**alpha)), float(np.mean(values > n ** (alpha + 0.1)))
