# app/lab/tails.py
"""Monte-Carlo tail and concentration checks."""
from __future__ import annotations

import logging
import math
from collections.abc import Sequence

import numpy as np
import pandas as pd
from scipy import optimize

from ..core.config import settings
from ..core.errors import FitError
from .density_bp import edgeworth_field, initial_density, make_grid, moments, window_half_width
from .ensemble import EnsembleSpec, ProblemInstance, row_col_concentration, sample_matrix
from .laws.base import InitialLaw
from .laws.loader import create_entry_law, create_initial_law
from .scaling import ScalingFit, fit_scaling, loglog_fit
from .seeding import replicate_seed, rng_for

log = logging.getLogger(__name__)

MIN_TRIALS = 10_000
DEGENERATE_TOL = 1e-12


# --------------------------
# Weighted power sums
# --------------------------
def _bound(lam: np.ndarray, k: float, p: int, norm2: float, n: int) -> np.ndarray:
    """Two-regime bound with front constant k standing in for (2K)^p."""
    gauss = 2.0 * np.exp(-lam**2 / (8.0 * k * norm2))
    if p == 1:
        return gauss
    heavy = 2.0 * np.exp(-0.125 * (lam * n / (4.0 * k * norm2)) ** (2.0 / p))
    crossover = 4.0 * k * norm2 * n ** ((2.0 - p) / (2.0 * (p - 1.0)))
    return np.where(lam <= crossover, gauss, heavy)


def tail_check(
    family: str,
    p: int,
    weights: np.ndarray,
    lambdas: Sequence[float],
    trials: int,
    seed: int = 0,
    batch: int = 50_000,
) -> pd.DataFrame:
    """Empirical P(|sum_j x_j X_j^p| >= lambda) next to the fitted two-regime bound."""
    if p < 1:
        raise ValueError("p must be at least 1")
    if trials < MIN_TRIALS:
        raise ValueError(f"need at least {MIN_TRIALS} trials, got {trials}")
    weights = np.asarray(weights, dtype=float)
    lambdas = np.sort(np.asarray(lambdas, dtype=float))
    law, rng = create_entry_law(family), rng_for(seed)
    hits = np.zeros(lambdas.shape[0])
    for start in range(0, trials, batch):
        size = min(batch, trials - start)
        sums = np.abs((law.sample(rng, (size, weights.shape[0])) ** p) @ weights)
        hits += (sums[:, None] >= lambdas[None, :]).sum(axis=0)
    surv = hits / trials
    se = np.sqrt(surv * (1.0 - surv) / trials)

    norm2, n = float(weights @ weights), weights.shape[0]
    bound = np.full(lambdas.shape[0], np.nan)
    k_fit = math.nan
    if surv[0] > 0:
        # front constant matched at the smallest lambda on the log scale
        target = math.log(surv[0])

        def gap(logk: float) -> float:
            value = float(_bound(lambdas[:1], math.exp(logk), p, norm2, n)[0])
            return math.log(max(value, 1e-300)) - target

        try:
            k_fit = math.exp(optimize.brentq(gap, -30.0, 30.0))
            bound = np.minimum(_bound(lambdas, k_fit, p, norm2, n), 1.0)
        except ValueError:
            log.warning("could not match the tail bound at lambda=%g", lambdas[0])
    table = pd.DataFrame({"lambda": lambdas, "survival": surv, "se": se, "bound": bound})
    table["dominated"] = table["bound"] >= table["survival"] - 2.0 * table["se"]
    table.attrs["front_constant"] = k_fit
    return table


def _regime_scale(lam: np.ndarray, m: int) -> np.ndarray:
    """lambda^2 m^2 up to the crossover m^(-3/4), lambda^(2/3) m beyond it."""
    return np.where(lam <= m**-0.75, lam**2 * m**2, lam ** (2.0 / 3.0) * m)


def edgeworth_tail_check(
    instances: Sequence[ProblemInstance],
    init: str | InitialLaw,
    v0: float,
    scaled_lambdas: Sequence[float],
) -> pd.DataFrame:
    """Empirical P(|A_ai^3 P_{a->i}| >= lambda) at t=1, pooled over every edge.

    ``scaled_lambdas`` are multiples of the crossover m^(-3/4). The bound column is
    2 exp(-c g(lambda)) with the largest c that stays above survival + 2 se at
    every point; ``c_reference`` is the sub-Gaussian constant 1 / (2 sigma^2) of
    the bulk, with sigma measured in units of 1/m.
    """
    if not instances:
        raise ValueError("need at least one instance")
    m = instances[0].m
    if any(inst.m != m for inst in instances):
        raise ValueError("all instances must share m")
    law = create_initial_law(init, v0) if isinstance(init, str) else init
    mom = moments(initial_density(law, make_grid(window_half_width(v0), settings.max_grid_points)))
    if abs(mom.m3_central) < 1e-10 * mom.var**1.5:
        raise ValueError(f"initial density {law.name} is symmetric; P vanishes")

    samples, sixth = [], []
    for inst in instances:
        shape = inst.a.shape
        field = edgeworth_field(inst, np.full(shape, mom.m1), np.full(shape, mom.var),
                                np.full(shape, mom.rho3_raw))
        samples.append(np.abs(inst.a**3 * field).ravel())
        sixth.append(np.sum(inst.a**6, axis=1))
    w = np.concatenate(samples)
    sigma2 = mom.m3_central**2 * m**2 * float(np.mean(np.concatenate(sixth)))

    crossover = m**-0.75
    lambdas = np.sort(np.asarray(scaled_lambdas, dtype=float)) * crossover
    surv = (w[:, None] >= lambdas[None, :]).mean(axis=0)
    # edges of one instance are dependent, so se is nominal
    se = np.sqrt(surv * (1.0 - surv) / w.shape[0])
    scale = _regime_scale(lambdas, m)
    seen = surv > 0
    upper = np.minimum(surv + 2.0 * se, 1.0)
    c_fit = float(np.min(np.log(2.0 / upper[seen]) / scale[seen])) if seen.any() else math.inf
    table = pd.DataFrame({
        "lambda": lambdas,
        "scaled": lambdas / crossover,
        "regime": np.where(lambdas <= crossover, "light", "heavy"),
        "survival": surv,
        "se": se,
        "bound": 2.0 * np.exp(-c_fit * scale),
    })
    table["dominated"] = table["bound"] >= table["survival"] - 1e-12
    table.attrs.update(c_fit=c_fit, c_reference=1.0 / (2.0 * sigma2), crossover=crossover,
                       samples=int(w.shape[0]))
    log.info("edgeworth tail m=%d: c_fit=%.4g, reference %.4g over %d edges",
             m, c_fit, table.attrs["c_reference"], w.shape[0])
    return table


def local_tail_exponent(table: pd.DataFrame, lo: float, hi: float) -> float:
    """Slope of log(-log S) against log lambda over lambdas in [lo, hi]."""
    sel = table[(table["lambda"] >= lo) & (table["lambda"] <= hi)
                & (table["survival"] > 0) & (table["survival"] < 1)]
    if len(sel) < 2:
        raise FitError(f"fewer than two usable points in [{lo}, {hi}]")
    return loglog_fit(sel["lambda"].to_numpy(), -np.log(sel["survival"].to_numpy())).slope


# --------------------------
# Row / column norms
# --------------------------
def concentration_check(
    family: str,
    n_list: Sequence[int],
    seeds: int,
    delta: float = 0.5,
    base_seed: int = 0,
) -> tuple[pd.DataFrame, dict[str, ScalingFit | None], bool]:
    """Per-N quantiles of the norm deviations, their fits, and a degenerate flag."""
    rows = []
    for n in n_list:
        m = max(1, round(delta * n))
        for r in range(seeds):
            spec = EnsembleSpec(family=family, m=m, n=n, seed=replicate_seed(base_seed, n, r))
            rep = row_col_concentration(sample_matrix(spec))
            rows.append({"N": n, "seed": r, "max_row_dev": rep.max_row_dev,
                         "max_col_dev": rep.max_col_dev})
    raw = pd.DataFrame(rows)
    table = raw.groupby("N").agg(
        row_q50=("max_row_dev", "median"),
        row_q95=("max_row_dev", lambda s: s.quantile(0.95)),
        col_q50=("max_col_dev", "median"),
        col_q95=("max_col_dev", lambda s: s.quantile(0.95)),
    ).reset_index()

    degenerate = bool((raw[["max_row_dev", "max_col_dev"]] < DEGENERATE_TOL).all().all())
    fits: dict[str, ScalingFit | None] = {"max_row_dev": None, "max_col_dev": None}
    if degenerate:
        log.info("%s norms are exact; scaling fit skipped", family)
    elif len(n_list) >= 3:
        fits["max_row_dev"] = fit_scaling(zip(table["N"], table["row_q50"], strict=True))
        fits["max_col_dev"] = fit_scaling(zip(table["N"], table["col_q50"], strict=True))
    return table, fits, degenerate
