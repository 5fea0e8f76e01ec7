# app/lab/amp_solver.py
"""AMP iteration X <- X + Delta(t) A^T (y - A X) and its contraction analysis."""
from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import linalg
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from ..core.config import settings
from ..core.errors import AmpError, RankDeficientError
from .ensemble import ProblemInstance
from .schedule import VarianceSchedule
from .seeding import POWER_STREAM, rng_for

log = logging.getLogger(__name__)

DIVERGENCE_FACTOR = 10.0


def least_norm(inst: ProblemInstance) -> np.ndarray:
    """x* = A^T (A A^T)^{-1} y through a Cholesky solve of the Gram system."""
    a, y = inst.a, inst.y
    try:
        factor = linalg.cho_factor(a @ a.T, lower=True)
    except linalg.LinAlgError as e:
        raise RankDeficientError(f"Gram matrix is not positive definite: {e}") from e
    x_star = a.T @ linalg.cho_solve(factor, y)
    resid = float(np.linalg.norm(a @ x_star - y))
    if resid > 1e-8 * (1.0 + float(np.linalg.norm(y))):
        log.warning("least-norm residual %.3e; Gram system is ill conditioned", resid)
    return x_star


def amp_step(inst: ProblemInstance, x: np.ndarray, sched: VarianceSchedule, t: int) -> np.ndarray:
    return x + sched.delta_t(t) * (inst.a.T @ (inst.y - inst.a @ x))


def power_norm(
    op: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    max_iter: int | None = None,
    tol: float | None = None,
) -> tuple[float, np.ndarray]:
    """Spectral norm of a symmetric operator by power iteration; returns (norm, vector)."""
    max_iter = max_iter or settings.power_iters
    tol = tol or settings.power_tol
    x = x0 / np.linalg.norm(x0)
    ratio_old = math.inf
    ratio = 0.0
    for it in range(max_iter):
        ax = op(x)
        ratio = float(np.linalg.norm(ax))
        if ratio == 0.0:
            return 0.0, x
        if abs(ratio - ratio_old) / ratio < tol:
            log.debug("power iteration converged after %d iterations", it + 1)
            break
        ratio_old = ratio
        x = ax / ratio
    return ratio, x


@dataclass
class AmpTrace:
    iterates: list[np.ndarray] = field(default_factory=list)
    residual_norm: list[float] = field(default_factory=list)
    dist_to_star: list[float] = field(default_factory=list)
    op_norm_rt: list[float] = field(default_factory=list)
    delta_t: list[float] = field(default_factory=list)
    x_star: np.ndarray | None = None
    guaranteed: bool = True
    diverged: bool = False

    def frame(self) -> pd.DataFrame:
        steps = len(self.iterates)
        pad = [math.nan] * (steps - len(self.op_norm_rt))
        return pd.DataFrame({
            "t": np.arange(steps),
            "dist_to_star": self.dist_to_star,
            "residual": self.residual_norm,
            "delta_t": self.delta_t + pad,
            "rnorm_est": self.op_norm_rt + pad,
        })


def run_amp(
    inst: ProblemInstance,
    sched: VarianceSchedule,
    tmax: int,
    x_star: np.ndarray | None = None,
    seed: int = 0,
) -> AmpTrace:
    """Iterate from X = 0; op_norm_rt[t] is the norm of R(t) on the row space of A."""
    rates = sched.contraction_rates()
    trace = AmpTrace(x_star=least_norm(inst) if x_star is None else x_star,
                     guaranteed=rates.converges)
    if not rates.converges:
        log.info("no contraction guarantee: valid=%s two-sided rate %.3f",
                 rates.valid, rates.rho_two_sided)
    a, y = inst.a, inst.y
    x = np.zeros(inst.n)
    start = rng_for(seed, POWER_STREAM).standard_normal(inst.m)

    def record(x: np.ndarray) -> None:
        trace.iterates.append(x)
        trace.residual_norm.append(float(np.linalg.norm(y - a @ x)))
        trace.dist_to_star.append(float(np.linalg.norm(x - trace.x_star)))

    record(x)
    limit = DIVERGENCE_FACTOR * max(trace.dist_to_star[0], np.finfo(float).tiny)
    for t in range(tmax):
        step = sched.delta_t(t)
        norm, start = power_norm(lambda u, s=step: u - s * (a @ (a.T @ u)), start)
        trace.delta_t.append(step)
        trace.op_norm_rt.append(norm)
        x = amp_step(inst, x, sched, t)
        record(x)
        if trace.dist_to_star[-1] > limit:
            log.warning("AMP diverged at t=%d (distance %.3e)", t + 1, trace.dist_to_star[-1])
            trace.diverged = True
            break
    return trace


@dataclass(frozen=True)
class SpectralReport:
    lambda_min: float
    lambda_max: float
    lambda_minus: float | None
    lambda_plus: float | None
    comparable: bool


def spectral_check(inst: ProblemInstance) -> SpectralReport:
    """Extreme eigenvalues of delta A A^T (the nonzero spectrum of delta A^T A)."""
    m, n = inst.a.shape
    gram = (m / n) * (inst.a @ inst.a.T)
    if m <= 2:
        eig = linalg.eigvalsh(gram)
        lo, hi = float(eig[0]), float(eig[-1])
    else:
        try:
            hi = float(eigsh(gram, k=1, which="LA", return_eigenvectors=False)[0])
            lo = float(eigsh(gram, k=1, which="SA", return_eigenvectors=False)[0])
        except ArpackNoConvergence as e:
            raise AmpError(f"eigensolver did not converge: {e}") from e
    comparable = m < n
    if not comparable:
        return SpectralReport(lo, hi, None, None, False)
    sq = math.sqrt(m / n)
    return SpectralReport(lo, hi, (1.0 - sq) ** 2, (1.0 + sq) ** 2, True)


def consensus_gap(bp_means: list[np.ndarray], amp: AmpTrace) -> pd.DataFrame:
    """max_i |X_i - mean_a x_{i->a}| at matching t and with X one step behind."""
    rows = []
    for t, x_edges in enumerate(bp_means):
        if t >= len(amp.iterates):
            break
        node_mean = x_edges.mean(axis=0)
        rows.append({
            "t": t,
            "gap_aligned": float(np.max(np.abs(amp.iterates[t] - node_mean))),
            "gap_lagged": float(np.max(np.abs(amp.iterates[t - 1] - node_mean))) if t else math.nan,
        })
    return pd.DataFrame(rows, columns=["t", "gap_aligned", "gap_lagged"])
