# app/lab/gaussian_bp.py
"""Exact edgewise BP for the l2 prior with Gaussian messages.

All fields are dense m x n arrays indexed [a, i]: ``x[a, i]`` is the mean of
the message from variable i to factor a, ``xhat[a, i]`` the mean of the
message from factor a back to variable i. Leave-one-out sums are formed as
full row/column sums minus the own term.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from ..core.errors import BPError
from .ensemble import ProblemInstance
from .schedule import VarianceSchedule

log = logging.getLogger(__name__)

MIN_ABS_ENTRY = 1e-30


@dataclass(frozen=True)
class MessageField:
    x: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def initial(cls, inst: ProblemInstance, v0: float) -> MessageField:
        return cls(x=np.zeros(inst.a.shape), v=np.full(inst.a.shape, float(v0)), t=0)


@dataclass(frozen=True)
class HatField:
    xhat: np.ndarray
    vhat: np.ndarray
    t: int = 0


@dataclass(frozen=True)
class ShadowField:
    mshadow: np.ndarray
    sshadow: np.ndarray
    t: int = 0


def _guard_entries(a: np.ndarray) -> None:
    if np.min(np.abs(a)) < MIN_ABS_ENTRY:
        raise BPError("matrix entry below 1e-30 in magnitude; hat messages undefined")


# --------------------------
# Updates
# --------------------------
def hat_update(inst: ProblemInstance, msgs: MessageField) -> HatField:
    a = inst.a
    if msgs.x.shape != a.shape or msgs.v.shape != a.shape:
        raise BPError(f"message shape {msgs.x.shape} does not match matrix {a.shape}")
    _guard_entries(a)
    ax = a * msgs.x
    a2 = a * a
    a2v = a2 * msgs.v
    xhat = (inst.y[:, None] - (ax.sum(axis=1, keepdims=True) - ax)) / a
    vhat = (a2v.sum(axis=1, keepdims=True) - a2v) / a2
    return HatField(xhat=xhat, vhat=vhat, t=msgs.t)


def _precision_product(hat: HatField, beta: float) -> tuple[np.ndarray, np.ndarray]:
    if beta < 0:
        raise BPError(f"beta must be nonnegative, got {beta}")
    if np.any(hat.vhat <= 0):
        raise BPError("hat variances must be positive")
    prec = 1.0 / hat.vhat
    ratio = hat.xhat * prec
    var = 1.0 / (2.0 * beta + (prec.sum(axis=0, keepdims=True) - prec))
    if not np.all(np.isfinite(var)) or np.any(var <= 0):
        raise BPError("nonpositive or non-finite variance after node update")
    return (ratio.sum(axis=0, keepdims=True) - ratio) * var, var


def node_update(inst: ProblemInstance, hat: HatField, beta: float) -> MessageField:
    x, v = _precision_product(hat, beta)
    return MessageField(x=x, v=v, t=hat.t + 1)


def shadow_step(inst: ProblemInstance, hat: HatField, beta: float) -> ShadowField:
    """As-if-Gaussian product rule applied to hat moments from any engine."""
    m, s = _precision_product(hat, beta)
    return ShadowField(mshadow=m, sshadow=s, t=hat.t + 1)


def surrogate_params(hat: HatField) -> tuple[np.ndarray, np.ndarray]:
    """Leave-one-out precision-weighted hat mean and variance, without the prior."""
    prec = 1.0 / hat.vhat
    ratio = hat.xhat * prec
    sigma = 1.0 / (prec.sum(axis=0, keepdims=True) - prec)
    return (ratio.sum(axis=0, keepdims=True) - ratio) * sigma, sigma


def mp_step(inst: ProblemInstance, x: np.ndarray, sched: VarianceSchedule, t: int) -> np.ndarray:
    a, y = inst.a, inst.y
    data = (y @ a)[None, :] - y[:, None] * a
    loo_row = (a * x).sum(axis=1, keepdims=True) - a * x  # sum_{j != i} A_bj x_{j->b}
    cross = (a * loo_row).sum(axis=0, keepdims=True) - a * loo_row
    return sched.delta_t(t) * (data - cross)


def spread_over_a(x: np.ndarray) -> np.ndarray:
    return x.max(axis=0) - x.min(axis=0)


# --------------------------
# Runs
# --------------------------
@dataclass
class BPTrace:
    fields: list[MessageField] = field(default_factory=list)
    hats: list[HatField] = field(default_factory=list)
    mp: list[np.ndarray] = field(default_factory=list)
    summary: pd.DataFrame | None = None


TRACE_COLUMNS = ["t", "max_var_dev", "mean_spread_over_a", "max_spread_over_a", "mp_bp_gap"]


def run_bp(
    inst: ProblemInstance,
    beta: float,
    v0: float,
    tmax: int,
    sched: VarianceSchedule | None = None,
) -> BPTrace:
    if tmax < 1:
        raise BPError("tmax must be at least 1")
    sched = sched or VarianceSchedule(v0=v0, beta=beta, delta=inst.delta)
    msgs = MessageField.initial(inst, v0)
    x_mp = np.zeros(inst.a.shape)
    trace = BPTrace(fields=[msgs], mp=[x_mp])
    rows = []
    for t in range(tmax + 1):
        if t > 0:
            hat = hat_update(inst, msgs)
            trace.hats.append(hat)
            msgs = node_update(inst, hat, beta)
            x_mp = mp_step(inst, x_mp, sched, t - 1)
            trace.fields.append(msgs)
            trace.mp.append(x_mp)
        spread = spread_over_a(msgs.x)
        rows.append({
            "t": t,
            "max_var_dev": float(np.max(np.abs(msgs.v - sched.v(t)))),
            "mean_spread_over_a": float(spread.mean()),
            "max_spread_over_a": float(spread.max()),
            "mp_bp_gap": float(np.max(np.abs(msgs.x - x_mp))),
        })
        log.debug("bp t=%d max_var_dev=%.3e", t, rows[-1]["max_var_dev"])
    trace.summary = pd.DataFrame(rows, columns=TRACE_COLUMNS)
    return trace
