# app/lab/pipeline.py
"""Config-driven multi-N studies.

Every replicate owns its instance (child seed from ``replicate_seed``) and returns
(metric, value) pairs; aggregation happens once all replicates have joined.
Outputs in ``<out_dir>/<experiment>/``: rows.csv, replicates.csv, summary.csv,
fits.csv, run.json and optionally summary.dat / scaling.png.
"""
from __future__ import annotations

import hashlib
import logging
import math
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from ..core.errors import FitError, StudyError
from .amp_solver import consensus_gap, run_amp
from .chaos_oracle import chaos_mean, decompose_xz, remainder_z
from .density_bp import edgeworth_ratio_sup, initial_density, run_density_bp
from .ensemble import EnsembleSpec, ProblemInstance, build_instance, row_col_concentration
from .gaussian_bp import mp_step, run_bp
from .io import write_dat, write_json, write_table
from .laws.loader import create_initial_law
from .scaling import exceedance_rates, fit_scaling
from .schedule import VarianceSchedule
from .schema import Experiment, ExperimentConfig
from .seeding import replicate_seed
from .tails import edgeworth_tail_check, local_tail_exponent, tail_check

log = logging.getLogger(__name__)

ROW_COLUMNS = ["experiment", "N", "delta", "beta", "v0", "seed", "metric", "value"]
MAX_FAILURE_SHARE = 0.5
# multiples of the m^(-3/4) crossover
EDGEWORTH_SCALED_LAMBDAS = tuple(2.0 ** (k / 2) for k in range(-4, 7))

Metrics = list[tuple[str, float]]
Progress = Callable[[str], None]


@dataclass(frozen=True)
class Replicate:
    n: int
    index: int
    seed: int
    status: str
    metrics: Metrics
    instance_sha256: str | None = None
    message: str | None = None


@dataclass(frozen=True)
class StudyResult:
    out_dir: Path
    rows: pd.DataFrame
    summary: pd.DataFrame
    fits: pd.DataFrame
    failures: int


# --------------------------
# Helpers
# --------------------------
def _instance(cfg: ExperimentConfig, n: int, seed: int, min_m: int = 1) -> ProblemInstance:
    m = cfg.m if cfg.m is not None else min(n - 1, max(min_m, round(cfg.delta * n)))
    return build_instance(EnsembleSpec(family=cfg.family, m=m, n=n, seed=seed), cfg.outcome)


def _schedule(cfg: ExperimentConfig, inst: ProblemInstance) -> VarianceSchedule:
    return VarianceSchedule(v0=cfg.v0, beta=cfg.beta, delta=inst.delta)


# --------------------------
# Pipelines: (cfg, n, seed) -> (metrics, instance hash)
# --------------------------
def _bp_variance(cfg: ExperimentConfig, n: int, seed: int) -> tuple[Metrics, str]:
    inst = _instance(cfg, n, seed)
    summary = run_bp(inst, cfg.beta, cfg.v0, cfg.tmax).summary
    later = summary[summary["t"] >= 1]
    out = [("max_var_dev", float(later["max_var_dev"].max()))]
    out += [(f"max_var_dev_t{int(r.t)}", float(r.max_var_dev)) for r in later.itertuples()]
    last = summary.iloc[-1]
    out += [("max_spread_over_a", float(last["max_spread_over_a"])),
            ("mp_bp_gap", float(last["mp_bp_gap"]))]
    return out, inst.content_hash()


def _bp_consensus(cfg: ExperimentConfig, n: int, seed: int) -> tuple[Metrics, str]:
    inst = _instance(cfg, n, seed)
    sched = _schedule(cfg, inst)
    bp = run_bp(inst, cfg.beta, cfg.v0, cfg.tmax, sched=sched)
    amp = run_amp(inst, sched, cfg.tmax)
    gaps = consensus_gap([f.x for f in bp.fields], amp).iloc[-1]
    return [
        ("gap_aligned", float(gaps["gap_aligned"])),
        ("gap_lagged", float(gaps["gap_lagged"])),
        ("mp_bp_gap", float(bp.summary["mp_bp_gap"].iloc[-1])),
    ], inst.content_hash()


def _shadow(cfg: ExperimentConfig, n: int, seed: int) -> tuple[Metrics, str]:
    inst = _instance(cfg, n, seed, min_m=2)
    tmax = min(cfg.tmax, 6)
    dens = run_density_bp(inst, cfg.q, cfg.beta, cfg.init, cfg.v0, tmax, cfg.grid_points)
    gauss = run_bp(inst, cfg.beta, cfg.v0, tmax)
    x, v, _ = dens.moments[-1]
    shadow = dens.shadows[-1]
    ref = gauss.fields[tmax]
    return [
        ("var_gap_gaussian_run", float(np.max(np.abs(v - ref.v)))),
        ("mean_gap_gaussian_run", float(np.max(np.abs(x - ref.x)))),
        ("var_gap_shadow", float(np.max(np.abs(v - shadow.sshadow)))),
        ("mean_gap_shadow", float(np.max(np.abs(x - shadow.mshadow)))),
    ], inst.content_hash()


def _amp_convergence(cfg: ExperimentConfig, n: int, seed: int) -> tuple[Metrics, str]:
    inst = _instance(cfg, n, seed)
    trace = run_amp(inst, _schedule(cfg, inst), cfg.tmax)
    dist = np.asarray(trace.dist_to_star)
    scale = float(np.linalg.norm(trace.x_star)) or 1.0
    excess = [
        dist[t + 1] / dist[t] - trace.op_norm_rt[t]
        for t in range(2, len(dist) - 1) if dist[t] > 0
    ]
    return [
        ("rel_dist", float(dist[-1] / scale)),
        ("max_contraction_excess", max(excess) if excess else math.nan),
        ("max_rnorm", max(trace.op_norm_rt) if trace.op_norm_rt else math.nan),
        ("diverged", float(trace.diverged)),
    ], inst.content_hash()


def _chaos(cfg: ExperimentConfig, n: int, seed: int) -> tuple[Metrics, str]:
    inst = _instance(cfg, n, seed, min_m=2)
    sched = _schedule(cfg, inst)
    t = min(cfg.tmax, 3)
    x = np.zeros(inst.a.shape)
    for step in range(t):
        x = mp_step(inst, x, sched, step)
    split = decompose_xz(inst, sched, t, 0, 0)
    x_parts = [decompose_xz(inst, sched, t, 0, a).x_part for a in range(1, inst.m)]
    out = [
        ("chaos_mp_gap", abs(chaos_mean(inst, sched, t, 0, 0) - x[0, 0])),
        ("split_gap", abs(split.x_part + split.z_part - x[0, 0])),
        ("x_part_anchor_gap", max((abs(p - split.x_part) for p in x_parts), default=0.0)),
        ("z_part", split.z_part),
        ("x_edge", float(x[0, 0])),
    ]
    if inst.m * inst.n <= 64:
        out.append(("z_remainder_abs", abs(remainder_z(inst, sched, t, 0))))
    return out, inst.content_hash()


def _density_gauss_gap(cfg: ExperimentConfig, n: int, seed: int) -> tuple[Metrics, str]:
    inst = _instance(cfg, n, seed, min_m=2)
    tmax = min(cfg.tmax, 2)
    trace = run_density_bp(inst, cfg.q, cfg.beta, cfg.init, cfg.v0, tmax, cfg.grid_points)
    out = []
    for t, gaps in enumerate(trace.gaps, start=1):
        med = np.median(gaps.reshape(-1, gaps.shape[-1]), axis=0)
        out += [(f"gap_k{k + 1}_t{t}", float(g)) for k, g in enumerate(med)]
    start = initial_density(create_initial_law(cfg.init, cfg.v0), trace.grid).values
    msgs = np.broadcast_to(start, (inst.n, start.shape[0]))
    out.append(("edgeworth_ratio_sup", edgeworth_ratio_sup(inst, 0, 0, msgs, trace.grid)))
    return out, inst.content_hash()


def _tails(cfg: ExperimentConfig, n: int, seed: int) -> tuple[Metrics, str]:
    weights = np.full(n, 1.0 / math.sqrt(n))
    lambdas = np.geomspace(0.25, 25.0, 21)
    table = tail_check(cfg.family.value, cfg.p, weights, lambdas, cfg.trials, seed=seed)

    def exponent(lo: float, hi: float) -> float:
        try:
            return local_tail_exponent(table, lo, hi)
        except FitError:
            return math.nan

    return [
        ("exp_low", exponent(0.25, 2.5)),
        ("exp_high", exponent(2.5, 25.0)),
        ("front_constant", float(table.attrs["front_constant"])),
        ("dominated_frac", float(table["dominated"].mean())),
    ], hashlib.sha256(weights.tobytes()).hexdigest()


def _edgeworth_tails(cfg: ExperimentConfig, n: int, seed: int) -> tuple[Metrics, str]:
    inst = _instance(cfg, n, seed, min_m=2)
    table = edgeworth_tail_check([inst], cfg.init, cfg.v0, EDGEWORTH_SCALED_LAMBDAS)
    at_cross = table.loc[np.isclose(table["scaled"], 1.0), "survival"]
    return [
        ("c_fit", table.attrs["c_fit"]),
        ("c_over_reference", table.attrs["c_fit"] / table.attrs["c_reference"]),
        ("survival_at_crossover", float(at_cross.iloc[0]) if len(at_cross) else math.nan),
    ], inst.content_hash()


def _concentration(cfg: ExperimentConfig, n: int, seed: int) -> tuple[Metrics, str]:
    inst = _instance(cfg, n, seed)
    rep = row_col_concentration(inst.a)
    return [("max_row_dev", rep.max_row_dev), ("max_col_dev", rep.max_col_dev)], \
        inst.content_hash()


PIPELINES: dict[Experiment, Callable[[ExperimentConfig, int, int], tuple[Metrics, str]]] = {
    Experiment.bp_variance: _bp_variance,
    Experiment.bp_consensus: _bp_consensus,
    Experiment.shadow: _shadow,
    Experiment.amp_convergence: _amp_convergence,
    Experiment.chaos: _chaos,
    Experiment.density_gauss_gap: _density_gauss_gap,
    Experiment.tails: _tails,
    Experiment.edgeworth_tails: _edgeworth_tails,
    Experiment.concentration: _concentration,
}


# --------------------------
# Fan-out and aggregation
# --------------------------
def _run_replicate(cfg: ExperimentConfig, n: int, r: int) -> Replicate:
    seed = replicate_seed(cfg.base_seed, n, r)
    try:
        metrics, digest = PIPELINES[cfg.experiment](cfg, n, seed)
        return Replicate(n, r, seed, "done", metrics, digest)
    except Exception as e:
        log.exception("replicate N=%d r=%d failed", n, r)
        return Replicate(n, r, seed, "error", [], None, str(e))


def _rms(x: np.ndarray) -> float:
    return math.sqrt(float(np.mean(x**2)))


def _l4_over_l2(x: np.ndarray) -> float:
    l2 = _rms(x)
    return float(np.mean(x**4)) ** 0.25 / l2 if l2 > 0 else math.nan


# per-N statistics over all replicates: (source metric, summary name, reducer)
POOLED_METRICS: list[tuple[str, str, Callable[[np.ndarray], float]]] = [
    ("x_edge", "l4_l2_ratio", _l4_over_l2),
    ("z_part", "z_part_rms", _rms),
]


def aggregate(rows: pd.DataFrame, alpha: float = -0.5) -> pd.DataFrame:
    grouped = rows.groupby(["N", "metric"], sort=True)["value"]
    summary = grouped.agg(
        median="median",
        q05=lambda s: s.quantile(0.05),
        q95=lambda s: s.quantile(0.95),
        mean="mean",
        count="count",
    ).reset_index()
    rates = [
        exceedance_rates(rows.loc[(rows["N"] == n) & (rows["metric"] == name), "value"].to_numpy(),
                         int(n), alpha)
        for n, name in zip(summary["N"], summary["metric"], strict=True)
    ]
    summary["exceed_alpha"] = [r[0] for r in rates]
    summary["exceed_alpha_eps"] = [r[1] for r in rates]

    extra = []
    for source, name, reduce in POOLED_METRICS:
        for n, vals in rows.loc[rows["metric"] == source].groupby("N")["value"]:
            value = reduce(vals.to_numpy())
            extra.append({"N": n, "metric": name, "median": value,
                          "q05": math.nan, "q95": math.nan, "mean": value, "count": len(vals),
                          "exceed_alpha": math.nan, "exceed_alpha_eps": math.nan})
    if extra:
        summary = pd.concat([summary, pd.DataFrame(extra)], ignore_index=True)
    return summary.sort_values(["metric", "N"], kind="stable").reset_index(drop=True)


def fit_all(summary: pd.DataFrame) -> pd.DataFrame:
    fits = []
    for metric, grp in summary.groupby("metric", sort=True):
        if grp["N"].nunique() < 3:
            continue
        try:
            fit = fit_scaling(zip(grp["N"], grp["median"], strict=True))
        except FitError as e:
            log.info("no fit for %s: %s", metric, e)
            continue
        fits.append({"metric": metric, "slope": fit.slope, "intercept": fit.intercept,
                     "r2": fit.r2, "n_points": fit.n_points})
    return pd.DataFrame(fits, columns=["metric", "slope", "intercept", "r2", "n_points"])


def run_experiment(cfg: ExperimentConfig, progress: Progress | None = None) -> StudyResult:
    notify = progress or (lambda msg: None)
    out_dir = Path(cfg.out_dir) / cfg.experiment.value
    out_dir.mkdir(parents=True, exist_ok=True)
    log.info("study %s: N=%s, %d seeds, %d threads",
             cfg.experiment.value, cfg.n_list, cfg.seeds, cfg.threads)

    replicates: list[Replicate] = []
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        for n in cfg.n_list:
            notify(f"N={n}: running {cfg.seeds} replicates")
            replicates += list(pool.map(lambda r, n=n: _run_replicate(cfg, n, r),
                                        range(cfg.seeds)))
            log.info("N=%d done", n)

    rep_frame = pd.DataFrame([
        {"N": r.n, "replicate": r.index, "seed": r.seed, "status": r.status,
         "instance_sha256": r.instance_sha256, "message": r.message}
        for r in replicates
    ])
    write_table(rep_frame, out_dir / "replicates.csv")
    failures = int((rep_frame["status"] == "error").sum())
    if failures > MAX_FAILURE_SHARE * len(replicates):
        notify(f"ERROR: {failures} of {len(replicates)} replicates failed")
        raise StudyError(f"{failures} of {len(replicates)} replicates failed")

    rows = pd.DataFrame(
        [
            {"experiment": cfg.experiment.value, "N": r.n, "delta": cfg.delta,
             "beta": cfg.beta, "v0": cfg.v0, "seed": r.seed, "metric": name, "value": value}
            for r in replicates if r.status == "done"
            for name, value in r.metrics
        ],
        columns=ROW_COLUMNS,
    )
    summary = aggregate(rows, cfg.alpha)
    fits = fit_all(summary)

    write_table(rows, out_dir / "rows.csv")
    write_table(summary, out_dir / "summary.csv")
    write_table(fits, out_dir / "fits.csv")
    files = ["rows.csv", "replicates.csv", "summary.csv", "fits.csv"]
    if cfg.dat:
        write_dat(summary, out_dir / "summary.dat")
        files.append("summary.dat")
    if cfg.plot:
        from .charts import plot_scaling

        plot_scaling(summary, fits, out_dir / "scaling.png")
        files.append("scaling.png")
    hashes = sorted(h for h in rep_frame["instance_sha256"].dropna())
    write_json({
        "config": cfg.model_dump(mode="json"),
        "replicates": len(replicates),
        "failures": failures,
        "instances_sha256": hashlib.sha256("".join(hashes).encode()).hexdigest(),
        "files": files,
    }, out_dir / "run.json")
    notify("DONE")
    log.info("study %s written to %s", cfg.experiment.value, out_dir)
    return StudyResult(out_dir, rows, summary, fits, failures)
