# app/cli.py
"""``bpamp`` command line.

Every subcommand accepts ``--seed``, ``--out`` and ``--log-level``. Tables go to
``--out`` as CSV when given, otherwise to stdout; ``gen`` defaults to INSTANCES_DIR
and ``study`` to BPAMP_OUT_DIR. Only ``study`` fans out, so ``--threads`` is a
study flag. Invalid input exits with status 2.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from .core.config import settings
from .core.errors import LabError
from .core.logging import setup_logging
from .lab.amp_solver import run_amp, spectral_check
from .lab.chaos_oracle import chaos_mean, decompose_xz, remainder_z
from .lab.density_bp import run_density_bp
from .lab.ensemble import EnsembleSpec, OutcomeMode, build_instance
from .lab.gaussian_bp import mp_step, run_bp
from .lab.io import FLOAT_FORMAT, read_instance, write_instance, write_table
from .lab.pipeline import run_experiment
from .lab.schedule import VarianceSchedule
from .lab.schema import Experiment, load_config
from .lab.seeding import replicate_seed
from .lab.tails import concentration_check, tail_check

log = logging.getLogger("bpamp")


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _emit(df: pd.DataFrame, out: str | None) -> None:
    if out:
        path = write_table(df, Path(out))
        log.info("wrote %s (%d rows)", path, len(df))
    else:
        df.to_csv(sys.stdout, index=False, float_format=FLOAT_FORMAT)


# --------------------------
# Subcommands
# --------------------------
def cmd_gen(args: argparse.Namespace) -> int:
    spec = EnsembleSpec(family=args.family, m=args.m, n=args.n, seed=args.seed)
    inst = build_instance(spec, args.outcome)
    out = Path(args.out) if args.out else (
        settings.instances_dir / f"{args.family}_{args.m}x{args.n}_{args.seed}.csv"
    )
    path = write_instance(inst, out)
    print(path)
    return 0


def cmd_schedule(args: argparse.Namespace) -> int:
    sched = VarianceSchedule(v0=args.v0, beta=args.beta, delta=args.delta)
    rates = sched.contraction_rates()
    log.info("rho1=%.6g rho2=%.6g two-sided=%.6g converges=%s",
             rates.rho1, rates.rho2, rates.rho_two_sided, rates.converges)
    _emit(sched.table(args.tmax), args.out)
    return 0


def cmd_bp_run(args: argparse.Namespace) -> int:
    inst = read_instance(Path(args.instance))
    trace = run_bp(inst, args.beta, args.v0, args.tmax)
    _emit(trace.summary, args.out)
    return 0


def cmd_density_run(args: argparse.Namespace) -> int:
    inst = read_instance(Path(args.instance))
    trace = run_density_bp(inst, args.q, args.beta, args.init, args.v0, args.tmax,
                           grid_points=args.grid_points)
    _emit(trace.records, args.out)
    return 0


def cmd_amp_run(args: argparse.Namespace) -> int:
    inst = read_instance(Path(args.instance))
    sched = VarianceSchedule(v0=args.v0, beta=args.beta, delta=inst.delta)
    trace = run_amp(inst, sched, args.tmax, seed=args.seed)
    if args.spectral:
        rep = spectral_check(inst)
        log.info("spectrum of delta A^T A: [%.4f, %.4f], edges [%s, %s]",
                 rep.lambda_min, rep.lambda_max, rep.lambda_minus, rep.lambda_plus)
    if trace.diverged:
        log.warning("iteration diverged; the trace stops early")
    _emit(trace.frame(), args.out)
    return 0


def cmd_chaos_verify(args: argparse.Namespace) -> int:
    rows = []
    z_parts = []
    for r in range(args.trials):
        seed = args.seed if args.trials == 1 else replicate_seed(args.seed, args.n, r)
        inst = build_instance(EnsembleSpec(family=args.family, m=args.m, n=args.n, seed=seed))
        sched = VarianceSchedule(v0=args.v0, beta=args.beta, delta=inst.delta)
        x = np.zeros(inst.a.shape)
        for step in range(args.t):
            x = mp_step(inst, x, sched, step)
        for a in range(inst.m):
            chaos = chaos_mean(inst, sched, args.t, args.i, a)
            split = decompose_xz(inst, sched, args.t, args.i, a)
            z_parts.append(split.z_part)
            rows.append({
                "trial": r, "a": a, "i": args.i,
                "chaos": chaos, "mp": x[a, args.i], "gap": abs(chaos - x[a, args.i]),
                "x_part": split.x_part, "z_part": split.z_part,
                "split_gap": abs(split.x_part + split.z_part - chaos),
            })
        if args.remainder and r == 0:
            log.info("Z_%d = %.6g", args.i, remainder_z(inst, sched, args.t, args.i))
    df = pd.DataFrame(rows)
    log.info("max |chaos - mp| = %.3e, rms z_part = %.4g",
             df["gap"].max(), math.sqrt(float(np.mean(np.square(z_parts)))))
    _emit(df, args.out)
    return 0


def cmd_tail_check(args: argparse.Namespace) -> int:
    if args.norms:
        table, fits, degenerate = concentration_check(
            args.family, _int_list(args.n_list), args.seeds, base_seed=args.seed
        )
        for name, fit in fits.items():
            if fit is not None:
                log.info("%s slope %.3f (r2 %.3f)", name, fit.slope, fit.r2)
        if degenerate:
            log.info("%s norms are exact", args.family)
        _emit(table, args.out)
        return 0
    weights = np.full(args.n, 1.0 / math.sqrt(args.n))
    table = tail_check(args.family, args.p, weights, _float_list(args.lambdas), args.trials,
                       seed=args.seed)
    log.info("front constant %.4g", table.attrs["front_constant"])
    _emit(table, args.out)
    return 0


def cmd_study(args: argparse.Namespace) -> int:
    cfg = load_config(
        Path(args.config) if args.config else None,
        experiment=args.experiment,
        n_list=_int_list(args.n_list) if args.n_list else None,
        delta=args.delta, beta=args.beta, v0=args.v0, q=args.q,
        seeds=args.seeds, tmax=args.tmax, family=args.family, init=args.init,
        grid_points=args.grid_points, trials=args.trials, p=args.p, alpha=args.alpha,
        outcome=args.outcome, m=args.m,
        base_seed=args.seed, threads=args.threads, out_dir=args.out,
        dat=args.dat or None, plot=args.plot or None,
    )
    result = run_experiment(cfg, progress=lambda msg: log.info("%s", msg))
    if not result.fits.empty:
        print(result.fits.to_string(index=False))
    print(result.out_dir)
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    uvicorn.run("app.main:app", host=args.host, port=args.port)
    return 0


# --------------------------
# Parser
# --------------------------
def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="Base seed")
    common.add_argument("--out", type=str, default=None, help="Output file or directory")
    common.add_argument("--log-level", type=str, default=None)

    parser = argparse.ArgumentParser(prog="bpamp", description="BP / MP / AMP numerical lab")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("gen", parents=[common], help="Sample and store an instance")
    p.add_argument("--family", default="gaussian", choices=settings.allowed_families)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--outcome", default="uniform_box", choices=[o.value for o in OutcomeMode])
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("schedule", parents=[common], help="Print the variance schedule")
    p.add_argument("--delta", type=float, default=settings.default_delta)
    p.add_argument("--beta", type=float, default=settings.default_beta)
    p.add_argument("--v0", type=float, default=settings.default_v0)
    p.add_argument("--tmax", type=int, default=10)
    p.set_defaults(func=cmd_schedule)

    for name, func in (("bp-run", cmd_bp_run), ("amp-run", cmd_amp_run),
                       ("density-run", cmd_density_run)):
        p = sub.add_parser(name, parents=[common])
        p.add_argument("--instance", required=True)
        p.add_argument("--beta", type=float, default=settings.default_beta)
        p.add_argument("--v0", type=float, default=settings.default_v0)
        p.add_argument("--tmax", type=int, default=8)
        p.set_defaults(func=func)
        if name == "amp-run":
            p.add_argument("--spectral", action="store_true", help="Also log spectral edges")
        if name == "density-run":
            p.add_argument("--q", type=float, default=2.0)
            p.add_argument("--init", default="gauss", choices=settings.allowed_inits)
            p.add_argument("--grid-points", type=int, default=None)
            p.set_defaults(tmax=2)

    p = sub.add_parser("chaos-verify", parents=[common], help="Chaos expansion vs MP")
    p.add_argument("--m", type=int, default=3)
    p.add_argument("--n", type=int, default=5)
    p.add_argument("--t", type=int, default=2)
    p.add_argument("--i", type=int, default=0)
    p.add_argument("--family", default="gaussian", choices=settings.allowed_families)
    p.add_argument("--beta", type=float, default=settings.default_beta)
    p.add_argument("--v0", type=float, default=settings.default_v0)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--remainder", action="store_true", help="Also compute Z_i (expensive)")
    p.set_defaults(func=cmd_chaos_verify)

    p = sub.add_parser("tail-check", parents=[common], help="Tail or norm concentration check")
    p.add_argument("--family", default="gaussian", choices=settings.allowed_families)
    p.add_argument("--p", type=int, default=1)
    p.add_argument("--n", type=int, default=256)
    p.add_argument("--lambdas", default="0.5,1,1.5,2,2.5,3,3.5,4")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--norms", action="store_true", help="Row/column norm concentration instead")
    p.add_argument("--n-list", default="100,200,400,800")
    p.add_argument("--seeds", type=int, default=30)
    p.set_defaults(func=cmd_tail_check)

    p = sub.add_parser("study", parents=[common], help="Config-driven multi-N study")
    p.add_argument("--config", default=None, help="Flat key = value config file")
    p.add_argument("--experiment", default=None, choices=[e.value for e in Experiment])
    p.add_argument("--n-list", default=None)
    for flag in ("--delta", "--beta", "--v0", "--q", "--alpha"):
        p.add_argument(flag, type=float, default=None)
    for flag in ("--seeds", "--tmax", "--grid-points", "--trials", "--p"):
        p.add_argument(flag, type=int, default=None)
    p.add_argument("--family", default=None, choices=settings.allowed_families)
    p.add_argument("--init", default=None, choices=settings.allowed_inits)
    p.add_argument("--outcome", default=None, choices=[o.value for o in OutcomeMode])
    p.add_argument("--m", type=int, default=None, help="Fixed number of factors for every N")
    p.add_argument("--threads", type=int, default=None, help="Replicate workers")
    p.add_argument("--dat", action="store_true")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=cmd_study, seed=None)

    p = sub.add_parser("serve", parents=[common], help="Start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    try:
        return args.func(args)
    except (LabError, ValueError) as e:
        log.error("%s", e)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
