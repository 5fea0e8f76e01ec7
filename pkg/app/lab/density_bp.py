# app/lab/density_bp.py
"""Grid-based BP for arbitrary priors exp(-beta |s|^q) and arbitrary initial densities.

Message densities live on one uniform grid ``[-S, S]``. A hat density is the law
of (y_a - sum_{j != i} A_aj xi_j) / A_ai; it is obtained by multiplying the
characteristic functions of the weighted summands, evaluated by trapezoid
quadrature at the scaled frequencies, and inverting pointwise on the grid.
"""
from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import pandas as pd
from numpy.polynomial import hermite_e
from scipy import integrate, special

from ..core.config import settings
from ..core.errors import DensityError
from .amp_solver import least_norm
from .ensemble import ProblemInstance
from .gaussian_bp import (
    HatField,
    MessageField,
    ShadowField,
    hat_update,
    shadow_step,
    surrogate_params,
)
from .laws.base import InitialLaw
from .laws.loader import create_initial_law

log = logging.getLogger(__name__)

TINY = 1e-300
MASS_TOL = 1e-6
MAX_WIDEN = 4
MAX_FREQ = 4096
# decay / aliasing margins for the frequency grid, in standard deviations
CF_DECAY = 14.0
ALIAS_MARGIN = 12.0


# --------------------------
# Grids and densities
# --------------------------
@dataclass(frozen=True)
class Grid:
    half_width: float
    points: int
    center: float = 0.0

    def __post_init__(self) -> None:
        if self.points < 3 or not self.half_width > 0:
            raise DensityError(f"invalid grid: {self.points} points, half width {self.half_width}")

    @property
    def step(self) -> float:
        return 2.0 * self.half_width / (self.points - 1)

    @cached_property
    def s(self) -> np.ndarray:
        # offsets are exact half-integers or integers, so the grid is symmetric about center
        return self.center + self.step * (np.arange(self.points) - (self.points - 1) / 2.0)

    @cached_property
    def weights(self) -> np.ndarray:
        w = np.full(self.points, self.step)
        w[[0, -1]] *= 0.5
        return w

    def integrate(self, values: np.ndarray) -> np.ndarray:
        return integrate.trapezoid(values, dx=self.step, axis=-1)


def make_grid(half_width: float, points: int | None = None) -> Grid:
    points = points or settings.grid_points
    if points > settings.max_grid_points:
        raise DensityError(f"grid points {points} exceed limit {settings.max_grid_points}")
    return Grid(half_width=float(half_width), points=int(points))


@dataclass(frozen=True)
class GridDensity:
    grid: Grid
    values: np.ndarray

    @property
    def lo(self) -> float:
        return float(self.grid.s[0])

    @property
    def hi(self) -> float:
        return float(self.grid.s[-1])

    @property
    def step(self) -> float:
        return self.grid.step

    @classmethod
    def from_values(cls, grid: Grid, values: np.ndarray) -> GridDensity:
        return cls(grid=grid, values=_normalise(np.asarray(values, dtype=float), grid))

    def mass(self) -> float:
        return float(self.grid.integrate(self.values))


def _normalise(values: np.ndarray, grid: Grid) -> np.ndarray:
    if not np.all(np.isfinite(values)) or np.any(values < 0):
        raise DensityError("density values must be finite and nonnegative")
    total = grid.integrate(values)
    if np.any(total <= 0):
        raise DensityError("density has no mass on the window")
    return values / np.expand_dims(total, -1)


def window_half_width(v0: float, x_scale: float = 0.0) -> float:
    """max(12, 8 sqrt(v0), 4 x_scale + 8 sqrt(v0)); x_scale bounds message means."""
    sd = math.sqrt(v0)
    return max(12.0, 8.0 * sd, 4.0 * x_scale + 8.0 * sd)


def prior(q: float, beta: float, grid: Grid) -> GridDensity:
    """exp(-beta |s|^q), widening the window until the outside mass is below 1e-6."""
    if not (q > 0 and beta > 0):
        raise DensityError(f"prior needs q > 0 and beta > 0, got q={q}, beta={beta}")
    for _ in range(MAX_WIDEN + 1):
        outside = special.gammaincc(1.0 / q, beta * grid.half_width**q)
        if outside <= MASS_TOL:
            return GridDensity.from_values(grid, np.exp(-beta * np.abs(grid.s) ** q))
        log.info("prior mass %.2e outside [-%g, %g]; widening", outside,
                 grid.half_width, grid.half_width)
        grid = Grid(half_width=2.0 * grid.half_width, points=grid.points, center=grid.center)
    raise DensityError(f"prior q={q}, beta={beta} does not fit a window of {grid.half_width}")


def initial_density(law: InitialLaw, grid: Grid) -> GridDensity:
    return GridDensity.from_values(grid, law.pdf(grid.s))


# --------------------------
# Moments
# --------------------------
@dataclass(frozen=True)
class Moments:
    m1: float
    var: float
    m3_central: float
    m4_central: float
    rho3_raw: float


def _raw_moments(values: np.ndarray, grid: Grid, kmax: int) -> np.ndarray:
    """Raw moments 1..kmax along the last axis, shape (..., kmax)."""
    return np.stack([grid.integrate(values * grid.s**k) for k in range(1, kmax + 1)], axis=-1)


def moment_arrays(values: np.ndarray, grid: Grid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    raw = _raw_moments(values, grid, 3)
    x = raw[..., 0]
    return x, raw[..., 1] - x**2, raw[..., 2]


def moments(d: GridDensity) -> Moments:
    s = d.grid.s
    m1 = float(d.grid.integrate(d.values * s))
    c = s - m1
    return Moments(
        m1=m1,
        var=float(d.grid.integrate(d.values * c**2)),
        m3_central=float(d.grid.integrate(d.values * c**3)),
        m4_central=float(d.grid.integrate(d.values * c**4)),
        rho3_raw=float(d.grid.integrate(d.values * s**3)),
    )


# --------------------------
# Hat densities
# --------------------------
def _message_cf(values: np.ndarray, grid: Grid, freqs: np.ndarray) -> np.ndarray:
    """Trapezoid characteristic function of one grid density at ``freqs``."""
    return np.exp(1j * np.outer(freqs, grid.s)) @ (grid.weights * values)


def _hat_row(
    a_row: np.ndarray,
    y_a: float,
    values: np.ndarray,
    grid: Grid,
    out_s: np.ndarray,
    cols: Sequence[int],
) -> np.ndarray:
    """Unnormalised hat densities of one factor towards ``cols``, on ``out_s``."""
    n = a_row.shape[0]
    if n < 2:
        raise DensityError("a factor needs at least two variables")
    x, v, _ = moment_arrays(values, grid)
    mean_all, var_all = float(a_row @ x), float(a_row**2 @ v)

    loo_mean = {i: mean_all - a_row[i] * x[i] for i in cols}
    loo_sd = {i: math.sqrt(max(var_all - a_row[i] ** 2 * v[i], TINY)) for i in cols}
    sd_min = min(loo_sd.values())

    # period of the u-trapezoid must exceed the distance from every evaluation point
    # to the bulk of the summed law
    period = max(
        float(np.max(np.abs(y_a - a_row[i] * out_s - loo_mean[i]))) + ALIAS_MARGIN * loo_sd[i]
        for i in cols
    )
    du = 2.0 * math.pi / period
    u_max = CF_DECAY / sd_min
    nyquist = math.pi / (float(np.max(np.abs(a_row))) * grid.step)
    if u_max > nyquist:
        log.warning("frequency cut %.3g capped at grid Nyquist %.3g", u_max, nyquist)
        u_max = nyquist
    k = int(math.ceil(u_max / du)) + 1
    if k > MAX_FREQ:
        log.warning("frequency grid of %d points capped at %d", k, MAX_FREQ)
        k = MAX_FREQ
    u = du * np.arange(k)
    wu = np.full(k, du)
    wu[0] *= 0.5

    cf = np.stack([_message_cf(values[j], grid, a_row[j] * u) for j in range(n)])
    ones = np.ones((1, k), dtype=complex)
    before = np.cumprod(np.vstack([ones, cf[:-1]]), axis=0)
    after = np.cumprod(np.vstack([cf[1:], ones])[::-1], axis=0)[::-1]

    out = np.empty((len(cols), out_s.shape[0]))
    for row, i in enumerate(cols):
        z = y_a - a_row[i] * out_s
        phi = before[i] * after[i]
        dens = (np.exp(-1j * np.outer(z, u)) @ (wu * phi)).real / math.pi
        out[row] = abs(a_row[i]) * np.clip(dens, 0.0, None)
    return out


def _as_values(msgs, grid: Grid | None) -> tuple[np.ndarray, Grid]:
    if isinstance(msgs, np.ndarray):
        if grid is None:
            raise DensityError("a grid is required with raw message arrays")
        return msgs, grid
    msgs = list(msgs)
    return np.stack([d.values for d in msgs]), msgs[0].grid


def hat_density(
    inst: ProblemInstance,
    i: int,
    a: int,
    msgs: Sequence[GridDensity] | np.ndarray,
    grid: Grid | None = None,
    out_grid: Grid | None = None,
    normalise: bool = True,
) -> GridDensity:
    """Hat density from factor ``a`` to variable ``i``; ``msgs[j]`` is the message j -> a."""
    values, grid = _as_values(msgs, grid)
    if values.shape[0] != inst.n:
        raise DensityError(f"expected {inst.n} messages, got {values.shape[0]}")
    out_grid = out_grid or grid
    dens = _hat_row(inst.a[a], float(inst.y[a]), values, grid, out_grid.s, [i])[0]
    if not normalise:
        return GridDensity(grid=out_grid, values=dens)
    if out_grid.integrate(dens) <= 0:
        raise DensityError(f"hat density {a}->{i} vanished on the window")
    return GridDensity.from_values(out_grid, dens)


def _log_floor(values: np.ndarray) -> np.ndarray:
    return np.log(np.maximum(values, TINY))


def _exp_normalise(logv: np.ndarray, grid: Grid) -> np.ndarray:
    top = np.max(logv, axis=-1, keepdims=True)
    if not np.all(np.isfinite(top)):
        raise DensityError("product density is zero on the whole window")
    return _normalise(np.exp(logv - top), grid)


def node_density(prior_d: GridDensity, hats: Sequence[GridDensity]) -> GridDensity:
    logv = _log_floor(prior_d.values)
    for h in hats:
        if h.grid != prior_d.grid:
            raise DensityError("all densities must share the prior's grid")
        logv = logv + _log_floor(h.values)
    return GridDensity(grid=prior_d.grid, values=_exp_normalise(logv, prior_d.grid))


# --------------------------
# Edgeworth data
# --------------------------
@dataclass(frozen=True)
class EdgeworthData:
    p3: float
    xhat: float
    vhat: float

    def __post_init__(self) -> None:
        if not self.vhat > 0:
            raise DensityError("vhat must be positive")


def edgeworth_p3(
    inst: ProblemInstance,
    a: int,
    i: int,
    x: np.ndarray,
    v: np.ndarray,
    rho: np.ndarray,
) -> float:
    """Third cumulant of the hat variable, from the moments of the messages j -> a."""
    row = np.asarray(inst.a[a], dtype=float)
    kappa3 = np.asarray(rho) - 3.0 * np.asarray(x) * np.asarray(v) - np.asarray(x) ** 3
    terms = row**3 * kappa3
    return float(-(terms.sum() - terms[i]) / row[i] ** 3)


def edgeworth_field(inst: ProblemInstance, x: np.ndarray, v: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """All P values at once; x, v, rho are m x n edge arrays of messages i -> a."""
    a3 = inst.a**3
    terms = a3 * (rho - 3.0 * x * v - x**3)
    return -(terms.sum(axis=1, keepdims=True) - terms) / a3


def cumulant_p3(
    inst: ProblemInstance,
    a: int,
    i: int,
    msgs: Sequence[GridDensity] | np.ndarray,
    grid: Grid | None = None,
    h: float = 1e-3,
) -> float:
    """Finite-difference third derivative at 0 of the log-MGF of the hat variable."""
    values, grid = _as_values(msgs, grid)
    row = inst.a[a]
    scale = -row / row[i]

    def log_mgf(r: float) -> float:
        return math.fsum(
            math.log(float(grid.integrate(values[j] * np.exp(r * scale[j] * grid.s))))
            for j in range(inst.n) if j != i
        )

    return (log_mgf(2 * h) - 2 * log_mgf(h) + 2 * log_mgf(-h) - log_mgf(-2 * h)) / (2 * h**3)


def edg_factor(s, ed: EdgeworthData):
    z = (np.asarray(s, dtype=float) - ed.xhat) / math.sqrt(ed.vhat)
    out = 1.0 + ed.p3 / 6.0 / ed.vhat**1.5 * hermite_e.hermeval(z, [0.0, 0.0, 0.0, 1.0])
    return float(out) if np.ndim(out) == 0 else out


def edgeworth_ratio_sup(
    inst: ProblemInstance,
    i: int,
    a: int,
    msgs: Sequence[GridDensity] | np.ndarray,
    grid: Grid | None = None,
    points: int = 257,
) -> float:
    """sup over |s - xhat| <= 3 sqrt(vhat) of |hat / (phi * EDG) - 1|."""
    values, grid = _as_values(msgs, grid)
    x, v, rho = moment_arrays(values, grid)
    row = inst.a[a]
    others = np.arange(inst.n) != i
    xhat = (inst.y[a] - row[others] @ x[others]) / row[i]
    vhat = (row[others] ** 2 @ v[others]) / row[i] ** 2
    ed = EdgeworthData(p3=edgeworth_p3(inst, a, i, x, v, rho), xhat=float(xhat), vhat=float(vhat))
    local = Grid(half_width=3.0 * math.sqrt(vhat), points=points, center=float(xhat))
    hat = hat_density(inst, i, a, values, grid, out_grid=local, normalise=False)
    gauss = np.exp(-0.5 * (local.s - xhat) ** 2 / vhat) / math.sqrt(2.0 * math.pi * vhat)
    approx = gauss * edg_factor(local.s, ed)
    ok = approx > 0
    return float(np.max(np.abs(hat.values[ok] / approx[ok] - 1.0)))


# --------------------------
# Gaussian surrogate
# --------------------------
def surrogate_average(
    grid: Grid, mu, sigma, kmax: int, *, beta: float, q: float = 2.0
) -> np.ndarray:
    """Raw moments 1..kmax of prior(s) * phi_{mu, sigma}(s), normalised; shape (..., kmax)."""
    mu = np.asarray(mu, dtype=float)[..., None]
    sigma = np.asarray(sigma, dtype=float)[..., None]
    logw = -beta * np.abs(grid.s) ** q - 0.5 * (grid.s - mu) ** 2 / sigma
    w = _exp_normalise(logw, grid)
    return _raw_moments(w, grid, kmax)


def gaussian_proximity(
    d: GridDensity, mu: float, sigma: float, k_max: int = 4, *, beta: float, q: float = 2.0
) -> np.ndarray:
    own = _raw_moments(d.values, d.grid, k_max)
    return np.abs(own - surrogate_average(d.grid, mu, sigma, k_max, beta=beta, q=q))


# --------------------------
# Runs
# --------------------------
RECORD_COLUMNS = ["t", "a", "i", "mean", "var", "rho3", "gap_k1", "gap_k2", "gap_k3", "gap_k4"]


@dataclass
class DensityTrace:
    grid: Grid
    moments: list[tuple[np.ndarray, np.ndarray, np.ndarray]] = field(default_factory=list)
    hats: list[HatField] = field(default_factory=list)
    shadows: list[ShadowField] = field(default_factory=list)
    gaps: list[np.ndarray] = field(default_factory=list)
    values: np.ndarray | None = None
    records: pd.DataFrame | None = None


def _records(t: int, x, v, rho, gaps) -> pd.DataFrame:
    m, n = x.shape
    aa, ii = np.meshgrid(np.arange(m), np.arange(n), indexing="ij")
    frame = {
        "t": np.full(m * n, t), "a": aa.ravel(), "i": ii.ravel(),
        "mean": x.ravel(), "var": v.ravel(), "rho3": rho.ravel(),
    }
    for k in range(4):
        frame[f"gap_k{k + 1}"] = gaps[..., k].ravel() if gaps is not None else np.nan
    return pd.DataFrame(frame, columns=RECORD_COLUMNS)


def run_density_bp(
    inst: ProblemInstance,
    q: float,
    beta: float,
    init: str | InitialLaw,
    v0: float,
    tmax: int,
    grid_points: int | None = None,
    half_width: float | None = None,
) -> DensityTrace:
    if inst.n > settings.max_density_n:
        raise DensityError(f"density engine limited to n <= {settings.max_density_n}")
    if not 1 <= tmax <= 6:
        raise DensityError("tmax must lie in 1..6")
    if q != 2.0:
        log.info("q=%g run is exploratory beyond t=1", q)
    law = create_initial_law(init, v0) if isinstance(init, str) else init
    if half_width is None:
        half_width = window_half_width(v0, float(np.max(np.abs(least_norm(inst)))))
    grid = make_grid(half_width, grid_points)
    prior_d = prior(q, beta, grid)
    grid = prior_d.grid
    log_prior = _log_floor(prior_d.values)

    m, n = inst.a.shape
    values = np.broadcast_to(initial_density(law, grid).values, (m, n, grid.points)).copy()
    trace = DensityTrace(grid=grid)
    frames = []
    gaps = None
    for t in range(tmax + 1):
        x, v, rho = moment_arrays(values, grid)
        trace.moments.append((x, v, rho))
        frames.append(_records(t, x, v, rho, gaps))
        if t == tmax:
            break

        hat = hat_update(inst, MessageField(x=x, v=v, t=t))
        trace.hats.append(hat)
        trace.shadows.append(shadow_step(inst, hat, beta))
        mu, sigma = surrogate_params(hat)

        log_hats = np.empty_like(values)
        for a in range(m):
            raw = _hat_row(inst.a[a], float(inst.y[a]), values[a], grid, grid.s, range(n))
            mass = grid.integrate(raw)
            if np.any(mass <= 0):
                raise DensityError(f"hat densities of factor {a} vanished on the window")
            log_hats[a] = _log_floor(raw / mass[:, None])
        log_nodes = log_prior + (log_hats.sum(axis=0, keepdims=True) - log_hats)
        values = _exp_normalise(log_nodes, grid)

        gaps = np.abs(_raw_moments(values, grid, 4)
                      - surrogate_average(grid, mu, sigma, 4, beta=beta, q=q))
        trace.gaps.append(gaps)
        log.debug("density t=%d median gap_k1=%.3e", t + 1, float(np.median(gaps[..., 0])))

    trace.values = values
    trace.records = pd.concat(frames, ignore_index=True)
    return trace
