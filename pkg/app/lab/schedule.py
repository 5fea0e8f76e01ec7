# app/lab/schedule.py
"""Deterministic schedules of the Gaussian-initialised l2 iteration.

v(t) is the common limiting edge variance, delta_t(t) the step factor
delta / (2 beta v(t) + delta), and gamma_lambda(t, lam) the product of the
last ``lam`` step factors before ``t``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import pandas as pd

from ..core.errors import ScheduleError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ContractionRates:
    rho1: float
    rho2: float
    gamma0: float
    valid: bool
    # both spectral edges; rho1/rho2 only control the lower one
    rho_two_sided: float
    converges: bool


@dataclass(frozen=True)
class VarianceSchedule:
    v0: float
    beta: float
    delta: float

    def __post_init__(self) -> None:
        if not self.v0 > 0:
            raise ScheduleError(f"v0 must be positive, got {self.v0}")
        if not self.beta >= 0:
            raise ScheduleError(f"beta must be nonnegative, got {self.beta}")
        if not 0.0 < self.delta < 1.0:
            raise ScheduleError(f"delta must lie in (0, 1), got {self.delta}")

    @property
    def threshold(self) -> float:
        """Smallest beta for which gamma(beta, t) >= 0."""
        return (1.0 - self.delta) / (2.0 * self.v0)

    def _power(self, t: int) -> float:
        if t < 0:
            raise ScheduleError(f"t must be nonnegative, got {t}")
        return self.delta**t  # underflows to 0.0 for large t

    def v(self, t: int) -> float:
        d, dl = self._power(t), self.delta
        if self.beta == 0.0:
            if d == 0.0:
                raise ScheduleError(f"v({t}) overflows for beta = 0")
            return self.v0 / d
        return self.v0 * (1.0 - dl) / (d * (1.0 - dl) + 2.0 * self.beta * self.v0 * (1.0 - d))

    def iterate_v(self, t: int) -> float:
        """Same quantity by running v -> v / (2 beta v + delta)."""
        if t < 0:
            raise ScheduleError(f"t must be nonnegative, got {t}")
        v = self.v0
        for _ in range(t):
            v = v / (2.0 * self.beta * v + self.delta)
        return v

    def delta_t(self, t: int) -> float:
        if self.beta == 0.0:
            self._power(t)
            return 1.0
        return self.delta / (2.0 * self.beta * self.v(t) + self.delta)

    def gamma(self, t: int) -> float:
        dl, d1 = self.delta, self._power(t + 1)
        bv = 2.0 * self.beta * self.v0
        denom = d1 * (1.0 - dl) + bv * (1.0 - d1)
        # beta = 0: -(1 - delta) / delta**(t + 1), which leaves float range for large t
        out = (1.0 - dl) * (bv - (1.0 - dl)) / denom if denom > 0.0 else math.inf
        if not math.isfinite(out):
            raise ScheduleError(f"gamma({t}) overflows for beta = {self.beta}")
        return out

    def delta_t_via_gamma(self, t: int) -> float:
        return self.delta - self._power(t + 1) * self.gamma(t)

    def gamma_lambda(self, t: int, lam: int) -> float:
        if not 1 <= lam <= t:
            raise ScheduleError(f"need 1 <= lambda <= t, got lambda={lam}, t={t}")
        return math.prod(self.delta_t(t - tau) for tau in range(1, lam + 1))

    def contraction_rates(self) -> ContractionRates:
        sq = math.sqrt(self.delta)
        lam_minus, lam_plus = (1.0 - sq) ** 2, (1.0 + sq) ** 2
        g0 = self.gamma(0)
        valid = self.beta >= self.threshold
        if not valid:
            log.warning("beta=%g below contraction threshold %g", self.beta, self.threshold)
        # step/delta is monotone in t: 1 - gamma0 at t=0, 1 in the limit (1/delta if beta=0)
        c_lo, c_hi = 1.0 - g0, (1.0 if self.beta > 0 else 1.0 / self.delta)
        two_sided = max(abs(1.0 - c * lam) for c in (c_lo, c_hi) for lam in (lam_minus, lam_plus))
        return ContractionRates(
            rho1=1.0 - lam_minus * (1.0 - g0),
            rho2=sq * (2.0 - sq),
            gamma0=g0,
            valid=valid,
            rho_two_sided=two_sided,
            converges=valid and two_sided < 1.0,
        )

    def table(self, tmax: int) -> pd.DataFrame:
        rows = [
            {
                "t": t,
                "v": self.v(t),
                "delta_t": self.delta_t(t),
                "gamma_1": self.gamma_lambda(t, 1) if t >= 1 else float("nan"),
            }
            for t in range(tmax + 1)
        ]
        return pd.DataFrame(rows, columns=["t", "v", "delta_t", "gamma_1"])
