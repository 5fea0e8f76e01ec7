import logging
import math

import numpy as np
import pytest

from app.core.errors import ScheduleError
from app.lab.schedule import VarianceSchedule


class TestVariance:
    def test_closed_form_matches_recursion(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            sched = VarianceSchedule(
                v0=float(rng.uniform(0.1, 5.0)),
                beta=float(rng.uniform(0.01, 3.0)),
                delta=float(rng.uniform(0.05, 0.95)),
            )
            t = int(rng.integers(0, 51))
            np.testing.assert_allclose(sched.v(t), sched.iterate_v(t), rtol=1e-10)

    def test_one_step(self):
        assert VarianceSchedule(v0=1.0, beta=0.5, delta=0.5).v(1) == pytest.approx(2 / 3)

    def test_t_zero(self):
        assert VarianceSchedule(v0=1.7, beta=0.3, delta=0.4).v(0) == pytest.approx(1.7)

    def test_beta_zero(self):
        sched = VarianceSchedule(v0=2.0, beta=0.0, delta=0.5)
        assert sched.v(3) == pytest.approx(16.0)
        assert all(sched.delta_t(t) == 1.0 for t in range(10))

    def test_large_t_limit(self):
        sched = VarianceSchedule(v0=1.0, beta=2.0, delta=0.5)
        assert sched.v(5000) == pytest.approx(0.5 / 4.0)

    def test_monotone(self):
        sched = VarianceSchedule(v0=1.0, beta=1.0, delta=0.3)
        v = [sched.v(t) for t in range(15)]
        d = [sched.delta_t(t) for t in range(30)]
        assert all(b < a for a, b in zip(v, v[1:]))
        assert all(b >= a for a, b in zip(d, d[1:]))

    @pytest.mark.parametrize("kwargs", [
        {"v0": 0.0, "beta": 1.0, "delta": 0.5},
        {"v0": 1.0, "beta": -1.0, "delta": 0.5},
        {"v0": 1.0, "beta": 1.0, "delta": 1.0},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ScheduleError):
            VarianceSchedule(**kwargs)

    def test_negative_t(self):
        with pytest.raises(ScheduleError):
            VarianceSchedule(v0=1.0, beta=1.0, delta=0.5).v(-1)


class TestStepFactors:
    def test_delta_t_half_ratio(self):
        assert VarianceSchedule(v0=1.0, beta=0.5, delta=0.5).delta_t(1) == pytest.approx(3 / 7)

    def test_gamma_half_ratio(self):
        sched = VarianceSchedule(v0=1.0, beta=1.0, delta=0.5)
        assert sched.gamma(0) == pytest.approx(0.6)
        assert sched.delta_t(0) == pytest.approx(0.2)

    def test_two_forms_agree(self):
        for delta in (0.1, 0.5, 0.9):
            for beta in (0.2, 1.0, 5.0):
                for v0 in (0.5, 1.0, 3.0):
                    sched = VarianceSchedule(v0=v0, beta=beta, delta=delta)
                    for t in range(20):
                        np.testing.assert_allclose(
                            sched.delta_t(t), sched.delta_t_via_gamma(t), rtol=1e-12
                        )

    def test_gamma_lambda(self):
        sched = VarianceSchedule(v0=1.0, beta=0.5, delta=0.5)
        assert sched.gamma_lambda(2, 2) == pytest.approx(1 / 7)
        assert sched.gamma_lambda(5, 1) == sched.delta_t(4)
        assert sched.gamma_lambda(5, 3) <= sched.gamma_lambda(5, 2)

    def test_gamma_lambda_beta_zero(self):
        sched = VarianceSchedule(v0=1.0, beta=0.0, delta=0.5)
        assert sched.gamma_lambda(4, 3) == 1.0

    def test_gamma_beta_zero_limit(self):
        sched = VarianceSchedule(v0=1.0, beta=0.0, delta=0.5)
        assert sched.gamma(3) == pytest.approx(-0.5 / 0.5**4)

    def test_gamma_beta_zero_overflow(self):
        with pytest.raises(ScheduleError):
            VarianceSchedule(v0=1.0, beta=0.0, delta=0.5).gamma(2000)

    @pytest.mark.parametrize("t,lam", [(2, 0), (2, 3), (0, 1)])
    def test_gamma_lambda_range(self, t, lam):
        with pytest.raises(ScheduleError):
            VarianceSchedule(v0=1.0, beta=1.0, delta=0.5).gamma_lambda(t, lam)

    def test_gamma_nonnegative_above_threshold(self):
        sched = VarianceSchedule(v0=1.0, beta=0.6, delta=0.2)
        g = [sched.gamma(t) for t in range(30)]
        assert all(0.0 <= x < 1.0 for x in g)
        assert all(b >= a - 1e-15 for a, b in zip(g, g[1:]))


class TestContractionRates:
    def test_rho2(self):
        assert VarianceSchedule(v0=1.0, beta=1.0, delta=0.25).contraction_rates().rho2 == 0.75

    def test_rates_coincide_at_threshold(self):
        sched = VarianceSchedule(v0=1.0, beta=0.25, delta=0.5)
        rates = sched.contraction_rates()
        assert rates.gamma0 == pytest.approx(0.0, abs=1e-15)
        assert rates.rho1 == pytest.approx(rates.rho2)

    def test_reference_values(self):
        rates = VarianceSchedule(v0=1.0, beta=1.0, delta=0.5).contraction_rates()
        assert rates.rho1 == pytest.approx(1 - (1 - math.sqrt(0.5)) ** 2 * 0.4)
        assert rates.valid
        # upper spectral edge exceeds 2 at delta = 1/2
        assert not rates.converges

    def test_two_sided_small_delta(self):
        rates = VarianceSchedule(v0=1.0, beta=1.0, delta=0.1).contraction_rates()
        assert rates.converges
        assert rates.rho_two_sided == pytest.approx(
            1 - (1 - 0.99 / 1.89) * (1 - math.sqrt(0.1)) ** 2
        )

    def test_flags_low_beta(self, caplog):
        with caplog.at_level(logging.WARNING):
            rates = VarianceSchedule(v0=1.0, beta=0.1, delta=0.5).contraction_rates()
        assert not rates.valid
        assert not rates.converges
        assert "threshold" in caplog.text


def test_table():
    table = VarianceSchedule(v0=1.0, beta=0.5, delta=0.5).table(3)
    assert list(table.columns) == ["t", "v", "delta_t", "gamma_1"]
    assert math.isnan(table.loc[0, "gamma_1"])
    np.testing.assert_allclose(table["gamma_1"][1:], table["delta_t"][:-1].to_numpy())
