import math

import numpy as np
import pytest

from app.core.errors import FitError
from app.lab.scaling import exceedance_rates, fit_scaling, loglog_fit

N_LIST = [100, 200, 400, 800]


class TestFitScaling:
    def test_inverse_square_root(self):
        fit = fit_scaling((n, 7.0 / math.sqrt(n)) for n in N_LIST)
        assert fit.slope == pytest.approx(-0.5, abs=1e-12)
        assert fit.intercept == pytest.approx(math.log(7.0), abs=1e-10)
        assert fit.r2 == pytest.approx(1.0)
        assert fit.n_points == 4

    def test_inverse(self):
        fit = fit_scaling((n, 3.0 / n) for n in N_LIST)
        assert fit.slope == pytest.approx(-1.0, abs=1e-12)

    def test_drops_nonpositive(self, caplog):
        points = [(n, 2.0 / n) for n in N_LIST] + [(1600, 0.0), (3200, -1.0)]
        fit = fit_scaling(points)
        assert fit.n_points == 4
        assert "dropped 2" in caplog.text

    def test_needs_three_points(self):
        with pytest.raises(FitError):
            fit_scaling([(100, 0.1), (200, 0.05), (400, 0.0)])

    def test_constant_target(self):
        fit = loglog_fit(np.array(N_LIST), np.full(4, 0.3))
        assert fit.slope == pytest.approx(0.0, abs=1e-12)
        assert fit.r2 == 1.0


class TestExceedance:
    def test_rates(self):
        assert exceedance_rates(np.array([0.05, 0.12, 0.2, 0.3]), 100) == (0.75, 0.5)

    def test_empty(self):
        lo, hi = exceedance_rates(np.array([]), 100)
        assert math.isnan(lo) and math.isnan(hi)
