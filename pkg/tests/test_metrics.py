import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from faver.errors import UndefinedCorrelationError
from faver.metrics import logistic4, logistic_fit, mapped_plcc_rmse, pearson, plcc_rmse, srocc
from oracles import spearman_by_formula

# quarter-integer grid: distinct values stay distinct under exp and cube
distinct = arrays(np.int64, st.integers(5, 30), elements=st.integers(-200, 200), unique=True).map(lambda a: a / 4.0)


class TestSrocc:
    def test_hand_cases(self):
        assert abs(srocc([1, 2, 3], [10, 20, 30]) - 1.0) < 1e-12
        assert abs(srocc([1, 2, 3], [30, 20, 10]) + 1.0) < 1e-12
        assert abs(srocc([1, 2, 3, 4], [1, 3, 2, 4]) - 0.8) < 1e-12

    def test_ties_use_mean_rank(self):
        # ranks (1.5, 1.5, 3) vs (1, 2, 3)
        assert srocc([5, 5, 7], [1, 2, 3]) == pytest.approx(pearson([1.5, 1.5, 3], [1, 2, 3]), abs=1e-15)

    @given(distinct, st.randoms(use_true_random=False))
    @settings(max_examples=50, deadline=None)
    def test_matches_rank_difference_formula(self, x, rnd):
        y = np.array(rnd.sample(range(1000), len(x)), dtype=float)
        assert abs(srocc(x, y) - spearman_by_formula(x, y)) < 1e-12

    @given(distinct, st.randoms(use_true_random=False))
    @settings(max_examples=50, deadline=None)
    def test_monotone_invariance(self, x, rnd):
        y = np.array(rnd.sample(range(1000), len(x)), dtype=float)
        ref = srocc(x, y)
        xs = x / 10  # keep exp finite and strictly increasing
        assert srocc(np.exp(xs), y) == pytest.approx(ref, abs=1e-12)
        assert srocc(x**3, y) == pytest.approx(ref, abs=1e-12)
        assert srocc(x, np.exp(y / 100)) == pytest.approx(ref, abs=1e-12)
        assert srocc(-x, y) == pytest.approx(-ref, abs=1e-12)

    def test_errors(self):
        with pytest.raises(UndefinedCorrelationError):
            srocc([1, 1, 1, 1], [1, 2, 3, 4])
        with pytest.raises(ValueError):
            srocc([1, 2], [1, 2])


class TestPlcc:
    def test_hand_cases(self):
        mos = np.array([2.0, 4.0, 6.0, 8.0])
        p, r = mapped_plcc_rmse(mos, mos)
        assert abs(p - 1) < 1e-12 and r == 0.0
        p, r = mapped_plcc_rmse(mos + 2.5, mos)
        assert abs(p - 1) < 1e-12 and abs(r - 2.5) < 1e-12
        # identity map of pred=(1,2,3,4): residuals (1,2,3,4), rmse = sqrt(30/4)
        p, r = mapped_plcc_rmse(np.array([1.0, 2, 3, 4]), mos)
        assert abs(p - 1) < 1e-12 and abs(r - math.sqrt(7.5)) < 1e-12

    def test_pearson_hand(self):
        # x=(1,2,3), y=(1,3,2): cov 0.5, var 1 and 1 (population) -> 0.5
        assert abs(pearson([1, 2, 3], [1, 3, 2]) - 0.5) < 1e-12


class TestLogisticFit:
    @pytest.mark.parametrize(
        "beta",
        [(80.0, 20.0, 0.5, 0.7), (90.0, 10.0, -1.0, 1.5), (5.0, 1.0, 2.0, 0.3), (20.0, 60.0, 0.0, 1.0)],
    )
    def test_recovers_forward_model(self, beta):
        x = np.random.default_rng(60).uniform(-3, 3, 40)
        mos = logistic4(x, *beta)
        fit = logistic_fit(x, mos)
        assert fit.sse < 1e-8
        assert np.allclose(fit.beta, beta, rtol=1e-4)

    def test_identity(self):
        x = np.random.default_rng(61).uniform(0, 100, 30)
        fit = logistic_fit(x, x.copy())
        assert np.sqrt(np.mean((fit.mapped - x) ** 2)) < 1e-6

    def test_mapped_uses_beta(self):
        rng = np.random.default_rng(62)
        x = rng.uniform(-2, 2, 25)
        mos = 50 + 20 * np.tanh(x) + rng.normal(size=25)
        fit = logistic_fit(x, mos)
        assert np.allclose(fit.mapped, logistic4(x, *fit.beta), atol=1e-9)
        assert fit.sse == pytest.approx(np.sum((fit.mapped - mos) ** 2))

    def test_preconditions(self):
        with pytest.raises(ValueError):
            logistic_fit(np.ones(10), np.arange(10.0))
        with pytest.raises(ValueError):
            logistic_fit(np.arange(7.0), np.arange(7.0))

    def test_budget_warning(self):
        rng = np.random.default_rng(63)
        x = rng.uniform(-2, 2, 25)
        with pytest.warns(RuntimeWarning):
            fit = logistic_fit(x, np.sin(3 * x) + x, max_iter=5)
        assert not fit.converged

    @given(st.integers(0, 10_000))
    @settings(max_examples=25, deadline=None)
    def test_beats_linear_fit(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(8, 40))
        x = rng.normal(size=n)
        assume(np.ptp(x) > 1e-3)
        mos = 50 + 10 * x + rng.normal(scale=rng.uniform(0.1, 10), size=n)
        if rng.uniform() < 0.5:
            mos = 50 + 30 * np.tanh(2 * x) + rng.normal(size=n)
        slope, icpt = np.polyfit(x, mos, 1)
        linear = pearson(slope * x + icpt, mos)
        fitted, _ = plcc_rmse(x, mos)
        assert fitted >= linear - 1e-6
