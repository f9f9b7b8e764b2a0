import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rlscale.errors import FitError
from rlscale.fitkit import (
    AdditivePowerModel,
    ConstantModel,
    FitProblem,
    FitResult,
    SaturatingBatchModel,
    fit_loglinear,
    fit_power_law,
    inverse_softplus,
    minimize,
    normalize_inputs,
    normalize_inputs_or_fixed,
    power_law_r_squared,
    softplus,
)


class TestNormalization:
    def test_maps_extremes_to_half_and_two(self):
        x = np.array([3.0, 30.0, 300.0])
        xn, state = normalize_inputs(x)
        assert xn[0] == pytest.approx(0.5)
        assert xn[-1] == pytest.approx(2.0)
        assert np.allclose(state.inverse(xn), x)

    def test_geometric_middle_maps_to_one(self):
        xn, _ = normalize_inputs([2.0, 8.0, 32.0])
        assert xn[1] == pytest.approx(1.0)

    def test_degenerate_and_nonpositive(self):
        with pytest.raises(FitError):
            normalize_inputs([5.0, 5.0])
        with pytest.raises(FitError):
            normalize_inputs([-1.0, 2.0])

    def test_fixed_fallback_for_single_value(self):
        xn, state = normalize_inputs_or_fixed([7.0, 7.0])
        assert np.allclose(xn, 1.0)
        assert state.s == 1.0
        assert np.allclose(state.inverse(xn), 7.0)

    @given(st.floats(1e-8, 1e8))
    def test_softplus_round_trip(self, p):
        assert softplus(inverse_softplus(p)) == pytest.approx(p, rel=1e-9)

    def test_inverse_softplus_domain(self):
        with pytest.raises(FitError):
            inverse_softplus(0.0)


class TestMinimize:
    def test_constant_model_recovers_mean_scale(self):
        inputs = np.column_stack([[1.0, 2.0, 4.0], [1e5, 1e6, 1e7]])
        result = minimize(FitProblem(ConstantModel(), inputs, np.full(3, 42.0)))
        assert result.params["c"] == pytest.approx(42.0, rel=1e-8)
        assert result.loss < 1e-15

    def test_additive_power_recovery(self):
        # scales chosen so both power terms are comparable to d_min on the grid
        truth = dict(d_min=5e4, a=5e4 ** (1 / 0.45) * 10.0, alpha=0.45,
                     b=5e4 ** (1 / 0.8) * 300.0, beta=0.8)
        sigma = 2.0 ** np.arange(-2, 5)
        n = np.geomspace(1e5, 1e8, 7)
        S, N = map(np.ravel, np.meshgrid(sigma, n))
        y = truth["d_min"] + (truth["a"] / S) ** truth["alpha"] \
            + (truth["b"] / N) ** truth["beta"]
        result = minimize(FitProblem(AdditivePowerModel(),
                                     np.column_stack([S, N]), y))
        for k, v in truth.items():
            assert result.params[k] == pytest.approx(v, rel=1e-4), k
        assert result.converged

    def test_saturating_batch_recovery(self):
        truth = dict(a=1500.0, alpha=0.3, b=6e7, beta=1.1)
        sigma = 2.0 ** np.arange(-1, 5)
        n = np.geomspace(1e5, 1e8, 6)
        S, N = map(np.ravel, np.meshgrid(sigma, n))
        y = truth["a"] / (S ** truth["alpha"] * (1 + truth["b"] * N ** -truth["beta"]))
        result = minimize(FitProblem(SaturatingBatchModel(),
                                     np.column_stack([S, N]), y))
        for k, v in truth.items():
            assert result.params[k] == pytest.approx(v, rel=1e-4), k

    def test_restarts_recorded_on_plateau(self):
        # irreconcilable targets leave a high loss, triggering the restarts
        rng = np.random.default_rng(0)
        inputs = np.column_stack([10 ** rng.uniform(-1, 1, 30),
                                  10 ** rng.uniform(5, 8, 30)])
        y = 10 ** rng.uniform(0, 3, 30)
        result = minimize(FitProblem(AdditivePowerModel(), inputs, y))
        assert result.n_restarts_used == 8

    def test_problem_validation(self):
        inputs = np.ones((3, 2))
        with pytest.raises(FitError):
            FitProblem(ConstantModel(), inputs, np.ones(2))
        with pytest.raises(FitError):
            FitProblem(ConstantModel(), inputs, np.array([1.0, -1.0, 1.0]))
        with pytest.raises(FitError):
            FitProblem(AdditivePowerModel(), np.ones((2, 2)), np.ones(2))

    def test_fit_result_rejects_nonpositive_params(self):
        with pytest.raises(FitError):
            FitResult(params={"a": -1.0}, loss=0.0, converged=True, iterations=1)


class TestPowerLaw:
    def test_exact_recovery(self):
        x = np.geomspace(1.0, 1e4, 12)
        y = (50.0 / x) ** 0.7
        law = fit_power_law(x, y)
        assert law.scale == pytest.approx(50.0, rel=1e-10)
        assert law.exponent == pytest.approx(0.7, rel=1e-12)
        assert law.r_squared == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(law.predict(x), y)

    def test_increasing_data_gives_negative_exponent(self):
        x = np.array([1.0, 10.0, 100.0])
        law = fit_power_law(x, x ** 2)
        assert law.exponent == pytest.approx(-2.0)

    def test_heldout_r_squared(self):
        x = np.geomspace(1, 100, 8)
        y = (10.0 / x) ** 0.5
        law = fit_power_law(x[:5], y[:5])
        assert power_law_r_squared(law, x, y) == pytest.approx(1.0, abs=1e-12)

    def test_validation(self):
        with pytest.raises(FitError):
            fit_power_law([1.0], [1.0])
        with pytest.raises(FitError):
            fit_power_law([1.0, 1.0], [1.0, 2.0])
        with pytest.raises(FitError):
            fit_power_law([1.0, 2.0], [-1.0, 2.0])


class TestLogLinear:
    def test_exact_recovery(self):
        rng = np.random.default_rng(5)
        sigma = 10 ** rng.uniform(-1, 1, 20)
        n = 10 ** rng.uniform(5, 8, 20)
        b = np.exp(2.0 - 0.3 * np.log(sigma) + 0.1 * np.log(n))
        fit = fit_loglinear(np.column_stack([sigma, n]), b)
        assert fit.intercept == pytest.approx(2.0, abs=1e-9)
        assert fit.slope_sigma == pytest.approx(-0.3, abs=1e-9)
        assert fit.slope_n == pytest.approx(0.1, abs=1e-9)
        assert np.allclose(fit.predict(sigma, n), b)

    def test_rank_deficient_design(self):
        inputs = np.column_stack([np.ones(5), np.geomspace(1e5, 1e7, 5)])
        with pytest.raises(FitError, match="rank"):
            fit_loglinear(inputs, np.ones(5))
