import numpy as np
import pytest

from rlscale.errors import FitError, ValidationError
from rlscale.laws import (
    BatchRuleFit,
    DataFit,
    SharedExponentFamily,
    batch_sensitivity,
    eval_batch_rule,
    eval_batch_rule_factorized,
    eval_data_fit,
    fit_batch_rule,
    fit_data_efficiency,
    normalize_across_tasks,
    relative_error,
)
from rlscale.preprocess import EfficiencyPoint
from rlscale.reference import BATCH_RULES, DATA_FITS


def surface_points(fit, sigma_grid, n_grid, task_id=None, scale=1.0):
    return [
        EfficiencyPoint(sigma=s, model_size=n, batch_size=128,
                        threshold=fit.threshold,
                        data=float(eval_data_fit(fit, s, n)) * scale,
                        task_id=task_id)
        for s in sigma_grid for n in n_grid
    ]


SIGMAS = tuple(2.0 ** np.arange(-2, 5))
NS = tuple(np.geomspace(1e5, 1e8, 7))


class TestForms:
    def test_factored_round_trip(self):
        fit = DataFit.from_factored(5.11e4, 2.59e5, 0.15, 1.70e7, 0.75,
                                    threshold=780)
        d, a_f, alpha, b_f, beta = fit.to_factored()
        assert (d, alpha, beta) == (5.11e4, 0.15, 0.75)
        assert a_f == pytest.approx(2.59e5, rel=1e-12)
        assert b_f == pytest.approx(1.70e7, rel=1e-12)

    def test_factored_forms_agree_pointwise(self):
        fit = DATA_FITS["h1-crawl"]
        d, a_f, alpha, b_f, beta = fit.to_factored()
        for s, n in [(1.0, 1e6), (4.0, 1e7), (0.5, 3e5)]:
            direct = float(eval_data_fit(fit, s, n))
            factored = d * (1 + (a_f / s) ** alpha + (b_f / n) ** beta)
            assert direct == pytest.approx(factored, rel=1e-12)

    def test_published_batch_rule_value(self):
        # the printed h1-crawl coefficients give B(1, 2.3e6) ~ 3.05e2
        val = float(eval_batch_rule(BATCH_RULES["h1-crawl"], 1.0, 2.3e6))
        assert val == pytest.approx(305.27, rel=1e-3)

    def test_batch_forms_equivalent(self):
        fit = BATCH_RULES["humanoid-stand"]
        s = np.array([0.5, 1.0, 4.0])
        n = np.array([1e5, 1e6, 1e8])
        assert np.allclose(eval_batch_rule(fit, s, n),
                           eval_batch_rule_factorized(fit, s, n), rtol=1e-13)

    def test_coefficient_positivity(self):
        with pytest.raises(ValidationError):
            BatchRuleFit(a_b=-1, b_b=1, alpha_b=1, beta_b=1)
        with pytest.raises(ValidationError):
            DataFit(d_min=1, a=1, alpha=0, b=1, beta=1)


class TestFitBatchRule:
    def test_recovery_and_requirements(self):
        truth = BATCH_RULES["h1-crawl"]
        pts = [(s, n, float(eval_batch_rule(truth, s, n)))
               for s in (0.5, 1, 2, 4, 8) for n in np.geomspace(1e5, 1e8, 5)]
        fit, result = fit_batch_rule(pts)
        assert fit.a_b == pytest.approx(truth.a_b, rel=1e-4)
        assert fit.beta_b == pytest.approx(truth.beta_b, rel=1e-4)
        assert result.loss < 1e-12

    def test_input_validation(self):
        with pytest.raises(FitError, match=">= 4"):
            fit_batch_rule([(1, 1e6, 100), (2, 1e6, 90), (4, 1e6, 80)])
        with pytest.raises(FitError, match="distinct"):
            fit_batch_rule([(1, 1e6, 100), (1, 1e6, 90),
                            (1, 2e6, 80), (1, 4e6, 70)])


class TestFitDataEfficiency:
    def test_independent_recovery(self):
        truth = DataFit(d_min=5e4, a=5e4 ** (1 / 0.3) * 50.0, alpha=0.3,
                        b=5e4 ** (1 / 0.7) * 500.0, beta=0.7, threshold=780.0)
        fit, _ = fit_data_efficiency(surface_points(truth, SIGMAS, NS))
        assert fit.alpha == pytest.approx(truth.alpha, rel=1e-4)
        assert fit.beta == pytest.approx(truth.beta, rel=1e-4)
        assert fit.d_min == pytest.approx(truth.d_min, rel=1e-3)
        assert fit.threshold == 780.0
        assert not fit.unstable

    def test_mixed_thresholds_rejected(self):
        pts = [EfficiencyPoint(1, 1e6, 128, 400.0, 100.0),
               EfficiencyPoint(1, 1e6, 128, 800.0, 200.0)]
        with pytest.raises(FitError, match="thresholds"):
            fit_data_efficiency(pts)

    def test_too_few_points(self):
        pts = [EfficiencyPoint(s, 1e6, 128, 400.0, 100.0) for s in (1, 2, 3, 4)]
        with pytest.raises(FitError, match=">= 5"):
            fit_data_efficiency(pts)

    def test_shared_exponent_ties_alpha_beta(self):
        alpha, beta = 0.35, 0.65
        f1 = DataFit(d_min=4e4, a=4e4 ** (1 / alpha) * 20, alpha=alpha,
                     b=4e4 ** (1 / beta) * 200, beta=beta, threshold=700.0)
        f2 = DataFit(d_min=2e5, a=2e5 ** (1 / alpha) * 60, alpha=alpha,
                     b=2e5 ** (1 / beta) * 800, beta=beta, threshold=700.0)
        pts = surface_points(f1, SIGMAS, NS, "env-a") \
            + surface_points(f2, SIGMAS, NS, "env-b")
        fam, _ = fit_data_efficiency(pts, mode="shared_exponent")
        assert isinstance(fam, SharedExponentFamily)
        assert fam.alpha == pytest.approx(alpha, rel=1e-3)
        assert fam.beta == pytest.approx(beta, rel=1e-3)
        for env, truth in (("env-a", f1), ("env-b", f2)):
            task = fam.task_fit(env)
            assert task.d_min == pytest.approx(truth.d_min, rel=1e-2)
        with pytest.raises(FitError, match="labeled"):
            fit_data_efficiency(surface_points(f1, SIGMAS, NS, "only"),
                                mode="shared_exponent")

    def test_aggregated_mode_pools_envs(self):
        truth = DataFit(d_min=5e4, a=5e4 ** (1 / 0.3) * 50.0, alpha=0.3,
                        b=5e4 ** (1 / 0.7) * 500.0, beta=0.7, threshold=700.0)
        # second env is a scaled copy; median normalization removes the scale
        pts = surface_points(truth, SIGMAS, NS, "env-a") \
            + surface_points(truth, SIGMAS, NS, "env-b", scale=3.0)
        fit, _ = fit_data_efficiency(pts, mode="aggregated")
        assert fit.alpha == pytest.approx(truth.alpha, rel=1e-3)
        assert fit.beta == pytest.approx(truth.beta, rel=1e-3)
        with pytest.raises(FitError, match=">= 2 envs"):
            fit_data_efficiency(surface_points(truth, SIGMAS, NS, "env-a"),
                                mode="aggregated")

    def test_unknown_mode(self):
        pts = [EfficiencyPoint(s, 1e6, 128, 400.0, 100.0) for s in (1, 2, 3)]
        with pytest.raises(FitError, match="unknown mode"):
            fit_data_efficiency(pts, mode="bogus")


class TestNormalizeAcrossTasks:
    def test_lower_median_rescaling(self):
        def pt(d, env):
            return EfficiencyPoint(1.0, 1e6, 128, 700.0, d, task_id=env)
        tables = {"a": [pt(100, "a"), pt(400, "a")],   # lower median 100
                  "b": [pt(300, "b"), pt(500, "b")]}   # lower median 300
        out, norm = normalize_across_tasks(tables)
        assert norm.per_env_median == {"a": 100.0, "b": 300.0}
        assert norm.global_median == 100.0  # lower of {100, 300}
        by_env = {}
        for p in out:
            by_env.setdefault(p.task_id, []).append(p.data)
        assert sorted(by_env["a"]) == [100.0, 400.0]
        assert sorted(by_env["b"]) == [100.0, pytest.approx(500.0 / 3.0)]


class TestRelativeError:
    def test_known_value(self):
        assert relative_error(np.array([110.0, 90.0]),
                              np.array([100.0, 100.0])) == pytest.approx(0.1)

    def test_validation(self):
        with pytest.raises(ValidationError):
            relative_error(np.array([1.0]), np.array([1.0, 2.0]))
        with pytest.raises(ValidationError):
            relative_error(np.array([-1.0]), np.array([1.0]))


class TestBatchSensitivity:
    def test_reference_bin_is_unity_and_off_bins_penalized(self):
        rule = BatchRuleFit(a_b=1000.0, b_b=1e6, alpha_b=0.3, beta_b=1.0)
        pts = []
        for s, n in [(1.0, 1e6), (2.0, 4e6)]:
            b_star = float(eval_batch_rule(rule, s, n))
            base = 1000.0 * s
            for factor in (1.0, 1.8, 3.0, 12.0):
                penalty = 1.0 + 0.5 * np.log(factor) ** 2
                pts.append(EfficiencyPoint(s, n, b_star * factor, 700.0,
                                           base * penalty))
        rows = batch_sensitivity(pts, rule)
        by_bin = {(r.lo, r.hi): r for r in rows}
        star = by_bin[(2 / 3, 1.5)]
        assert star.ratio == pytest.approx(1.0)
        assert star.n_groups == 2
        assert by_bin[(2.0, 4.0)].ratio > 1.0
        assert by_bin[(8.0, 16.0)].ratio > by_bin[(2.0, 4.0)].ratio
        assert by_bin[(1 / 16, 1 / 8)].ratio is None
        assert by_bin[(1 / 16, 1 / 8)].n_groups == 0
