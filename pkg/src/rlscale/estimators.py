"""Scikit-learn style estimators wrapping the scaling-law fits.

Both estimators take X with columns (utd_ratio, model_size) and a positive
target (batch size or env steps to threshold), so they compose with
sklearn pipelines, grid search, and cross-validation.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .fitkit import FitProblem, minimize
from .fitkit import AdditivePowerModel, SaturatingBatchModel
from .laws import BatchRuleFit, DataFit, eval_batch_rule, eval_data_fit, relative_error


def _check_positive_xy(X, y):
    X, y = check_X_y(X, y, ensure_2d=True, dtype=float)
    if X.shape[1] != 2:
        raise ValueError("X must have exactly 2 columns: (utd_ratio, model_size)")
    if np.any(X <= 0) or np.any(y <= 0):
        raise ValueError("inputs and targets must be strictly positive")
    return X, y


class _LogSpaceRegressor(BaseEstimator, RegressorMixin):
    """Shared fit/predict plumbing for the positive log-space fits."""

    _model_cls = None

    def __init__(self, rng_seed: int = 0):
        self.rng_seed = rng_seed

    def _wrap_params(self, params: dict) -> object:
        raise NotImplementedError

    def _evaluate(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def fit(self, X, y):
        X, y = _check_positive_xy(X, y)
        result = minimize(FitProblem(
            model=self._model_cls(), inputs=X, targets=y, rng_seed=self.rng_seed,
        ))
        self.result_ = result
        self.law_ = self._wrap_params(result.params)
        self.n_features_in_ = 2
        return self

    def predict(self, X):
        check_is_fitted(self, "law_")
        X = check_array(X, dtype=float)
        if X.shape[1] != 2 or np.any(X <= 0):
            raise ValueError("X must be positive with 2 columns")
        return self._evaluate(X)

    def score(self, X, y):
        """Negative mean absolute relative error (higher is better)."""
        return -relative_error(self.predict(X), np.asarray(y, dtype=float))


class BatchSizeRule(_LogSpaceRegressor):
    """Estimator for the saturating batch-size rule B(utd, model_size)."""

    _model_cls = SaturatingBatchModel

    def _wrap_params(self, params):
        return BatchRuleFit(a_b=params["a"], b_b=params["b"],
                            alpha_b=params["alpha"], beta_b=params["beta"])

    def _evaluate(self, X):
        return np.asarray(eval_batch_rule(self.law_, X[:, 0], X[:, 1]), dtype=float)


class DataEfficiencySurface(_LogSpaceRegressor):
    """Estimator for the additive data-efficiency surface D(utd, model_size)."""

    _model_cls = AdditivePowerModel

    def __init__(self, rng_seed: int = 0, threshold: float = float("nan")):
        super().__init__(rng_seed=rng_seed)
        self.threshold = threshold

    def _wrap_params(self, params):
        return DataFit(d_min=params["d_min"], a=params["a"], alpha=params["alpha"],
                       b=params["b"], beta=params["beta"], threshold=self.threshold)

    def _evaluate(self, X):
        return np.asarray(eval_data_fit(self.law_, X[:, 0], X[:, 1]), dtype=float)
