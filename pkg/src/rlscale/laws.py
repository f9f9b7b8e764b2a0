"""Concrete scaling-law families: batch-size rule and data-efficiency surface.

The batch rule B(sigma, N) = a_B / (sigma^alpha_B + b_B sigma^alpha_B N^-beta_B)
saturates in N and decays in sigma. The data-efficiency surface
D(sigma, N) = d_min + (a/sigma)^alpha + (b/N)^beta is fit independently per
threshold, with exponents shared across tasks, or on median-normalized
aggregated data. Published factored-form coefficients
d_min * (1 + (a'/sigma)^alpha + (b'/N)^beta) convert via a = a' * d_min^(1/alpha).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FitError, ValidationError
from .fitkit import (
    AdditivePowerModel,
    FitProblem,
    FitResult,
    SaturatingBatchModel,
    SharedExponentModel,
    minimize,
)
from .preprocess import EfficiencyPoint, lower_median

UNSTABLE_EXPONENT = 1e-3


@dataclass(frozen=True)
class BatchRuleFit:
    """Coefficients of the saturating batch-size rule."""

    a_b: float
    b_b: float
    alpha_b: float
    beta_b: float

    def __post_init__(self):
        if min(self.a_b, self.b_b, self.alpha_b, self.beta_b) <= 0:
            raise ValidationError("batch-rule coefficients must be positive")


@dataclass(frozen=True)
class DataFit:
    """Coefficients of the additive data-efficiency surface for one threshold."""

    d_min: float
    a: float
    alpha: float
    b: float
    beta: float
    threshold: float = float("nan")
    unstable: bool = False

    def __post_init__(self):
        if min(self.d_min, self.a, self.alpha, self.b, self.beta) <= 0:
            raise ValidationError("data-fit coefficients must be positive")

    @classmethod
    def from_factored(cls, d_min: float, a_factored: float, alpha: float,
                      b_factored: float, beta: float,
                      threshold: float = float("nan")) -> "DataFit":
        """Convert the published factored form d_min*(1 + (a'/s)^α + (b'/N)^β)."""
        return cls(
            d_min=d_min,
            a=a_factored * d_min ** (1.0 / alpha),
            alpha=alpha,
            b=b_factored * d_min ** (1.0 / beta),
            beta=beta,
            threshold=threshold,
        )

    def to_factored(self) -> tuple[float, float, float, float, float]:
        """Inverse of from_factored: (d_min, a', alpha, b', beta)."""
        return (
            self.d_min,
            self.a / self.d_min ** (1.0 / self.alpha),
            self.alpha,
            self.b / self.d_min ** (1.0 / self.beta),
            self.beta,
        )


@dataclass(frozen=True)
class SharedExponentFamily:
    """Data-efficiency fits with alpha, beta tied across tasks."""

    alpha: float
    beta: float
    per_task: dict[str, dict[str, float]]
    threshold: float = float("nan")
    unstable: bool = False

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ValidationError("shared exponents must be positive")
        for task, coefs in self.per_task.items():
            if min(coefs["d_min"], coefs["a"], coefs["b"]) <= 0:
                raise ValidationError(f"task {task!r}: coefficients must be positive")

    def task_fit(self, task_id: str) -> DataFit:
        c = self.per_task[task_id]
        return DataFit(d_min=c["d_min"], a=c["a"], alpha=self.alpha,
                       b=c["b"], beta=self.beta, threshold=self.threshold,
                       unstable=self.unstable)


@dataclass(frozen=True)
class AggregateNormalization:
    """Intra-env medians and their global median used for cross-task pooling."""

    per_env_median: dict[str, float]
    global_median: float

    def __post_init__(self):
        if self.global_median <= 0 or any(v <= 0 for v in self.per_env_median.values()):
            raise ValidationError("medians must be positive")


def eval_batch_rule(fit: BatchRuleFit, sigma, n):
    """Largest admissible batch size at (sigma, N)."""
    sigma = np.asarray(sigma, dtype=float)
    n = np.asarray(n, dtype=float)
    return fit.a_b / (sigma ** fit.alpha_b + fit.b_b * sigma ** fit.alpha_b * n ** -fit.beta_b)


def eval_batch_rule_factorized(fit: BatchRuleFit, sigma, n):
    """Equivalent factorized form (a_B / sigma^alpha) / (1 + b_B N^-beta)."""
    sigma = np.asarray(sigma, dtype=float)
    n = np.asarray(n, dtype=float)
    return (fit.a_b / sigma ** fit.alpha_b) / (1.0 + fit.b_b * n ** -fit.beta_b)


def eval_data_fit(fit: DataFit, sigma, n):
    """Env steps to threshold predicted by the additive surface."""
    sigma = np.asarray(sigma, dtype=float)
    n = np.asarray(n, dtype=float)
    return fit.d_min + (fit.a / sigma) ** fit.alpha + (fit.b / n) ** fit.beta


def fit_batch_rule(points, rng_seed: int = 0) -> tuple[BatchRuleFit, FitResult]:
    """Fit the batch rule to (sigma, N, B_bootstrap) triples.

    Needs at least 4 points spanning at least 2 distinct sigma and N values.
    """
    arr = np.asarray([(p[0], p[1], p[2]) for p in points], dtype=float)
    if arr.shape[0] < 4:
        raise FitError("fit_batch_rule needs >= 4 points")
    if len(np.unique(arr[:, 0])) < 2 or len(np.unique(arr[:, 1])) < 2:
        raise FitError("fit_batch_rule needs >= 2 distinct sigma and N values")
    result = minimize(FitProblem(
        model=SaturatingBatchModel(),
        inputs=arr[:, :2],
        targets=arr[:, 2],
        rng_seed=rng_seed,
    ))
    p = result.params
    fit = BatchRuleFit(a_b=p["a"], b_b=p["b"], alpha_b=p["alpha"], beta_b=p["beta"])
    return fit, result


def _points_array(points: list[EfficiencyPoint]) -> np.ndarray:
    return np.asarray([(p.sigma, p.model_size, p.data) for p in points], dtype=float)


def fit_data_efficiency(
    points: list[EfficiencyPoint],
    mode: str = "independent",
    rng_seed: int = 0,
):
    """Fit the data-efficiency surface for one threshold.

    mode 'independent' fits one task's points; 'shared_exponent' ties the
    exponents across the tasks present in the points; 'aggregated' first
    median-normalizes across tasks, then fits a single surface. Fits whose
    exponents collapse toward zero are flagged unstable rather than rejected.
    Returns (fit, FitResult) where fit is a DataFit or SharedExponentFamily.
    """
    thresholds = {p.threshold for p in points}
    if len(thresholds) != 1:
        raise FitError(f"points span multiple thresholds: {sorted(thresholds)}")
    threshold = thresholds.pop()

    if mode == "independent":
        arr = _points_array(points)
        if arr.shape[0] < 5:
            raise FitError("independent fit needs >= 5 points")
        result = minimize(FitProblem(
            model=AdditivePowerModel(), inputs=arr[:, :2], targets=arr[:, 2],
            rng_seed=rng_seed,
        ))
        p = result.params
        unstable = min(p["alpha"], p["beta"]) < UNSTABLE_EXPONENT
        fit = DataFit(d_min=p["d_min"], a=p["a"], alpha=p["alpha"],
                      b=p["b"], beta=p["beta"], threshold=threshold,
                      unstable=unstable)
        return fit, result

    if mode == "shared_exponent":
        tasks = sorted({p.task_id for p in points})
        if len(tasks) < 2 or None in tasks:
            raise FitError("shared_exponent mode needs >= 2 labeled tasks")
        index = {t: i for i, t in enumerate(tasks)}
        inputs = np.asarray(
            [(p.sigma, p.model_size, index[p.task_id]) for p in points], dtype=float)
        targets = np.asarray([p.data for p in points], dtype=float)
        model = SharedExponentModel(tasks)
        result = minimize(FitProblem(
            model=model, inputs=inputs, targets=targets, rng_seed=rng_seed,
        ))
        p = result.params
        unstable = min(p["alpha"], p["beta"]) < UNSTABLE_EXPONENT
        fam = SharedExponentFamily(
            alpha=p["alpha"], beta=p["beta"],
            per_task={
                t: {"d_min": p[f"d_min_{t}"], "a": p[f"a_{t}"], "b": p[f"b_{t}"]}
                for t in tasks
            },
            threshold=threshold, unstable=unstable,
        )
        return fam, result

    if mode == "aggregated":
        tables: dict[str, list[EfficiencyPoint]] = {}
        for p in points:
            if p.task_id is None:
                raise FitError("aggregated mode needs labeled tasks")
            tables.setdefault(p.task_id, []).append(p)
        if len(tables) < 2:
            raise FitError("aggregated mode needs >= 2 envs")
        normalized, _ = normalize_across_tasks(tables)
        return fit_data_efficiency(normalized, mode="independent", rng_seed=rng_seed)

    raise FitError(f"unknown mode {mode!r}")


def normalize_across_tasks(
    tables: dict[str, list[EfficiencyPoint]],
) -> tuple[list[EfficiencyPoint], AggregateNormalization]:
    """Rescale each env's efficiencies by global_median / env_median.

    Both medians use the lower-of-two convention for even counts, recorded in
    the returned AggregateNormalization.
    """
    if not tables or any(not pts for pts in tables.values()):
        raise FitError("every env needs at least one efficiency point")
    per_env = {env: lower_median([p.data for p in pts]) for env, pts in tables.items()}
    global_median = lower_median(per_env.values())
    norm = AggregateNormalization(per_env_median=per_env, global_median=global_median)
    out = []
    for env, pts in sorted(tables.items()):
        factor = global_median / per_env[env]
        for p in pts:
            out.append(EfficiencyPoint(
                sigma=p.sigma, model_size=p.model_size, batch_size=p.batch_size,
                threshold=p.threshold, data=p.data * factor,
                data_std=None if p.data_std is None else p.data_std * factor,
                task_id=env,
            ))
    return out, norm


def relative_error(predicted, actual) -> float:
    """Mean absolute relative error |pred - actual| / actual."""
    predicted = np.asarray(predicted, dtype=float)
    actual = np.asarray(actual, dtype=float)
    if predicted.shape != actual.shape or predicted.size == 0:
        raise ValidationError("relative_error needs matching nonempty arrays")
    if np.any(predicted <= 0) or np.any(actual <= 0):
        raise ValidationError("relative_error needs positive values")
    return float(np.mean(np.abs(predicted - actual) / actual))


# Multiplicative bins around the predicted batch size, as reported in the
# grid-search sensitivity analysis. (lo, hi) means B in [lo * B_star, hi * B_star].
SENSITIVITY_BINS = (
    (1 / 16, 1 / 8),
    (1 / 8, 1 / 4),
    (1 / 4, 1 / 2),
    (1 / 2, 2 / 3),
    (2 / 3, 1.5),   # the B* bin
    (1.5, 2.0),
    (2.0, 4.0),
    (4.0, 8.0),
    (8.0, 16.0),
)


@dataclass(frozen=True)
class SensitivityRow:
    lo: float
    hi: float
    ratio: float | None
    n_groups: int


def batch_sensitivity(
    points: list[EfficiencyPoint],
    fit: BatchRuleFit,
    bins=SENSITIVITY_BINS,
) -> list[SensitivityRow]:
    """Data-efficiency ratio of off-prediction batch sizes to the predicted one.

    Points are grouped by (sigma, N); within each group the reference arm is
    the one nearest the predicted B* (log distance). Per bin, the mean D of
    arms falling in the bin is divided by the reference D, then averaged over
    groups. Empty bins get ratio None.
    """
    groups: dict[tuple[float, float], list[EfficiencyPoint]] = {}
    for p in points:
        groups.setdefault((p.sigma, p.model_size), []).append(p)

    per_bin: dict[int, list[float]] = {i: [] for i in range(len(bins))}
    for (sigma, n), pts in sorted(groups.items()):
        b_star = float(eval_batch_rule(fit, sigma, n))
        ref = min(pts, key=lambda p: abs(np.log(p.batch_size / b_star)))
        if ref.data <= 0:
            continue
        for i, (lo, hi) in enumerate(bins):
            in_bin = [p.data for p in pts if lo * b_star <= p.batch_size <= hi * b_star]
            if in_bin:
                per_bin[i].append(float(np.mean(in_bin)) / ref.data)

    return [
        SensitivityRow(
            lo=lo, hi=hi,
            ratio=float(np.mean(per_bin[i])) if per_bin[i] else None,
            n_groups=len(per_bin[i]),
        )
        for i, (lo, hi) in enumerate(bins)
    ]
