"""Seed-resampling bootstrap for batch-size selection and uncertainty.

Per replicate, seeds are resampled with replacement within each batch-size
arm, the per-arm data efficiency to the top threshold is rebuilt, and the
winning batch size recorded. The reported best batch size is the geometric
mean of the per-replicate winners; the data-efficiency standard deviation
is taken across replicates of the winning arm.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EstimationError, ValidationError
from .ingest import TaskMeta
from .preprocess import (
    ProcessedCurve,
    ThresholdGrid,
    aggregate_seed_efficiencies,
    data_efficiency,
)


@dataclass(frozen=True)
class BootstrapConfig:
    replicates: int = 100
    rng_seed: int = 0

    def __post_init__(self):
        if self.replicates < 1:
            raise ValidationError("bootstrap replicates must be >= 1")


@dataclass(frozen=True)
class BootstrapBatchResult:
    sigma: float
    model_size: float
    b_bootstrap: float
    per_threshold_std: dict[float, float] = field(default_factory=dict)
    replicate_choices: tuple[int, ...] = ()
    n_dropped: int = 0
    rng_seed: int = 0

    def __post_init__(self):
        if self.b_bootstrap <= 0:
            raise ValidationError("b_bootstrap must be positive")
        if self.replicate_choices:
            lo, hi = min(self.replicate_choices), max(self.replicate_choices)
            if not lo <= self.b_bootstrap <= hi:
                raise ValidationError("b_bootstrap outside replicate choice range")


def replicate_rng(rng_seed: int, replicate: int) -> np.random.Generator:
    """Independent substream for one replicate, deterministic in (seed, index)."""
    return np.random.default_rng([rng_seed, replicate])


def resample_seeds(curves: list[ProcessedCurve],
                   rng: np.random.Generator) -> list[ProcessedCurve]:
    """Draw len(curves) curves with replacement, deterministic given ``rng``."""
    if not curves:
        raise ValidationError("cannot resample an empty seed list")
    idx = rng.integers(0, len(curves), size=len(curves))
    return [curves[i] for i in idx]


def log_space_mean(choices) -> float:
    """Geometric mean of batch-size choices (replicate-order invariant)."""
    arr = np.asarray(sorted(choices), dtype=float)
    if arr.size == 0 or np.any(arr <= 0):
        raise ValidationError("log_space_mean needs positive choices")
    if arr[0] == arr[-1]:
        return float(arr[0])
    return float(np.exp(np.mean(np.log(arr))))


def bootstrap_best_batch(
    group: dict[int, list[ProcessedCurve]],
    meta: TaskMeta,
    grid: ThresholdGrid,
    cfg: BootstrapConfig,
) -> BootstrapBatchResult:
    """Bootstrap the best batch size for one (utd, model_size) cell.

    ``group`` maps batch size to the processed curves (one per seed) run at
    that batch size. Per replicate, the winning arm is the one with the
    smallest aggregated data efficiency to j_max (ties go to the smaller
    batch size). Replicates in which every arm is censored are dropped.
    """
    if not group:
        raise ValidationError("empty batch-size group")
    keys = {c.key.config()[:2] for curves in group.values() for c in curves}
    if len(keys) != 1:
        raise ValidationError(f"group spans multiple (utd, model_size) cells: {keys}")
    (sigma, model_size), = keys
    j_max = grid.thresholds[-1]

    choices: list[int] = []
    winner_d: dict[float, list[float]] = {j: [] for j in grid.thresholds}
    n_dropped = 0
    for k in range(cfg.replicates):
        rng = replicate_rng(cfg.rng_seed, k)
        best_b: int | None = None
        best_d: float | None = None
        best_curves: list[ProcessedCurve] | None = None
        for b in sorted(group):
            resampled = resample_seeds(group[b], rng)
            d = aggregate_seed_efficiencies(
                [data_efficiency(c, j_max) for c in resampled]
            )
            if d is None:
                continue
            if best_d is None or d < best_d:
                best_b, best_d, best_curves = b, d, resampled
        if best_b is None:
            n_dropped += 1
            continue
        choices.append(best_b)
        for j in grid.thresholds:
            d_j = aggregate_seed_efficiencies(
                [data_efficiency(c, j) for c in best_curves]
            )
            if d_j is not None:
                winner_d[j].append(d_j)

    if not choices:
        raise EstimationError(
            f"cell (sigma={sigma}, N={model_size}): every replicate censored at j_max"
        )
    per_threshold_std = {
        j: float(np.std(vals)) for j, vals in winner_d.items() if vals
    }
    return BootstrapBatchResult(
        sigma=sigma,
        model_size=model_size,
        b_bootstrap=log_space_mean(choices),
        per_threshold_std=per_threshold_std,
        replicate_choices=tuple(choices),
        n_dropped=n_dropped,
        rng_seed=cfg.rng_seed,
    )


def bootstrap_efficiency_std(
    curves: list[ProcessedCurve],
    threshold: float,
    cfg: BootstrapConfig,
) -> float | None:
    """Bootstrap std of the aggregated data efficiency for one cell/threshold.

    Used to fill the data_std column of the efficiency table. Returns None
    when every replicate is censored.
    """
    values = []
    for k in range(cfg.replicates):
        rng = replicate_rng(cfg.rng_seed, k)
        d = aggregate_seed_efficiencies(
            [data_efficiency(c, threshold) for c in resample_seeds(curves, rng)]
        )
        if d is not None:
            values.append(d)
    if not values:
        return None
    return float(np.std(values))
