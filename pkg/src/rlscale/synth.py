"""Synthetic experiment generator for end-to-end recovery tests.

Efficiency grids invert the data-efficiency surface directly; learning-curve
generation builds saturating-hyperbola curves whose first crossing of the top
threshold matches the intended data efficiency, with an optional batch-size
penalty around the batch rule's prescription and optional injected reset
dips. Everything is deterministic given the spec's rng_seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .ingest import LearningCurve, RunKey, RunSet, TaskMeta
from .laws import BatchRuleFit, DataFit, eval_batch_rule, eval_data_fit
from .preprocess import EfficiencyPoint

# asymptote of the synthetic curves, in normalized return units
CURVE_ASYMPTOTE = 1000.0
DIP_DEPTH = 0.3
DIP_RECOVERY_POINTS = 2


@dataclass(frozen=True)
class SynthSpec:
    """Ground truth and grid for one synthetic experiment."""

    truth_data: DataFit
    sigma_grid: tuple[float, ...]
    n_grid: tuple[float, ...]
    b_grid: tuple[float, ...] = (128,)
    truth_batch: BatchRuleFit | None = None
    seeds_per_cell: int = 1
    noise_sigma: float = 0.0
    rng_seed: int = 0
    reset_period: int | None = None
    batch_penalty: float = 0.5
    points_per_curve: int = 200

    def __post_init__(self):
        if not self.sigma_grid or not self.n_grid or not self.b_grid:
            raise ValidationError("grids must be nonempty")
        if self.noise_sigma < 0:
            raise ValidationError("noise_sigma must be nonnegative")
        if self.seeds_per_cell < 1:
            raise ValidationError("seeds_per_cell must be >= 1")


def _cell_rng(spec: SynthSpec, cell_index: int, seed_index: int) -> np.random.Generator:
    return np.random.default_rng([spec.rng_seed, cell_index, seed_index])


def gen_efficiency_grid(spec: SynthSpec,
                        thresholds: tuple[float, ...] | None = None,
                        task_id: str | None = None) -> list[EfficiencyPoint]:
    """Noisy samples of the truth surface on the (sigma, N) grid.

    One point per cell, threshold, and seed replicate; D = truth * exp(eps)
    with eps ~ N(0, noise_sigma^2). Deterministic given rng_seed.
    """
    if thresholds is None:
        thresholds = (spec.truth_data.threshold,)
    points = []
    for ci, (sigma, n) in enumerate(
            (s, m) for s in spec.sigma_grid for m in spec.n_grid):
        truth = float(eval_data_fit(spec.truth_data, sigma, n))
        for si in range(spec.seeds_per_cell):
            rng = _cell_rng(spec, ci, si)
            for j in thresholds:
                eps = rng.normal(0.0, spec.noise_sigma) if spec.noise_sigma > 0 else 0.0
                points.append(EfficiencyPoint(
                    sigma=sigma, model_size=n, batch_size=spec.b_grid[0],
                    threshold=j, data=truth * np.exp(eps), task_id=task_id,
                ))
    return points


def _hyperbola_curve(meta: TaskMeta, d_top: float, n_points: int) -> tuple[np.ndarray, np.ndarray]:
    """Saturating curve r(t) = A * t / (t + t_half) crossing j_max at t = d_top."""
    t_half = d_top * (CURVE_ASYMPTOTE - meta.j_max) / meta.j_max
    # cover from well below the first threshold to safely past the j_max crossing
    j_lo = max(meta.j_min * 0.5, 1.0)
    t_lo = t_half * j_lo / (CURVE_ASYMPTOTE - j_lo)
    j_hi = meta.j_max + 0.5 * (CURVE_ASYMPTOTE - meta.j_max)
    t_hi = t_half * j_hi / (CURVE_ASYMPTOTE - j_hi)
    steps = np.unique(np.rint(np.geomspace(max(t_lo, 1.0), t_hi, n_points)).astype(int))
    returns = CURVE_ASYMPTOTE * steps / (steps + t_half)
    return steps, returns


def _inject_dips(steps: np.ndarray, returns: np.ndarray,
                 reset_period: int) -> tuple[np.ndarray, tuple[int, ...]]:
    """Depress returns after each reset marker; recovery over the next points."""
    out = returns.copy()
    markers = []
    marker = reset_period
    while marker <= steps[-1]:
        markers.append(marker)
        idx = int(np.searchsorted(steps, marker, side="left"))
        for off in range(DIP_RECOVERY_POINTS):
            if idx + off >= len(out):
                break
            frac = (1.0 - DIP_DEPTH) + DIP_DEPTH * off / DIP_RECOVERY_POINTS
            out[idx + off] = min(out[idx + off], returns[idx + off] * frac)
        marker += reset_period
    return out, tuple(markers)


def gen_learning_curves(spec: SynthSpec, meta: TaskMeta,
                        n_points: int | None = None) -> RunSet:
    """Full synthetic RunSet whose processed data efficiency matches the truth.

    Per cell and seed, the first crossing of j_max lands at
    truth_D * batch_penalty_factor * exp(noise); the batch penalty is
    (1 + kappa * log(B / B_rule)^2), symmetric in log B, so the bootstrap's
    winner matches the rule's prescription. Returns are emitted in raw units
    and reset dips (when configured) are injected with markers recorded.
    """
    n_points = n_points or spec.points_per_curve
    curves = []
    cells = [(s, n, b) for s in spec.sigma_grid for n in spec.n_grid for b in spec.b_grid]
    for ci, (sigma, n, b) in enumerate(cells):
        base_d = float(eval_data_fit(spec.truth_data, sigma, n))
        if spec.truth_batch is not None and spec.batch_penalty > 0:
            b_rule = float(eval_batch_rule(spec.truth_batch, sigma, n))
            base_d *= 1.0 + spec.batch_penalty * np.log(b / b_rule) ** 2
        for si in range(spec.seeds_per_cell):
            rng = _cell_rng(spec, ci, si)
            eps = rng.normal(0.0, spec.noise_sigma) if spec.noise_sigma > 0 else 0.0
            steps, returns = _hyperbola_curve(meta, base_d * np.exp(eps), n_points)
            reset_steps: tuple[int, ...] | None = None
            if spec.reset_period is not None:
                returns, reset_steps = _inject_dips(steps, returns, spec.reset_period)
                reset_steps = reset_steps or None
            raw = returns * meta.optimal_return / 1000.0
            curves.append(LearningCurve(
                key=RunKey(meta.task_id, sigma, n, int(b), si),
                points=tuple(zip(steps.tolist(), raw.tolist())),
                reset_steps=reset_steps,
            ))
    return RunSet(meta=meta, curves=tuple(curves))
