"""Learning-curve preprocessing and data-efficiency extraction.

Pipeline per curve: normalize returns to [0, 1000], remove post-reset dips,
isotonic regression, then read off the first env step at which each
performance threshold is attained. Per-configuration aggregation across
seeds uses the lower median, with censored (never-reached) seeds excluded
while they are a minority.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace

import numpy as np

from .errors import ContractError, UnusableCurveError, ValidationError
from .ingest import LearningCurve, RunKey, RunSet, TaskMeta

EFFICIENCY_COLUMNS = ("task", "utd", "model_size", "batch_size", "threshold", "data", "data_std")


@dataclass(frozen=True)
class ProcessedCurve:
    """Normalized (and optionally monotone) learning curve."""

    key: RunKey
    points: tuple[tuple[int, float], ...]
    monotone: bool = False

    def __post_init__(self):
        if not self.points:
            raise ValidationError(f"{self.key}: empty processed curve")
        if self.monotone:
            rets = [r for _, r in self.points]
            if any(b < a for a, b in zip(rets, rets[1:])):
                raise ValidationError(f"{self.key}: monotone flag set on decreasing curve")

    @property
    def env_steps(self) -> tuple[int, ...]:
        return tuple(s for s, _ in self.points)

    @property
    def returns(self) -> tuple[float, ...]:
        return tuple(r for _, r in self.points)


@dataclass(frozen=True)
class ThresholdGrid:
    """Uniformly spaced performance thresholds from j_min to j_max inclusive."""

    thresholds: tuple[float, ...]

    def __post_init__(self):
        t = self.thresholds
        if len(t) < 2:
            raise ValidationError("threshold grid needs at least 2 thresholds")
        if any(b <= a for a, b in zip(t, t[1:])):
            raise ValidationError("thresholds must be strictly increasing")
        steps = np.diff(t)
        if np.max(np.abs(steps - steps[0])) > 1e-9 * max(abs(t[-1]), 1.0):
            raise ValidationError("thresholds must be uniformly spaced")

    @property
    def m(self) -> int:
        return len(self.thresholds)


@dataclass(frozen=True)
class EfficiencyPoint:
    """Env steps needed to reach ``threshold`` at one (utd, model_size, batch) cell."""

    sigma: float
    model_size: float
    batch_size: float
    threshold: float
    data: float
    data_std: float | None = None
    task_id: str | None = None

    def __post_init__(self):
        if self.data <= 0:
            raise ValidationError("EfficiencyPoint.data must be positive")


def normalize_returns(curve: LearningCurve, meta: TaskMeta) -> LearningCurve:
    """Rescale raw returns so the optimal policy return maps to 1000.

    Values above 1000 (evaluation noise above the optimal return) are kept.
    """
    scale = 1000.0 / meta.optimal_return
    return replace(curve, points=tuple((s, r * scale) for s, r in curve.points))


def remove_reset_dips(curve: LearningCurve) -> LearningCurve:
    """Drop transient post-reset return drops.

    After each reset marker, points are dropped while their return stays below
    the pre-reset running maximum; retention resumes once the running maximum
    is re-attained or exceeded. Curves without markers pass through unchanged.
    """
    if not curve.reset_steps:
        return curve
    markers = sorted(curve.reset_steps)
    kept: list[tuple[int, float]] = []
    running_max = -np.inf
    in_dip = False
    mi = 0
    for step, ret in curve.points:
        while mi < len(markers) and step >= markers[mi]:
            in_dip = True
            mi += 1
        if in_dip:
            if ret >= running_max:
                in_dip = False
            else:
                continue
        running_max = max(running_max, ret)
        kept.append((step, ret))
    if not kept:
        raise UnusableCurveError(f"{curve.key}: all points removed by reset-dip filter")
    return replace(curve, points=tuple(kept))


def isotonic(returns) -> np.ndarray:
    """L2-closest nondecreasing sequence (pool-adjacent-violators).

    Plain unweighted PAVA; idempotent, same length as the input.
    """
    y = np.asarray(returns, dtype=float)
    if y.ndim != 1 or y.size == 0:
        raise ContractError("isotonic expects a nonempty 1-D sequence")
    # block representation: (mean, weight) per pooled block
    means: list[float] = []
    weights: list[int] = []
    for v in y:
        m, w = v, 1
        while means and means[-1] > m:
            pm, pw = means.pop(), weights.pop()
            m = (pm * pw + m * w) / (pw + w)
            w = pw + w
        means.append(m)
        weights.append(w)
    out = np.empty_like(y)
    i = 0
    for m, w in zip(means, weights):
        out[i:i + w] = m
        i += w
    return out


def make_monotone(curve: LearningCurve) -> ProcessedCurve:
    """Apply isotonic regression to a curve's returns."""
    fitted = isotonic(curve.returns)
    return ProcessedCurve(
        key=curve.key,
        points=tuple(zip(curve.env_steps, fitted.tolist())),
        monotone=True,
    )


def threshold_grid(meta: TaskMeta, m: int = 20) -> ThresholdGrid:
    """``m`` uniformly spaced thresholds from j_min to j_max, inclusive."""
    if m < 2:
        raise ValidationError(f"need m >= 2 thresholds, got {m}")
    return ThresholdGrid(tuple(np.linspace(meta.j_min, meta.j_max, m).tolist()))


def data_efficiency(curve: ProcessedCurve, threshold: float) -> int | None:
    """Smallest logged env step whose processed return reaches ``threshold``.

    Returns None when the curve never reaches the threshold. No interpolation:
    the first logged crossing is the conservative estimate of samples needed.
    """
    if not curve.monotone:
        raise ContractError("data_efficiency requires a monotone (isotonic) curve")
    rets = np.asarray(curve.returns)
    idx = np.searchsorted(rets, threshold, side="left")
    if idx >= len(rets):
        return None
    return curve.env_steps[idx]


def process_curve(curve: LearningCurve, meta: TaskMeta) -> ProcessedCurve:
    """normalize -> remove reset dips -> isotonic, for one raw curve."""
    return make_monotone(remove_reset_dips(normalize_returns(curve, meta)))


def lower_median(values) -> float:
    """Median with the lower-of-the-two convention for even counts."""
    ordered = sorted(values)
    if not ordered:
        raise ValueError("lower_median of empty sequence")
    return ordered[(len(ordered) - 1) // 2]


def aggregate_seed_efficiencies(values: list[int | None]) -> float | None:
    """Aggregate per-seed data efficiencies at one threshold.

    Censored seeds (None) are excluded while they are fewer than half of the
    group; with half or more censored, the cell yields no estimate.
    """
    n_censored = sum(1 for v in values if v is None)
    if 2 * n_censored >= len(values):
        return None
    return float(lower_median([v for v in values if v is not None]))


@dataclass(frozen=True)
class ExtractionWarning:
    """A (utd, model_size, batch_size) group excluded from the efficiency table."""

    sigma: float
    model_size: float
    batch_size: float
    reason: str


def extract_efficiency_table(
    runset: RunSet,
    grid: ThresholdGrid,
    std_fn=None,
) -> tuple[list[EfficiencyPoint], list[ExtractionWarning]]:
    """Run the full preprocessing pipeline and build the efficiency table.

    Per (utd, model_size, batch_size) group: process every seed's curve, read
    off D_J per threshold, and aggregate across seeds with the lower median.
    ``std_fn(processed_curves, threshold) -> float | None`` optionally supplies
    the bootstrap standard deviation per cell (see :mod:`rlscale.bootstrap`).
    Groups where every threshold is censored are reported as warnings.
    """
    if not runset.curves:
        raise ValidationError("empty RunSet")
    points: list[EfficiencyPoint] = []
    warnings: list[ExtractionWarning] = []
    for (sigma, n, b), curves in sorted(runset.by_config().items()):
        processed = [process_curve(c, runset.meta) for c in curves]
        produced_any = False
        for threshold in grid.thresholds:
            agg = aggregate_seed_efficiencies(
                [data_efficiency(pc, threshold) for pc in processed]
            )
            if agg is None:
                continue
            produced_any = True
            std = std_fn(processed, threshold) if std_fn is not None else None
            points.append(EfficiencyPoint(
                sigma=sigma, model_size=n, batch_size=b, threshold=threshold,
                data=agg, data_std=std, task_id=runset.meta.task_id,
            ))
        if not produced_any:
            warnings.append(ExtractionWarning(
                sigma=sigma, model_size=n, batch_size=b,
                reason="all seeds censored at every threshold",
            ))
    return points, warnings


def write_efficiency_table(points: list[EfficiencyPoint],
                           stream: io.TextIOBase | None = None) -> str:
    """Serialize efficiency points to the export CSV schema."""
    out = stream or io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(EFFICIENCY_COLUMNS)
    for p in points:
        writer.writerow([
            p.task_id or "", repr(float(p.sigma)), repr(float(p.model_size)),
            repr(float(p.batch_size)), repr(float(p.threshold)), repr(float(p.data)),
            "" if p.data_std is None else repr(float(p.data_std)),
        ])
    return out.getvalue() if stream is None else ""


def read_efficiency_table(text: str | io.TextIOBase) -> list[EfficiencyPoint]:
    """Parse an efficiency-table CSV back into EfficiencyPoint records."""
    if isinstance(text, str):
        text = io.StringIO(text)
    reader = csv.reader(text)
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != list(EFFICIENCY_COLUMNS):
        raise ValidationError(f"bad efficiency-table header: {header}")
    points = []
    for row in reader:
        if not row:
            continue
        task, utd, n, b, j, d, std = row
        points.append(EfficiencyPoint(
            sigma=float(utd), model_size=float(n), batch_size=float(b),
            threshold=float(j), data=float(d),
            data_std=float(std) if std.strip() else None,
            task_id=task or None,
        ))
    return points
