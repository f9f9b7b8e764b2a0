"""Run-log and task-manifest ingestion.

Canonical interchange format is a CSV of per-evaluation rows
(``task,utd,model_size,batch_size,seed,env_step,return``) plus a YAML/JSON
manifest carrying per-task constants (optimal return, threshold bounds,
env-step cost, reset period). Returns are kept in raw units here;
normalization happens in :mod:`rlscale.preprocess`.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace

import yaml

from .errors import ParseError, ValidationError

RUN_LOG_COLUMNS = ("task", "utd", "model_size", "batch_size", "seed", "env_step", "return")


@dataclass(frozen=True)
class TaskMeta:
    """Per-task constants: normalization target, threshold bounds, env-step cost."""

    task_id: str
    optimal_return: float
    j_min: float
    j_max: float
    delta: float
    reset_period: int | None = None

    def __post_init__(self):
        if not 0 <= self.j_min < self.j_max <= 1000:
            raise ValidationError(
                f"task {self.task_id!r}: need 0 <= j_min < j_max <= 1000, "
                f"got j_min={self.j_min}, j_max={self.j_max}"
            )
        if self.optimal_return <= 0:
            raise ValidationError(f"task {self.task_id!r}: optimal_return must be positive")
        if self.delta <= 0:
            raise ValidationError(f"task {self.task_id!r}: delta must be positive")
        if self.reset_period is not None and self.reset_period <= 0:
            raise ValidationError(f"task {self.task_id!r}: reset_period must be positive")


@dataclass(frozen=True, order=True)
class RunKey:
    """Identifies one training run: task, UTD ratio, parameter count, batch size, seed."""

    task_id: str
    utd: float
    model_size: float
    batch_size: int
    seed: int

    def __post_init__(self):
        if self.utd <= 0:
            raise ValidationError(f"{self}: utd must be positive")
        if self.model_size <= 0:
            raise ValidationError(f"{self}: model_size must be positive")
        if self.batch_size < 1:
            raise ValidationError(f"{self}: batch_size must be >= 1")

    def config(self) -> tuple[float, float, int]:
        """(utd, model_size, batch_size) — the seed-independent configuration."""
        return (self.utd, self.model_size, self.batch_size)


@dataclass(frozen=True)
class LearningCurve:
    """Per-seed (env_step, return) series, sorted by env_step."""

    key: RunKey
    points: tuple[tuple[int, float], ...]
    reset_steps: tuple[int, ...] | None = None

    def __post_init__(self):
        if not self.points:
            raise ValidationError(f"{self.key}: empty curve")
        steps = [s for s, _ in self.points]
        if any(b <= a for a, b in zip(steps, steps[1:])):
            raise ValidationError(f"{self.key}: env_steps must be strictly increasing")
        if any(s < 0 for s in steps):
            raise ValidationError(f"{self.key}: env_steps must be nonnegative")

    @property
    def env_steps(self) -> tuple[int, ...]:
        return tuple(s for s, _ in self.points)

    @property
    def returns(self) -> tuple[float, ...]:
        return tuple(r for _, r in self.points)


@dataclass(frozen=True)
class RunSet:
    """All curves for one task, plus the task constants."""

    meta: TaskMeta
    curves: tuple[LearningCurve, ...] = field(default_factory=tuple)

    def __post_init__(self):
        keys = [c.key for c in self.curves]
        if len(set(keys)) != len(keys):
            raise ValidationError(f"task {self.meta.task_id!r}: duplicate RunKey")
        for c in self.curves:
            if c.key.task_id != self.meta.task_id:
                raise ValidationError(
                    f"curve {c.key} does not belong to task {self.meta.task_id!r}"
                )

    def by_config(self) -> dict[tuple[float, float, int], list[LearningCurve]]:
        """Group curves by (utd, model_size, batch_size), seeds together."""
        groups: dict[tuple[float, float, int], list[LearningCurve]] = {}
        for c in self.curves:
            groups.setdefault(c.key.config(), []).append(c)
        return groups


_NUMERIC_COLUMNS = {
    "utd": float,
    "model_size": float,
    "batch_size": int,
    "seed": int,
    "env_step": int,
    "return": float,
}


def parse_run_log(text: str | io.TextIOBase, meta: TaskMeta,
                  reset_steps: dict[int, tuple[int, ...]] | None = None) -> RunSet:
    """Parse the run-log CSV into a RunSet for ``meta``'s task.

    Rows may arrive in any order; points are sorted by env_step per run.
    ``reset_steps`` optionally attaches per-seed reset markers (env steps).
    Raises ParseError with the offending line number on malformed rows,
    duplicate (run, env_step) pairs, or empty input.
    """
    if isinstance(text, str):
        text = io.StringIO(text)
    reader = csv.reader(text)
    header = next(reader, None)
    if header is None:
        raise ParseError("empty input: missing header")
    header = [h.strip() for h in header]
    if header != list(RUN_LOG_COLUMNS):
        raise ParseError(
            f"line 1: bad header {header}, expected {list(RUN_LOG_COLUMNS)}"
        )

    points: dict[RunKey, dict[int, float]] = {}
    n_rows = 0
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(RUN_LOG_COLUMNS):
            raise ParseError(
                f"line {lineno}: expected {len(RUN_LOG_COLUMNS)} columns, got {len(row)}"
            )
        record = {}
        for name, raw in zip(RUN_LOG_COLUMNS, row):
            conv = _NUMERIC_COLUMNS.get(name)
            if conv is None:
                record[name] = raw.strip()
                continue
            try:
                record[name] = conv(raw)
            except ValueError:
                raise ParseError(
                    f"line {lineno}: column {name}: non-numeric value {raw!r}"
                ) from None
        if record["task"] != meta.task_id:
            raise ParseError(
                f"line {lineno}: column task: got {record['task']!r}, "
                f"expected {meta.task_id!r}"
            )
        key = RunKey(record["task"], record["utd"], record["model_size"],
                     record["batch_size"], record["seed"])
        series = points.setdefault(key, {})
        step = record["env_step"]
        if step in series:
            raise ParseError(f"line {lineno}: duplicate env_step {step} for {key}")
        series[step] = record["return"]
        n_rows += 1

    if n_rows == 0:
        raise ParseError("empty input: no data rows")

    reset_steps = reset_steps or {}
    curves = tuple(
        LearningCurve(
            key=key,
            points=tuple(sorted(series.items())),
            reset_steps=reset_steps.get(key.seed),
        )
        for key, series in sorted(points.items())
    )
    return RunSet(meta=meta, curves=curves)


def write_run_log(runset: RunSet, stream: io.TextIOBase | None = None) -> str:
    """Serialize a RunSet back to the run-log CSV schema.

    Round-trips with :func:`parse_run_log` field-exactly (reset markers are
    carried out of band, as on parse).
    """
    out = stream or io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(RUN_LOG_COLUMNS)
    for curve in runset.curves:
        k = curve.key
        for step, ret in curve.points:
            writer.writerow([k.task_id, repr(float(k.utd)), repr(float(k.model_size)),
                             int(k.batch_size), int(k.seed), int(step), repr(float(ret))])
    return out.getvalue() if stream is None else ""


def strip_reset_markers(runset: RunSet) -> RunSet:
    """Drop reset markers from every curve (used for round-trip comparisons)."""
    return replace(runset, curves=tuple(replace(c, reset_steps=None) for c in runset.curves))


_REQUIRED_MANIFEST_FIELDS = ("optimal_return", "j_min", "j_max", "delta")


def validate_manifest(doc: dict | str) -> list[TaskMeta]:
    """Build TaskMeta records from a manifest document.

    Accepts either a parsed mapping or YAML/JSON text. The document maps task
    ids to blocks with optimal_return, j_min, j_max, delta, and optional
    reset_period; a top-level ``tasks:`` wrapper is also accepted.
    """
    if isinstance(doc, str):
        doc = yaml.safe_load(doc)
    if not isinstance(doc, dict) or not doc:
        raise ValidationError("manifest must be a non-empty mapping of task blocks")
    if "tasks" in doc and isinstance(doc["tasks"], dict):
        doc = doc["tasks"]

    metas = []
    for task_id, block in doc.items():
        if not isinstance(block, dict):
            raise ValidationError(f"task {task_id!r}: block must be a mapping")
        missing = [f for f in _REQUIRED_MANIFEST_FIELDS if f not in block]
        if missing:
            raise ValidationError(f"task {task_id!r}: missing fields {missing}")
        unknown = set(block) - set(_REQUIRED_MANIFEST_FIELDS) - {"reset_period"}
        if unknown:
            raise ValidationError(f"task {task_id!r}: unknown fields {sorted(unknown)}")
        reset_period = block.get("reset_period")
        metas.append(TaskMeta(
            task_id=str(task_id),
            optimal_return=float(block["optimal_return"]),
            j_min=float(block["j_min"]),
            j_max=float(block["j_max"]),
            delta=float(block["delta"]),
            reset_period=int(reset_period) if reset_period is not None else None,
        ))
    return metas
