"""Command-line surface: file-in, file-out pipeline stages.

Each subcommand reads declared inputs, writes declared outputs under --out,
and exits 0 on success, 2 on input errors, 3 on numerical/fit failures.
Stochastic stages take an explicit --seed recorded in output provenance.
"""

from __future__ import annotations

import csv
import functools
import io
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import allocate as alloc
from . import bootstrap as boot
from . import documents as docs
from . import ingest as ing
from . import laws
from . import preprocess as prep
from . import synth as syn
from .errors import (
    EstimationError,
    FitError,
    InfeasibleError,
    ParseError,
    RlScaleError,
    ValidationError,
)

EXIT_INPUT_ERROR = 2
EXIT_NUMERICAL_ERROR = 3

_INPUT_ERRORS = (ParseError, ValidationError, FileNotFoundError, OSError)
_NUMERICAL_ERRORS = (FitError, EstimationError, InfeasibleError)


def _fail(code: int, message: str, structured: bool) -> None:
    if structured:
        print(json.dumps({"error": message, "exit_code": code}), file=sys.stderr)
    else:
        print(f"error: {message}", file=sys.stderr)
    sys.exit(code)


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        structured = kwargs.get("output_format") == "structured"
        try:
            return fn(*args, **kwargs)
        except _NUMERICAL_ERRORS as exc:
            _fail(EXIT_NUMERICAL_ERROR, str(exc), structured)
        except _INPUT_ERRORS as exc:
            _fail(EXIT_INPUT_ERROR, str(exc), structured)
        except RlScaleError as exc:
            _fail(EXIT_INPUT_ERROR, str(exc), structured)
    return wrapper


def _load_manifest(path: str) -> dict[str, ing.TaskMeta]:
    metas = ing.validate_manifest(Path(path).read_text())
    return {m.task_id: m for m in metas}


def _detect_task(path: str) -> str:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError(f"{path}: empty input")
        for row in reader:
            if row:
                return row[0].strip()
    raise ParseError(f"{path}: no data rows")


def _parse_run_file(path: str, metas: dict[str, ing.TaskMeta],
                    attach_resets: bool = True) -> ing.RunSet:
    task = _detect_task(path)
    if task not in metas:
        raise ValidationError(f"{path}: task {task!r} not in manifest")
    meta = metas[task]
    runset = ing.parse_run_log(Path(path).read_text(), meta)
    if attach_resets and meta.reset_period is not None:
        # markers at reset_period multiples, uniform across seeds
        curves = []
        for c in runset.curves:
            last = c.env_steps[-1]
            markers = tuple(range(meta.reset_period, last + 1, meta.reset_period))
            curves.append(ing.LearningCurve(c.key, c.points, markers or None))
        runset = ing.RunSet(meta=meta, curves=tuple(curves))
    return runset


def _write(out_dir: str, name: str, content: str) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(content)
    return path


format_option = click.option(
    "--format", "output_format", type=click.Choice(["csv", "structured"]),
    default="csv", show_default=True, help="Stdout/report format.")


@click.group()
def main():
    """Scaling-law fitting and compute allocation for RL training runs."""


@main.command("ingest")
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--input", "inputs", required=True, multiple=True,
              type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@format_option
@handle_errors
def cmd_ingest(manifest, inputs, out, output_format):
    """Validate run logs against the manifest and write canonical CSVs."""
    metas = _load_manifest(manifest)
    for path in inputs:
        runset = _parse_run_file(path, metas, attach_resets=False)
        name = f"{runset.meta.task_id}_runs.csv"
        _write(out, name, ing.write_run_log(runset))
        click.echo(f"{path}: {len(runset.curves)} curves -> {Path(out) / name}")


@main.command("preprocess")
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--input", "inputs", required=True, multiple=True,
              type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--thresholds", default=20, show_default=True)
@click.option("--bootstrap-k", default=0, show_default=True,
              help="Bootstrap replicates for data_std (0 disables).")
@click.option("--seed", default=0, show_default=True)
@format_option
@handle_errors
def cmd_preprocess(manifest, inputs, out, thresholds, bootstrap_k, seed, output_format):
    """Extract data-efficiency tables from run logs."""
    metas = _load_manifest(manifest)
    for path in inputs:
        runset = _parse_run_file(path, metas)
        grid = prep.threshold_grid(runset.meta, thresholds)
        std_fn = None
        if bootstrap_k > 0:
            cfg = boot.BootstrapConfig(replicates=bootstrap_k, rng_seed=seed)
            std_fn = lambda curves, j: boot.bootstrap_efficiency_std(curves, j, cfg)
        points, warns = prep.extract_efficiency_table(runset, grid, std_fn=std_fn)
        for w in warns:
            click.echo(f"warning: cell (sigma={w.sigma}, N={w.model_size}, "
                       f"B={w.batch_size}) skipped: {w.reason}", err=True)
        name = f"{runset.meta.task_id}_efficiency.csv"
        _write(out, name, prep.write_efficiency_table(points))
        click.echo(f"{path}: {len(points)} points -> {Path(out) / name}")


@main.command("fit-batch")
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--input", "inputs", required=True, multiple=True,
              type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--thresholds", default=20, show_default=True)
@click.option("--bootstrap-k", default=100, show_default=True)
@click.option("--seed", default=0, show_default=True)
@format_option
@handle_errors
def cmd_fit_batch(manifest, inputs, out, thresholds, bootstrap_k, seed, output_format):
    """Bootstrap best batch sizes per (utd, model size) cell and fit the rule."""
    metas = _load_manifest(manifest)
    for path in inputs:
        runset = _parse_run_file(path, metas)
        grid = prep.threshold_grid(runset.meta, thresholds)
        cfg = boot.BootstrapConfig(replicates=bootstrap_k, rng_seed=seed)

        cells: dict[tuple[float, float], dict[int, list]] = {}
        for (sigma, n, b), curves in runset.by_config().items():
            processed = [prep.process_curve(c, runset.meta) for c in curves]
            cells.setdefault((sigma, n), {})[b] = processed

        points = []
        for (sigma, n), group in sorted(cells.items()):
            result = boot.bootstrap_best_batch(group, runset.meta, grid, cfg)
            points.append((sigma, n, result.b_bootstrap))

        fit, result = laws.fit_batch_rule(points, rng_seed=seed)
        doc = docs.fit_to_dict(fit, result, provenance={
            "input": str(path), "seed": seed, "bootstrap_k": bootstrap_k,
            "digest": docs.table_digest(Path(path).read_text()),
        })
        name = f"{runset.meta.task_id}_batch_rule.json"
        _write(out, name, docs.dumps(doc))

        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["utd", "model_size", "b_bootstrap"])
        writer.writerows([(s, n, b) for s, n, b in points])
        _write(out, f"{runset.meta.task_id}_bootstrap_batches.csv", buf.getvalue())
        click.echo(f"{path}: fit -> {Path(out) / name}")


def _read_tables(inputs) -> list[prep.EfficiencyPoint]:
    points = []
    for path in inputs:
        points.extend(prep.read_efficiency_table(Path(path).read_text()))
    return points


@main.command("fit-data")
@click.option("--input", "inputs", required=True, multiple=True,
              type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--mode", type=click.Choice(["independent", "shared", "aggregated"]),
              default="independent", show_default=True)
@click.option("--threshold", type=float, default=None,
              help="Fit only this threshold (default: every threshold present).")
@click.option("--seed", default=0, show_default=True)
@format_option
@handle_errors
def cmd_fit_data(inputs, out, mode, threshold, seed, output_format):
    """Fit the data-efficiency surface per threshold."""
    mode_key = {"independent": "independent", "shared": "shared_exponent",
                "aggregated": "aggregated"}[mode]
    points = _read_tables(inputs)
    by_threshold: dict[float, list] = {}
    for p in points:
        if threshold is None or p.threshold == threshold:
            by_threshold.setdefault(p.threshold, []).append(p)
    if not by_threshold:
        raise ValidationError("no efficiency points selected")

    provenance = {"inputs": [str(p) for p in inputs], "seed": seed, "mode": mode,
                  "digest": docs.table_digest(
                      "".join(Path(p).read_text() for p in inputs))}
    fits = []
    for j in sorted(by_threshold):
        fit, result = laws.fit_data_efficiency(by_threshold[j], mode=mode_key,
                                               rng_seed=seed)
        if getattr(fit, "unstable", False):
            click.echo(f"warning: threshold {j}: unstable fit (exponent near zero); "
                       "consider --mode shared or aggregated", err=True)
        fits.append(docs.fit_to_dict(fit, result, provenance=provenance))
    name = "data_fits.json"
    _write(out, name, docs.dumps({"fits": fits}))
    click.echo(f"{len(fits)} threshold fit(s) -> {Path(out) / name}")


def _load_data_fits(path: str) -> list[laws.DataFit]:
    doc = docs.loads(Path(path).read_text())
    entries = doc["fits"] if "fits" in doc else [doc]
    fits = []
    for entry in entries:
        fit = docs.fit_from_dict(entry)
        if isinstance(fit, laws.SharedExponentFamily):
            raise ValidationError(
                "shared-exponent document: pick a task fit before allocation")
        fits.append(fit)
    return fits


def _pick_fit(fits: list[laws.DataFit], threshold: float | None) -> laws.DataFit:
    if threshold is not None:
        for f in fits:
            if f.threshold == threshold:
                return f
        raise ValidationError(f"no fit at threshold {threshold}")
    return max(fits, key=lambda f: f.threshold)


def _emit(payload: dict, output_format: str) -> None:
    if output_format == "structured":
        click.echo(json.dumps(payload, indent=2, sort_keys=True))
    else:
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(payload.keys())
        writer.writerow(payload.values())


@main.command("allocate")
@click.option("--fit", "fit_path", required=True, type=click.Path(exists=True))
@click.option("--threshold", type=float, default=None)
@click.option("--data-budget", type=float, default=None)
@click.option("--compute-budget", type=float, default=None)
@click.option("--delta", type=float, default=None,
              help="Env-step cost for total-budget minimization.")
@click.option("--k", type=float, default=1.0, show_default=True)
@format_option
@handle_errors
def cmd_allocate(fit_path, threshold, data_budget, compute_budget, delta, k,
                 output_format):
    """Prescribe (utd, model size) for a data, compute, or total budget."""
    given = [x is not None for x in (data_budget, compute_budget, delta)]
    if sum(given) != 1:
        raise ValidationError(
            "give exactly one of --data-budget, --compute-budget, --delta")
    fit = _pick_fit(_load_data_fits(fit_path), threshold)
    model = alloc.ComputeModel(k=k)
    if data_budget is not None:
        sol = alloc.optimal_for_data_budget(fit, data_budget, model)
    elif compute_budget is not None:
        sol = alloc.optimal_for_compute_budget(fit, model, compute_budget)
    else:
        sol = alloc.minimize_budget(fit, model, delta)
    _emit({
        "threshold": fit.threshold,
        "sigma_star": sol.sigma_star,
        "n_star": sol.n_star,
        "data": sol.data,
        "compute": sol.compute,
        "budget": sol.budget if sol.budget is not None else "",
        "active_constraint": sol.active_constraint,
    }, output_format)


@main.command("frontier")
@click.option("--fit", "fit_path", required=True, type=click.Path(exists=True))
@click.option("--manifest", type=click.Path(exists=True), default=None)
@click.option("--task", default=None)
@click.option("--delta", type=float, default=None)
@click.option("--k", type=float, default=1.0, show_default=True)
@click.option("--extrapolate-top", default=5, show_default=True)
@click.option("--out", required=True, type=click.Path())
@format_option
@handle_errors
def cmd_frontier(fit_path, manifest, task, delta, k, extrapolate_top, out,
                 output_format):
    """Budget frontier over thresholds, plus its extrapolating power laws."""
    fits = {f.threshold: f for f in _load_data_fits(fit_path)}
    if delta is None:
        if manifest is None or task is None:
            raise ValidationError("give --delta, or --manifest with --task")
        metas = _load_manifest(manifest)
        if task not in metas:
            raise ValidationError(f"task {task!r} not in manifest")
        meta = metas[task]
    else:
        any_fit = next(iter(fits.values()))
        meta = ing.TaskMeta(task or "synthetic", optimal_return=1000,
                            j_min=0, j_max=1000, delta=delta)
        del any_fit
    model = alloc.ComputeModel(k=k)
    frontier = alloc.budget_frontier(fits, meta, model)

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["threshold", "budget", "sigma_star", "n_star", "data", "compute"])
    for p in frontier:
        writer.writerow([p.threshold, p.budget, p.solution.sigma_star,
                         p.solution.n_star, p.solution.data, p.solution.compute])
    _write(out, "frontier.csv", buf.getvalue())

    flaws = alloc.fit_frontier_laws(frontier, n_extrapolate=extrapolate_top)
    laws_doc = {
        name: {"scale": law.scale, "exponent": law.exponent,
               "r_squared": law.r_squared}
        for name, law in [("c_law", flaws.c_law), ("d_law", flaws.d_law),
                          ("sigma_law", flaws.sigma_law), ("n_law", flaws.n_law)]
    }
    laws_doc["n_fit"] = flaws.n_fit
    laws_doc["n_extrapolate"] = flaws.n_extrapolate
    _write(out, "frontier_laws.json", docs.dumps(laws_doc))
    click.echo(f"{len(frontier)} frontier points -> {Path(out) / 'frontier.csv'}")


@main.command("sensitivity")
@click.option("--input", "inputs", required=True, multiple=True,
              type=click.Path(exists=True))
@click.option("--batch-fit", "batch_fit_path", required=True,
              type=click.Path(exists=True))
@click.option("--threshold", type=float, default=None)
@click.option("--out", required=True, type=click.Path())
@format_option
@handle_errors
def cmd_sensitivity(inputs, batch_fit_path, threshold, out, output_format):
    """Data-efficiency ratios binned by distance from the predicted batch size."""
    fit = docs.fit_from_dict(docs.loads(Path(batch_fit_path).read_text()))
    if not isinstance(fit, laws.BatchRuleFit):
        raise ValidationError("--batch-fit must hold a batch_rule document")
    points = _read_tables(inputs)
    if threshold is not None:
        points = [p for p in points if p.threshold == threshold]
    else:
        top = max(p.threshold for p in points)
        points = [p for p in points if p.threshold == top]
    rows = laws.batch_sensitivity(points, fit)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["bin_lo", "bin_hi", "data_efficiency_ratio", "n_groups"])
    for r in rows:
        writer.writerow([r.lo, r.hi, "" if r.ratio is None else r.ratio, r.n_groups])
    _write(out, "batch_sensitivity.csv", buf.getvalue())
    click.echo(f"sensitivity table -> {Path(out) / 'batch_sensitivity.csv'}")


@main.command("evaluate")
@click.option("--fit", "fit_path", required=True, type=click.Path(exists=True))
@click.option("--input", "inputs", required=True, multiple=True,
              type=click.Path(exists=True))
@click.option("--threshold", type=float, default=None)
@format_option
@handle_errors
def cmd_evaluate(fit_path, inputs, threshold, output_format):
    """Relative error of a stored fit on held-out efficiency tables."""
    fits = _load_data_fits(fit_path)
    results = {}
    for path in inputs:
        points = prep.read_efficiency_table(Path(path).read_text())
        errors = []
        for fit in fits:
            subset = [p for p in points if p.threshold == fit.threshold]
            if threshold is not None and fit.threshold != threshold:
                continue
            if not subset:
                continue
            pred = np.array([laws.eval_data_fit(fit, p.sigma, p.model_size)
                             for p in subset])
            actual = np.array([p.data for p in subset])
            errors.append(laws.relative_error(pred, actual))
        if not errors:
            raise ValidationError(f"{path}: no points matching the fit thresholds")
        results[str(path)] = float(np.mean(errors))
    _emit({"relative_error": float(np.mean(list(results.values()))),
           **{f"relative_error[{k}]": v for k, v in results.items()}},
          output_format)


@main.command("synth")
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--task", required=True)
@click.option("--truth", "truth_path", required=True, type=click.Path(exists=True),
              help="Data-efficiency fit document used as ground truth.")
@click.option("--batch-truth", "batch_truth_path", type=click.Path(exists=True),
              default=None)
@click.option("--kind", type=click.Choice(["curves", "grid"]), default="curves",
              show_default=True)
@click.option("--sigma-grid", default="1,2,4,8", show_default=True)
@click.option("--n-grid", default="1e6,4e6,1.6e7,6.4e7", show_default=True)
@click.option("--b-grid", default="128", show_default=True)
@click.option("--seeds", default=1, show_default=True)
@click.option("--noise", default=0.0, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--reset-period", type=int, default=None)
@click.option("--out", required=True, type=click.Path())
@format_option
@handle_errors
def cmd_synth(manifest, task, truth_path, batch_truth_path, kind, sigma_grid,
              n_grid, b_grid, seeds, noise, seed, reset_period, out, output_format):
    """Generate synthetic run logs or efficiency grids from known laws."""
    metas = _load_manifest(manifest)
    if task not in metas:
        raise ValidationError(f"task {task!r} not in manifest")
    meta = metas[task]
    truth = _pick_fit(_load_data_fits(truth_path), None)
    truth_batch = None
    if batch_truth_path is not None:
        truth_batch = docs.fit_from_dict(docs.loads(Path(batch_truth_path).read_text()))

    def parse_grid(text):
        return tuple(float(v) for v in text.split(","))

    spec = syn.SynthSpec(
        truth_data=truth,
        truth_batch=truth_batch,
        sigma_grid=parse_grid(sigma_grid),
        n_grid=parse_grid(n_grid),
        b_grid=parse_grid(b_grid),
        seeds_per_cell=seeds,
        noise_sigma=noise,
        rng_seed=seed,
        reset_period=reset_period,
    )
    if kind == "grid":
        points = syn.gen_efficiency_grid(spec, task_id=task)
        name = f"{task}_synth_efficiency.csv"
        _write(out, name, prep.write_efficiency_table(points))
    else:
        runset = syn.gen_learning_curves(spec, meta)
        name = f"{task}_synth_runs.csv"
        _write(out, name, ing.write_run_log(runset))
    click.echo(f"synthetic {kind} -> {Path(out) / name}")


@main.command("report")
@click.option("--fit", "fit_path", required=True, type=click.Path(exists=True))
@click.option("--manifest", type=click.Path(exists=True), default=None)
@click.option("--task", default=None)
@click.option("--delta", type=float, default=None)
@click.option("--k", type=float, default=1.0, show_default=True)
@click.option("--d-targets", default=None,
              help="Comma-separated iso-data contour levels (default: auto).")
@click.option("--extrapolate-top", default=5, show_default=True)
@click.option("--out", required=True, type=click.Path())
@format_option
@click.pass_context
@handle_errors
def cmd_report(ctx, fit_path, manifest, task, delta, k, d_targets,
               extrapolate_top, out, output_format):
    """Emit plot-ready iso-data contour and frontier CSVs."""
    fits = _load_data_fits(fit_path)
    top = _pick_fit(fits, None)
    if d_targets is not None:
        levels = [float(v) for v in d_targets.split(",")]
    else:
        # lowest D attainable within the sigma search range (N -> infinity)
        floor = top.d_min + (top.a / alloc.SIGMA_RANGE[1]) ** top.alpha
        levels = [floor * f for f in (1.5, 2.0, 4.0, 8.0)]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["d_target", "sigma", "n"])
    for level in levels:
        for sigma, n in alloc.iso_data_contour(top, level):
            writer.writerow([level, sigma, n])
    _write(out, "iso_data_contours.csv", buf.getvalue())
    click.echo(f"contours -> {Path(out) / 'iso_data_contours.csv'}")

    if len(fits) >= 2:
        ctx.invoke(cmd_frontier, fit_path=fit_path, manifest=manifest, task=task,
                   delta=delta, k=k, extrapolate_top=extrapolate_top, out=out,
                   output_format=output_format)


if __name__ == "__main__":
    main()
