"""Compute model and resource-allocation solvers.

Compute is modeled as C = k * sigma * N * D(sigma, N). The three problems
(minimal compute at a data budget, minimal data at a compute budget, minimal
combined budget C + delta * D) share one structure: the optimum lies on the
power relation N(sigma) = (beta b^beta / (alpha a^alpha))^(1/beta) *
sigma^(alpha/beta), so the data-budget case is closed form and the other two
reduce to a 1-D search along the relation. Along it the surface collapses to
D(sigma) = d_min + (1 + alpha/beta) * (a/sigma)^alpha.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq
from scipy.optimize import minimize as _scipy_minimize

from .errors import FitError, InfeasibleError, ValidationError
from .fitkit import PowerLaw, fit_power_law, power_law_r_squared
from .ingest import TaskMeta
from .laws import DataFit, eval_data_fit

SIGMA_RANGE = (1e-3, 1e3)
N_RANGE = (1e3, 1e12)
GOLDEN_REL_TOL = 1e-10


@dataclass(frozen=True)
class ComputeModel:
    """FLOPs per (gradient step x parameter x data point); k=1 gives relative units."""

    k: float = 1.0

    def __post_init__(self):
        if self.k <= 0:
            raise ValidationError("k must be positive")


@dataclass(frozen=True)
class AllocationSolution:
    sigma_star: float
    n_star: float
    data: float
    compute: float
    budget: float | None = None
    active_constraint: bool = True
    certified: bool = True

    def __post_init__(self):
        if self.sigma_star <= 0 or self.n_star <= 0:
            raise ValidationError("allocation optimum must be positive")


@dataclass(frozen=True)
class FrontierPoint:
    threshold: float
    budget: float
    solution: AllocationSolution


@dataclass(frozen=True)
class FrontierLaws:
    """Power laws of optimal C, D, sigma, N versus the budget F."""

    c_law: PowerLaw
    d_law: PowerLaw
    sigma_law: PowerLaw
    n_law: PowerLaw
    n_fit: int
    n_extrapolate: int


def compute_flops(model: ComputeModel, sigma: float, n: float, data: float) -> float:
    """C = k * sigma * N * D."""
    return model.k * sigma * n * data


def delta_from_timings(flops_per_grad_step: float, grad_steps_per_sec: float,
                       env_steps_per_sec: float) -> float:
    """FLOPs-equivalent cost of one environment step, from run timings."""
    if min(flops_per_grad_step, grad_steps_per_sec, env_steps_per_sec) <= 0:
        raise ValidationError("timing quantities must be positive")
    return flops_per_grad_step * grad_steps_per_sec / env_steps_per_sec


def relation_coefficient(fit: DataFit) -> float:
    """Coefficient c in the optimal-trade-off relation N = c * sigma^(alpha/beta)."""
    return (fit.beta * fit.b ** fit.beta / (fit.alpha * fit.a ** fit.alpha)) ** (1.0 / fit.beta)


def n_on_relation(fit: DataFit, sigma) -> np.ndarray:
    return relation_coefficient(fit) * np.asarray(sigma, dtype=float) ** (fit.alpha / fit.beta)


def _data_on_relation(fit: DataFit, sigma):
    # (b/N)^beta reduces to (alpha/beta) * (a/sigma)^alpha on the relation
    return fit.d_min + (1.0 + fit.alpha / fit.beta) * (fit.a / np.asarray(sigma, dtype=float)) ** fit.alpha


def _solution_at(fit: DataFit, model: ComputeModel, sigma: float,
                 delta: float | None = None, active: bool = True,
                 certified: bool = True) -> AllocationSolution:
    n = float(n_on_relation(fit, sigma))
    d = float(eval_data_fit(fit, sigma, n))
    c = compute_flops(model, sigma, n, d)
    budget = None if delta is None else c + delta * d
    return AllocationSolution(sigma_star=float(sigma), n_star=n, data=d, compute=c,
                              budget=budget, active_constraint=active,
                              certified=certified)


def optimal_for_data_budget(fit: DataFit, d0: float,
                            model: ComputeModel | None = None) -> AllocationSolution:
    """Minimal-compute configuration reaching the threshold within D <= d0.

    Closed form when alpha < 1 or beta < 1; otherwise falls back to a numeric
    constrained search and marks the result non-certified.
    """
    model = model or ComputeModel()
    if d0 <= fit.d_min:
        raise InfeasibleError(
            f"data budget {d0} at or below the surface minimum {fit.d_min}",
            minimum=fit.d_min)
    if fit.alpha >= 1 and fit.beta >= 1:
        warnings.warn("alpha >= 1 and beta >= 1: closed form inapplicable, "
                      "using numeric constrained search", stacklevel=2)
        return _numeric_data_budget(fit, model, d0)
    headroom = d0 - fit.d_min
    sigma = fit.a * ((1.0 + fit.alpha / fit.beta) / headroom) ** (1.0 / fit.alpha)
    n = fit.b * ((1.0 + fit.beta / fit.alpha) / headroom) ** (1.0 / fit.beta)
    d = float(eval_data_fit(fit, sigma, n))
    return AllocationSolution(
        sigma_star=float(sigma), n_star=float(n), data=d,
        compute=compute_flops(model, sigma, n, d), active_constraint=True)


def _numeric_data_budget(fit: DataFit, model: ComputeModel, d0: float) -> AllocationSolution:
    def objective(t):
        sigma, n = np.exp(t)
        return np.log(compute_flops(model, sigma, n, float(eval_data_fit(fit, sigma, n))))

    def constraint(t):
        sigma, n = np.exp(t)
        return d0 - float(eval_data_fit(fit, sigma, n))

    # start from the (uncertified here) closed-form point, clipped to bounds
    headroom = d0 - fit.d_min
    t0 = np.log([
        np.clip(fit.a * ((1 + fit.alpha / fit.beta) / headroom) ** (1 / fit.alpha), *SIGMA_RANGE),
        np.clip(fit.b * ((1 + fit.beta / fit.alpha) / headroom) ** (1 / fit.beta), *N_RANGE),
    ])
    res = _scipy_minimize(
        objective, t0, method="SLSQP",
        constraints=[{"type": "ineq", "fun": constraint}],
        options={"maxiter": 500, "ftol": 1e-14},
    )
    if not res.success:
        raise FitError(f"numeric data-budget search failed: {res.message}")
    sigma, n = np.exp(res.x)
    d = float(eval_data_fit(fit, sigma, n))
    return AllocationSolution(
        sigma_star=float(sigma), n_star=float(n), data=d,
        compute=compute_flops(model, float(sigma), float(n), d),
        active_constraint=abs(d - d0) / d0 < 1e-6, certified=False)


def _golden_min(f, lo: float, hi: float, rel_tol: float = GOLDEN_REL_TOL) -> float:
    """Golden-section minimum of a unimodal f over [lo, hi]."""
    phi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - phi * (b - a)
    d = a + phi * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > rel_tol * max(abs(a), abs(b), 1.0):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def optimal_for_compute_budget(fit: DataFit, model: ComputeModel, c0: float,
                               sigma_range=SIGMA_RANGE) -> AllocationSolution:
    """Most data-efficient configuration with compute C <= c0.

    Searches along the optimal-trade-off relation, where D is decreasing and
    C increasing in sigma, so the optimum sits at C = c0.
    """
    if c0 <= 0:
        raise InfeasibleError("compute budget must be positive")
    lo, hi = np.log(sigma_range[0]), np.log(sigma_range[1])

    def log_compute(t):
        sigma = np.exp(t)
        n = float(n_on_relation(fit, sigma))
        return np.log(compute_flops(model, sigma, n, float(_data_on_relation(fit, sigma))))

    t_min = _golden_min(log_compute, lo, hi)
    c_min = float(np.exp(log_compute(t_min)))
    if c0 < c_min:
        raise InfeasibleError(
            f"compute budget {c0} below the achievable minimum {c_min}", minimum=c_min)
    target = np.log(c0)
    if log_compute(hi) < target:
        raise InfeasibleError(
            f"compute budget {c0} exceeds the search range; raise sigma_range")
    if abs(c0 - c_min) / c0 < 1e-12:
        return _solution_at(fit, model, float(np.exp(t_min)))
    t_star = brentq(lambda t: log_compute(t) - target, t_min, hi, xtol=1e-14)
    return _solution_at(fit, model, float(np.exp(t_star)))


def minimize_budget(fit: DataFit, model: ComputeModel, delta: float,
                    sigma_range=SIGMA_RANGE) -> AllocationSolution:
    """Unconstrained minimum of F = C + delta * D along the trade-off relation.

    F is convex in log sigma along the relation, so golden section suffices.
    Outside alpha, beta in (0, 1) the uniqueness argument does not apply; the
    numeric result is still returned, with a warning.
    """
    if delta <= 0:
        raise ValidationError("delta must be positive")
    if not (0 < fit.alpha < 1 and 0 < fit.beta < 1):
        warnings.warn("exponents outside (0, 1): uniqueness not guaranteed",
                      stacklevel=2)
    lo, hi = np.log(sigma_range[0]), np.log(sigma_range[1])

    def budget(t):
        sigma = np.exp(t)
        n = float(n_on_relation(fit, sigma))
        d = float(_data_on_relation(fit, sigma))
        return compute_flops(model, sigma, n, d) + delta * d

    t_star = _golden_min(budget, lo, hi)
    sol = _solution_at(fit, model, float(np.exp(t_star)), delta=delta,
                       active=False,
                       certified=0 < fit.alpha < 1 and 0 < fit.beta < 1)
    return sol


def iso_data_contour(fit: DataFit, d_target: float, sigma_range=SIGMA_RANGE,
                     num: int = 64) -> list[tuple[float, float]]:
    """(sigma, N) pairs attaining D = d_target, on a log grid of sigma.

    Only sigmas leaving positive headroom for the model-size term appear.
    """
    if d_target <= fit.d_min:
        raise InfeasibleError(
            f"d_target {d_target} at or below surface minimum {fit.d_min}",
            minimum=fit.d_min)
    sigmas = np.geomspace(sigma_range[0], sigma_range[1], num)
    out = []
    for sigma in sigmas:
        residual = d_target - fit.d_min - (fit.a / sigma) ** fit.alpha
        if residual <= 0:
            continue
        n = fit.b * residual ** (-1.0 / fit.beta)
        out.append((float(sigma), float(n)))
    if not out:
        raise InfeasibleError("contour empty within sigma_range")
    return out


def budget_frontier(fits: dict[float, DataFit], meta: TaskMeta,
                    model: ComputeModel,
                    sigma_range=SIGMA_RANGE) -> list[FrontierPoint]:
    """Budget-minimizing solution per threshold, sorted by threshold.

    Unstable per-threshold fits are skipped with a warning.
    """
    if len(fits) < 2:
        raise ValidationError("budget_frontier needs fits for >= 2 thresholds")
    points = []
    for threshold in sorted(fits):
        fit = fits[threshold]
        if fit.unstable:
            warnings.warn(f"threshold {threshold}: unstable fit skipped", stacklevel=2)
            continue
        sol = minimize_budget(fit, model, meta.delta, sigma_range=sigma_range)
        points.append(FrontierPoint(threshold=threshold, budget=sol.budget, solution=sol))
    return points


def fit_frontier_laws(frontier: list[FrontierPoint],
                      n_extrapolate: int = 5) -> FrontierLaws:
    """Power laws of C*, D*, sigma*, N* versus budget F.

    Fits use the lowest-budget points, holding out the top ``n_extrapolate``;
    R^2 is reported over all points including the held-out ones.
    """
    if not 0 <= n_extrapolate < len(frontier):
        raise FitError("need frontier length > n_extrapolate >= 0")
    pts = sorted(frontier, key=lambda p: p.budget)
    n_fit = len(pts) - n_extrapolate
    if n_fit < 2:
        raise FitError("need >= 2 points to fit frontier laws")
    f_all = np.array([p.budget for p in pts])
    f_fit = f_all[:n_fit]

    def law_for(values):
        values = np.asarray(values, dtype=float)
        law = fit_power_law(f_fit, values[:n_fit])
        return replace(law, r_squared=power_law_r_squared(law, f_all, values))

    return FrontierLaws(
        c_law=law_for([p.solution.compute for p in pts]),
        d_law=law_for([p.solution.data for p in pts]),
        sigma_law=law_for([p.solution.sigma_star for p in pts]),
        n_law=law_for([p.solution.n_star for p in pts]),
        n_fit=n_fit,
        n_extrapolate=n_extrapolate,
    )


@dataclass(frozen=True)
class StrategyRatios:
    """Per-budget data-efficiency ratios of one strategy to compute-optimal."""

    strategy: str
    per_budget: tuple[float | None, ...]
    average: float | None
    median: float | None


def _best_data_at_budget_1d(fit: DataFit, model: ComputeModel, c0: float,
                            sigma: float | None = None,
                            n: float | None = None) -> float | None:
    """Min D over one free axis subject to C <= c0 (the other axis fixed)."""
    if (sigma is None) == (n is None):
        raise ValidationError("fix exactly one of sigma, n")
    lo, hi = (np.log(N_RANGE) if sigma is not None else np.log(SIGMA_RANGE))

    def eval_at(t):
        free = float(np.exp(t))
        s, m = (sigma, free) if sigma is not None else (free, n)
        d = float(eval_data_fit(fit, s, m))
        return d, compute_flops(model, s, m, d)

    def log_c(t):
        return np.log(eval_at(t)[1])

    t_min = _golden_min(log_c, lo, hi, rel_tol=1e-12)
    if np.exp(log_c(t_min)) > c0:
        return None
    # D decreases as the free axis grows; take the largest feasible value
    target = np.log(c0)
    if log_c(hi) <= target:
        t_star = hi
    else:
        t_star = brentq(lambda t: log_c(t) - target, t_min, hi, xtol=1e-13)
    return eval_at(t_star)[0]


def compare_allocations(
    fit: DataFit,
    model: ComputeModel,
    budgets,
    strategies=("compute_optimal", "fixed_batch_compute_optimal", "sigma_only", "n_only"),
    sigma_fixed: float | None = None,
    n_fixed: float | None = None,
    batch_penalty: float = 0.0,
) -> list[StrategyRatios]:
    """Data-efficiency ratio of each allocation strategy to compute-optimal.

    sigma_only scales the UTD ratio at fixed model size ``n_fixed``; n_only
    scales model size at fixed ``sigma_fixed``. fixed_batch_compute_optimal
    reuses the compute-optimal configuration with the batch size frozen at the
    smallest budget's prescription; its data-efficiency penalty is controlled
    by ``batch_penalty`` (0 means batch size does not enter the surface).
    Infeasible (strategy, budget) entries are None.
    """
    budgets = sorted(float(c) for c in budgets)
    reference = [optimal_for_compute_budget(fit, model, c0) for c0 in budgets]
    rows = []
    for strategy in strategies:
        per_budget: list[float | None] = []
        for c0, ref in zip(budgets, reference):
            if strategy == "compute_optimal":
                d = ref.data
            elif strategy == "fixed_batch_compute_optimal":
                d = ref.data * (1.0 + batch_penalty) if c0 != budgets[0] else ref.data
            elif strategy == "sigma_only":
                if n_fixed is None:
                    raise ValidationError("sigma_only strategy needs n_fixed")
                d = _best_data_at_budget_1d(fit, model, c0, n=n_fixed)
            elif strategy == "n_only":
                if sigma_fixed is None:
                    raise ValidationError("n_only strategy needs sigma_fixed")
                d = _best_data_at_budget_1d(fit, model, c0, sigma=sigma_fixed)
            else:
                raise ValidationError(f"unknown strategy {strategy!r}")
            per_budget.append(None if d is None else d / ref.data)
        feasible = [r for r in per_budget if r is not None]
        rows.append(StrategyRatios(
            strategy=strategy,
            per_budget=tuple(per_budget),
            average=float(np.mean(feasible)) if feasible else None,
            median=float(np.median(feasible)) if feasible else None,
        ))
    return rows
