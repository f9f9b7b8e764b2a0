"""Constrained-positive nonlinear least squares in log space.

The fitting recipe: map each input column to [0.5, 2] in log space, divide
targets by their mean, parameterize every coefficient through softplus so it
stays positive, minimize the mean squared log-space error with L-BFGS from a
zero raw-parameter start (analytic gradients), then undo both normalizations
on the recovered coefficients. Multi-start restarts kick in when the zero
start lands on a plateau.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize as _scipy_minimize

from .errors import FitError

LOG_HALF = np.log(0.5)
LOG_TWO = np.log(2.0)

GRAD_TOL = 1e-10
MAX_ITER = 2000
N_RESTARTS = 8
PLATEAU_LOSS = 0.01


@dataclass(frozen=True)
class NormalizationState:
    """Log-space affine map for one input column: x' = exp((log x - m) / s)."""

    s: float
    m: float

    def forward(self, x: np.ndarray) -> np.ndarray:
        return np.exp((np.log(x) - self.m) / self.s)

    def inverse(self, x_norm: np.ndarray) -> np.ndarray:
        return np.exp(self.s * np.log(x_norm) + self.m)


def normalize_inputs(x) -> tuple[np.ndarray, NormalizationState]:
    """Map positive inputs to [0.5, 2] in log space; min -> 0.5, max -> 2."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise FitError("inputs must be positive")
    lo, hi = np.log(np.min(x)), np.log(np.max(x))
    if lo == hi:
        raise FitError("degenerate input: all values equal")
    s = (hi - lo) / (LOG_TWO - LOG_HALF)
    m = lo - s * LOG_HALF
    state = NormalizationState(s=s, m=m)
    return state.forward(x), state


def normalize_inputs_or_fixed(x) -> tuple[np.ndarray, NormalizationState]:
    """Like normalize_inputs, with the single-distinct-value fallback (s=1, value -> 1)."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise FitError("inputs must be positive")
    if np.min(x) == np.max(x):
        state = NormalizationState(s=1.0, m=float(np.log(x[0])))
        return state.forward(x), state
    return normalize_inputs(x)


def softplus(theta):
    """log(1 + exp(theta)), stable for large |theta|."""
    theta = np.asarray(theta, dtype=float)
    return np.logaddexp(0.0, theta)


def inverse_softplus(p):
    """Inverse of softplus; exact round trip over many orders of magnitude."""
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0):
        raise FitError("inverse_softplus requires positive values")
    # log(exp(p) - 1) = p + log1p(-exp(-p))
    return p + np.log1p(-np.exp(-p))


def _sigmoid(theta):
    out = np.empty_like(theta)
    pos = theta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-theta[pos]))
    e = np.exp(theta[~pos])
    out[~pos] = e / (1.0 + e)
    return out


class ModelFamily:
    """A parametric positive-valued model of positive inputs.

    Subclasses implement prediction and the per-parameter prediction gradient
    on (already normalized) inputs, plus the denormalization of fitted
    coefficients back to raw units.
    """

    name: str = ""
    param_names: tuple[str, ...] = ()

    def n_params(self, inputs: np.ndarray) -> int:
        return len(self.param_names)

    def predict(self, params: np.ndarray, inputs: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def predict_grad(self, params: np.ndarray, inputs: np.ndarray) -> np.ndarray:
        """Returns (n_params, n_points) array of d pred / d param."""
        raise NotImplementedError

    def denormalize(self, params: np.ndarray, states: list[NormalizationState],
                    y_mean: float) -> dict[str, float]:
        raise NotImplementedError


class ConstantModel(ModelFamily):
    """y = c. Used mostly as a sanity check of the engine."""

    name = "constant"
    param_names = ("c",)

    def predict(self, params, inputs):
        return np.full(inputs.shape[0], params[0])

    def predict_grad(self, params, inputs):
        return np.ones((1, inputs.shape[0]))

    def denormalize(self, params, states, y_mean):
        return {"c": float(params[0] * y_mean)}


class AdditivePowerModel(ModelFamily):
    """D(sigma, N) = d_min + (a / sigma)^alpha + (b / N)^beta."""

    name = "additive_power"
    param_names = ("d_min", "a", "alpha", "b", "beta")

    def predict(self, params, inputs):
        d, a, alpha, b, beta = params
        sigma, n = inputs[:, 0], inputs[:, 1]
        return d + (a / sigma) ** alpha + (b / n) ** beta

    def predict_grad(self, params, inputs):
        d, a, alpha, b, beta = params
        sigma, n = inputs[:, 0], inputs[:, 1]
        term_a = (a / sigma) ** alpha
        term_b = (b / n) ** beta
        g = np.empty((5, inputs.shape[0]))
        g[0] = 1.0
        g[1] = alpha / a * term_a
        g[2] = term_a * np.log(a / sigma)
        g[3] = beta / b * term_b
        g[4] = term_b * np.log(b / n)
        return g

    def denormalize(self, params, states, y_mean):
        d, a, alpha, b, beta = params
        s_sig, m_sig = states[0].s, states[0].m
        s_n, m_n = states[1].s, states[1].m
        alpha_raw = alpha / s_sig
        beta_raw = beta / s_n
        a_raw = np.exp(s_sig * np.log(a) + m_sig) * y_mean ** (1.0 / alpha_raw)
        b_raw = np.exp(s_n * np.log(b) + m_n) * y_mean ** (1.0 / beta_raw)
        return {
            "d_min": float(d * y_mean),
            "a": float(a_raw),
            "alpha": float(alpha_raw),
            "b": float(b_raw),
            "beta": float(beta_raw),
        }


class SaturatingBatchModel(ModelFamily):
    """B(sigma, N) = a / (sigma^alpha + b * sigma^alpha * N^-beta)."""

    name = "saturating_batch"
    param_names = ("a", "alpha", "b", "beta")

    def predict(self, params, inputs):
        a, alpha, b, beta = params
        sigma, n = inputs[:, 0], inputs[:, 1]
        return a / (sigma ** alpha * (1.0 + b * n ** -beta))

    def predict_grad(self, params, inputs):
        a, alpha, b, beta = params
        sigma, n = inputs[:, 0], inputs[:, 1]
        nb = n ** -beta
        pred = a / (sigma ** alpha * (1.0 + b * nb))
        g = np.empty((4, inputs.shape[0]))
        g[0] = pred / a
        g[1] = -pred * np.log(sigma)
        g[2] = -pred * nb / (1.0 + b * nb)
        g[3] = pred * b * nb * np.log(n) / (1.0 + b * nb)
        return g

    def denormalize(self, params, states, y_mean):
        a, alpha, b, beta = params
        s_sig, m_sig = states[0].s, states[0].m
        s_n, m_n = states[1].s, states[1].m
        alpha_raw = alpha / s_sig
        beta_raw = beta / s_n
        b_raw = b * np.exp(beta_raw * m_n)
        a_raw = y_mean * a * np.exp(alpha_raw * m_sig)
        return {
            "a": float(a_raw),
            "alpha": float(alpha_raw),
            "b": float(b_raw),
            "beta": float(beta_raw),
        }


class SharedExponentModel(ModelFamily):
    """Additive power model with alpha, beta shared over tasks.

    Inputs carry a third column holding the task index; parameters are
    [alpha, beta, d_min_0, a_0, b_0, d_min_1, a_1, b_1, ...].
    """

    name = "shared_exponent"

    def __init__(self, task_ids: list[str]):
        self.task_ids = list(task_ids)
        self.param_names = ("alpha", "beta") + tuple(
            f"{coef}_{t}" for t in self.task_ids for coef in ("d_min", "a", "b")
        )

    def _per_task(self, params, task_idx):
        d = params[2 + 3 * task_idx]
        a = params[3 + 3 * task_idx]
        b = params[4 + 3 * task_idx]
        return d, a, b

    def predict(self, params, inputs):
        alpha, beta = params[0], params[1]
        sigma, n = inputs[:, 0], inputs[:, 1]
        t = inputs[:, 2].astype(int)
        d = params[2 + 3 * t]
        a = params[3 + 3 * t]
        b = params[4 + 3 * t]
        return d + (a / sigma) ** alpha + (b / n) ** beta

    def predict_grad(self, params, inputs):
        alpha, beta = params[0], params[1]
        sigma, n = inputs[:, 0], inputs[:, 1]
        t = inputs[:, 2].astype(int)
        a = params[3 + 3 * t]
        b = params[4 + 3 * t]
        term_a = (a / sigma) ** alpha
        term_b = (b / n) ** beta
        g = np.zeros((len(params), inputs.shape[0]))
        g[0] = term_a * np.log(a / sigma)
        g[1] = term_b * np.log(b / n)
        cols = np.arange(inputs.shape[0])
        g[2 + 3 * t, cols] = 1.0
        g[3 + 3 * t, cols] = alpha / a * term_a
        g[4 + 3 * t, cols] = beta / b * term_b
        return g

    def denormalize(self, params, states, y_mean):
        alpha, beta = params[0], params[1]
        s_sig, m_sig = states[0].s, states[0].m
        s_n, m_n = states[1].s, states[1].m
        alpha_raw = alpha / s_sig
        beta_raw = beta / s_n
        out = {"alpha": float(alpha_raw), "beta": float(beta_raw)}
        for i, task in enumerate(self.task_ids):
            d, a, b = self._per_task(params, i)
            out[f"d_min_{task}"] = float(d * y_mean)
            out[f"a_{task}"] = float(
                np.exp(s_sig * np.log(a) + m_sig) * y_mean ** (1.0 / alpha_raw))
            out[f"b_{task}"] = float(
                np.exp(s_n * np.log(b) + m_n) * y_mean ** (1.0 / beta_raw))
        return out


@dataclass
class FitProblem:
    """One fitting task: model family, raw (unnormalized) inputs, positive targets.

    ``normalized_columns`` lists the input columns to pass through the
    log-space [0.5, 2] map (task-index columns are left alone).
    """

    model: ModelFamily
    inputs: np.ndarray
    targets: np.ndarray
    normalized_columns: tuple[int, ...] = (0, 1)
    rng_seed: int = 0

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        self.targets = np.asarray(self.targets, dtype=float)
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise FitError("inputs and targets must have the same length")
        if np.any(self.targets <= 0):
            raise FitError("targets must be positive")
        if self.targets.shape[0] < self.model.n_params(self.inputs):
            raise FitError("fewer points than parameters")


@dataclass(frozen=True)
class FitResult:
    params: dict[str, float]
    loss: float
    converged: bool
    iterations: int
    n_restarts_used: int = 0
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if any(v <= 0 for v in self.params.values()):
            raise FitError(f"non-positive fitted parameter: {self.params}")
        if self.loss < 0:
            raise FitError("negative loss")


def _objective(theta: np.ndarray, model: ModelFamily, inputs: np.ndarray,
               log_targets: np.ndarray) -> tuple[float, np.ndarray]:
    params = softplus(theta)
    pred = model.predict(params, inputs)
    if np.any(pred <= 0) or not np.all(np.isfinite(pred)):
        return np.inf, np.zeros_like(theta)
    resid = np.log(pred) - log_targets
    loss = float(np.mean(resid ** 2))
    dloss_dpred = 2.0 * resid / pred / len(resid)
    grad = model.predict_grad(params, inputs) @ dloss_dpred
    return loss, grad * _sigmoid(theta)


def objective_and_grad(theta, problem: FitProblem):
    """Normalized-space loss and gradient at raw parameters ``theta``.

    Exposed for finite-difference validation of the analytic gradients.
    """
    inputs, _, log_targets, _ = _normalized_problem(problem)
    return _objective(np.asarray(theta, dtype=float), problem.model, inputs, log_targets)


def _normalized_problem(problem: FitProblem):
    inputs = problem.inputs.copy()
    states = []
    for col in range(inputs.shape[1]):
        if col in problem.normalized_columns:
            inputs[:, col], state = normalize_inputs_or_fixed(inputs[:, col])
            states.append(state)
    y_mean = float(np.mean(problem.targets))
    log_targets = np.log(problem.targets / y_mean)
    return inputs, states, log_targets, y_mean


def minimize(problem: FitProblem) -> FitResult:
    """Fit the model family by quasi-Newton descent on the log-space MSE.

    Starts from zero raw parameters; when the result looks like a plateau
    (loss above PLATEAU_LOSS), retries from N(0, 1) draws and keeps the best.
    """
    inputs, states, log_targets, y_mean = _normalized_problem(problem)
    model = problem.model
    p = model.n_params(inputs)

    def solve_from(theta0):
        res = _scipy_minimize(
            _objective, theta0, args=(model, inputs, log_targets),
            method="L-BFGS-B", jac=True,
            options={"maxiter": MAX_ITER, "gtol": GRAD_TOL, "ftol": 1e-18},
        )
        if not np.isfinite(res.fun):
            return None
        return res

    best = solve_from(np.zeros(p))
    restarts_used = 0
    if best is None or best.fun > PLATEAU_LOSS:
        rng = np.random.default_rng(problem.rng_seed)
        for _ in range(N_RESTARTS):
            restarts_used += 1
            cand = solve_from(rng.standard_normal(p))
            if cand is not None and (best is None or cand.fun < best.fun):
                best = cand
    if best is None:
        raise FitError("optimization failed: objective non-finite from every start")

    params_norm = softplus(best.x)
    params = model.denormalize(params_norm, states, y_mean)
    return FitResult(
        params=params,
        loss=float(best.fun),
        converged=bool(best.success),
        iterations=int(best.nit),
        n_restarts_used=restarts_used,
        diagnostics={
            "grad_norm": float(np.max(np.abs(best.jac))),
            "message": str(best.message),
            "normalized_params": {
                name: float(v) for name, v in zip(model.param_names, params_norm)
            },
        },
    )


@dataclass(frozen=True)
class PowerLaw:
    """y = (scale / x)^exponent, fit by log-log least squares."""

    scale: float
    exponent: float
    r_squared: float

    def predict(self, x):
        return (self.scale / np.asarray(x, dtype=float)) ** self.exponent


def fit_power_law(x, y) -> PowerLaw:
    """Closed-form log-log line fit of y = (a / x)^alpha.

    The exponent may come out negative for increasing data; R^2 is reported
    in log space over the fitted points.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2 or np.min(x) == np.max(x):
        raise FitError("fit_power_law needs >= 2 points with distinct x")
    if np.any(x <= 0) or np.any(y <= 0):
        raise FitError("fit_power_law needs positive data")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    alpha = -slope
    # near-zero slopes make the scale exp(intercept/alpha) overflow
    if alpha == 0 or abs(intercept / alpha) > 600:
        raise FitError("degenerate power law: exponent indistinguishable from zero")
    scale = float(np.exp(intercept / alpha))
    pred = intercept + slope * lx
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - np.mean(ly)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return PowerLaw(scale=scale, exponent=float(alpha), r_squared=r2)


def power_law_r_squared(law: PowerLaw, x, y) -> float:
    """Log-space R^2 of a fitted power law on (possibly held-out) data."""
    ly = np.log(np.asarray(y, dtype=float))
    pred = np.log(law.predict(x))
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - np.mean(ly)) ** 2))
    return 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0


@dataclass(frozen=True)
class LogLinearFit:
    """log B = intercept + slope_sigma * log(sigma) + slope_n * log(N)."""

    intercept: float
    slope_sigma: float
    slope_n: float

    def predict(self, sigma, n):
        return np.exp(self.intercept
                      + self.slope_sigma * np.log(np.asarray(sigma, dtype=float))
                      + self.slope_n * np.log(np.asarray(n, dtype=float)))


def fit_loglinear(inputs, targets) -> LogLinearFit:
    """OLS of log B on (1, log sigma, log N); the paper-style baseline fit."""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    targets = np.asarray(targets, dtype=float)
    if inputs.shape[0] < 3:
        raise FitError("fit_loglinear needs >= 3 points")
    design = np.column_stack([
        np.ones(inputs.shape[0]), np.log(inputs[:, 0]), np.log(inputs[:, 1]),
    ])
    if np.linalg.matrix_rank(design) < 3:
        raise FitError("rank-deficient design: inputs do not span both axes")
    coef, *_ = np.linalg.lstsq(design, np.log(targets), rcond=None)
    return LogLinearFit(intercept=float(coef[0]), slope_sigma=float(coef[1]),
                        slope_n=float(coef[2]))
