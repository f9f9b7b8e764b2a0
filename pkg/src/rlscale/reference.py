"""Reference task constants and published fit coefficients.

Task constants (optimal returns, threshold bounds, env-step cost delta) and
the reference batch-rule / data-efficiency coefficients for the benchmark
suite. These serve as ground truth for synthetic-recovery tests and as a
ready-made manifest for the CLI.
"""

from __future__ import annotations

from .ingest import TaskMeta
from .laws import BatchRuleFit, DataFit

TASKS = {
    meta.task_id: meta
    for meta in [
        TaskMeta("h1-crawl", optimal_return=700, j_min=450, j_max=780, delta=2e12),
        TaskMeta("h1-pole", optimal_return=700, j_min=300, j_max=680, delta=5e11),
        TaskMeta("h1-stand", optimal_return=800, j_min=200, j_max=660, delta=5e11),
        TaskMeta("humanoid-stand", optimal_return=1000, j_min=300, j_max=850, delta=5e10),
        TaskMeta("acrobot-swingup", optimal_return=1000, j_min=150, j_max=400, delta=1e11),
        TaskMeta("cheetah-run", optimal_return=1000, j_min=400, j_max=750, delta=1e11),
        TaskMeta("finger-turn-hard", optimal_return=1000, j_min=400, j_max=900, delta=1e11),
        TaskMeta("fish-swim", optimal_return=1000, j_min=200, j_max=710, delta=1e11),
        TaskMeta("hopper-hop", optimal_return=1000, j_min=150, j_max=320, delta=1e11),
        TaskMeta("quadruped-run", optimal_return=1000, j_min=200, j_max=790, delta=1e11),
        TaskMeta("walker-run", optimal_return=1000, j_min=350, j_max=730, delta=1e11),
        TaskMeta("dog-run", optimal_return=1000, j_min=100, j_max=270, delta=1e11),
        TaskMeta("dog-trot", optimal_return=1000, j_min=100, j_max=580, delta=1e11),
        TaskMeta("dog-stand", optimal_return=1000, j_min=100, j_max=910, delta=1e11),
        TaskMeta("dog-walk", optimal_return=1000, j_min=100, j_max=860, delta=1e11),
        TaskMeta("humanoid-run", optimal_return=1000, j_min=75, j_max=190, delta=1e11),
        TaskMeta("humanoid-walk", optimal_return=1000, j_min=200, j_max=650, delta=1e11),
    ]
}

# Batch rule B(sigma, N) = a_B / (sigma^alpha_B + b_B sigma^alpha_B N^-beta_B)
BATCH_RULES = {
    "h1-crawl": BatchRuleFit(a_b=1680.64, alpha_b=0.30, b_b=6.01e7, beta_b=1.12),
    "h1-pole": BatchRuleFit(a_b=4112.98, alpha_b=0.24, b_b=1.45e1, beta_b=0.07),
    "h1-stand": BatchRuleFit(a_b=1458.10, alpha_b=0.27, b_b=1.33e74, beta_b=12.71),
    "humanoid-stand": BatchRuleFit(a_b=1160.40, alpha_b=0.49, b_b=2.77e2, beta_b=0.38),
}

# Data-efficiency surfaces at the top threshold, published in factored form
# d_min * (1 + (a'/sigma)^alpha + (b'/N)^beta); stored in additive form.
DATA_FITS = {
    "h1-crawl": DataFit.from_factored(5.11e4, 2.59e5, 0.15, 1.70e7, 0.75, threshold=780),
    "h1-pole": DataFit.from_factored(9.43e3, 3.22e6, 0.27, 2.50e12, 0.30, threshold=680),
    "h1-stand": DataFit.from_factored(2.14e5, 6.68e-1, 2.53, 1.74e6, 0.97, threshold=660),
    "humanoid-stand": DataFit.from_factored(1.49e4, 1.78e6, 0.26, 3.75e7, 0.63, threshold=850),
}


def manifest_dict() -> dict:
    """The reference tasks as a manifest document (for YAML export)."""
    out = {}
    for task_id, meta in TASKS.items():
        block = {
            "optimal_return": meta.optimal_return,
            "j_min": meta.j_min,
            "j_max": meta.j_max,
            "delta": meta.delta,
        }
        if meta.reset_period is not None:
            block["reset_period"] = meta.reset_period
        out[task_id] = block
    return out
