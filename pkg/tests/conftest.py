import numpy as np
import pytest

from rlscale.ingest import RunKey, TaskMeta
from rlscale.preprocess import ProcessedCurve


@pytest.fixture
def h1_crawl_meta():
    from rlscale.reference import TASKS
    return TASKS["h1-crawl"]


@pytest.fixture
def h1_crawl_data_fit():
    from rlscale.reference import DATA_FITS
    return DATA_FITS["h1-crawl"]


@pytest.fixture
def h1_crawl_batch_rule():
    from rlscale.reference import BATCH_RULES
    return BATCH_RULES["h1-crawl"]


def step_curve(d: int, j_hi: float, *, task="t", sigma=1.0, n=1e6,
               batch=128, seed=0, j_lo=0.0) -> ProcessedCurve:
    """Monotone two-point curve first reaching j_hi at env step d."""
    return ProcessedCurve(
        key=RunKey(task, sigma, n, batch, seed),
        points=((1, j_lo), (int(d), j_hi)),
        monotone=True,
    )


def rng_fit_draw(rng: np.random.Generator):
    """One well-conditioned random data-efficiency surface (shared by tests)."""
    from oracles import random_data_fit
    return random_data_fit(rng)
