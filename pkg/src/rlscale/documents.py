"""JSON fit documents: named coefficients, diagnostics, and provenance."""

from __future__ import annotations

import hashlib
import json
from typing import Any

from .errors import ValidationError
from .fitkit import FitResult
from .laws import BatchRuleFit, DataFit, SharedExponentFamily


def table_digest(text: str) -> str:
    """Content digest of an input table, recorded as provenance."""
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _diagnostics(result: FitResult | None) -> dict:
    if result is None:
        return {}
    return {
        "loss": result.loss,
        "converged": result.converged,
        "iterations": result.iterations,
        "n_restarts_used": result.n_restarts_used,
    }


def fit_to_dict(fit, result: FitResult | None = None,
                provenance: dict | None = None) -> dict[str, Any]:
    if isinstance(fit, BatchRuleFit):
        doc = {
            "family": "batch_rule",
            "params": {"a_b": fit.a_b, "b_b": fit.b_b,
                       "alpha_b": fit.alpha_b, "beta_b": fit.beta_b},
        }
    elif isinstance(fit, DataFit):
        doc = {
            "family": "data_efficiency",
            "params": {"d_min": fit.d_min, "a": fit.a, "alpha": fit.alpha,
                       "b": fit.b, "beta": fit.beta},
            "threshold": fit.threshold,
            "unstable": fit.unstable,
        }
    elif isinstance(fit, SharedExponentFamily):
        doc = {
            "family": "shared_exponent",
            "params": {"alpha": fit.alpha, "beta": fit.beta},
            "per_task": fit.per_task,
            "threshold": fit.threshold,
            "unstable": fit.unstable,
        }
    else:
        raise ValidationError(f"cannot serialize fit of type {type(fit).__name__}")
    doc["diagnostics"] = _diagnostics(result)
    doc["provenance"] = provenance or {}
    return doc


def fit_from_dict(doc: dict):
    family = doc.get("family")
    p = doc.get("params", {})
    if family == "batch_rule":
        return BatchRuleFit(a_b=p["a_b"], b_b=p["b_b"],
                            alpha_b=p["alpha_b"], beta_b=p["beta_b"])
    if family == "data_efficiency":
        return DataFit(d_min=p["d_min"], a=p["a"], alpha=p["alpha"],
                       b=p["b"], beta=p["beta"],
                       threshold=doc.get("threshold", float("nan")),
                       unstable=doc.get("unstable", False))
    if family == "shared_exponent":
        return SharedExponentFamily(
            alpha=p["alpha"], beta=p["beta"], per_task=doc["per_task"],
            threshold=doc.get("threshold", float("nan")),
            unstable=doc.get("unstable", False))
    raise ValidationError(f"unknown fit family {family!r}")


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def loads(text: str) -> dict:
    return json.loads(text)
