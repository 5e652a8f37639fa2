"""CAOT pseudo-labelling: solver, similarity, metrics and training pipeline."""

import json

from ._pota import (
    ArgumentError,
    CaotParams,
    DomainError,
    NumericError,
    ParseError,
    accuracy,
    b_of_h,
    caot_solve,
    config_keys,
    cosine_matrix,
    grad_f,
    hungarian,
    labels_from_plan,
    newton_h,
    nmi,
    objective,
    resolved_config,
    sinkhorn_fixed,
    synth_dataset,
)
from . import _pota


def _entries(config):
    return {k: str(v).lower() if isinstance(v, bool) else str(v) for k, v in (config or {}).items()}


def run_pota(data, config=None):
    """Train on a dataset dict (v0, v1, v2, k, optional y_true); returns the report as a dict."""
    text = _pota.run_pota_json(data["v0"], data["v1"], data["v2"], data["k"], data.get("y_true"),
                               _entries(config))
    return json.loads(text)


def pseudo_label_bench(data, config=None):
    text = _pota.bench_json(data["v0"], data["v1"], data["v2"], data["k"], data["y_true"], _entries(config))
    return json.loads(text)


__all__ = [
    "ArgumentError", "CaotParams", "DomainError", "NumericError", "ParseError", "accuracy", "b_of_h",
    "caot_solve", "config_keys", "cosine_matrix", "grad_f", "hungarian", "labels_from_plan", "newton_h",
    "nmi", "objective", "pseudo_label_bench", "resolved_config", "run_pota", "sinkhorn_fixed",
    "synth_dataset",
]
