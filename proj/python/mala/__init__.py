"""Affinity-graph segmentation: watershed fragments, histogram agglomeration,
constrained MALIS and VOI/RAND evaluation."""

import json as _json

from ._core import (
    agglomerate,
    evaluate,
    extract_fragments,
    extract_segmentation,
    malis,
    synth,
)
from ._core import run_pipeline as _run_pipeline

__all__ = [
    "agglomerate",
    "evaluate",
    "extract_fragments",
    "extract_segmentation",
    "malis",
    "run_pipeline",
    "synth",
]


def run_pipeline(config):
    """Run the full pipeline from a config dict and return the report dict."""
    return _json.loads(_run_pipeline(_json.dumps(config)))
