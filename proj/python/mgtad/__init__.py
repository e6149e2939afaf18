"""Micro-gesture temporal action detection."""

from ._core import (
    FormatError,
    Model,
    augment,
    diagnose,
    evaluate,
    load_annotations,
    load_features,
    load_predictions,
    prf1,
    replication_factor,
    save_annotations,
    save_features,
    save_predictions,
    synth,
    tiou,
)

__all__ = [
    "FormatError",
    "Model",
    "augment",
    "diagnose",
    "evaluate",
    "load_annotations",
    "load_features",
    "load_predictions",
    "prf1",
    "replication_factor",
    "save_annotations",
    "save_features",
    "save_predictions",
    "synth",
    "tiou",
]
