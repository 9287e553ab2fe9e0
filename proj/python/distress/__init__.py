"""Python bindings for the municipal financial distress pipeline."""

import json as _json

from . import _core
from ._core import (
    CalibrationFailure,
    DistressError,
    FeatureMatrix,
    InvalidInput,
    IoError,
    Pipeline,
    SynthOutput,
    class_weights,
    generate,
    grid_size,
    run_cli,
    stratified_kfold,
    stratified_split,
)

__all__ = [
    "CalibrationFailure",
    "DistressError",
    "FeatureMatrix",
    "InvalidInput",
    "IoError",
    "Pipeline",
    "SynthOutput",
    "class_weights",
    "confusion",
    "fit_pipeline",
    "generate",
    "grid_size",
    "metrics",
    "pr_curve",
    "roc_curve",
    "run_cli",
    "stratified_kfold",
    "stratified_split",
]


def confusion(y_true, y_pred):
    return _json.loads(_core.confusion(list(y_true), list(y_pred)))


def metrics(tp, fn, fp, tn):
    return _json.loads(_core.metrics(tp, fn, fp, tn))


def roc_curve(y_true, scores):
    return _json.loads(_core.roc_curve(list(y_true), list(scores)))


def pr_curve(y_true, scores):
    return _json.loads(_core.pr_curve(list(y_true), list(scores)))


def fit_pipeline(matrix, family="logistic", params=None, seed=0):
    """Fits standardizer, class weights, and model on `matrix`."""
    return _core.fit_pipeline(matrix, family, _json.dumps(params or {}), seed)
