"""Versioned JSON documents for fitted models."""
from __future__ import annotations

import json

from ..errors import SchemaError
from .boosting import GradientBoostingRegressor
from .forest import RandomForest
from .iforest import IsolationForest
from .linreg import LinearModel
from .tree import DecisionTree

MODEL_FORMAT_VERSION = 1
_KINDS = {
    "linreg": LinearModel,
    "tree": DecisionTree,
    "forest": RandomForest,
    "boosting": GradientBoostingRegressor,
    "iforest": IsolationForest,
}


def dumps_model(model) -> str:
    for kind, cls in _KINDS.items():
        if isinstance(model, cls):
            doc = {"format_version": MODEL_FORMAT_VERSION, "kind": kind, "model": model.to_dict()}
            return json.dumps(doc, sort_keys=True)
    raise TypeError(f"cannot serialize {type(model).__name__}")


def loads_model(text: str):
    doc = json.loads(text)
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise SchemaError(f"unsupported model format_version {doc.get('format_version')!r}")
    kind = doc.get("kind")
    if kind not in _KINDS:
        raise SchemaError(f"unknown model kind {kind!r}")
    return _KINDS[kind].from_dict(doc["model"])
