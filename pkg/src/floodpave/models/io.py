"""Versioned JSON persistence for fitted predictors.

Floats are serialized through Python's shortest round-trip repr, so a
saved model reproduces its predictions bit-for-bit after loading.
"""

from __future__ import annotations

import json

from .._util import write_text_atomic
from .linear import LinearPredictor
from .tree import BoostingPredictor, ForestPredictor, TreePredictor

FORMAT_VERSION = 1

_CLASSES = {
    "linear": LinearPredictor,
    "ridge": LinearPredictor,
    "lasso": LinearPredictor,
    "decision_tree": TreePredictor,
    "random_forest": ForestPredictor,
    "gradient_boosting": BoostingPredictor,
}


def model_to_dict(predictor) -> dict:
    doc = {"format_version": FORMAT_VERSION}
    doc.update(predictor.to_dict())
    return doc


def model_from_dict(doc: dict):
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {version!r}")
    kind = doc["spec"]["kind"]
    try:
        cls = _CLASSES[kind]
    except KeyError:
        raise ValueError(f"unknown model kind {kind!r}") from None
    return cls.from_dict(doc)


def save_model(predictor, path) -> None:
    write_text_atomic(path, json.dumps(model_to_dict(predictor), indent=2) + "\n")


def load_model(path):
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
