"""Versioned JSON model files.

Layout: {"format": "cf_audit.model", "version": 1, "family": ..., "params": {...},
"state": {...}, "meta": {...}}.  Floats are written with repr precision, so a
load reproduces the exact predictor.
"""
from __future__ import annotations

import json

from .linear import KNN, LogisticRegression
from .svm import RbfSvm
from .tree import DecisionTree, RandomForest
from ..oracles import PocketClassifier

FORMAT = "cf_audit.model"
VERSION = 1

FAMILIES = {
    "tree": DecisionTree,
    "forest": RandomForest,
    "knn": KNN,
    "logreg": LogisticRegression,
    "svm": RbfSvm,
    "pocket": PocketClassifier,
}


def _state(model):
    if isinstance(model, PocketClassifier):
        return "pocket", model.to_dict()
    return model.family, model.state()


def model_to_dict(model, meta=None) -> dict:
    family, state = _state(model)
    return {"format": FORMAT, "version": VERSION, "family": family,
            "params": getattr(model, "params", {}), "state": state, "meta": meta or {}}


def model_from_dict(d):
    if d.get("format") != FORMAT:
        raise ValueError("not a cf_audit model file")
    if d.get("version") != VERSION:
        raise ValueError(f"unsupported model file version {d.get('version')}")
    family = d.get("family")
    if family not in FAMILIES:
        raise ValueError(f"unknown model family {family!r}")
    if family == "pocket":
        return PocketClassifier.from_dict(d["state"])
    return FAMILIES[family].from_state(d["state"], d.get("params"))


def dumps_model(model, meta=None) -> str:
    return json.dumps(model_to_dict(model, meta), sort_keys=True, separators=(",", ":"))


def save_model(model, path, meta=None):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_model(model, meta))
        fh.write("\n")


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
