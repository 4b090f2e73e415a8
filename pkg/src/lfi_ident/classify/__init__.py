"""Classifiers, per-class score matrices and model files."""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path
from typing import NamedTuple, Union

import numpy as np

from ..config import GbdtConfig, LinearConfig, from_dict
from ..pipeline import FeatureMatrix, Standardizer, apply_standardizer, fit_standardizer, registry_hash
from .gbdt import GbdtModel, Tree, softmax, train_gbdt
from .linear import LinearModel, train_linear

MODEL_FORMAT = "lfi-ident-model"
MODEL_VERSION = 1

Model = Union[LinearModel, GbdtModel]


class RegistryMismatch(ValueError):
    pass


class ScoreMatrix(NamedTuple):
    scores: np.ndarray  # (n_samples, n_classes)
    classes: list

    def predicted_index(self) -> np.ndarray:
        return np.argmax(self.scores, axis=1)  # ties: lowest class index

    def predicted(self) -> np.ndarray:
        return np.asarray(self.classes)[self.predicted_index()]


def fit_classifier(kind: str, train: FeatureMatrix, val: FeatureMatrix, linear_cfg: LinearConfig = LinearConfig(),
                   gbdt_cfg: GbdtConfig = GbdtConfig()) -> Model:
    """Standardise on the training split, then train the requested classifier.

    The fitted standardizer is stored on the model and reapplied by ``predict_scores``.
    """
    if len(train) == 0:
        raise ValueError("empty training split")
    std = fit_standardizer(train)
    tr = apply_standardizer(std, train)
    va = apply_standardizer(std, val) if len(val) else val
    if kind == "linear":
        model = train_linear(tr.values, tr.subjects, va.values, va.subjects, linear_cfg, train.names)
    elif kind == "gbdt":
        model = train_gbdt(tr.values, tr.subjects, va.values, va.subjects, gbdt_cfg, train.names)
    else:
        raise ValueError(f"unknown classifier kind {kind!r}")
    model.standardizer = std
    return model


def _check_registry(model: Model, matrix: FeatureMatrix) -> None:
    if model.names and tuple(model.names) != tuple(matrix.names):
        raise RegistryMismatch("feature registry differs from the one the model was trained on")


def predict_scores(model: Model, matrix: FeatureMatrix) -> ScoreMatrix:
    """Margins for the linear model, softmax probabilities for the tree ensemble."""
    _check_registry(model, matrix)
    X = matrix.values
    if model.standardizer is not None:
        X = model.standardizer.transform(X)
    if isinstance(model, LinearModel):
        scores = model.decision_function(X)
    else:
        scores = model.predict_proba(X)
    return ScoreMatrix(scores, list(model.classes))


def save_model(model: Model, path: str | Path, metadata: dict | None = None) -> None:
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "kind": "linear" if isinstance(model, LinearModel) else "gbdt",
        "registry_hash": registry_hash(model.names),
        "names": list(model.names),
        "classes": list(model.classes),
    }
    if model.standardizer is not None:
        doc["standardizer"] = {"mean": model.standardizer.mean.tolist(), "std": model.standardizer.std.tolist()}
    if isinstance(model, LinearModel):
        doc.update(weights=model.weights.tolist(), biases=model.biases.tolist(), reg=model.reg,
                   epochs=model.epochs, seed=model.seed,
                   val_accuracy={repr(k): v for k, v in model.val_accuracy.items()})
    else:
        doc.update(config=asdict(model.config), seed=model.config.seed, init_scores=model.init_scores.tolist(),
                   best_round=model.best_round, train_loss=model.train_loss, val_loss=model.val_loss,
                   trees=[[t.to_dict() for t in rnd] for rnd in model.trees])
    if metadata:
        doc["metadata"] = metadata
    Path(path).write_text(json.dumps(doc))


def read_model_metadata(path: str | Path) -> dict:
    return json.loads(Path(path).read_text()).get("metadata", {})


def load_model(path: str | Path, expected_registry_hash: str | None = None) -> Model:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError(f"{path}: not a model file")
    if doc.get("version") != MODEL_VERSION:
        raise ValueError(f"{path}: unsupported model version {doc.get('version')}")
    if registry_hash(doc["names"]) != doc["registry_hash"]:
        raise RegistryMismatch(f"{path}: stored registry hash does not match stored names")
    if expected_registry_hash is not None and doc["registry_hash"] != expected_registry_hash:
        raise RegistryMismatch(f"{path}: model registry {doc['registry_hash']} != expected {expected_registry_hash}")
    names = tuple(doc["names"])
    if doc["kind"] == "linear":
        model = LinearModel(np.asarray(doc["weights"]), np.asarray(doc["biases"]), doc["classes"], doc["reg"],
                            doc["epochs"], doc["seed"], names,
                            {float(k): v for k, v in doc.get("val_accuracy", {}).items()})
    else:
        trees = [[Tree.from_dict(t) for t in rnd] for rnd in doc["trees"]]
        model = GbdtModel(doc["classes"], np.asarray(doc["init_scores"]), trees,
                          from_dict(GbdtConfig, doc["config"]), names, doc["train_loss"], doc["val_loss"],
                          doc["best_round"])
    if "standardizer" in doc:
        model.standardizer = Standardizer(np.asarray(doc["standardizer"]["mean"]),
                                          np.asarray(doc["standardizer"]["std"]))
    return model


__all__ = [
    "GbdtModel", "LinearModel", "Model", "RegistryMismatch", "ScoreMatrix", "fit_classifier",
    "load_model", "predict_scores", "read_model_metadata", "save_model", "softmax", "train_gbdt", "train_linear",
]
