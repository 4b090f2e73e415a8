"""One-vs-rest linear max-margin classifier trained by averaged stochastic subgradient descent."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..config import LinearConfig


@dataclass
class LinearModel:
    weights: np.ndarray  # (n_classes, d)
    biases: np.ndarray  # (n_classes,)
    classes: list
    reg: float
    epochs: int
    seed: int
    names: tuple = ()
    val_accuracy: dict = field(default_factory=dict)
    standardizer: object = None

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        return X @ self.weights.T + self.biases


def _check_labels(y, classes=None):
    present = sorted(set(np.asarray(y).tolist()))
    if len(present) < 2:
        raise ValueError("need at least two classes in the training data")
    if classes is not None:
        missing = sorted(set(classes) - set(present))
        if missing:
            raise ValueError(f"classes missing from training data: {missing}")
    return present


def fit_ovr_hinge(X: np.ndarray, y_idx: np.ndarray, n_classes: int, reg: float, epochs: int,
                  seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Minimise reg/2 |w_c|^2 + mean hinge loss for every class at once.

    Step size 1/(reg * t + 1); iterates are averaged from the second epoch on
    (from the start when ``epochs == 1``). Biases are not regularised.
    """
    n, d = X.shape
    rng = np.random.default_rng(seed)
    W = np.zeros((n_classes, d))
    b = np.zeros(n_classes)
    W_avg = np.zeros_like(W)
    b_avg = np.zeros_like(b)
    n_avg = 0
    avg_from = 1 if epochs > 1 else 0
    signs = -np.ones((n, n_classes))
    signs[np.arange(n), y_idx] = 1.0
    t = 0
    for epoch in range(epochs):
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (reg * t + 1.0)
            x = X[i]
            s = signs[i]
            viol = s * (W @ x + b) < 1.0
            W *= 1.0 - eta * reg
            if viol.any():
                W[viol] += (eta * s[viol])[:, None] * x
                b[viol] += eta * s[viol]
            if epoch >= avg_from:
                n_avg += 1
                W_avg += (W - W_avg) / n_avg
                b_avg += (b - b_avg) / n_avg
    return W_avg, b_avg


def train_linear(X_train, y_train, X_val, y_val, cfg: LinearConfig = LinearConfig(),
                 names: tuple = ()) -> LinearModel:
    """Fit one model per regularisation strength and keep the best on validation accuracy.

    Inputs are expected to be standardised. Ties go to the earliest grid entry.
    """
    if not cfg.reg_grid:
        raise ValueError("empty regularisation grid")
    X_train = np.asarray(X_train, dtype=float)
    classes = _check_labels(y_train)
    index = {c: i for i, c in enumerate(classes)}
    y_idx = np.array([index[c] for c in np.asarray(y_train).tolist()])
    val_known = np.array([c in index for c in np.asarray(y_val).tolist()], dtype=bool)
    y_val_idx = np.array([index.get(c, -1) for c in np.asarray(y_val).tolist()])

    best, scores = None, {}
    for reg in cfg.reg_grid:
        W, b = fit_ovr_hinge(X_train, y_idx, len(classes), float(reg), cfg.epochs, cfg.seed)
        if len(y_val):
            pred = np.argmax(np.asarray(X_val) @ W.T + b, axis=1)
            acc = float(np.mean((pred == y_val_idx) & val_known))
        else:
            acc = float(np.mean(np.argmax(X_train @ W.T + b, axis=1) == y_idx))
        scores[float(reg)] = acc
        if best is None or acc > best[0]:
            best = (acc, float(reg), W, b)
    _, reg, W, b = best
    return LinearModel(W, b, classes, reg, cfg.epochs, cfg.seed, tuple(names), scores)
