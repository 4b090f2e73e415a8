"""Multi-class gradient-boosted trees with a softmax link and histogram split search.

Each boosting round fits one regression tree per class to the gradient and
hessian of the cross-entropy; trees grow leaf-wise (best gain first) over
features quantised into at most ``max_bins`` bins.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from ..config import GbdtConfig


@njit(cache=True)
def _histogram(binned, rows, grad, hess, n_bins):
    n_feat = binned.shape[1]
    hist = np.zeros((n_feat, n_bins, 3))
    for i in rows:
        g = grad[i]
        h = hess[i]
        for f in range(n_feat):
            b = binned[i, f]
            hist[f, b, 0] += g
            hist[f, b, 1] += h
            hist[f, b, 2] += 1.0
    return hist


def fit_bin_edges(X: np.ndarray, max_bins: int = 256) -> list[np.ndarray]:
    """Per-feature upper bin edges; value v falls in bin ``searchsorted(edges, v)``."""
    edges = []
    for col in X.T:
        uniq = np.unique(col)
        if len(uniq) <= max_bins:
            e = (uniq[:-1] + uniq[1:]) / 2
        else:
            q = np.quantile(col, np.linspace(0, 1, max_bins + 1)[1:-1], method="linear")
            e = np.unique(q)
        edges.append(e)
    return edges


def apply_bins(X: np.ndarray, edges: list[np.ndarray]) -> np.ndarray:
    out = np.empty(X.shape, dtype=np.uint8 if max(len(e) for e in edges) < 256 else np.uint16)
    for f, e in enumerate(edges):
        out[:, f] = np.searchsorted(e, X[:, f], side="left")
    return out


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray  # go left when x <= threshold
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        active = self.left[node] >= 0
        while active.any():
            idx = np.nonzero(active)[0]
            nd = node[idx]
            go_left = X[idx, self.feature[nd]] <= self.threshold[nd]
            node[idx] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.left[node] >= 0
        return self.value[node]

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("feature", "threshold", "left", "right", "value")}

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(np.asarray(d["feature"], dtype=np.int64), np.asarray(d["threshold"], dtype=float),
                   np.asarray(d["left"], dtype=np.int64), np.asarray(d["right"], dtype=np.int64),
                   np.asarray(d["value"], dtype=float))


@njit(cache=True)
def _best_split(hist, n_edges, min_leaf, l2):
    """Best (gain, feature, bin) over all features; first maximum wins (lowest feature, then bin)."""
    G = 0.0
    H = 0.0
    C = 0.0
    for b in range(hist.shape[1]):
        G += hist[0, b, 0]
        H += hist[0, b, 1]
        C += hist[0, b, 2]
    parent = G * G / (H + l2)
    best_gain, best_f, best_b = -np.inf, -1, -1
    for f in range(hist.shape[0]):
        gl = 0.0
        hl = 0.0
        cl = 0.0
        for b in range(n_edges[f]):
            gl += hist[f, b, 0]
            hl += hist[f, b, 1]
            cl += hist[f, b, 2]
            if cl < min_leaf:
                continue
            if C - cl < min_leaf:
                break
            gr = G - gl
            hr = H - hl
            gain = gl * gl / (hl + l2) + gr * gr / (hr + l2) - parent
            if gain > best_gain:
                best_gain, best_f, best_b = gain, f, b
    return best_gain, best_f, best_b


def grow_tree(binned, edges, rows, grad, hess, cfg: GbdtConfig, n_bins):
    """Leaf-wise growth; returns the tree and the training rows reaching each leaf."""
    feature, threshold, left, right, value = [], [], [], [], []
    leaf_rows = {}

    def new_node(r, hist):
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        G, H = hist[0, :, 0].sum(), hist[0, :, 1].sum()
        value.append(-cfg.learning_rate * G / (H + cfg.l2_reg))
        leaf_rows[node] = r
        return node

    heap = []
    counter = 0
    n_edges = np.array([len(e) for e in edges], dtype=np.int64)

    def push(node, hist):
        nonlocal counter
        gain, f, b = _best_split(hist, n_edges, float(cfg.min_samples_leaf), float(cfg.l2_reg))
        if f >= 0 and gain > 1e-12:
            heapq.heappush(heap, (-gain, counter, node, f, b, hist))
            counter += 1

    root_hist = _histogram(binned, rows, grad, hess, n_bins)
    push(new_node(rows, root_hist), root_hist)
    n_leaves = 1
    while heap and n_leaves < cfg.max_leaves:
        _, _, node, f, b, hist = heapq.heappop(heap)
        r = leaf_rows.pop(node)
        mask = binned[r, f] <= b
        r_left, r_right = r[mask], r[~mask]
        if len(r_left) <= len(r_right):
            h_left = _histogram(binned, r_left, grad, hess, n_bins)
            h_right = hist - h_left
        else:
            h_right = _histogram(binned, r_right, grad, hess, n_bins)
            h_left = hist - h_right
        feature[node] = f
        threshold[node] = float(edges[f][b])
        left[node] = new_node(r_left, h_left)
        right[node] = new_node(r_right, h_right)
        n_leaves += 1
        push(left[node], h_left)
        push(right[node], h_right)
    tree = Tree(np.array(feature, dtype=np.int64), np.array(threshold), np.array(left, dtype=np.int64),
                np.array(right, dtype=np.int64), np.array(value))
    return tree, leaf_rows


def softmax(F: np.ndarray) -> np.ndarray:
    z = F - F.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def log_loss(F: np.ndarray, y_idx: np.ndarray) -> float:
    z = F - F.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    return float(np.mean(lse - z[np.arange(len(y_idx)), y_idx]))


@dataclass
class GbdtModel:
    classes: list
    init_scores: np.ndarray
    trees: list  # rounds x classes
    config: GbdtConfig
    names: tuple = ()
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    best_round: int = 0
    standardizer: object = None

    @property
    def n_rounds(self) -> int:
        return len(self.trees)

    def raw_scores(self, X: np.ndarray, n_rounds: int | None = None) -> np.ndarray:
        F = np.tile(self.init_scores, (len(X), 1))
        for round_trees in self.trees[:n_rounds]:
            for k, tree in enumerate(round_trees):
                F[:, k] += tree.predict(X)
        return F

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return softmax(self.raw_scores(X))


def train_gbdt(X_train, y_train, X_val, y_val, cfg: GbdtConfig = GbdtConfig(),
               names: tuple = ()) -> GbdtModel:
    """Boost with early stopping on validation log-loss; the model is cut back to its best round."""
    X_train = np.asarray(X_train, dtype=float)
    classes = sorted(set(np.asarray(y_train).tolist()))
    if len(classes) < 2:
        raise ValueError("need at least two classes in the training data")
    index = {c: i for i, c in enumerate(classes)}
    y = np.array([index[c] for c in np.asarray(y_train).tolist()])
    n, K = len(y), len(classes)
    onehot = np.zeros((n, K))
    onehot[np.arange(n), y] = 1.0

    prior = np.bincount(y, minlength=K) / n
    init = np.log(prior) - np.log(prior).mean()
    edges = fit_bin_edges(X_train, cfg.max_bins)
    binned = apply_bins(X_train, edges)
    n_bins = int(max(len(e) for e in edges)) + 1
    rows = np.arange(n, dtype=np.int64)

    X_val = np.asarray(X_val, dtype=float)
    val_known = np.array([c in index for c in np.asarray(y_val).tolist()], dtype=bool)
    X_val = X_val[val_known] if len(X_val) else X_val
    y_val_idx = np.array([index[c] for c in np.asarray(y_val)[val_known].tolist()], dtype=int)
    use_val = len(y_val_idx) > 0

    F = np.tile(init, (n, 1))
    F_val = np.tile(init, (len(y_val_idx), 1))
    model = GbdtModel(classes, init, [], cfg, tuple(names))
    best_loss, best_round, since_best = np.inf, 0, 0
    for _ in range(cfg.rounds):
        p = softmax(F)
        round_trees, round_leaves = [], []
        for k in range(K):
            grad = p[:, k] - onehot[:, k]
            hess = np.maximum(p[:, k] * (1.0 - p[:, k]), 1e-16)
            tree, leaves = grow_tree(binned, edges, rows, grad, hess, cfg, n_bins)
            round_trees.append(tree)
            round_leaves.append(leaves)
        for k, tree in enumerate(round_trees):
            for node, r in round_leaves[k].items():
                F[r, k] += tree.value[node]
            if use_val:
                F_val[:, k] += tree.predict(X_val)
        model.trees.append(round_trees)
        model.train_loss.append(log_loss(F, y))
        if use_val:
            loss = log_loss(F_val, y_val_idx)
            model.val_loss.append(loss)
            if loss < best_loss - 1e-12:
                best_loss, best_round, since_best = loss, len(model.trees), 0
            else:
                since_best += 1
                if since_best >= cfg.patience:
                    break
        else:
            best_round = len(model.trees)
    model.best_round = best_round
    model.trees = model.trees[:best_round]
    return model
