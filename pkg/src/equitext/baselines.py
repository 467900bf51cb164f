"""Bag-of-words benchmark classifiers over TF-IDF features.

Two classifiers, both written out explicitly so their gradients and splits
can be audited: multinomial logistic regression trained by mini-batch
gradient descent, and gradient-boosted regression trees with second-order
(Newton) updates on the softmax loss.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import sparse

from .errors import DataError, UsageError
from .features import SparseVector
from .market import PerformanceClass
from .mathops import mean_cross_entropy, one_hot, softmax

N_CLASSES = 3


@dataclass(frozen=True)
class PredictionRecord:
    """Per-document class probabilities and the argmax class."""

    doc_id: str
    p_under: float
    p_avg: float
    p_over: float
    predicted: PerformanceClass

    def __post_init__(self):
        if abs(self.p_under + self.p_avg + self.p_over - 1.0) > 1e-9:
            raise UsageError("class probabilities must sum to 1")

    @property
    def probs(self) -> np.ndarray:
        return np.array([self.p_under, self.p_avg, self.p_over])

    @classmethod
    def from_probs(cls, doc_id: str, probs: np.ndarray) -> "PredictionRecord":
        # np.argmax picks the first maximum, i.e. the lower class on ties
        predicted = PerformanceClass(int(np.argmax(probs)))
        return cls(
            doc_id=doc_id,
            p_under=float(probs[0]),
            p_avg=float(probs[1]),
            p_over=float(probs[2]),
            predicted=predicted,
        )


def _stack(vectors: Sequence[SparseVector]) -> sparse.csr_matrix:
    if not vectors:
        raise DataError("no example vectors")
    dim = vectors[0].dim
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for vec in vectors:
        if vec.dim != dim:
            raise UsageError(f"vector dimension {vec.dim} != {dim}")
        indices.extend(vec.indices)
        data.extend(vec.values)
        indptr.append(len(indices))
    return sparse.csr_matrix(
        (np.asarray(data), np.asarray(indices, dtype=np.int64), np.asarray(indptr, dtype=np.int64)),
        shape=(len(vectors), dim),
    )


def _check_classes(labels: np.ndarray) -> None:
    present = set(int(y) for y in labels)
    missing = [PerformanceClass(k).label for k in range(N_CLASSES) if k not in present]
    if missing:
        raise DataError(f"class(es) absent from training data: {', '.join(missing)}")


# ---------------------------------------------------------------------------
# Multinomial logistic regression
# ---------------------------------------------------------------------------

@dataclass
class LogisticModel:
    weights: np.ndarray  # (3, V)
    bias: np.ndarray  # (3,)
    l2: float
    meta: dict = field(default_factory=dict)


def logistic_loss_grad(
    weights: np.ndarray,
    bias: np.ndarray,
    x: sparse.csr_matrix,
    y: np.ndarray,
    l2: float,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Softmax cross-entropy + (l2/2)*||W||^2 with its analytic gradient."""
    logits = x @ weights.T + bias
    labels = np.argmax(y, axis=1)
    loss = mean_cross_entropy(logits, labels) + 0.5 * l2 * float(np.sum(weights**2))
    residual = (softmax(logits) - y) / x.shape[0]
    grad_w = np.asarray((x.T @ residual).T) + l2 * weights
    grad_b = residual.sum(axis=0)
    return loss, grad_w, grad_b


def train_logistic(
    examples: Sequence[tuple[SparseVector, PerformanceClass]],
    learning_rate: float = 0.1,
    epochs: int = 50,
    l2: float = 1e-4,
    batch_size: int = 64,
    seed: int = 0,
) -> LogisticModel:
    """Seeded shuffled mini-batch gradient descent from a zero init."""
    x = _stack([v for v, _ in examples])
    labels = np.array([int(c) for _, c in examples])
    _check_classes(labels)
    y = one_hot(labels, N_CLASSES)
    weights = np.zeros((N_CLASSES, x.shape[1]))
    bias = np.zeros(N_CLASSES)
    rng = np.random.default_rng(seed)
    for _ in range(epochs):
        order = rng.permutation(len(examples))
        for start in range(0, len(examples), batch_size):
            batch = order[start : start + batch_size]
            _, grad_w, grad_b = logistic_loss_grad(weights, bias, x[batch], y[batch], l2)
            weights -= learning_rate * grad_w
            bias -= learning_rate * grad_b
    meta = {
        "learning_rate": learning_rate,
        "epochs": epochs,
        "l2": l2,
        "batch_size": batch_size,
        "seed": seed,
    }
    return LogisticModel(weights=weights, bias=bias, l2=l2, meta=meta)


def predict_logistic(model: LogisticModel, vector: SparseVector, doc_id: str = "") -> PredictionRecord:
    if vector.dim != model.weights.shape[1]:
        raise UsageError(f"vector dimension {vector.dim} != {model.weights.shape[1]}")
    logits = model.bias.copy()
    if vector.indices:
        logits = logits + model.weights[:, list(vector.indices)] @ np.asarray(vector.values)
    return PredictionRecord.from_probs(doc_id, softmax(logits))


def logistic_to_json(model: LogisticModel) -> str:
    payload = {
        "kind": "logistic",
        "weights": model.weights.tolist(),
        "bias": model.bias.tolist(),
        "l2": model.l2,
        "meta": model.meta,
    }
    return json.dumps(payload, sort_keys=True) + "\n"


def logistic_from_json(text: str) -> LogisticModel:
    payload = json.loads(text)
    return LogisticModel(
        weights=np.array(payload["weights"]),
        bias=np.array(payload["bias"]),
        l2=float(payload["l2"]),
        meta=payload["meta"],
    )


# ---------------------------------------------------------------------------
# Gradient-boosted trees (Newton boosting on the softmax loss)
# ---------------------------------------------------------------------------

@dataclass
class BoostedModel:
    trees: list[list[dict]]  # per round, one tree per class
    eta: float
    depth: int
    l2: float
    feature_indices: list[int]  # vocabulary columns the trees operate on
    dim: int  # full vocabulary dimension expected at predict time
    train_losses: list[float] = field(default_factory=list)  # [before r1, after r1, ...]
    meta: dict = field(default_factory=dict)


def _best_split(
    x: np.ndarray, g: np.ndarray, h: np.ndarray, idx: np.ndarray, l2: float
) -> tuple[float, int, float] | None:
    """Exact greedy scan over all features; None if no positive-gain split."""
    g_sum = g[idx].sum()
    h_sum = h[idx].sum()
    base = g_sum * g_sum / (h_sum + l2)
    best: tuple[float, int, float] | None = None
    for feat in range(x.shape[1]):
        vals = x[idx, feat]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        cuts = np.nonzero(sv[1:] > sv[:-1])[0]
        if cuts.size == 0:
            continue
        g_cum = np.cumsum(g[idx][order])
        h_cum = np.cumsum(h[idx][order])
        g_left = g_cum[cuts]
        h_left = h_cum[cuts]
        g_right = g_sum - g_left
        h_right = h_sum - h_left
        gains = 0.5 * (
            g_left**2 / (h_left + l2) + g_right**2 / (h_right + l2) - base
        )
        at = int(np.argmax(gains))  # first max: lowest threshold wins ties
        gain = float(gains[at])
        if gain > 0 and (best is None or gain > best[0]):
            threshold = float(0.5 * (sv[cuts[at]] + sv[cuts[at] + 1]))
            best = (gain, feat, threshold)
    return best


def _leaf_value(g: np.ndarray, h: np.ndarray, idx: np.ndarray, l2: float, eta: float) -> float:
    return float(-g[idx].sum() / (h[idx].sum() + l2) * eta)


def _build_tree(
    x: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    idx: np.ndarray,
    depth_left: int,
    l2: float,
    eta: float,
    at_root: bool,
) -> dict:
    if depth_left == 0 or idx.size < 2:
        return {"value": _leaf_value(g, h, idx, l2, eta)}
    split = _best_split(x, g, h, idx, l2)
    if split is None:
        # a root with no useful split contributes nothing this round
        return {"value": 0.0} if at_root else {"value": _leaf_value(g, h, idx, l2, eta)}
    _, feat, threshold = split
    left_mask = x[idx, feat] < threshold
    return {
        "feature": feat,
        "threshold": threshold,
        "left": _build_tree(x, g, h, idx[left_mask], depth_left - 1, l2, eta, False),
        "right": _build_tree(x, g, h, idx[~left_mask], depth_left - 1, l2, eta, False),
    }


def _tree_scores(tree: dict, x: np.ndarray) -> np.ndarray:
    out = np.empty(x.shape[0])

    def walk(node: dict, rows: np.ndarray) -> None:
        if "value" in node:
            out[rows] = node["value"]
            return
        going_left = x[rows, node["feature"]] < node["threshold"]
        walk(node["left"], rows[going_left])
        walk(node["right"], rows[~going_left])

    walk(tree, np.arange(x.shape[0]))
    return out


def _tree_score_one(tree: dict, x: np.ndarray) -> float:
    node = tree
    while "value" not in node:
        node = node["left"] if x[node["feature"]] < node["threshold"] else node["right"]
    return node["value"]


def _densify(vectors: Sequence[SparseVector], feature_indices: list[int]) -> np.ndarray:
    column_of = {vi: col for col, vi in enumerate(feature_indices)}
    x = np.zeros((len(vectors), len(feature_indices)))
    for row, vec in enumerate(vectors):
        for vi, value in zip(vec.indices, vec.values):
            col = column_of.get(vi)
            if col is not None:
                x[row, col] = value
    return x


def train_boosted(
    examples: Sequence[tuple[SparseVector, PerformanceClass]],
    rounds: int = 100,
    depth: int = 4,
    eta: float = 0.1,
    l2: float = 1.0,
    feature_cap: int = 1000,
    seed: int = 0,
) -> BoostedModel:
    """Newton boosting: per round and class, fit a tree on (g, h) and step.

    Features are densified to the first ``feature_cap`` vocabulary columns
    (the vocabulary is already ordered by document frequency). Training
    stops early when a round yields constant-zero trees for every class.
    """
    if not examples:
        raise DataError("no training examples")
    labels = np.array([int(c) for _, c in examples])
    _check_classes(labels)
    dim = examples[0][0].dim
    feature_indices = list(range(min(feature_cap, dim)))
    x = _densify([v for v, _ in examples], feature_indices)
    y = one_hot(labels, N_CLASSES)

    scores = np.zeros((len(examples), N_CLASSES))
    losses = [mean_cross_entropy(scores, labels)]
    all_rounds: list[list[dict]] = []
    for _ in range(rounds):
        probs = softmax(scores)
        round_trees: list[dict] = []
        for k in range(N_CLASSES):
            g = probs[:, k] - y[:, k]
            h = probs[:, k] * (1.0 - probs[:, k])
            tree = _build_tree(x, g, h, np.arange(len(examples)), depth, l2, eta, True)
            round_trees.append(tree)
            scores[:, k] += _tree_scores(tree, x)
        all_rounds.append(round_trees)
        losses.append(mean_cross_entropy(scores, labels))
        if all(t == {"value": 0.0} for t in round_trees):
            break
    meta = {
        "rounds": rounds,
        "depth": depth,
        "eta": eta,
        "l2": l2,
        "feature_cap": feature_cap,
        "seed": seed,
    }
    return BoostedModel(
        trees=all_rounds,
        eta=eta,
        depth=depth,
        l2=l2,
        feature_indices=feature_indices,
        dim=dim,
        train_losses=losses,
        meta=meta,
    )


def predict_boosted(model: BoostedModel, vector: SparseVector, doc_id: str = "") -> PredictionRecord:
    if vector.dim != model.dim:
        raise UsageError(f"vector dimension {vector.dim} != {model.dim}")
    column_of = {vi: col for col, vi in enumerate(model.feature_indices)}
    x = np.zeros(len(model.feature_indices))
    for vi, value in zip(vector.indices, vector.values):
        col = column_of.get(vi)
        if col is not None:
            x[col] = value
    scores = np.zeros(N_CLASSES)
    for round_trees in model.trees:
        for k, tree in enumerate(round_trees):
            scores[k] += _tree_score_one(tree, x)
    return PredictionRecord.from_probs(doc_id, softmax(scores))


def boosted_to_json(model: BoostedModel) -> str:
    payload = {
        "kind": "boosted",
        "trees": model.trees,
        "eta": model.eta,
        "depth": model.depth,
        "l2": model.l2,
        "feature_indices": model.feature_indices,
        "dim": model.dim,
        "train_losses": model.train_losses,
        "meta": model.meta,
    }
    return json.dumps(payload, sort_keys=True) + "\n"


def boosted_from_json(text: str) -> BoostedModel:
    payload = json.loads(text)
    return BoostedModel(
        trees=payload["trees"],
        eta=float(payload["eta"]),
        depth=int(payload["depth"]),
        l2=float(payload["l2"]),
        feature_indices=list(payload["feature_indices"]),
        dim=int(payload["dim"]),
        train_losses=list(payload["train_losses"]),
        meta=payload["meta"],
    )
