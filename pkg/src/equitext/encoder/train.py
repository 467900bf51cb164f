"""Training loop for the encoder classifier.

Adaptive-moment updates with decoupled weight decay (beta1 0.9, beta2
0.999, eps 1e-8, decay 0.01 on matrices only), global gradient-norm
clipping at 1.0, and seeded shuffling so runs are bitwise reproducible.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from ..errors import DataError, TrainingError
from ..market import PerformanceClass
from ..mathops import softmax
from .model import EncoderModel, N_CLASSES, forward_batch, loss_and_grads
from .vocab import TokenSequence, pad_batch

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
WEIGHT_DECAY = 0.01
CLIP_NORM = 1.0


class AdamW:
    """Decoupled-weight-decay Adam over a flat parameter dict."""

    def __init__(self, params: dict[str, np.ndarray], learning_rate: float):
        self.lr = learning_rate
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - ADAM_BETA1**self.t
        bc2 = 1.0 - ADAM_BETA2**self.t
        for name, p in params.items():
            g = grads[name]
            m = self.m[name]
            v = self.v[name]
            m *= ADAM_BETA1
            m += (1.0 - ADAM_BETA1) * g
            v *= ADAM_BETA2
            v += (1.0 - ADAM_BETA2) * g * g
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)
            if p.ndim >= 2:  # biases and layer-norm params are not decayed
                p -= self.lr * WEIGHT_DECAY * p


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float = CLIP_NORM) -> float:
    """Scale gradients in place so their global L2 norm is at most max_norm."""
    total = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if total > max_norm and total > 0.0:
        factor = max_norm / total
        for g in grads.values():
            g *= factor
    return total


def train_encoder(
    model: EncoderModel,
    examples: Sequence[tuple[TokenSequence, PerformanceClass]],
    epochs: int | None = None,
) -> list[tuple[int, int, float]]:
    """Train in place; returns the loss log as (epoch, step, loss) rows.

    Sequences longer than the configured maximum must already be truncated
    (the encoder raises otherwise). A non-finite batch loss aborts training.
    """
    cfg = model.config
    n_epochs = cfg.epochs if epochs is None else epochs
    if not examples:
        raise DataError("no training examples")
    labels_all = np.array([int(c) for _, c in examples])
    present = set(labels_all.tolist())
    if present != set(range(N_CLASSES)):
        missing = [PerformanceClass(k).label for k in range(N_CLASSES) if k not in present]
        raise DataError(f"class(es) absent from training data: {', '.join(missing)}")

    shuffle_rng = np.random.default_rng([cfg.seed, 0])
    dropout_rng = np.random.default_rng([cfg.seed, 1])
    optimizer = AdamW(model.params, cfg.learning_rate)
    log: list[tuple[int, int, float]] = []
    for epoch in range(1, n_epochs + 1):
        order = shuffle_rng.permutation(len(examples))
        for step, start in enumerate(range(0, len(examples), cfg.batch_size), start=1):
            batch_idx = order[start : start + cfg.batch_size]
            ids, mask = pad_batch([examples[i][0] for i in batch_idx])
            labels = labels_all[batch_idx]
            loss, grads = loss_and_grads(model, ids, mask, labels, train=True, rng=dropout_rng)
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {step}")
            clip_gradients(grads)
            optimizer.step(model.params, grads)
            log.append((epoch, step, loss))
    return log


def predict_proba(
    model: EncoderModel, sequences: Sequence[TokenSequence], batch_size: int = 64
) -> np.ndarray:
    """Eval-mode class probabilities, one row per sequence."""
    rows = []
    for start in range(0, len(sequences), batch_size):
        ids, mask = pad_batch(sequences[start : start + batch_size])
        logits, _ = forward_batch(model, ids, mask, train=False)
        rows.append(softmax(logits))
    return np.concatenate(rows, axis=0)
