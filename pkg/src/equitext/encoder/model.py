"""Transformer encoder classifier with explicit forward and backward passes.

Everything is plain float64 numpy: embeddings (token + learned positional),
post-norm residual blocks of multi-head self-attention and a GELU
feed-forward, a tanh pooler on the leading classification position, and a
3-way softmax head. The backward pass is written out by hand so every
parameter gradient can be audited against finite differences.
"""

from __future__ import annotations

import json
import math
import os
import struct
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Mapping

import numpy as np
from scipy.special import erf

from ..errors import DataError, UsageError
from ..mathops import log_softmax, one_hot, softmax

PAD_ID = 0
UNK_ID = 1
CLS_ID = 2
N_CLASSES = 3
LN_EPS = 1e-12

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_CHECKPOINT_MAGIC = b"EQTENC1\n"


@dataclass(frozen=True)
class EncoderConfig:
    vocab_size: int
    d_model: int = 128
    n_heads: int = 4
    n_layers: int = 2
    d_ff: int = 256
    max_seq_len: int = 200
    dropout: float = 0.1
    learning_rate: float = 1e-5
    batch_size: int = 16
    epochs: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.vocab_size < 3:
            raise UsageError("vocab_size must cover the special tokens")
        if self.d_model % self.n_heads != 0:
            raise UsageError(f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")
        if self.max_seq_len < 2:
            raise UsageError("max_seq_len must be >= 2")
        if not 0.0 <= self.dropout < 1.0:
            raise UsageError(f"dropout must be in [0, 1), got {self.dropout}")


def paper_config(vocab_size: int, seed: int = 0, **overrides) -> EncoderConfig:
    """Reference configuration: published fine-tuning hyperparameters on
    full-size dimensions. Too large to train from scratch on a laptop; use
    :func:`desk_config` for actual CPU runs."""
    values = dict(
        vocab_size=vocab_size,
        d_model=768,
        n_heads=12,
        n_layers=12,
        d_ff=3072,
        max_seq_len=200,
        dropout=0.1,
        learning_rate=1e-5,
        batch_size=16,
        epochs=1,
        seed=seed,
    )
    values.update(overrides)
    return EncoderConfig(**values)


def desk_config(vocab_size: int, seed: int = 0, **overrides) -> EncoderConfig:
    """Small configuration that trains from scratch on a CPU in seconds.

    The published learning rate of 1e-5 presumes a pretrained init; training
    from random weights needs the larger 1e-3."""
    values = dict(
        vocab_size=vocab_size,
        d_model=128,
        n_heads=4,
        n_layers=2,
        d_ff=256,
        max_seq_len=64,
        dropout=0.1,
        learning_rate=1e-3,
        batch_size=32,
        epochs=3,
        seed=seed,
    )
    values.update(overrides)
    return EncoderConfig(**values)


# name -> (d_model, n_heads, n_layers, d_ff), used by the size sweep
SIZE_PRESETS: dict[str, tuple[int, int, int, int]] = {
    "tiny": (64, 2, 1, 128),
    "small": (128, 4, 2, 256),
    "medium": (192, 6, 3, 384),
}


class EncoderModel:
    """Configuration plus a flat name -> float64 ndarray parameter map."""

    def __init__(self, config: EncoderConfig, params: dict[str, np.ndarray]):
        self.config = config
        self.params = params


def init_model(config: EncoderConfig) -> EncoderModel:
    """Seeded init: N(0, 0.02) matrices, zero biases, identity layer norms."""
    rng = np.random.default_rng(config.seed)
    d, h, ff = config.d_model, config.n_heads, config.d_ff

    def normal(*shape):
        return rng.normal(0.0, 0.02, size=shape)

    params: dict[str, np.ndarray] = {
        "tok_emb": normal(config.vocab_size, d),
        "pos_emb": normal(config.max_seq_len, d),
    }
    for i in range(config.n_layers):
        p = f"L{i}."
        for name in ("wq", "wk", "wv", "wo"):
            params[p + name] = normal(d, d)
            params[p + name.replace("w", "b")] = np.zeros(d)
        params[p + "ln1_g"] = np.ones(d)
        params[p + "ln1_b"] = np.zeros(d)
        params[p + "ff_w1"] = normal(d, ff)
        params[p + "ff_b1"] = np.zeros(ff)
        params[p + "ff_w2"] = normal(ff, d)
        params[p + "ff_b2"] = np.zeros(d)
        params[p + "ln2_g"] = np.ones(d)
        params[p + "ln2_b"] = np.zeros(d)
    params["pool_w"] = normal(d, d)
    params["pool_b"] = np.zeros(d)
    params["cls_w"] = normal(N_CLASSES, d)
    params["cls_b"] = np.zeros(N_CLASSES)
    return EncoderModel(config, params)


# ---------------------------------------------------------------------------
# primitive forward/backward pairs
# ---------------------------------------------------------------------------

def _layer_norm_fwd(x, gain, offset):
    mu = x.mean(-1, keepdims=True)
    centered = x - mu
    var = (centered * centered).mean(-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LN_EPS)
    xhat = centered * inv
    return gain * xhat + offset, (xhat, inv, gain)


def _layer_norm_bwd(dy, cache):
    xhat, inv, gain = cache
    axes = tuple(range(dy.ndim - 1))
    d_gain = (dy * xhat).sum(axis=axes)
    d_offset = dy.sum(axis=axes)
    dxhat = dy * gain
    m1 = dxhat.mean(-1, keepdims=True)
    m2 = (dxhat * xhat).mean(-1, keepdims=True)
    dx = inv * (dxhat - m1 - xhat * m2)
    return dx, d_gain, d_offset


def _gelu_fwd(x):
    cdf = 0.5 * (1.0 + erf(x * _INV_SQRT2))
    return x * cdf, (x, cdf)


def _gelu_bwd(dy, cache):
    x, cdf = cache
    return dy * (cdf + x * _INV_SQRT_2PI * np.exp(-0.5 * x * x))


def _dropout_fwd(x, rate, train, rng):
    if not train or rate == 0.0:
        return x, None
    keep = rng.random(x.shape) >= rate
    return x * keep / (1.0 - rate), (keep, rate)


def _dropout_bwd(dy, cache):
    if cache is None:
        return dy
    keep, rate = cache
    return dy * keep / (1.0 - rate)


def _softmax_rows(scores):
    shifted = scores - scores.max(-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(-1, keepdims=True)


def attention(q: np.ndarray, k: np.ndarray, v: np.ndarray, mask=None, return_weights: bool = False):
    """Scaled dot-product attention: softmax(q k^T / sqrt(d_k) + bias) v.

    ``mask`` marks real key positions with 1; masked positions get a -inf
    bias so their weight is exactly zero. Accepts any leading batch/head
    dimensions as long as the trailing two are (positions, d_k).
    """
    q, k, v = np.asarray(q, float), np.asarray(k, float), np.asarray(v, float)
    if q.shape[-1] != k.shape[-1] or k.shape[-2] != v.shape[-2]:
        raise UsageError(f"incompatible attention shapes {q.shape}, {k.shape}, {v.shape}")
    scores = q @ np.swapaxes(k, -1, -2) / math.sqrt(q.shape[-1])
    if mask is not None:
        mask = np.asarray(mask)
        if mask.shape[-1] != k.shape[-2]:
            raise UsageError(f"mask length {mask.shape[-1]} != key count {k.shape[-2]}")
        bias = np.where(mask > 0, 0.0, -np.inf)
        while bias.ndim < scores.ndim:
            bias = np.expand_dims(bias, -2)  # broadcast over query positions
        scores = scores + bias
    weights = _softmax_rows(scores)
    out = weights @ v
    return (out, weights) if return_weights else out


def _split_heads(x, n_heads):
    b, length, d = x.shape
    return x.reshape(b, length, n_heads, d // n_heads).transpose(0, 2, 1, 3)


def _merge_heads(x):
    b, h, length, dk = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, length, h * dk)


def _linear_bwd(x, dy):
    """Gradients of y = x @ w + b over trailing feature axes."""
    d_in = x.shape[-1]
    d_out = dy.shape[-1]
    dw = x.reshape(-1, d_in).T @ dy.reshape(-1, d_out)
    db = dy.reshape(-1, d_out).sum(axis=0)
    return dw, db


# ---------------------------------------------------------------------------
# full model forward / backward
# ---------------------------------------------------------------------------

def forward_batch(
    model: EncoderModel,
    ids: np.ndarray,
    mask: np.ndarray,
    train: bool = False,
    rng: np.random.Generator | None = None,
):
    """Run a padded batch through the encoder; returns (logits, cache)."""
    cfg = model.config
    p = model.params
    ids = np.asarray(ids, dtype=np.int64)
    mask = np.asarray(mask, dtype=float)
    if ids.shape != mask.shape:
        raise UsageError(f"ids shape {ids.shape} != mask shape {mask.shape}")
    batch, length = ids.shape
    if length > cfg.max_seq_len:
        raise UsageError(f"sequence length {length} exceeds max_seq_len {cfg.max_seq_len}")
    if not np.all(ids[:, 0] == CLS_ID) or not np.all(mask[:, 0] == 1.0):
        raise UsageError("every sequence must start with an unmasked [CLS] token")
    if train and cfg.dropout > 0.0 and rng is None:
        rng = np.random.default_rng(cfg.seed)

    scale = 1.0 / math.sqrt(cfg.d_model // cfg.n_heads)
    key_bias = np.where(mask > 0, 0.0, -np.inf)[:, None, None, :]

    emb = p["tok_emb"][ids] + p["pos_emb"][:length]
    x, emb_drop = _dropout_fwd(emb, cfg.dropout, train, rng)

    layers = []
    for i in range(cfg.n_layers):
        pre = f"L{i}."
        x_in = x
        q = _split_heads(x_in @ p[pre + "wq"] + p[pre + "bq"], cfg.n_heads)
        k = _split_heads(x_in @ p[pre + "wk"] + p[pre + "bk"], cfg.n_heads)
        v = _split_heads(x_in @ p[pre + "wv"] + p[pre + "bv"], cfg.n_heads)
        scores = q @ k.transpose(0, 1, 3, 2) * scale + key_bias
        a = _softmax_rows(scores)
        ctx = _merge_heads(a @ v)
        o = ctx @ p[pre + "wo"] + p[pre + "bo"]
        o, attn_drop = _dropout_fwd(o, cfg.dropout, train, rng)
        r1 = x_in + o
        x1, ln1 = _layer_norm_fwd(r1, p[pre + "ln1_g"], p[pre + "ln1_b"])
        f1 = x1 @ p[pre + "ff_w1"] + p[pre + "ff_b1"]
        act, gelu_cache = _gelu_fwd(f1)
        f2 = act @ p[pre + "ff_w2"] + p[pre + "ff_b2"]
        f2, ffn_drop = _dropout_fwd(f2, cfg.dropout, train, rng)
        x2, ln2 = _layer_norm_fwd(x1 + f2, p[pre + "ln2_g"], p[pre + "ln2_b"])
        layers.append(
            dict(
                x_in=x_in, q=q, k=k, v=v, a=a, ctx=ctx, attn_drop=attn_drop,
                ln1=ln1, x1=x1, gelu=gelu_cache, act=act, ffn_drop=ffn_drop, ln2=ln2,
            )
        )
        x = x2

    h0 = x[:, 0, :]
    pooled = np.tanh(h0 @ p["pool_w"] + p["pool_b"])
    logits = pooled @ p["cls_w"].T + p["cls_b"]
    cache = dict(ids=ids, length=length, scale=scale, emb_drop=emb_drop,
                 layers=layers, h0=h0, pooled=pooled, last_x=x)
    return logits, cache


def backward_batch(model: EncoderModel, cache: dict, dlogits: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss w.r.t. every parameter tensor."""
    cfg = model.config
    p = model.params
    grads = {name: np.zeros_like(arr) for name, arr in p.items()}
    scale = cache["scale"]

    pooled, h0 = cache["pooled"], cache["h0"]
    grads["cls_w"] = dlogits.T @ pooled
    grads["cls_b"] = dlogits.sum(axis=0)
    dpooled = dlogits @ p["cls_w"]
    dz = dpooled * (1.0 - pooled * pooled)
    grads["pool_w"] = h0.T @ dz
    grads["pool_b"] = dz.sum(axis=0)
    dh0 = dz @ p["pool_w"].T

    dx = np.zeros_like(cache["last_x"])
    dx[:, 0, :] = dh0

    for i in reversed(range(cfg.n_layers)):
        pre = f"L{i}."
        layer = cache["layers"][i]
        dr2, grads[pre + "ln2_g"], grads[pre + "ln2_b"] = _layer_norm_bwd(dx, layer["ln2"])
        dx1 = dr2.copy()
        df2 = _dropout_bwd(dr2, layer["ffn_drop"])
        grads[pre + "ff_w2"], grads[pre + "ff_b2"] = _linear_bwd(layer["act"], df2)
        dact = df2 @ p[pre + "ff_w2"].T
        df1 = _gelu_bwd(dact, layer["gelu"])
        grads[pre + "ff_w1"], grads[pre + "ff_b1"] = _linear_bwd(layer["x1"], df1)
        dx1 += df1 @ p[pre + "ff_w1"].T

        dr1, grads[pre + "ln1_g"], grads[pre + "ln1_b"] = _layer_norm_bwd(dx1, layer["ln1"])
        dx_in = dr1.copy()
        do = _dropout_bwd(dr1, layer["attn_drop"])
        grads[pre + "wo"], grads[pre + "bo"] = _linear_bwd(layer["ctx"], do)
        dctx = _split_heads(do @ p[pre + "wo"].T, cfg.n_heads)

        a, q, k, v = layer["a"], layer["q"], layer["k"], layer["v"]
        da = dctx @ v.transpose(0, 1, 3, 2)
        dv = a.transpose(0, 1, 3, 2) @ dctx
        ds = a * (da - (da * a).sum(-1, keepdims=True))
        dq = ds @ k * scale
        dk = ds.transpose(0, 1, 3, 2) @ q * scale

        x_in = layer["x_in"]
        for name, dhead in (("q", dq), ("k", dk), ("v", dv)):
            dmerged = _merge_heads(dhead)
            grads[pre + "w" + name], grads[pre + "b" + name] = _linear_bwd(x_in, dmerged)
            dx_in += dmerged @ p[pre + "w" + name].T
        dx = dx_in

    demb = _dropout_bwd(dx, cache["emb_drop"])
    grads["pos_emb"][: cache["length"]] = demb.sum(axis=0)
    np.add.at(grads["tok_emb"], cache["ids"].reshape(-1), demb.reshape(-1, cfg.d_model))
    return grads


def forward(model: EncoderModel, sequence, mode: str = "eval", rng=None) -> np.ndarray:
    """Logits for one token sequence; ``mode`` is "eval" or "train"."""
    if mode not in ("eval", "train"):
        raise UsageError(f"unknown mode {mode!r}")
    ids = np.asarray(sequence.ids)[None, :]
    mask = np.asarray(sequence.mask, dtype=float)[None, :]
    logits, _ = forward_batch(model, ids, mask, train=(mode == "train"), rng=rng)
    return logits[0]


def loss_and_grads(
    model: EncoderModel,
    ids: np.ndarray,
    mask: np.ndarray,
    labels: np.ndarray,
    train: bool = False,
    rng: np.random.Generator | None = None,
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy of a batch plus gradients for every parameter."""
    logits, cache = forward_batch(model, ids, mask, train=train, rng=rng)
    labels = np.asarray(labels, dtype=np.int64)
    logp = log_softmax(logits, axis=-1)
    loss = float(-np.mean(logp[np.arange(len(labels)), labels]))
    dlogits = (softmax(logits) - one_hot(labels, N_CLASSES)) / len(labels)
    return loss, backward_batch(model, cache, dlogits)


def batch_loss(model: EncoderModel, ids, mask, labels) -> float:
    """Eval-mode batch loss; the finite-difference side of gradient checks."""
    logits, _ = forward_batch(model, ids, mask, train=False)
    logp = log_softmax(logits, axis=-1)
    return float(-np.mean(logp[np.arange(len(labels)), labels]))


# ---------------------------------------------------------------------------
# checkpoint container: magic, u64 header length, JSON header, raw <f8 data
# ---------------------------------------------------------------------------

def save_checkpoint(model: EncoderModel, path: str | Path) -> None:
    """Write a binary checkpoint: JSON config/tensor header, then each
    tensor's little-endian float64 bytes in header order."""
    path = Path(path)
    names = sorted(model.params)
    header = {
        "config": asdict(model.config),
        "tensors": [{"name": n, "shape": list(model.params[n].shape)} for n in names],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(_CHECKPOINT_MAGIC)
        fh.write(struct.pack("<Q", len(header_bytes)))
        fh.write(header_bytes)
        for name in names:
            fh.write(np.ascontiguousarray(model.params[name], dtype="<f8").tobytes())
    os.replace(tmp, path)


def load_checkpoint(path: str | Path) -> EncoderModel:
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(len(_CHECKPOINT_MAGIC))
        if magic != _CHECKPOINT_MAGIC:
            raise DataError(f"{path}: not an encoder checkpoint")
        (header_len,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(header_len).decode("utf-8"))
        config = EncoderConfig(**header["config"])
        params = {}
        for entry in header["tensors"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(count * 8)
            if len(buf) != count * 8:
                raise DataError(f"{path}: truncated checkpoint")
            params[entry["name"]] = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()
    return EncoderModel(config, params)
