"""Desk-scale transformer encoder classifier with hand-written backprop."""

from .model import (
    CLS_ID,
    PAD_ID,
    SIZE_PRESETS,
    UNK_ID,
    EncoderConfig,
    EncoderModel,
    attention,
    backward_batch,
    batch_loss,
    desk_config,
    forward,
    forward_batch,
    init_model,
    load_checkpoint,
    loss_and_grads,
    paper_config,
    save_checkpoint,
)
from .train import AdamW, clip_gradients, predict_proba, train_encoder
from .vocab import SPECIAL_TOKENS, TokenSequence, build_vocab, encode, pad_batch

__all__ = [
    "AdamW",
    "CLS_ID",
    "EncoderConfig",
    "EncoderModel",
    "PAD_ID",
    "SIZE_PRESETS",
    "SPECIAL_TOKENS",
    "TokenSequence",
    "UNK_ID",
    "attention",
    "backward_batch",
    "batch_loss",
    "build_vocab",
    "clip_gradients",
    "desk_config",
    "encode",
    "forward",
    "forward_batch",
    "init_model",
    "load_checkpoint",
    "loss_and_grads",
    "pad_batch",
    "paper_config",
    "predict_proba",
    "save_checkpoint",
    "train_encoder",
]
