"""Word-level vocabulary and input encoding for the encoder classifier."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ..errors import DataError, UsageError
from .model import CLS_ID, PAD_ID, UNK_ID

SPECIAL_TOKENS = ("[PAD]", "[UNK]", "[CLS]")


def build_vocab(token_docs: Sequence[list[str]], vocab_cap: int) -> dict[str, int]:
    """Id map over the top ``vocab_cap`` training tokens by frequency.

    Ties break lexicographically; ids 0..2 are reserved for [PAD], [UNK],
    and [CLS]. Tokens unseen at fit time map to [UNK] when encoding.
    """
    if vocab_cap < 1:
        raise UsageError("vocab_cap must be >= 1")
    if not token_docs:
        raise DataError("cannot build a vocabulary from an empty corpus")
    counts: Counter[str] = Counter()
    for tokens in token_docs:
        counts.update(tokens)
    ranked = sorted(counts, key=lambda t: (-counts[t], t))[:vocab_cap]
    vocab = {tok: i for i, tok in enumerate(SPECIAL_TOKENS)}
    for offset, tok in enumerate(ranked):
        vocab[tok] = len(SPECIAL_TOKENS) + offset
    return vocab


@dataclass(frozen=True)
class TokenSequence:
    """Encoded ids starting with [CLS]; mask marks real (non-pad) tokens."""

    ids: tuple[int, ...]
    mask: tuple[int, ...]

    def __post_init__(self):
        if len(self.ids) != len(self.mask):
            raise UsageError("ids and mask must have equal length")
        if not self.ids or self.ids[0] != CLS_ID or self.mask[0] != 1:
            raise UsageError("sequence must start with an unmasked [CLS]")
        for earlier, later in zip(self.mask, self.mask[1:]):
            if later > earlier:
                raise UsageError("mask must be non-increasing (padding only at the end)")

    def __len__(self) -> int:
        return len(self.ids)


def encode(tokens: Iterable[str], vocab: dict[str, int], max_seq_len: int) -> TokenSequence:
    """Map tokens to ids behind a leading [CLS], truncating to max_seq_len."""
    ids = [CLS_ID] + [vocab.get(tok, UNK_ID) for tok in tokens]
    ids = ids[:max_seq_len]
    return TokenSequence(ids=tuple(ids), mask=(1,) * len(ids))


def pad_batch(sequences: Sequence[TokenSequence]) -> tuple[np.ndarray, np.ndarray]:
    """Right-pad sequences to a common length; returns (ids, mask) arrays."""
    if not sequences:
        raise UsageError("empty batch")
    width = max(len(s) for s in sequences)
    ids = np.full((len(sequences), width), PAD_ID, dtype=np.int64)
    mask = np.zeros((len(sequences), width))
    for row, seq in enumerate(sequences):
        ids[row, : len(seq)] = seq.ids
        mask[row, : len(seq)] = seq.mask
    return ids, mask
