"""Tokenization and TF-IDF vectorization for the bag-of-words baselines."""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError

NUM_TOKEN = "<num>"
_WORD_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase, split on non-alphanumerics, fold digit runs to one token.

    Pure digit runs become ``<num>``; single-character tokens are dropped.
    """
    out = []
    for tok in _WORD_RE.findall(text.lower()):
        if tok.isdigit():
            out.append(NUM_TOKEN)
        elif len(tok) > 1:
            out.append(tok)
    return out


@dataclass(frozen=True)
class Vocabulary:
    """Terms in fit order with their document frequencies."""

    terms: tuple[str, ...]
    doc_freq: tuple[int, ...]

    def __post_init__(self):
        if len(self.terms) != len(self.doc_freq):
            raise DataError("terms/doc_freq length mismatch")

    def __len__(self) -> int:
        return len(self.terms)

    @property
    def index(self) -> dict[str, int]:
        return {t: i for i, t in enumerate(self.terms)}


@dataclass(frozen=True)
class TfidfModel:
    vocab: Vocabulary
    idf: tuple[float, ...]
    n_docs: int


@dataclass(frozen=True)
class SparseVector:
    """L2-normalized sparse tf-idf vector; indices strictly increasing."""

    indices: tuple[int, ...]
    values: tuple[float, ...]
    dim: int

    def __post_init__(self):
        for a, b in zip(self.indices, self.indices[1:]):
            if a >= b:
                raise DataError("sparse indices must be strictly increasing")
        if self.indices and self.indices[-1] >= self.dim:
            raise DataError("sparse index out of range")

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.dim)
        if self.indices:
            dense[list(self.indices)] = self.values
        return dense


def fit(token_docs: Sequence[list[str]], max_vocab: int = 50_000, min_df: int = 2) -> TfidfModel:
    """Fit a smoothed-idf model: idf(t) = ln((1+N)/(1+df(t))) + 1.

    The vocabulary keeps the ``max_vocab`` terms with highest document
    frequency (ties lexicographic) among those with df >= min_df.
    """
    n_docs = len(token_docs)
    if n_docs == 0:
        raise DataError("cannot fit tf-idf on an empty corpus")
    df: Counter[str] = Counter()
    for tokens in token_docs:
        df.update(set(tokens))
    kept = sorted(
        (t for t, c in df.items() if c >= min_df),
        key=lambda t: (-df[t], t),
    )[:max_vocab]
    idf = tuple(float(np.log((1 + n_docs) / (1 + df[t])) + 1.0) for t in kept)
    vocab = Vocabulary(terms=tuple(kept), doc_freq=tuple(df[t] for t in kept))
    return TfidfModel(vocab=vocab, idf=idf, n_docs=n_docs)


def transform(model: TfidfModel, tokens: Iterable[str]) -> SparseVector:
    """Raw counts times idf, L2-normalized; unknown tokens are ignored."""
    index = model.vocab.index
    counts: Counter[int] = Counter()
    for tok in tokens:
        i = index.get(tok)
        if i is not None:
            counts[i] += 1
    if not counts:
        return SparseVector(indices=(), values=(), dim=len(model.vocab))
    idx = sorted(counts)
    vals = np.array([counts[i] * model.idf[i] for i in idx])
    vals /= np.linalg.norm(vals)
    return SparseVector(indices=tuple(idx), values=tuple(float(v) for v in vals), dim=len(model.vocab))


def transform_all(model: TfidfModel, docs: Iterable[Iterable[str]]) -> list[SparseVector]:
    return [transform(model, tokens) for tokens in docs]


def model_to_json(model: TfidfModel) -> str:
    payload = {
        "terms": list(model.vocab.terms),
        "doc_freq": list(model.vocab.doc_freq),
        "idf": list(model.idf),
        "n_docs": model.n_docs,
    }
    return json.dumps(payload, sort_keys=True) + "\n"


def model_from_json(text: str) -> TfidfModel:
    payload = json.loads(text)
    vocab = Vocabulary(terms=tuple(payload["terms"]), doc_freq=tuple(payload["doc_freq"]))
    return TfidfModel(vocab=vocab, idf=tuple(payload["idf"]), n_docs=int(payload["n_docs"]))


def save_model(model: TfidfModel, path: str | Path) -> None:
    Path(path).write_text(model_to_json(model), encoding="utf-8")


def load_model(path: str | Path) -> TfidfModel:
    return model_from_json(Path(path).read_text(encoding="utf-8"))
