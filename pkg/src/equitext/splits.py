"""Leakage-gapped temporal train/dev/test partitioning.

Training and test windows are separated by excluded gap years so that no
training document's one-year label window overlaps the test period. Dev
firms are sampled once (seeded) and held out of both train and test.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from datetime import timedelta
from pathlib import Path

from .corpus import Corpus
from .errors import UsageError, ValidationError


@dataclass(frozen=True)
class SplitConfig:
    train_years: tuple[int, int]
    test_years: tuple[int, int]
    dev_firm_fraction: float = 0.10
    horizon_days: int = 365
    seed: int = 0

    def __post_init__(self):
        t0, t1 = self.train_years
        s0, s1 = self.test_years
        if t0 > t1 or s0 > s1:
            raise UsageError("year ranges must be (first, last) with first <= last")
        if not (t1 < s0 or s1 < t0):
            raise UsageError(
                f"train years {self.train_years} overlap test years {self.test_years}"
            )
        if not 0 < self.dev_firm_fraction < 1:
            raise UsageError(f"dev_firm_fraction must be in (0, 1), got {self.dev_firm_fraction}")


@dataclass(frozen=True)
class Split:
    train: frozenset[str]
    dev: frozenset[str]
    test: frozenset[str]
    dev_firms: frozenset[str]
    seed: int


def make_temporal_split(corpus: Corpus, config: SplitConfig) -> Split:
    """Partition document ids into train/dev/test.

    Dev firms are a seeded random sample of ceil(fraction * n_firms)
    tickers, removed from both train and test; gap years between the two
    ranges are excluded entirely.
    """
    firms = corpus.tickers()
    n_dev = math.ceil(config.dev_firm_fraction * len(firms))
    if n_dev >= len(firms):
        raise ValidationError(
            f"dev sample of {n_dev} firm(s) would exhaust the {len(firms)}-firm corpus"
        )
    dev_firms = frozenset(random.Random(config.seed).sample(firms, n_dev))

    t0, t1 = config.train_years
    s0, s1 = config.test_years
    train, dev, test = set(), set(), set()
    for doc in corpus:
        year = doc.date.year
        if t0 <= year <= t1:
            (dev if doc.ticker in dev_firms else train).add(doc.id)
        elif s0 <= year <= s1 and doc.ticker not in dev_firms:
            test.add(doc.id)
    if not train:
        raise ValidationError("temporal split produced an empty train set")
    if not test:
        raise ValidationError("temporal split produced an empty test set")
    return Split(
        train=frozenset(train),
        dev=frozenset(dev),
        test=frozenset(test),
        dev_firms=dev_firms,
        seed=config.seed,
    )


def validate_no_leakage(split: Split, corpus: Corpus, config: SplitConfig) -> list[str]:
    """Ids of train/dev documents whose label window reaches the test period.

    Empty result means the split passes: for every train and dev document,
    anchor date + horizon falls strictly before the earliest test document.
    """
    if not split.test:
        raise UsageError("split has no test documents to validate against")
    earliest_test = min(corpus.get(i).date for i in split.test)
    horizon = timedelta(days=config.horizon_days)
    return sorted(
        doc_id
        for doc_id in split.train | split.dev
        if corpus.get(doc_id).date + horizon >= earliest_test
    )


def split_to_json(split: Split) -> str:
    payload = {
        "train": sorted(split.train),
        "dev": sorted(split.dev),
        "test": sorted(split.test),
        "dev_firms": sorted(split.dev_firms),
        "seed": split.seed,
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def split_from_json(text: str) -> Split:
    payload = json.loads(text)
    return Split(
        train=frozenset(payload["train"]),
        dev=frozenset(payload["dev"]),
        test=frozenset(payload["test"]),
        dev_firms=frozenset(payload["dev_firms"]),
        seed=int(payload["seed"]),
    )


def save_split(split: Split, path: str | Path) -> None:
    Path(path).write_text(split_to_json(split), encoding="utf-8")


def load_split(path: str | Path) -> Split:
    return split_from_json(Path(path).read_text(encoding="utf-8"))
