"""Document ingestion, normalization, and corpus-level filtering.

Raw text items (news articles, blog posts, annual-report paragraphs) are
normalized into :class:`Document` records keyed by ticker and publication
date. Loaders accept CSV (UTF-8, RFC-4180 quoting, header
``ticker,date,source,title,text``) and JSON Lines with the same field
names. An optional ``id`` field is honoured on input and always written on
output, so a saved corpus reloads with identical documents.
"""

from __future__ import annotations

import csv
import json
import logging
import re
from collections import Counter
from dataclasses import dataclass
from datetime import date as Date
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator

from .errors import DataError, UsageError

log = logging.getLogger(__name__)

_TICKER_RE = re.compile(r"[A-Z.]{1,6}")
_FIELDS = ("id", "ticker", "date", "source", "title", "text")
_REQUIRED = ("ticker", "date", "source", "title", "text")


class SourceKind(Enum):
    """Kind of text item a document was taken from."""

    NEWS = "news"
    BLOG = "blogs"
    REPORT = "report"

    @classmethod
    def parse(cls, raw: str) -> "SourceKind":
        for kind in cls:
            if kind.value == raw:
                return kind
        raise DataError(f"unknown source kind {raw!r} (expected news, blogs, or report)")


@dataclass(frozen=True)
class Document:
    """One text item tied to a ticker and a publication (or filing) date."""

    id: str
    ticker: str
    date: Date
    source: SourceKind
    title: str
    text: str


class Corpus:
    """Immutable ordered collection of documents with a ticker index."""

    def __init__(self, documents: Iterable[Document]):
        docs = tuple(documents)
        by_id: dict[str, Document] = {}
        index: dict[str, list[str]] = {}
        for doc in docs:
            if doc.id in by_id:
                raise DataError(f"duplicate document id {doc.id!r}")
            by_id[doc.id] = doc
            index.setdefault(doc.ticker, []).append(doc.id)
        self._docs = docs
        self._by_id = by_id
        self._index = {t: tuple(ids) for t, ids in index.items()}

    def __len__(self) -> int:
        return len(self._docs)

    def __iter__(self) -> Iterator[Document]:
        return iter(self._docs)

    @property
    def documents(self) -> tuple[Document, ...]:
        return self._docs

    def get(self, doc_id: str) -> Document:
        try:
            return self._by_id[doc_id]
        except KeyError:
            raise UsageError(f"unknown document id {doc_id!r}") from None

    def tickers(self) -> list[str]:
        return sorted(self._index)

    def ids_for(self, ticker: str) -> tuple[str, ...]:
        return self._index.get(ticker, ())


def _normalize_row(row: dict, where: str, fallback_id: str) -> Document:
    ticker = (row.get("ticker") or "").strip().upper()
    if not _TICKER_RE.fullmatch(ticker):
        raise DataError(f"{where}: invalid ticker {row.get('ticker')!r}")
    raw_date = (row.get("date") or "").strip()
    try:
        day = Date.fromisoformat(raw_date)
    except ValueError:
        raise DataError(f"{where}: invalid date {raw_date!r} (expected YYYY-MM-DD)") from None
    source = SourceKind.parse((row.get("source") or "").strip())
    text = row.get("text") or ""
    if not text.strip():
        raise DataError(f"{where}: empty text")
    doc_id = (row.get("id") or "").strip() or fallback_id
    return Document(
        id=doc_id,
        ticker=ticker,
        date=day,
        source=source,
        title=row.get("title") or "",
        text=text,
    )


def _iter_rows(path: Path, fmt: str) -> Iterator[tuple[str, dict]]:
    """Yield ("line N", raw field dict) pairs for each record in the file."""
    if fmt == "csv":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            missing = [f for f in _REQUIRED if f not in header]
            if missing:
                raise DataError(f"{path}: missing required column(s): {', '.join(missing)}")
            for row in reader:
                yield f"line {reader.line_num}", row
    elif fmt == "jsonl":
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    row = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise DataError(f"line {lineno}: invalid JSON ({exc.msg})") from None
                missing = [f for f in _REQUIRED if f not in row]
                if missing:
                    raise DataError(f"line {lineno}: missing field(s): {', '.join(missing)}")
                yield f"line {lineno}", row
    else:
        raise UsageError(f"unknown corpus format {fmt!r} (expected csv or jsonl)")


def _infer_format(path: Path, fmt: str | None) -> str:
    if fmt:
        return fmt
    suffix = path.suffix.lower().lstrip(".")
    return {"csv": "csv", "jsonl": "jsonl", "json": "jsonl"}.get(suffix, "csv")


def load_documents(path: str | Path, format: str | None = None) -> Corpus:
    """Load a document file into a Corpus.

    Exact duplicates (same ticker, date, and text) are dropped, keeping the
    first occurrence. Malformed rows raise :class:`DataError` naming the
    offending line.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"document file not found: {path}")
    fmt = _infer_format(path, format)
    docs: list[Document] = []
    seen: set[tuple] = set()
    n_dupes = 0
    for idx, (where, row) in enumerate(_iter_rows(path, fmt), start=1):
        doc = _normalize_row(row, where, fallback_id=f"doc-{idx:06d}")
        key = (doc.ticker, doc.date, doc.text)
        if key in seen:
            n_dupes += 1
            continue
        seen.add(key)
        docs.append(doc)
    if n_dupes:
        log.info("dropped %d exact duplicate document(s) from %s", n_dupes, path)
    return Corpus(docs)


def save_documents(corpus: Corpus, path: str | Path, format: str | None = None) -> None:
    """Write a corpus back out; reloading the file yields identical documents."""
    path = Path(path)
    fmt = _infer_format(path, format)
    if fmt == "csv":
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=_FIELDS)
            writer.writeheader()
            for doc in corpus:
                writer.writerow(_doc_row(doc))
    elif fmt == "jsonl":
        with open(path, "w", encoding="utf-8") as fh:
            for doc in corpus:
                fh.write(json.dumps(_doc_row(doc), ensure_ascii=False) + "\n")
    else:
        raise UsageError(f"unknown corpus format {fmt!r} (expected csv or jsonl)")


def _doc_row(doc: Document) -> dict:
    return {
        "id": doc.id,
        "ticker": doc.ticker,
        "date": doc.date.isoformat(),
        "source": doc.source.value,
        "title": doc.title,
        "text": doc.text,
    }


_PARAGRAPH_SEP = re.compile(r"\n{2,}")


def split_report_paragraphs(report_text: str, min_chars: int = 200) -> list[str]:
    """Split an annual report into paragraphs.

    Paragraphs are maximal runs of text separated by two or more consecutive
    newlines; anything shorter than ``min_chars`` after trimming (boilerplate
    headers, page numbers) is dropped. Order is preserved.
    """
    out = []
    for part in _PARAGRAPH_SEP.split(report_text):
        part = part.strip()
        if part and len(part) >= min_chars:
            out.append(part)
    return out


def select_top_covered(corpus: Corpus, n: int, min_items: int = 170) -> set[str]:
    """Pick the n tickers with the most news+blog coverage.

    Report documents do not count toward coverage (one filing per firm-year
    says nothing about attention). Ties break lexicographically. Firms below
    the ``min_items`` floor are still selected but logged as a warning.
    """
    if n < 1:
        raise UsageError("n must be >= 1")
    tickers = corpus.tickers()
    if len(tickers) < n:
        raise DataError(f"corpus has only {len(tickers)} tickers, cannot select {n}")
    counts = Counter(d.ticker for d in corpus if d.source is not SourceKind.REPORT)
    ranked = sorted(tickers, key=lambda t: (-counts.get(t, 0), t))
    chosen = ranked[:n]
    thin = sorted(t for t in chosen if counts.get(t, 0) < min_items)
    if thin:
        log.warning(
            "%d of %d selected firms have fewer than %d news/blog items: %s",
            len(thin), n, min_items, ", ".join(thin),
        )
    return set(chosen)


def filter_years(corpus: Corpus, from_year: int, to_year: int) -> Corpus:
    """Keep only documents dated within [from_year, to_year] inclusive."""
    if from_year > to_year:
        raise UsageError(f"from_year {from_year} > to_year {to_year}")
    return Corpus(d for d in corpus if from_year <= d.date.year <= to_year)


def filter_tickers(corpus: Corpus, tickers: set[str]) -> Corpus:
    """Keep only documents whose ticker is in the given set."""
    return Corpus(d for d in corpus if d.ticker in tickers)


def filter_source(corpus: Corpus, source: SourceKind) -> Corpus:
    """Keep only documents of one source kind."""
    return Corpus(d for d in corpus if d.source is source)
