"""Forward returns, market-relative performance, and tertile labels.

A document's label is derived from the one-year price move of its firm
relative to the equal-weighted average move of the whole sample, anchored
at the document's publication date. Anchor and horizon endpoints snap
forward to the next trading day, with a 7-calendar-day tolerance; when no
trading day is close enough the observation is unlabelable and the caller
skips it.
"""

from __future__ import annotations

import bisect
import csv
from dataclasses import dataclass
from datetime import date as Date, timedelta
from enum import IntEnum
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .corpus import Document
from .errors import DataError, UsageError

SNAP_TOLERANCE_DAYS = 7
DEFAULT_HORIZON_DAYS = 365


class PerformanceClass(IntEnum):
    """Tertile class of a one-year abnormal return; Under < Average < Over."""

    UNDER = 0
    AVERAGE = 1
    OVER = 2

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, raw: str) -> "PerformanceClass":
        try:
            return cls[raw.upper()]
        except KeyError:
            raise DataError(f"unknown performance class {raw!r}") from None


@dataclass(frozen=True)
class PriceSeries:
    """Daily adjusted closes for one ticker, strictly increasing in date."""

    ticker: str
    dates: tuple[Date, ...]
    prices: tuple[float, ...]

    def __post_init__(self):
        if len(self.dates) != len(self.prices):
            raise DataError(f"{self.ticker}: dates/prices length mismatch")
        for i, p in enumerate(self.prices):
            if not p > 0:
                raise DataError(f"{self.ticker}: non-positive price {p} at {self.dates[i]}")
        for a, b in zip(self.dates, self.dates[1:]):
            if a >= b:
                raise DataError(f"{self.ticker}: dates not strictly increasing at {b}")

    @classmethod
    def from_rows(cls, ticker: str, rows: Iterable[tuple[Date, float]]) -> "PriceSeries":
        ordered = sorted(rows, key=lambda r: r[0])
        return cls(
            ticker=ticker,
            dates=tuple(r[0] for r in ordered),
            prices=tuple(float(r[1]) for r in ordered),
        )


@dataclass(frozen=True)
class AbnormalReturn:
    """A stock's forward return minus the sample-average forward return."""

    ticker: str
    anchor_date: Date
    stock_return: float
    market_return: float
    abnormal: float

    def __post_init__(self):
        if self.abnormal != self.stock_return - self.market_return:
            raise UsageError("abnormal must equal stock_return - market_return exactly")


@dataclass(frozen=True)
class TertileBreakpoints:
    """Return thresholds splitting a population into three equal groups."""

    q33: float
    q66: float
    fitted_on: str = ""

    def __post_init__(self):
        if self.q33 > self.q66:
            raise UsageError(f"q33 {self.q33} > q66 {self.q66}")


def read_price_csv(path: str | Path) -> dict[str, PriceSeries]:
    """Read a local price file with header ``ticker,date,adj_close``.

    This is the only bundled price adapter; any mapping from ticker to
    :class:`PriceSeries` works wherever prices are consumed, so other
    sources can be plugged in by building that mapping directly.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"price file not found: {path}")
    rows: dict[str, list[tuple[Date, float]]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [f for f in ("ticker", "date", "adj_close") if f not in header]
        if missing:
            raise DataError(f"{path}: missing required column(s): {', '.join(missing)}")
        for row in reader:
            where = f"line {reader.line_num}"
            ticker = (row.get("ticker") or "").strip().upper()
            try:
                day = Date.fromisoformat((row.get("date") or "").strip())
            except ValueError:
                raise DataError(f"{where}: invalid date {row.get('date')!r}") from None
            try:
                price = float(row.get("adj_close") or "")
            except ValueError:
                raise DataError(f"{where}: invalid adj_close {row.get('adj_close')!r}") from None
            rows.setdefault(ticker, []).append((day, price))
    return {t: PriceSeries.from_rows(t, pairs) for t, pairs in sorted(rows.items())}


def _first_on_or_after(series: PriceSeries, target: Date) -> int | None:
    """Index of the first trading day >= target within tolerance, else None."""
    i = bisect.bisect_left(series.dates, target)
    if i == len(series.dates):
        return None
    if (series.dates[i] - target).days > SNAP_TOLERANCE_DAYS:
        return None
    return i


def forward_return(series: PriceSeries, anchor: Date, horizon_days: int) -> float | None:
    """P(end)/P(start) - 1 with endpoints snapped forward to trading days.

    Returns None (unlabelable) when either endpoint has no trading day
    within the snap tolerance.
    """
    i = _first_on_or_after(series, anchor)
    if i is None:
        return None
    j = _first_on_or_after(series, anchor + timedelta(days=horizon_days))
    if j is None:
        return None
    return series.prices[j] / series.prices[i] - 1.0


def _market_mean(all_series: Mapping[str, PriceSeries], anchor: Date, horizon_days: int) -> float | None:
    vals = []
    for ticker in sorted(all_series):
        r = forward_return(all_series[ticker], anchor, horizon_days)
        if r is not None:
            vals.append(r)
    if not vals:
        return None
    return float(np.mean(np.asarray(vals)))


def market_return(all_series: Mapping[str, PriceSeries], anchor: Date, horizon_days: int) -> float:
    """Equal-weighted mean forward return over all labelable sample firms."""
    mean = _market_mean(all_series, anchor, horizon_days)
    if mean is None:
        raise DataError(f"no firm labelable at {anchor}")
    return mean


def abnormal_return(
    series: PriceSeries,
    all_series: Mapping[str, PriceSeries],
    anchor: Date,
    horizon_days: int,
) -> AbnormalReturn | None:
    """Stock forward return minus the sample mean; None when unlabelable."""
    stock = forward_return(series, anchor, horizon_days)
    if stock is None:
        return None
    market = _market_mean(all_series, anchor, horizon_days)
    if market is None:
        return None
    return AbnormalReturn(
        ticker=series.ticker,
        anchor_date=anchor,
        stock_return=stock,
        market_return=market,
        abnormal=stock - market,
    )


def fit_tertiles(returns: Iterable[float], fitted_on: str = "") -> TertileBreakpoints:
    """Nearest-rank 1/3 and 2/3 percentiles of a return population."""
    vals = sorted(float(r) for r in returns)
    n = len(vals)
    if n < 3:
        raise DataError(f"need at least 3 returns to fit tertiles, got {n}")
    q33 = vals[(n + 2) // 3 - 1]
    q66 = vals[(2 * n + 2) // 3 - 1]
    return TertileBreakpoints(q33=q33, q66=q66, fitted_on=fitted_on)


def assign_label(r: float, bp: TertileBreakpoints) -> PerformanceClass:
    """Under if r <= q33, Over if r > q66, Average otherwise."""
    if r <= bp.q33:
        return PerformanceClass.UNDER
    if r > bp.q66:
        return PerformanceClass.OVER
    return PerformanceClass.AVERAGE


def trading_days(
    all_series: Mapping[str, PriceSeries], start: Date, end: Date
) -> list[Date]:
    """Sorted union of trading dates across all series within [start, end]."""
    days: set[Date] = set()
    for series in all_series.values():
        lo = bisect.bisect_left(series.dates, start)
        hi = bisect.bisect_right(series.dates, end)
        days.update(series.dates[lo:hi])
    return sorted(days)


def rolling_year_average(
    tickers: Iterable[str],
    window_start: Date,
    window_end: Date,
    all_series: Mapping[str, PriceSeries],
    horizon_days: int = DEFAULT_HORIZON_DAYS,
) -> float:
    """Mean over trading days of the group's mean one-year abnormal return.

    For every trading day in the window, each group member's forward return
    is compared against the whole-sample mean for that day; the group value
    for the day is the equal-weighted mean of those differences, and the
    result is the mean over all days with at least one labelable member.
    """
    if window_end < window_start:
        raise UsageError(f"empty window {window_start}..{window_end}")
    group = sorted(set(tickers))
    day_values = []
    for day in trading_days(all_series, window_start, window_end):
        market = _market_mean(all_series, day, horizon_days)
        if market is None:
            continue
        abnormals = []
        for ticker in group:
            series = all_series.get(ticker)
            if series is None:
                continue
            r = forward_return(series, day, horizon_days)
            if r is not None:
                abnormals.append(r - market)
        if abnormals:
            day_values.append(float(np.mean(np.asarray(abnormals))))
    if not day_values:
        raise DataError(f"no labelable trading day in {window_start}..{window_end}")
    return float(np.mean(np.asarray(day_values)))


def compute_abnormal_returns(
    documents: Iterable[Document],
    all_series: Mapping[str, PriceSeries],
    horizon_days: int = DEFAULT_HORIZON_DAYS,
) -> tuple[dict[str, AbnormalReturn], list[str]]:
    """Abnormal return per document id, plus ids skipped as unlabelable."""
    results: dict[str, AbnormalReturn] = {}
    skipped: list[str] = []
    for doc in documents:
        series = all_series.get(doc.ticker)
        ar = None
        if series is not None:
            ar = abnormal_return(series, all_series, doc.date, horizon_days)
        if ar is None:
            skipped.append(doc.id)
        else:
            results[doc.id] = ar
    return results, skipped
