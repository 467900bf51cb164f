"""Firm-level aggregation of document predictions and performance simulation.

Document probabilities are averaged per firm; firms are grouped by their
predicted class (Good/Average/Bad) plus ranked Top-K and Flop-K picks, and
each group's average one-year abnormal return is computed with the rolling
trading-day procedure from the market module. Indexed price paths over a
two-year span feed external plotting.
"""

from __future__ import annotations

import bisect
import json
from dataclasses import dataclass
from datetime import date as Date, timedelta
from typing import Mapping, Sequence

import numpy as np

from .baselines import PredictionRecord
from .errors import DataError, UsageError
from .market import (
    DEFAULT_HORIZON_DAYS,
    PerformanceClass,
    PriceSeries,
    forward_return,
    rolling_year_average,
    trading_days,
)

TIMESERIES_SPAN_DAYS = 730  # two calendar years of indexed price paths


@dataclass(frozen=True)
class FirmPrediction:
    """Mean class probabilities over a firm's test documents."""

    ticker: str
    p_under: float
    p_avg: float
    p_over: float
    predicted: PerformanceClass
    n_docs: int

    def __post_init__(self):
        if abs(self.p_under + self.p_avg + self.p_over - 1.0) > 1e-9:
            raise UsageError("firm probabilities must sum to 1")
        if self.n_docs < 1:
            raise UsageError("a firm prediction needs at least one document")


@dataclass(frozen=True)
class SimulationReport:
    group_returns: dict[str, float | None]
    members: dict[str, list[str]]
    excluded: list[str]
    series: dict[str, list[tuple[Date, float]]]
    k: int
    window_start: Date
    window_end: Date


def aggregate_firm(by_ticker: Mapping[str, Sequence[PredictionRecord]]) -> list[FirmPrediction]:
    """Mean probability vector per ticker; argmax ties go to the lower class."""
    out = []
    for ticker in sorted(by_ticker):
        records = by_ticker[ticker]
        if not records:
            raise UsageError(f"ticker {ticker!r} has no predictions")
        probs = np.mean([r.probs for r in records], axis=0)
        out.append(
            FirmPrediction(
                ticker=ticker,
                p_under=float(probs[0]),
                p_avg=float(probs[1]),
                p_over=float(probs[2]),
                predicted=PerformanceClass(int(np.argmax(probs))),
                n_docs=len(records),
            )
        )
    return out


GROUP_GOOD = "Good"
GROUP_AVERAGE = "Average"
GROUP_BAD = "Bad"
GROUP_WHOLE = "Whole Sample"

_CLASS_GROUP = {
    PerformanceClass.OVER: GROUP_GOOD,
    PerformanceClass.AVERAGE: GROUP_AVERAGE,
    PerformanceClass.UNDER: GROUP_BAD,
}


def _labelable(series: PriceSeries, days: Sequence[Date], horizon_days: int) -> bool:
    return any(forward_return(series, d, horizon_days) is not None for d in days)


def _indexed_series(
    tickers: Sequence[str],
    prices: Mapping[str, PriceSeries],
    start: Date,
    end: Date,
) -> list[tuple[Date, float]]:
    """Equal-weighted mean of price paths indexed to 1.0 at window start."""
    bases: dict[str, float] = {}
    lookups: dict[str, dict[Date, float]] = {}
    for ticker in tickers:
        series = prices.get(ticker)
        if series is None:
            continue
        i = bisect.bisect_left(series.dates, start)
        if i == len(series.dates):
            continue
        bases[ticker] = series.prices[i]
        lookups[ticker] = dict(zip(series.dates, series.prices))
    if not bases:
        return []
    grid = trading_days({t: prices[t] for t in bases}, start, end)
    out = []
    for day in grid:
        values = [
            lookups[t][day] / bases[t]
            for t in sorted(bases)
            if day in lookups[t]
        ]
        if values:
            out.append((day, float(np.mean(np.asarray(values)))))
    return out


def simulate(
    firm_predictions: Sequence[FirmPrediction],
    prices: Mapping[str, PriceSeries],
    test_window: tuple[Date, Date],
    k: int = 10,
    horizon_days: int = DEFAULT_HORIZON_DAYS,
) -> SimulationReport:
    """Average abnormal one-year return per prediction group over the window.

    Groups: the whole sample, the three predicted classes, and the K firms
    ranked highest on the over-performer (Top) and under-performer (Flop)
    probabilities. Firms with no labelable trading day are excluded and
    listed in the report.
    """
    start, end = test_window
    if end < start:
        raise UsageError(f"empty test window {start}..{end}")
    if k < 1:
        raise UsageError("k must be >= 1")

    days = trading_days(prices, start, end)
    if not days:
        raise DataError(f"no trading days in {start}..{end}")
    included: list[FirmPrediction] = []
    excluded: list[str] = []
    for fp in sorted(firm_predictions, key=lambda f: f.ticker):
        series = prices.get(fp.ticker)
        if series is None or not _labelable(series, days, horizon_days):
            excluded.append(fp.ticker)
        else:
            included.append(fp)
    if not included:
        raise DataError("every firm is unlabelable over the test window")

    top_name = f"Top-{k}"
    flop_name = f"Flop-{k}"
    members: dict[str, list[str]] = {
        GROUP_WHOLE: [fp.ticker for fp in included],
        GROUP_GOOD: [fp.ticker for fp in included if fp.predicted is PerformanceClass.OVER],
        GROUP_AVERAGE: [fp.ticker for fp in included if fp.predicted is PerformanceClass.AVERAGE],
        GROUP_BAD: [fp.ticker for fp in included if fp.predicted is PerformanceClass.UNDER],
        top_name: [
            fp.ticker
            for fp in sorted(included, key=lambda f: (-f.p_over, f.ticker))[:k]
        ],
        flop_name: [
            fp.ticker
            for fp in sorted(included, key=lambda f: (-f.p_under, f.ticker))[:k]
        ],
    }

    group_returns: dict[str, float | None] = {}
    series_out: dict[str, list[tuple[Date, float]]] = {}
    path_end = start + timedelta(days=TIMESERIES_SPAN_DAYS)
    for name, tickers in members.items():
        if tickers:
            group_returns[name] = rolling_year_average(tickers, start, end, prices, horizon_days)
            series_out[name] = _indexed_series(sorted(tickers), prices, start, path_end)
        else:
            group_returns[name] = None
            series_out[name] = []
    return SimulationReport(
        group_returns=group_returns,
        members={name: sorted(t) for name, t in members.items()},
        excluded=excluded,
        series=series_out,
        k=k,
        window_start=start,
        window_end=end,
    )


def report_to_dict(report: SimulationReport) -> dict:
    return {
        "window": [report.window_start.isoformat(), report.window_end.isoformat()],
        "k": report.k,
        "group_returns": report.group_returns,
        "members": report.members,
        "excluded": report.excluded,
        "n_excluded": len(report.excluded),
        "series": {
            name: [[day.isoformat(), value] for day, value in points]
            for name, points in report.series.items()
        },
    }


def report_to_json(report: SimulationReport) -> str:
    return json.dumps(report_to_dict(report), sort_keys=True, indent=2) + "\n"


def format_group_table(report: SimulationReport) -> str:
    """Plain-text per-group average abnormal returns, percent formatted."""
    lines = [f"{'Grouping':<16} {'Avg. abnormal 1y return':>24}"]
    for name, value in report.group_returns.items():
        shown = f"{value * 100:.2f}%" if value is not None else "n/a"
        lines.append(f"{name:<16} {shown:>24}")
    if report.excluded:
        lines.append(f"excluded (unlabelable): {', '.join(report.excluded)}")
    return "\n".join(lines) + "\n"
