"""Congestion statistics for a pair of nodes.

Sub-hourly records are averaged to hourly values before differencing,
and only hours present at both nodes are compared. The histogram uses the
signed difference (first node minus second); exceedance counts use the
absolute difference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

COVERAGE_FLAG = 0.9


class AnalyticsError(ValueError):
    pass


@dataclass(frozen=True)
class HourlyPair:
    diff: pd.Series
    dropped_hours: int


def hourly_pair(records: pd.DataFrame, node1: str, node2: str) -> HourlyPair:
    """Hourly signed price difference ``node1 - node2`` on aligned hours."""
    series = []
    for node in (node1, node2):
        sub = records.loc[records["node_id"] == node]
        if sub.empty:
            raise AnalyticsError(f"node {node} has no records; a node pair is required")
        hours = pd.to_datetime(sub["timestamp"], utc=True).dt.floor("h")
        series.append(sub.groupby(hours.values)["lmp_usd_per_mwh"].mean())
    a, b = series
    common = a.index.intersection(b.index)
    dropped = len(a.index.union(b.index)) - len(common)
    if len(common) < 1:
        raise AnalyticsError("no aligned hourly pairs")
    diff = (a.loc[common] - b.loc[common]).sort_index()
    diff.index = pd.DatetimeIndex(diff.index, tz="UTC") if diff.index.tz is None else diff.index
    return HourlyPair(diff, dropped)


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    below: int
    above: int
    aligned_hours: int
    dropped_hours: int

    @property
    def mass(self) -> int:
        return int(self.counts.sum() + self.below + self.above)


def histogram_of(values: np.ndarray, bin_edges) -> tuple[np.ndarray, int, int]:
    """Counts in ``[e_i, e_{i+1})`` with the last bin closed, plus out-of-range tallies.

    Edges may be infinite.
    """
    edges = np.asarray(bin_edges, dtype=float)
    if edges.ndim != 1 or len(edges) < 2 or np.any(np.diff(edges) <= 0):
        raise AnalyticsError("bin edges must be a strictly increasing sequence of length >= 2")
    v = np.asarray(values, dtype=float)
    idx = np.searchsorted(edges, v, side="right") - 1
    idx[v == edges[-1]] = len(edges) - 2
    below = int(np.sum(idx < 0))
    above = int(np.sum(idx >= len(edges) - 1))
    inside = idx[(idx >= 0) & (idx < len(edges) - 1)]
    counts = np.bincount(inside, minlength=len(edges) - 1)
    return counts, below, above


def price_diff_histogram(records: pd.DataFrame, node1: str, node2: str, bin_edges) -> Histogram:
    pair = hourly_pair(records, node1, node2)
    counts, below, above = histogram_of(pair.diff.to_numpy(), bin_edges)
    return Histogram(np.asarray(bin_edges, dtype=float), counts, below, above, len(pair.diff), pair.dropped_hours)


@dataclass(frozen=True)
class ExceedanceSeries:
    months: tuple[str, ...]
    counts: np.ndarray
    hours_in_month: np.ndarray
    aligned_hours: np.ndarray
    threshold: float

    @property
    def coverage(self) -> np.ndarray:
        return self.aligned_hours / self.hours_in_month

    @property
    def low_coverage(self) -> np.ndarray:
        return self.coverage < COVERAGE_FLAG

    def as_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "month": list(self.months),
            "hours_above_threshold": self.counts,
            "aligned_hours": self.aligned_hours,
            "hours_in_month": self.hours_in_month,
            "coverage": self.coverage,
            "low_coverage": self.low_coverage,
        })


def exceedance_from_diff(diff: pd.Series, threshold: float) -> ExceedanceSeries:
    idx = diff.index.tz_convert("UTC") if diff.index.tz is not None else diff.index
    naive = idx.tz_localize(None)
    periods = naive.to_period("M")
    span = pd.period_range(periods.min(), periods.max(), freq="M")
    over = (np.abs(diff.to_numpy()) > threshold).astype(int)
    frame = pd.DataFrame({"p": periods, "over": over})
    counts = frame.groupby("p")["over"].sum().reindex(span, fill_value=0)
    aligned = frame.groupby("p")["over"].size().reindex(span, fill_value=0)
    hours = np.array([p.days_in_month * 24 for p in span])
    return ExceedanceSeries(
        tuple(str(p) for p in span),
        counts.to_numpy().astype(int),
        hours,
        aligned.to_numpy().astype(int),
        float(threshold),
    )


def monthly_exceedance(records: pd.DataFrame, node1: str, node2: str, threshold: float) -> ExceedanceSeries:
    """Hours per calendar month (UTC) where the absolute difference exceeds ``threshold``."""
    return exceedance_from_diff(hourly_pair(records, node1, node2).diff, threshold)


def series_correlation(a: ExceedanceSeries, b: ExceedanceSeries) -> float:
    """Pearson correlation of two monthly count series over the same months."""
    if a.months != b.months:
        raise AnalyticsError("series cover different months")
    if len(a.months) < 2:
        raise AnalyticsError("need at least two months")
    x = a.counts.astype(float)
    y = b.counts.astype(float)
    xd, yd = x - x.mean(), y - y.mean()
    vx, vy = np.sum(xd * xd), np.sum(yd * yd)
    if vx == 0 or vy == 0:
        raise AnalyticsError("correlation undefined for a constant series")
    # one square root of the product keeps r(a, a) at exactly 1
    r = float(np.sum(xd * yd) / np.sqrt(vx * vy))
    return min(1.0, max(-1.0, r))
