"""LMP CSV ingestion and slicing into per-day price series.

Schema: header ``timestamp,node_id,lmp_usd_per_mwh``; ISO-8601 timestamps
(UTC, or with an explicit offset); one row per node per interval.
"""

from __future__ import annotations

import csv
import datetime as dt
from pathlib import Path

import numpy as np
import pandas as pd

from .core import HorizonConfig, PriceSeries

COLUMNS = ("timestamp", "node_id", "lmp_usd_per_mwh")


class DataError(ValueError):
    """Input data violates the documented schema or does not cover a request."""


def read_lmp_csv(path: str | Path) -> pd.DataFrame:
    """Parse one LMP CSV, reporting schema problems with line numbers."""
    path = Path(path)
    rows, problems = [], []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != COLUMNS:
            raise DataError(f"{path}:1: header must be {','.join(COLUMNS)}, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                problems.append(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
                continue
            ts, node, lmp = (c.strip() for c in row)
            try:
                stamp = pd.Timestamp(ts)
            except ValueError:
                problems.append(f"{path}:{lineno}: bad timestamp {ts!r}")
                continue
            stamp = stamp.tz_localize("UTC") if stamp.tzinfo is None else stamp.tz_convert("UTC")
            try:
                price = float(lmp)
            except ValueError:
                problems.append(f"{path}:{lineno}: bad price {lmp!r}")
                continue
            if not np.isfinite(price):
                problems.append(f"{path}:{lineno}: price must be finite")
                continue
            if not node:
                problems.append(f"{path}:{lineno}: empty node_id")
                continue
            rows.append((stamp, node, price, lineno))
    if problems:
        raise DataError("\n".join(problems[:20]))
    frame = pd.DataFrame(rows, columns=[*COLUMNS, "line"])
    dup = frame.duplicated(["timestamp", "node_id"], keep="first")
    if dup.any():
        lines = ", ".join(str(v) for v in frame.loc[dup, "line"].head(10))
        raise DataError(f"{path}: duplicate (timestamp, node_id) rows at lines {lines}")
    return frame.drop(columns="line").sort_values(["node_id", "timestamp"], kind="stable").reset_index(drop=True)


def read_lmp_csvs(paths) -> pd.DataFrame:
    frames = [read_lmp_csv(p) for p in paths]
    frame = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=COLUMNS)
    if frame.duplicated(["timestamp", "node_id"]).any():
        raise DataError("duplicate (timestamp, node_id) rows across input files")
    return frame.sort_values(["node_id", "timestamp"], kind="stable").reset_index(drop=True)


def write_lmp_csv(frame: pd.DataFrame, path: str | Path):
    out = frame[list(COLUMNS)].copy()
    out["timestamp"] = pd.to_datetime(out["timestamp"], utc=True).dt.strftime("%Y-%m-%dT%H:%M:%SZ")
    out.to_csv(path, index=False, float_format="%.6f")


def from_caiso_oasis(raw: pd.DataFrame) -> pd.DataFrame:
    """Map a CAISO OASIS ``PRC_LMP`` export onto the LMP schema.

    OASIS rows carry ``INTERVALSTARTTIME_GMT``, ``NODE`` (or ``NODE_ID``),
    ``LMP_TYPE`` and the price in ``MW`` (or ``VALUE``). Only rows with
    ``LMP_TYPE == "LMP"`` are total prices; congestion, loss and energy
    components are dropped.
    """
    node_col = "NODE" if "NODE" in raw.columns else "NODE_ID"
    value_col = "MW" if "MW" in raw.columns else "VALUE"
    df = raw
    if "LMP_TYPE" in raw.columns:
        df = raw[raw["LMP_TYPE"] == "LMP"]
    out = pd.DataFrame({
        "timestamp": pd.to_datetime(df["INTERVALSTARTTIME_GMT"], utc=True),
        "node_id": df[node_col].astype(str),
        "lmp_usd_per_mwh": df[value_col].astype(float),
    })
    return out.sort_values(["node_id", "timestamp"], kind="stable").reset_index(drop=True)


def node_ids(frame: pd.DataFrame) -> list[str]:
    return sorted(frame["node_id"].unique())


def _step_prices(series: pd.Series, starts: pd.DatetimeIndex, step: pd.Timedelta) -> np.ndarray:
    """Mean of records inside each step; coarser data is held from the last record."""
    vals = np.empty(len(starts))
    idx = series.index
    for k, t in enumerate(starts):
        lo = idx.searchsorted(t, side="left")
        hi = idx.searchsorted(t + step, side="left")
        if hi > lo:
            vals[k] = series.iloc[lo:hi].mean()
            continue
        if lo == 0:
            vals[k] = np.nan
            continue
        prev = idx[lo - 1]
        # hold an hourly (or coarser) value across its own interval only
        vals[k] = series.iloc[lo - 1] if t - prev < max(pd.Timedelta(hours=1), step) else np.nan
    return vals


def day_prices(
    frame: pd.DataFrame,
    day: dt.date,
    node_a: str,
    node_b: str,
    horizon: HorizonConfig,
    tz: str = "UTC",
) -> PriceSeries:
    """Prices of both nodes for one calendar day at the horizon's resolution."""
    start = pd.Timestamp(day).tz_localize(tz).tz_convert("UTC")
    step = pd.Timedelta(hours=horizon.step_hours)
    starts = pd.DatetimeIndex([start + k * step for k in range(horizon.steps_per_day)])
    cols = []
    for node in (node_a, node_b):
        s = frame.loc[frame["node_id"] == node].set_index("timestamp")["lmp_usd_per_mwh"].sort_index()
        if s.empty:
            raise DataError(f"no prices for node {node}")
        v = _step_prices(s, starts, step)
        if np.isnan(v).any():
            missing = int(np.isnan(v).sum())
            raise DataError(f"{day}: node {node} is missing {missing} of {len(v)} steps")
        cols.append(v)
    return PriceSeries(cols[0], cols[1], label=str(day))


def date_range(first: dt.date, last: dt.date) -> list[dt.date]:
    if last < first:
        raise DataError(f"empty date range {first}..{last}")
    return [first + dt.timedelta(days=k) for k in range((last - first).days + 1)]


def days_in_frame(frame: pd.DataFrame, tz: str = "UTC") -> list[dt.date]:
    local = frame["timestamp"].dt.tz_convert(tz)
    return sorted(set(local.dt.date))


def collect_days(
    frame: pd.DataFrame,
    dates: list[dt.date],
    node_a: str,
    node_b: str,
    horizon: HorizonConfig,
    tz: str = "UTC",
    skip_missing: bool = False,
) -> tuple[list[PriceSeries], list[dt.date]]:
    """Price series for each date; missing days raise unless ``skip_missing``."""
    out, missing = [], []
    for d in dates:
        try:
            out.append(day_prices(frame, d, node_a, node_b, horizon, tz))
        except DataError:
            missing.append(d)
    if missing and not skip_missing:
        listed = ", ".join(str(d) for d in missing[:15])
        more = f" (+{len(missing) - 15} more)" if len(missing) > 15 else ""
        raise DataError(f"missing or incomplete days: {listed}{more}")
    return out, missing
