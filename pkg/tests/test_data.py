import datetime as dt

import numpy as np
import pandas as pd
import pytest

from portarb.core import HorizonConfig
from portarb.data import (
    DataError,
    collect_days,
    date_range,
    day_prices,
    days_in_frame,
    from_caiso_oasis,
    node_ids,
    read_lmp_csv,
    read_lmp_csvs,
    write_lmp_csv,
)
from portarb.testing import synthetic_lmp_frame

HEADER = "timestamp,node_id,lmp_usd_per_mwh\n"


def write(tmp_path, body, name="lmp.csv"):
    p = tmp_path / name
    p.write_text(HEADER + body)
    return p


def test_roundtrip(tmp_path):
    frame = synthetic_lmp_frame("2018-03-01", 2)
    write_lmp_csv(frame, tmp_path / "x.csv")
    back = read_lmp_csv(tmp_path / "x.csv")
    assert len(back) == len(frame)
    assert node_ids(back) == ["NODE_A", "NODE_B"]
    assert str(back["timestamp"].dt.tz) == "UTC"


def test_offsets_are_converted_to_utc(tmp_path):
    p = write(tmp_path, "2018-01-01T00:00:00-08:00,N,10\n2018-01-01T09:00:00,N,11\n")
    f = read_lmp_csv(p)
    assert list(f["timestamp"].dt.hour) == [8, 9]


def test_bad_header(tmp_path):
    p = tmp_path / "h.csv"
    p.write_text("time,node,price\n")
    with pytest.raises(DataError, match=":1:"):
        read_lmp_csv(p)


def test_errors_name_line_numbers(tmp_path):
    p = write(tmp_path, "2018-01-01T00:00Z,N,10\nnot-a-date,N,1\n2018-01-01T01:00Z,N,abc\n2018-01-01T02:00Z,N\n"
                        "2018-01-01T03:00Z,N,inf\n")
    with pytest.raises(DataError) as err:
        read_lmp_csv(p)
    msg = str(err.value)
    for line in (":3:", ":4:", ":5:", ":6:"):
        assert line in msg


def test_duplicates_rejected(tmp_path):
    p = write(tmp_path, "2018-01-01T00:00Z,N,10\n2018-01-01T00:00Z,N,12\n")
    with pytest.raises(DataError, match="lines 3"):
        read_lmp_csv(p)
    a = write(tmp_path, "2018-01-01T00:00Z,N,10\n", "a.csv")
    b = write(tmp_path, "2018-01-01T00:00Z,N,10\n", "b.csv")
    with pytest.raises(DataError, match="across"):
        read_lmp_csvs([a, b])


def test_negative_prices_allowed(tmp_path):
    f = read_lmp_csv(write(tmp_path, "2018-01-01T00:00Z,N,-35.5\n"))
    assert f["lmp_usd_per_mwh"].iloc[0] == -35.5


def test_caiso_adapter():
    raw = pd.DataFrame({
        "INTERVALSTARTTIME_GMT": ["2018-01-01T08:00:00-00:00"] * 3,
        "NODE": ["X"] * 3,
        "LMP_TYPE": ["LMP", "MCC", "MCE"],
        "MW": [40.0, 5.0, 35.0],
    })
    f = from_caiso_oasis(raw)
    assert list(f.columns) == ["timestamp", "node_id", "lmp_usd_per_mwh"]
    assert f["lmp_usd_per_mwh"].tolist() == [40.0]
    raw2 = raw.rename(columns={"NODE": "NODE_ID", "MW": "VALUE"})
    assert from_caiso_oasis(raw2)["lmp_usd_per_mwh"].tolist() == [40.0]


def test_hourly_held_across_quarter_hours():
    frame = synthetic_lmp_frame("2018-05-01", 1)
    p = day_prices(frame, dt.date(2018, 5, 1), "NODE_A", "NODE_B", HorizonConfig())
    assert len(p) == 96
    a = frame[frame["node_id"] == "NODE_A"]["lmp_usd_per_mwh"].to_numpy()
    np.testing.assert_allclose(p.node_a, np.repeat(a, 4))


def test_sub_step_records_are_averaged():
    frame = synthetic_lmp_frame("2018-05-01", 1)
    p = day_prices(frame, dt.date(2018, 5, 1), "NODE_A", "NODE_B", HorizonConfig(step_hours=3.0, steps_per_day=8))
    a = frame[frame["node_id"] == "NODE_A"]["lmp_usd_per_mwh"].to_numpy()
    np.testing.assert_allclose(p.node_a, a.reshape(8, 3).mean(axis=1))


def test_local_day_boundaries():
    frame = synthetic_lmp_frame("2018-05-01", 3)
    p = day_prices(frame, dt.date(2018, 5, 2), "NODE_A", "NODE_B",
                   HorizonConfig(step_hours=1.0, steps_per_day=24), tz="America/Los_Angeles")
    a = frame[frame["node_id"] == "NODE_A"].set_index("timestamp")["lmp_usd_per_mwh"]
    assert p.node_a[0] == a[pd.Timestamp("2018-05-02T07:00Z")]


def test_missing_days(tmp_path):
    frame = synthetic_lmp_frame("2018-05-01", 3)
    frame = frame[~((frame["node_id"] == "NODE_B") & (frame["timestamp"].dt.day == 2) & (frame["timestamp"].dt.hour == 5))]
    dates = date_range(dt.date(2018, 5, 1), dt.date(2018, 5, 3))
    with pytest.raises(DataError, match="2018-05-02"):
        collect_days(frame, dates, "NODE_A", "NODE_B", HorizonConfig())
    days, missing = collect_days(frame, dates, "NODE_A", "NODE_B", HorizonConfig(), skip_missing=True)
    assert missing == [dt.date(2018, 5, 2)]
    assert [d.label for d in days] == ["2018-05-01", "2018-05-03"]
    assert days_in_frame(frame) == dates


def test_unknown_node_and_empty_range():
    frame = synthetic_lmp_frame("2018-05-01", 1)
    with pytest.raises(DataError, match="no prices"):
        day_prices(frame, dt.date(2018, 5, 1), "NODE_A", "NOPE", HorizonConfig())
    with pytest.raises(DataError):
        date_range(dt.date(2018, 5, 2), dt.date(2018, 5, 1))
