from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from egopong.core import DataError, EventWindow
from egopong.io import (
    parse_kv,
    read_events,
    read_imu,
    read_kv,
    read_rows,
    write_events,
    write_imu,
    write_kv,
    write_rows,
)

events = st.lists(st.tuples(st.integers(0, 10**9), st.integers(0, 639), st.integers(0, 479), st.sampled_from([-1, 1])),
                  min_size=1, max_size=50)


class TestEvents:
    @settings(suppress_health_check=[HealthCheck.function_scoped_fixture])
    @given(events, st.sampled_from(["ev.csv", "ev.bin"]))
    def test_round_trip(self, tmp_path, rows, name):
        t, x, y, p = map(np.array, zip(*rows))
        win = EventWindow.from_arrays(t, x, y, p)
        path = tmp_path / name
        write_events(path, win)
        back = read_events(path)
        for a in ("t", "x", "y", "p"):
            assert getattr(back, a).tolist() == getattr(win, a).tolist()
        assert back.t_start == win.t.min()

    def test_bad_header(self, tmp_path):
        path = tmp_path / "e.csv"
        path.write_text("a,b,c,d\n1,2,3,1\n")
        with pytest.raises(DataError, match="header"):
            read_events(path)

    def test_truncated_binary(self, tmp_path):
        path = tmp_path / "e.bin"
        path.write_bytes(b"\x00" * 7)
        with pytest.raises(DataError, match="truncated"):
            read_events(path)

    def test_missing(self, tmp_path):
        with pytest.raises(DataError, match="missing"):
            read_events(tmp_path / "none.csv")

    def test_empty(self, tmp_path):
        path = tmp_path / "e.csv"
        path.write_text("t_us,x,y,p\n")
        with pytest.raises(DataError, match="no events"):
            read_events(path)


class TestTables:
    def test_imu_round_trip(self, tmp_path):
        imu = np.array([[0, 0.1, -0.2, 0.3], [1000, 0.5, 0.0, -1.25]])
        write_imu(tmp_path / "imu.csv", imu)
        assert np.allclose(read_imu(tmp_path / "imu.csv"), imu)

    def test_rows_round_trip(self, tmp_path):
        write_rows(tmp_path / "r.csv", ["a", "b", "c"], [{"a": 1.0 / 3, "b": True, "c": float("nan")}])
        assert read_rows(tmp_path / "r.csv") == [{"a": "0.333333333", "b": "1", "c": "nan"}]


class TestKeyValue:
    def test_parse(self):
        assert parse_kv("# c\na = 1\n b=x y # tail\n\n") == {"a": "1", "b": "x y"}

    def test_parse_error_names_line(self):
        with pytest.raises(DataError, match=":2:"):
            parse_kv("a = 1\nbroken\n")

    def test_round_trip(self, tmp_path):
        write_kv(tmp_path / "k.txt", {"x": 0.5, "n": 3, "s": "tri-point"})
        assert read_kv(tmp_path / "k.txt") == {"x": "0.5", "n": "3", "s": "tri-point"}
