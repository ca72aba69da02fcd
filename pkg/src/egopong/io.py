"""Readers and writers for the on-disk formats.

* events: CSV ``t_us,x,y,p`` or packed little-endian binary records
  ``(u64 t_us, u16 x, u16 y, i8 p)``, chosen by the ``.bin`` suffix
* gaze: CSV ``t_us,x,y``
* IMU: CSV ``t_us,wx,wy,wz``
* trajectory: CSV ``t_us,px,py,pz``
* flat key-value records: ``key = value`` lines, ``#`` comments
"""

from __future__ import annotations

import csv
import io
import warnings
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import DataError, EventWindow

EVENT_DTYPE = np.dtype([("t", "<u8"), ("x", "<u2"), ("y", "<u2"), ("p", "i1")])

EVENT_HEADER = "t_us,x,y,p"
GAZE_HEADER = "t_us,x,y"
IMU_HEADER = "t_us,wx,wy,wz"
TRAJECTORY_HEADER = "t_us,px,py,pz"


def _check_header(path: Path, expected: str) -> None:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
    if header != expected:
        raise DataError(f"{path}: expected header {expected!r}, found {header!r}")


def _load_csv(path: Path, expected_header: str, ncols: int) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise DataError(f"missing input file: {path}")
    _check_header(path, expected_header)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)  # empty tables are handled below
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.size == 0:
        return np.zeros((0, ncols))
    if data.shape[1] != ncols:
        raise DataError(f"{path}: expected {ncols} columns, found {data.shape[1]}")
    return data


def write_events(path, win: EventWindow) -> None:
    path = Path(path)
    if path.suffix == ".bin":
        rec = np.empty(len(win), dtype=EVENT_DTYPE)
        rec["t"], rec["x"], rec["y"], rec["p"] = win.t, win.x, win.y, win.p
        path.write_bytes(rec.tobytes())
        return
    arr = np.column_stack([win.t, win.x, win.y, win.p]).astype(np.int64)
    buf = io.StringIO()
    np.savetxt(buf, arr, fmt="%d", delimiter=",", header=EVENT_HEADER, comments="")
    path.write_text(buf.getvalue(), encoding="utf-8")


def read_events(path) -> EventWindow:
    path = Path(path)
    if not path.exists():
        raise DataError(f"missing input file: {path}")
    if path.suffix == ".bin":
        raw = path.read_bytes()
        if len(raw) % EVENT_DTYPE.itemsize:
            raise DataError(f"{path}: truncated binary event file")
        rec = np.frombuffer(raw, dtype=EVENT_DTYPE)
        t, x, y, p = rec["t"].astype(np.int64), rec["x"], rec["y"], rec["p"]
    else:
        data = _load_csv(path, EVENT_HEADER, 4).astype(np.int64)
        t, x, y, p = data[:, 0], data[:, 1], data[:, 2], data[:, 3]
    if len(t) == 0:
        raise DataError(f"{path}: no events")
    return EventWindow.from_arrays(t, x, y, p)


def write_gaze(path, gaze: np.ndarray) -> None:
    _write_table(path, GAZE_HEADER, gaze, ["%d", "%.4f", "%.4f"])


def read_gaze(path) -> np.ndarray:
    return _load_csv(path, GAZE_HEADER, 3)


def write_imu(path, imu: np.ndarray) -> None:
    _write_table(path, IMU_HEADER, imu, ["%d", "%.9f", "%.9f", "%.9f"])


def read_imu(path) -> np.ndarray:
    return _load_csv(path, IMU_HEADER, 4)


def write_trajectory(path, traj: np.ndarray) -> None:
    _write_table(path, TRAJECTORY_HEADER, traj, ["%d", "%.9f", "%.9f", "%.9f"])


def read_trajectory(path) -> np.ndarray:
    return _load_csv(path, TRAJECTORY_HEADER, 4)


def _write_table(path, header: str, arr: np.ndarray, fmt: Sequence[str]) -> None:
    arr = np.asarray(arr, dtype=float).reshape(-1, len(fmt))
    buf = io.StringIO()
    np.savetxt(buf, arr, fmt=list(fmt), delimiter=",", header=header, comments="")
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def write_rows(path, fieldnames: Sequence[str], rows: Iterable[Mapping]) -> None:
    """Write dict rows as CSV; floats use a fixed repr for reproducibility."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(fieldnames), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(row.get(k, "")) for k in fieldnames})


def read_rows(path) -> list[dict[str, str]]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"missing input file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        if not np.isfinite(value):
            return "nan"
        return f"{float(value):.9g}"
    return str(value)


def parse_kv(text: str, source: str = "<string>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"{source}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def read_kv(path) -> dict[str, str]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"missing input file: {path}")
    return parse_kv(path.read_text(encoding="utf-8"), str(path))


def write_kv(path, record: Mapping) -> None:
    lines = [f"{k} = {_fmt(v)}" for k, v in record.items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
