"""Trajectory CSV export/import and atomic artifact writing.

CSV layout: header row, first column `time`, one column per recorded
variable.  Floats are written with round-trip precision so that
export -> import is value-identical.
"""

from __future__ import annotations

import csv
import json
import os
import tempfile
from typing import Union

from .engine import Trajectory


def _atomic_write(path: Union[str, os.PathLike], data: str):
    """Write via temp file + rename; readers never see partial artifacts."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def export_csv(traj: Trajectory, path: Union[str, os.PathLike]):
    if not traj.times:
        raise ValueError("trajectory is empty")
    import io as _io

    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    names = list(traj.series)
    writer.writerow(["time"] + names)
    for i, t in enumerate(traj.times):
        writer.writerow([repr(t)] + [repr(traj.series[n][i]) for n in names])
    try:
        _atomic_write(path, buf.getvalue())
    except OSError as e:
        raise OSError(f"cannot write {os.fspath(path)!r}: {e}") from e


def import_csv(path: Union[str, os.PathLike]) -> Trajectory:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[0] != "time":
            raise ValueError(f"{os.fspath(path)!r}: first column must be 'time'")
        names = header[1:]
        times: list[float] = []
        series: dict[str, list[float]] = {n: [] for n in names}
        for row in reader:
            times.append(float(row[0]))
            for n, v in zip(names, row[1:]):
                series[n].append(float(v))
    return Trajectory(times=times, series=series, events=[], metadata={})


def write_json(path: Union[str, os.PathLike], payload) -> None:
    _atomic_write(path, json.dumps(payload, indent=2) + "\n")
