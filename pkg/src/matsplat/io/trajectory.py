"""Trajectory CSV IO: ``timestamp, tx, ty, tz, qw, qx, qy, qz`` per row."""

from __future__ import annotations

import csv

import numpy as np

from ..errors import FormatError
from ..types import Trajectory

_COLUMNS = ("timestamp", "tx", "ty", "tz", "qw", "qx", "qy", "qz")


def load_trajectory(path):
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as f:
        for i, row in enumerate(csv.reader(f)):
            cells = [c.strip() for c in row if c.strip() != ""]
            if not cells or cells[0].startswith("#"):
                continue
            try:
                values = [float(c) for c in cells]
            except ValueError:
                if i == 0:  # header row
                    continue
                raise FormatError(f"trajectory row {i + 1}: non-numeric value") from None
            if len(values) != 8:
                raise FormatError(
                    f"trajectory row {i + 1}: expected 8 columns, got {len(values)}")
            rows.append(values)
    data = np.asarray(rows, dtype=np.float64).reshape(-1, 8)
    return Trajectory(
        timestamps=data[:, 0],
        translations=data[:, 1:4],
        quaternions=data[:, 4:8],
    )


def write_trajectory(trajectory, path):
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(_COLUMNS)
        for i in range(len(trajectory)):
            writer.writerow(
                [repr(float(trajectory.timestamps[i]))]
                + [repr(float(v)) for v in trajectory.translations[i]]
                + [repr(float(v)) for v in trajectory.quaternions[i]])
