"""Simulated point cloud IO: CSV and a fixed-width binary record format.

The binary layout is little-endian, 24 bytes per return:
x, y, z, range as float32; reflectivity, class as uint8; revolution,
channel, azimuth as uint16. CSV mirrors the same nine fields with a header
row. Both formats store positions and ranges in float32, trading precision
for size; in-memory scans keep float64 throughout.
"""

from __future__ import annotations

import csv

import numpy as np

from ..errors import FormatError
from ..lidar import LidarScan

RECORD_DTYPE = np.dtype([
    ("x", "<f4"), ("y", "<f4"), ("z", "<f4"),
    ("range", "<f4"),
    ("reflectivity", "u1"), ("class_id", "u1"),
    ("revolution", "<u2"), ("channel", "<u2"), ("azimuth", "<u2"),
])

_CSV_HEADER = ("x", "y", "z", "range", "reflectivity", "class_id",
               "revolution", "channel", "azimuth")


def _to_records(scan):
    records = np.zeros(len(scan), dtype=RECORD_DTYPE)
    records["x"] = scan.points[:, 0].astype(np.float32)
    records["y"] = scan.points[:, 1].astype(np.float32)
    records["z"] = scan.points[:, 2].astype(np.float32)
    records["range"] = scan.ranges.astype(np.float32)
    records["reflectivity"] = scan.reflectivity
    records["class_id"] = scan.class_id
    records["revolution"] = scan.revolution
    records["channel"] = scan.channel
    records["azimuth"] = scan.azimuth
    return records


def _from_records(records):
    n = records.shape[0]
    points = np.stack([records["x"], records["y"], records["z"]],
                      axis=1).astype(np.float64)
    ranges = records["range"].astype(np.float64)
    return LidarScan(
        points=points,
        ranges=ranges,
        cos_incidence=np.full(n, np.nan),
        power=np.full(n, np.nan),
        reflectivity=records["reflectivity"].copy(),
        class_id=records["class_id"].copy(),
        triangle_index=np.full(n, -1, dtype=np.int64),
        revolution=records["revolution"].copy(),
        channel=records["channel"].copy(),
        azimuth=records["azimuth"].copy(),
    )


def write_point_cloud(scan, path):
    """Write a scan as packed binary records."""
    with open(path, "wb") as f:
        f.write(_to_records(scan).tobytes())


def read_point_cloud(path):
    with open(path, "rb") as f:
        data = f.read()
    if len(data) % RECORD_DTYPE.itemsize:
        raise FormatError(
            f"point cloud '{path}' is truncated "
            f"({len(data)} bytes is not a multiple of {RECORD_DTYPE.itemsize})")
    return _from_records(np.frombuffer(data, dtype=RECORD_DTYPE))


def write_point_cloud_csv(scan, path):
    records = _to_records(scan)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(_CSV_HEADER)
        for rec in records:
            writer.writerow([
                repr(float(rec["x"])), repr(float(rec["y"])), repr(float(rec["z"])),
                repr(float(rec["range"])),
                int(rec["reflectivity"]), int(rec["class_id"]),
                int(rec["revolution"]), int(rec["channel"]), int(rec["azimuth"]),
            ])


def read_point_cloud_csv(path):
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        for i, row in enumerate(reader):
            cells = [c.strip() for c in row if c.strip() != ""]
            if not cells:
                continue
            if i == 0 and cells[0] == "x":
                continue
            if len(cells) != len(_CSV_HEADER):
                raise FormatError(
                    f"point cloud CSV row {i + 1}: expected {len(_CSV_HEADER)} "
                    f"columns, got {len(cells)}")
            rows.append(cells)
    records = np.zeros(len(rows), dtype=RECORD_DTYPE)
    for i, cells in enumerate(rows):
        try:
            for j, name in enumerate(_CSV_HEADER):
                records[name][i] = float(cells[j]) if j < 4 else int(cells[j])
        except ValueError:
            raise FormatError(f"point cloud CSV row {i + 1}: non-numeric value") from None
    return _from_records(records)


def read_point_cloud_any(path):
    """Dispatch on extension: .csv reads CSV, anything else binary records."""
    if str(path).lower().endswith(".csv"):
        return read_point_cloud_csv(path)
    return read_point_cloud(path)
