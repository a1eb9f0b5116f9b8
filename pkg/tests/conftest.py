"""Shared fixtures: seeded RNGs and random scene builders."""

import zlib

import numpy as np
import pytest

from matsplat.geometry import look_at
from matsplat.types import CameraModel, GaussianCloud, LabeledMesh

_acceptance_lines = []


def record_acceptance(line):
    _acceptance_lines.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


@pytest.fixture
def rng(request):
    # one fixed stream per test, stable across runs and processes
    seed = zlib.crc32(request.node.name.encode("utf-8"))
    return np.random.default_rng(seed)


def random_quaternions(rng, n):
    q = rng.normal(size=(n, 4))
    return q / np.linalg.norm(q, axis=1, keepdims=True)


def random_cloud(rng, n, spread=4.0, scale_range=(0.05, 0.6)):
    lo, hi = scale_range
    return GaussianCloud(
        positions=rng.uniform(-spread, spread, size=(n, 3)),
        scales=rng.uniform(lo, hi, size=(n, 3)),
        rotations=random_quaternions(rng, n),
        opacities=rng.uniform(0.3, 1.0, size=n),
    )


def random_camera(rng, width=64, height=48, distance=10.0):
    eye = rng.normal(size=3)
    eye = distance * eye / np.linalg.norm(eye)
    target = rng.uniform(-1.0, 1.0, size=3)
    up = (0.0, 0.0, 1.0)
    if abs(np.dot((target - eye) / np.linalg.norm(target - eye), up)) > 0.98:
        up = (0.0, 1.0, 0.0)
    rotation, translation = look_at(eye, target, up)
    focal = rng.uniform(0.6, 1.4) * width
    return CameraModel(
        fx=focal, fy=focal,
        cx=width / 2.0 + rng.uniform(-2.0, 2.0),
        cy=height / 2.0 + rng.uniform(-2.0, 2.0),
        width=width, height=height,
        rotation=rotation, translation=translation,
    )


def random_mesh(rng, n_triangles, spread=3.0, n_classes=5, min_area=1e-4):
    """Random triangle soup with random labels; degenerate faces rejected."""
    vertices = []
    triangles = []
    while len(triangles) < n_triangles:
        corner = rng.uniform(-spread, spread, size=3)
        e1 = rng.uniform(-1.0, 1.0, size=3)
        e2 = rng.uniform(-1.0, 1.0, size=3)
        if 0.5 * np.linalg.norm(np.cross(e1, e2)) < min_area:
            continue
        base = len(vertices)
        vertices.extend([corner, corner + e1, corner + e2])
        triangles.append((base, base + 1, base + 2))
    labels = rng.integers(0, n_classes, size=n_triangles).astype(np.uint8)
    return LabeledMesh(
        vertices=np.asarray(vertices, dtype=np.float64),
        triangles=np.asarray(triangles, dtype=np.int64),
        labels=labels,
    )
