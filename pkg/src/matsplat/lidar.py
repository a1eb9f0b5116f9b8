"""Spinning-LiDAR simulation against a material-bound mesh.

Beams follow a fixed scan pattern: channels at uniform elevations across the
vertical field of view, azimuth steps uniform over a full turn. The sensor
pose is sampled once per revolution by interpolating the trajectory
(linear translation, spherical-linear rotation). Returned power follows the
Lambertian monostatic model

    P = P0 * rho * cos(theta) / r^2

with rho the material's diffuse reflectance in [0, 1], and the emitted
8-bit reflectivity is that power renormalized by range and incidence so it
recovers round(255 * rho) for a noise-free return. There is no noise unless
a noise model is passed explicitly.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation, Slerp

from .bvh import GRAZING_COS, TriangleBvh
from .errors import DomainError, InputError, SchemaError
from .materials import bind_materials
from .types import UNKNOWN_CLASS


@dataclass(frozen=True)
class ScanPattern:
    """Beam layout and timing of a spinning scanner."""

    channels: int = 128
    vfov_min_deg: float = -22.5
    vfov_max_deg: float = 22.5
    horizontal_samples: int = 1024
    revolutions_per_second: float = 20.0
    max_range: float = 120.0

    def __post_init__(self):
        if self.channels < 1:
            raise SchemaError(f"channels must be >= 1, got {self.channels}")
        if self.horizontal_samples < 1:
            raise SchemaError(
                f"horizontal_samples must be >= 1, got {self.horizontal_samples}")
        if not self.vfov_min_deg < self.vfov_max_deg:
            raise SchemaError(
                f"vertical FOV must satisfy min < max, got "
                f"[{self.vfov_min_deg}, {self.vfov_max_deg}]")
        if not self.revolutions_per_second > 0.0:
            raise SchemaError("revolutions_per_second must be positive")
        if not self.max_range > 0.0:
            raise SchemaError("max_range must be positive")

    def elevations_deg(self):
        """Channel elevations; a single channel sits at the FOV midpoint."""
        if self.channels == 1:
            return np.array([0.5 * (self.vfov_min_deg + self.vfov_max_deg)])
        return np.linspace(self.vfov_min_deg, self.vfov_max_deg, self.channels)

    def azimuths_deg(self):
        return np.arange(self.horizontal_samples) * (360.0 / self.horizontal_samples)


DEFAULT_SCAN_PATTERN = ScanPattern()

_PATTERN_FIELDS = ("channels", "vfov_min_deg", "vfov_max_deg",
                   "horizontal_samples", "revolutions_per_second", "max_range")


def load_scan_pattern(path):
    with open(path, "r", encoding="utf-8") as f:
        try:
            document = json.load(f)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"scan pattern is not valid JSON: {exc}") from None
    if not isinstance(document, dict):
        raise SchemaError("scan pattern must be a JSON object")
    unknown = set(document) - set(_PATTERN_FIELDS)
    if unknown:
        raise SchemaError(f"scan pattern has unknown fields: {sorted(unknown)}")
    return ScanPattern(**document)


def write_scan_pattern(pattern, path):
    document = {name: getattr(pattern, name) for name in _PATTERN_FIELDS}
    with open(path, "w", encoding="utf-8") as f:
        json.dump(document, f, indent=2, sort_keys=True)
        f.write("\n")


@dataclass
class RayBundle:
    """World-frame rays for one revolution, ordered channel-major."""

    origins: np.ndarray
    directions: np.ndarray
    channel: np.ndarray
    azimuth: np.ndarray

    def __len__(self):
        return self.origins.shape[0]


def generate_rays(pattern, rotation, translation):
    """Build the beam directions for one revolution at a fixed pose.

    The sensor frame has +X forward (azimuth 0), azimuth increasing toward
    +Y, +Z up; elevation tilts toward +Z. ``rotation``/``translation`` map
    sensor to world. Rays are ordered channel-major: all azimuths of
    channel 0, then channel 1, and so on.
    """
    elev = np.deg2rad(pattern.elevations_deg())
    azim = np.deg2rad(pattern.azimuths_deg())
    cos_e = np.cos(elev)[:, None]
    dirs = np.empty((pattern.channels, azim.shape[0], 3))
    dirs[:, :, 0] = cos_e * np.cos(azim)[None, :]
    dirs[:, :, 1] = cos_e * np.sin(azim)[None, :]
    dirs[:, :, 2] = np.sin(elev)[:, None]
    dirs = dirs.reshape(-1, 3) @ np.asarray(rotation, dtype=np.float64).T
    n = dirs.shape[0]
    channel = np.repeat(np.arange(pattern.channels, dtype=np.uint16),
                        pattern.horizontal_samples)
    azimuth = np.tile(np.arange(pattern.horizontal_samples, dtype=np.uint16),
                      pattern.channels)
    origins = np.broadcast_to(
        np.asarray(translation, dtype=np.float64), (n, 3)).copy()
    return RayBundle(origins=origins, directions=dirs, channel=channel, azimuth=azimuth)


def lambertian_power(rho, r, cos_incidence, emitter_power=1.0):
    """Received power for a Lambertian surface at range r and incidence theta.

    Accepts scalars or arrays. Zero range is outside the model's domain.
    """
    r = np.asarray(r, dtype=np.float64)
    if np.any(r <= 0.0):
        raise DomainError("range must be positive")
    return (emitter_power * np.asarray(rho, dtype=np.float64)
            * np.asarray(cos_incidence, dtype=np.float64)) / (r * r)


def compute_power(rho_or_material, r, cos_incidence, emitter_power=1.0):
    """Power for a material record or a raw reflectance value."""
    rho = getattr(rho_or_material, "rho", rho_or_material)
    return lambertian_power(rho, r, cos_incidence, emitter_power)


def normalize_reflectivity(power, r, cos_incidence, emitter_power=1.0):
    """Undo range and incidence falloff, returning the 8-bit reflectivity.

    The algebraic inverse of ``lambertian_power`` scaled to [0, 255]:
    ``clamp(round(255 * P * r^2 / (P0 * cos)), 0, 255)``. Rounding is
    half-to-even. Zero incidence (or range) is outside the domain.
    """
    r = np.asarray(r, dtype=np.float64)
    cos_incidence = np.asarray(cos_incidence, dtype=np.float64)
    if np.any(r <= 0.0):
        raise DomainError("range must be positive")
    if np.any(cos_incidence <= 0.0):
        raise DomainError("incidence cosine must be positive")
    raw = 255.0 * ((np.asarray(power, dtype=np.float64) * (r * r))
                   / (emitter_power * cos_incidence))
    value = np.clip(np.rint(raw), 0.0, 255.0)
    if value.ndim == 0:
        return int(value)
    return value.astype(np.uint8)


@dataclass
class NoiseModel:
    """Optional additive Gaussian noise on range and power."""

    range_sigma: float = 0.0
    power_sigma: float = 0.0
    seed: int = 0


@dataclass
class LidarScan:
    """Simulated returns, ordered by (revolution, channel, azimuth)."""

    points: np.ndarray
    ranges: np.ndarray
    cos_incidence: np.ndarray
    power: np.ndarray
    reflectivity: np.ndarray
    class_id: np.ndarray
    triangle_index: np.ndarray
    revolution: np.ndarray
    channel: np.ndarray
    azimuth: np.ndarray

    def __len__(self):
        return self.ranges.shape[0]


def _empty_scan():
    return LidarScan(
        points=np.empty((0, 3)),
        ranges=np.empty(0),
        cos_incidence=np.empty(0),
        power=np.empty(0),
        reflectivity=np.empty(0, dtype=np.uint8),
        class_id=np.empty(0, dtype=np.uint8),
        triangle_index=np.empty(0, dtype=np.int64),
        revolution=np.empty(0, dtype=np.uint16),
        channel=np.empty(0, dtype=np.uint16),
        azimuth=np.empty(0, dtype=np.uint16),
    )


def interpolate_poses(trajectory, times):
    """Sensor-to-world poses at the given times (linear + slerp)."""
    times = np.asarray(times, dtype=np.float64)
    if len(trajectory) == 1:
        rot = np.repeat(
            Rotation.from_quat(trajectory.quaternions[:, [1, 2, 3, 0]]).as_matrix(),
            times.shape[0], axis=0)
        trans = np.repeat(trajectory.translations, times.shape[0], axis=0)
        return rot, trans
    key_rot = Rotation.from_quat(trajectory.quaternions[:, [1, 2, 3, 0]])
    slerp = Slerp(trajectory.timestamps, key_rot)
    rot = slerp(times).as_matrix()
    trans = np.empty((times.shape[0], 3))
    for axis in range(3):
        trans[:, axis] = np.interp(
            times, trajectory.timestamps, trajectory.translations[:, axis])
    return rot, trans


def revolution_times(trajectory, pattern):
    """One pose sample per revolution across the trajectory span.

    Raises:
        InputError: the trajectory is shorter than one revolution.
    """
    period = 1.0 / pattern.revolutions_per_second
    if trajectory.duration < period:
        raise InputError(
            f"trajectory spans {trajectory.duration:.6f} s, shorter than one "
            f"revolution ({period:.6f} s)")
    count = int(np.floor(trajectory.duration / period)) + 1
    times = trajectory.timestamps[0] + period * np.arange(count)
    # exact-multiple durations can land a hair past the last sample
    return np.minimum(times, trajectory.timestamps[-1])


def simulate_scan(mesh, table, pattern, trajectory, emitter_power=1.0,
                  threads=1, noise=None, grazing_cos=GRAZING_COS):
    """Simulate a full scan: one revolution per interpolated pose.

    Args:
        mesh: ``LabeledMesh`` (labels resolve through ``table``; 255 uses
            the fallback material).
        table: ``MaterialTable``; unmapped classes raise before tracing.
        pattern: ``ScanPattern``.
        trajectory: sensor path; must span at least one revolution.
        emitter_power: P0 in the power model.
        threads: revolutions traced concurrently; results are identical for
            any value because outputs are assembled in revolution order.
        noise: optional ``NoiseModel``; applied after tracing with its own
            seeded generator, so noisy runs are reproducible too.

    Returns:
        ``LidarScan`` with misses dropped, ordered by (revolution, channel,
        azimuth).
    """
    bound = bind_materials(mesh, table)
    times = revolution_times(trajectory, pattern)
    rotations, translations = interpolate_poses(trajectory, times)
    if len(mesh) == 0:
        return _empty_scan()
    bvh = TriangleBvh(mesh)

    def run_revolution(rev):
        rays = generate_rays(pattern, rotations[rev], translations[rev])
        tri, t, cos = bvh.trace(rays.origins, rays.directions,
                                max_range=pattern.max_range,
                                grazing_cos=grazing_cos)
        hit = tri >= 0
        tri = tri[hit]
        t = t[hit]
        cos = cos[hit]
        points = rays.origins[hit] + rays.directions[hit] * t[:, None]
        power = lambertian_power(bound.reflectivity[tri], t, cos, emitter_power)
        return {
            "points": points,
            "ranges": t,
            "cos_incidence": cos,
            "power": power,
            "class_id": bound.material_ids[tri],
            "triangle_index": tri,
            "channel": rays.channel[hit],
            "azimuth": rays.azimuth[hit],
            "directions": rays.directions[hit],
        }

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run_revolution, range(times.shape[0])))
    else:
        parts = [run_revolution(rev) for rev in range(times.shape[0])]

    def cat(key, dtype=None):
        arr = np.concatenate([p[key] for p in parts]) if parts else np.empty(0)
        return arr.astype(dtype) if dtype is not None else arr

    revolution = np.concatenate([
        np.full(p["ranges"].shape[0], rev, dtype=np.uint16)
        for rev, p in enumerate(parts)]) if parts else np.empty(0, dtype=np.uint16)

    points = cat("points")
    ranges = cat("ranges")
    cos = cat("cos_incidence")
    power = cat("power")
    directions = cat("directions")

    if noise is not None and (noise.range_sigma > 0.0 or noise.power_sigma > 0.0):
        rng = np.random.default_rng(noise.seed)
        if noise.range_sigma > 0.0:
            delta = rng.normal(0.0, noise.range_sigma, size=ranges.shape)
            delta = np.maximum(delta, -0.5 * ranges)  # keep ranges positive
            ranges = ranges + delta
            points = points + directions * delta[:, None]
        if noise.power_sigma > 0.0:
            power = np.maximum(power + rng.normal(0.0, noise.power_sigma,
                                                  size=power.shape), 0.0)

    reflectivity = np.zeros(ranges.shape[0], dtype=np.uint8)
    if ranges.shape[0]:
        reflectivity = normalize_reflectivity(power, ranges, cos, emitter_power)

    return LidarScan(
        points=points.reshape(-1, 3),
        ranges=ranges,
        cos_incidence=cos,
        power=power,
        reflectivity=reflectivity,
        class_id=cat("class_id", np.uint8),
        triangle_index=cat("triangle_index", np.int64),
        revolution=revolution,
        channel=cat("channel", np.uint16),
        azimuth=cat("azimuth", np.uint16),
    )
