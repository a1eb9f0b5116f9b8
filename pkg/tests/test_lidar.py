"""Scan patterns, ray generation, the power model, and full scans."""

import json

import numpy as np
import pytest

from matsplat.errors import DomainError, InputError, SchemaError
from matsplat.geometry import quat_to_rotmat, random_rigid_transform, rotmat_to_quat
from matsplat.lidar import (DEFAULT_SCAN_PATTERN, NoiseModel, ScanPattern,
                            compute_power, generate_rays, interpolate_poses,
                            lambertian_power, load_scan_pattern,
                            normalize_reflectivity, revolution_times,
                            simulate_scan, write_scan_pattern)
from matsplat.materials import default_material_table
from matsplat.synthetic import (ASPHALT, CONCRETE, hover_trajectory,
                                split_plane_mesh)
from matsplat.types import LabeledMesh, Trajectory


def _quick_pattern(**overrides):
    fields = dict(channels=8, vfov_min_deg=-30.0, vfov_max_deg=10.0,
                  horizontal_samples=16, revolutions_per_second=20.0,
                  max_range=50.0)
    fields.update(overrides)
    return ScanPattern(**fields)


# ---------------------------------------------------------------- patterns


def test_default_pattern_shape():
    p = DEFAULT_SCAN_PATTERN
    assert p.channels == 128
    assert p.horizontal_samples == 1024
    assert p.vfov_min_deg == -22.5 and p.vfov_max_deg == 22.5
    assert p.revolutions_per_second == 20.0
    assert p.max_range == 120.0


def test_elevations_span_fov():
    p = _quick_pattern(channels=5)
    e = p.elevations_deg()
    assert e.shape == (5,)
    assert e[0] == -30.0 and e[-1] == 10.0
    np.testing.assert_allclose(np.diff(e), 10.0)


def test_single_channel_sits_at_fov_midpoint():
    e = _quick_pattern(channels=1).elevations_deg()
    assert e.shape == (1,)
    assert e[0] == -10.0


def test_azimuths_cover_turn_without_wrap():
    a = _quick_pattern(horizontal_samples=8).azimuths_deg()
    np.testing.assert_allclose(a, np.arange(8) * 45.0)
    assert a.max() < 360.0


@pytest.mark.parametrize("bad", [
    {"channels": 0},
    {"horizontal_samples": 0},
    {"vfov_min_deg": 5.0, "vfov_max_deg": 5.0},
    {"vfov_min_deg": 10.0, "vfov_max_deg": -10.0},
    {"revolutions_per_second": 0.0},
    {"max_range": 0.0},
])
def test_pattern_rejects_bad_fields(bad):
    with pytest.raises(SchemaError):
        _quick_pattern(**bad)


def test_pattern_json_round_trip(tmp_path):
    pattern = _quick_pattern(channels=3, max_range=77.5)
    path = tmp_path / "pattern.json"
    write_scan_pattern(pattern, path)
    assert load_scan_pattern(path) == pattern


def test_pattern_unknown_field_rejected(tmp_path):
    path = tmp_path / "pattern.json"
    path.write_text(json.dumps({"channels": 4, "spin_rate": 10.0}))
    with pytest.raises(SchemaError, match="spin_rate"):
        load_scan_pattern(path)


def test_pattern_non_object_rejected(tmp_path):
    path = tmp_path / "pattern.json"
    path.write_text("[1, 2, 3]")
    with pytest.raises(SchemaError):
        load_scan_pattern(path)


def test_pattern_invalid_json_rejected(tmp_path):
    path = tmp_path / "pattern.json"
    path.write_text("{channels:")
    with pytest.raises(SchemaError):
        load_scan_pattern(path)


# -------------------------------------------------------------------- rays


def test_ray_count_and_ordering():
    p = _quick_pattern()
    rays = generate_rays(p, np.eye(3), np.zeros(3))
    assert len(rays) == p.channels * p.horizontal_samples
    np.testing.assert_array_equal(
        rays.channel, np.repeat(np.arange(p.channels), p.horizontal_samples))
    np.testing.assert_array_equal(
        rays.azimuth, np.tile(np.arange(p.horizontal_samples), p.channels))


def test_rays_at_identity_pose():
    p = _quick_pattern(channels=3, vfov_min_deg=-10.0, vfov_max_deg=10.0,
                       horizontal_samples=4)
    rays = generate_rays(p, np.eye(3), np.zeros(3))
    # middle channel, azimuth 0: straight down +X
    mid = 1 * 4 + 0
    np.testing.assert_allclose(rays.directions[mid], [1.0, 0.0, 0.0], atol=1e-15)
    # azimuth advances counterclockwise toward +Y
    np.testing.assert_allclose(rays.directions[mid + 1], [0.0, 1.0, 0.0], atol=1e-15)
    # elevation tilts toward +Z
    top = 2 * 4 + 0
    s, c = np.sin(np.deg2rad(10.0)), np.cos(np.deg2rad(10.0))
    np.testing.assert_allclose(rays.directions[top], [c, 0.0, s], atol=1e-15)
    np.testing.assert_allclose(rays.origins, 0.0)


def test_rays_are_unit_under_random_pose(rng):
    rotation, translation = random_rigid_transform(rng)
    rays = generate_rays(_quick_pattern(), rotation, translation)
    norms = np.linalg.norm(rays.directions, axis=1)
    np.testing.assert_allclose(norms, 1.0, atol=1e-12)
    np.testing.assert_array_equal(rays.origins,
                                  np.broadcast_to(translation, (len(rays), 3)))


def test_rays_rotate_with_pose(rng):
    p = _quick_pattern()
    rotation, _ = random_rigid_transform(rng)
    base = generate_rays(p, np.eye(3), np.zeros(3))
    moved = generate_rays(p, rotation, np.zeros(3))
    np.testing.assert_allclose(moved.directions, base.directions @ rotation.T,
                               atol=1e-14)


# ------------------------------------------------------------- power model


def test_power_unit_case():
    assert lambertian_power(1.0, 1.0, 1.0) == 1.0


def test_power_inverse_square_is_exact():
    rho, cos = 0.37, 0.81
    for r in (0.7, 3.7, 55.0):
        assert lambertian_power(rho, 2.0 * r, cos) == lambertian_power(rho, r, cos) / 4.0


def test_power_cosine_scaling_is_exact():
    rho, r = 0.52, 7.3
    assert lambertian_power(rho, r, 0.5) == lambertian_power(rho, r, 1.0) * 0.5


def test_power_emitter_scaling_is_exact():
    assert (lambertian_power(0.4, 5.0, 0.9, emitter_power=2.0)
            == 2.0 * lambertian_power(0.4, 5.0, 0.9))


def test_power_rejects_nonpositive_range():
    with pytest.raises(DomainError):
        lambertian_power(0.5, 0.0, 1.0)
    with pytest.raises(DomainError):
        lambertian_power(0.5, np.array([1.0, -2.0]), 1.0)


def test_compute_power_accepts_material_or_scalar():
    table = default_material_table()
    m = table.resolve(CONCRETE)
    assert compute_power(m, 4.0, 0.8) == lambertian_power(m.rho, 4.0, 0.8)
    assert compute_power(0.25, 4.0, 0.8) == lambertian_power(0.25, 4.0, 0.8)


def test_reflectivity_recovers_table_value():
    power = compute_power(0.4, 7.3, np.cos(np.deg2rad(41.0)))
    got = normalize_reflectivity(power, 7.3, np.cos(np.deg2rad(41.0)))
    assert got == 102  # round(255 * 0.4)
    assert isinstance(got, int)


def test_reflectivity_round_trip_sweep(rng):
    n = 2000
    rho = rng.uniform(0.0, 1.0, size=n)
    r = rng.uniform(0.5, 120.0, size=n)
    cos = rng.uniform(1e-3, 1.0, size=n)
    p0 = 2.5
    power = lambertian_power(rho, r, cos, emitter_power=p0)
    got = normalize_reflectivity(power, r, cos, emitter_power=p0)
    assert got.dtype == np.uint8
    np.testing.assert_array_equal(got, np.rint(255.0 * rho).astype(np.uint8))


def test_reflectivity_clamps_to_byte():
    assert normalize_reflectivity(10.0, 10.0, 1.0) == 255
    assert normalize_reflectivity(0.0, 10.0, 1.0) == 0


def test_reflectivity_rounds_half_to_even():
    # raw = 255 * P * r^2 / cos with P chosen to land exactly on x.5
    assert normalize_reflectivity(2.5 / 255.0, 1.0, 1.0) == 2
    assert normalize_reflectivity(3.5 / 255.0, 1.0, 1.0) == 4


def test_reflectivity_rejects_bad_domain():
    with pytest.raises(DomainError):
        normalize_reflectivity(1.0, 0.0, 1.0)
    with pytest.raises(DomainError):
        normalize_reflectivity(1.0, 1.0, 0.0)


# ------------------------------------------------------- trajectory sampling


def _turn_trajectory():
    """Yaw from 0 to 90 degrees over one second, drifting +2 m in x."""
    q0 = rotmat_to_quat(np.eye(3))
    q1 = rotmat_to_quat(np.array([[0.0, -1.0, 0.0],
                                  [1.0, 0.0, 0.0],
                                  [0.0, 0.0, 1.0]]))
    return Trajectory(
        timestamps=np.array([0.0, 1.0]),
        translations=np.array([[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]]),
        quaternions=np.stack([q0, q1]),
    )


def test_interpolate_endpoints_are_exact():
    traj = _turn_trajectory()
    rot, trans = interpolate_poses(traj, [0.0, 1.0])
    np.testing.assert_allclose(rot[0], np.eye(3), atol=1e-12)
    np.testing.assert_allclose(rot[1], quat_to_rotmat(traj.quaternions[1]), atol=1e-12)
    np.testing.assert_allclose(trans, [[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]], atol=0.0)


def test_interpolate_midpoint_halves_the_turn():
    rot, trans = interpolate_poses(_turn_trajectory(), [0.5])
    s, c = np.sin(np.pi / 4.0), np.cos(np.pi / 4.0)
    want = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    np.testing.assert_allclose(rot[0], want, atol=1e-12)
    np.testing.assert_allclose(trans[0], [1.0, 0.0, 0.0], atol=1e-15)


def test_interpolate_single_pose_repeats():
    traj = hover_trajectory(position=(1.0, 2.0, 3.0))
    single = Trajectory(timestamps=traj.timestamps[:1],
                        translations=traj.translations[:1],
                        quaternions=traj.quaternions[:1])
    rot, trans = interpolate_poses(single, [0.0, 5.0, 9.0])
    assert rot.shape == (3, 3, 3)
    np.testing.assert_allclose(rot, np.broadcast_to(np.eye(3), (3, 3, 3)),
                               atol=1e-12)
    np.testing.assert_allclose(trans, [[1.0, 2.0, 3.0]] * 3)


def test_revolution_times_exact_multiple():
    # 16 Hz gives a binary-exact period, so three revolutions fit exactly
    pattern = _quick_pattern(revolutions_per_second=16.0)
    traj = hover_trajectory(duration=0.1875)
    times = revolution_times(traj, pattern)
    np.testing.assert_array_equal(times, [0.0, 0.0625, 0.125, 0.1875])
    assert times[-1] <= traj.timestamps[-1]


def test_revolution_times_partial_tail_dropped():
    traj = hover_trajectory(duration=0.12)
    times = revolution_times(traj, DEFAULT_SCAN_PATTERN)
    np.testing.assert_allclose(times, [0.0, 0.05, 0.10])


def test_revolution_times_too_short():
    traj = hover_trajectory(duration=0.04)
    with pytest.raises(InputError, match="revolution"):
        revolution_times(traj, DEFAULT_SCAN_PATTERN)


# -------------------------------------------------------------- full scans


def _scan_fixture(threads=1, noise=None, pattern=None):
    mesh = split_plane_mesh()
    table = default_material_table()
    trajectory = hover_trajectory(position=(0.5, 0.25, 3.0))
    pattern = pattern or ScanPattern(channels=32, horizontal_samples=64)
    scan = simulate_scan(mesh, table, pattern, trajectory,
                         threads=threads, noise=noise)
    return mesh, table, scan


def test_scan_hits_split_plane():
    mesh, table, scan = _scan_fixture()
    assert len(scan) > 0
    # every return lies on the plane, at the traced range
    np.testing.assert_allclose(scan.points[:, 2], 0.0, atol=1e-9)
    np.testing.assert_allclose(scan.ranges * scan.cos_incidence, 3.0, atol=1e-9)
    assert set(np.unique(scan.class_id)) == {ASPHALT, CONCRETE}
    # reflectivity is exactly the table byte for each half
    rho = {ASPHALT: table.resolve(ASPHALT).diffuse_reflectivity_255,
           CONCRETE: table.resolve(CONCRETE).diffuse_reflectivity_255}
    for cls, byte in rho.items():
        np.testing.assert_array_equal(scan.reflectivity[scan.class_id == cls], byte)
    # the x < 0 half carries the left class
    off_axis = np.abs(scan.points[:, 0]) > 1e-9
    left = scan.points[off_axis, 0] < 0.0
    np.testing.assert_array_equal(scan.class_id[off_axis][left], ASPHALT)
    np.testing.assert_array_equal(scan.class_id[off_axis][~left], CONCRETE)


def test_scan_power_matches_model():
    mesh, table, scan = _scan_fixture()
    lut = np.full(256, table.fallback.rho)
    for cid, mat in table.materials.items():
        lut[cid] = mat.rho
    want = lambertian_power(lut[scan.class_id], scan.ranges, scan.cos_incidence)
    np.testing.assert_array_equal(scan.power, want)


def test_scan_order_is_revolution_channel_azimuth():
    traj = Trajectory(
        timestamps=np.array([0.0, 0.1]),
        translations=np.array([[0.5, 0.25, 3.0], [1.5, 0.25, 3.0]]),
        quaternions=np.stack([rotmat_to_quat(np.eye(3))] * 2),
    )
    scan = simulate_scan(split_plane_mesh(), default_material_table(),
                         ScanPattern(channels=16, horizontal_samples=32), traj)
    assert set(np.unique(scan.revolution)) == {0, 1, 2}
    key = np.lexsort((scan.azimuth, scan.channel, scan.revolution))
    np.testing.assert_array_equal(key, np.arange(len(scan)))


def test_scan_threads_are_equivalent():
    _, _, one = _scan_fixture(threads=1)
    _, _, four = _scan_fixture(threads=4)
    for name in ("points", "ranges", "cos_incidence", "power", "reflectivity",
                 "class_id", "triangle_index", "revolution", "channel", "azimuth"):
        assert getattr(one, name).tobytes() == getattr(four, name).tobytes()


def test_scan_is_deterministic():
    _, _, a = _scan_fixture()
    _, _, b = _scan_fixture()
    assert a.points.tobytes() == b.points.tobytes()
    assert a.reflectivity.tobytes() == b.reflectivity.tobytes()


def test_scan_noise_is_seeded_and_reproducible():
    noise = NoiseModel(range_sigma=0.05, power_sigma=0.0, seed=11)
    _, _, clean = _scan_fixture()
    _, _, noisy1 = _scan_fixture(noise=noise)
    _, _, noisy2 = _scan_fixture(noise=noise)
    assert noisy1.ranges.tobytes() == noisy2.ranges.tobytes()
    assert noisy1.ranges.tobytes() != clean.ranges.tobytes()
    # points move along the ray with the perturbed range
    assert not np.allclose(noisy1.points, clean.points)
    _, _, other_seed = _scan_fixture(noise=NoiseModel(range_sigma=0.05, seed=12))
    assert other_seed.ranges.tobytes() != noisy1.ranges.tobytes()


def test_scan_zero_sigma_noise_is_noise_free():
    _, _, clean = _scan_fixture()
    _, _, zeroed = _scan_fixture(noise=NoiseModel(range_sigma=0.0, power_sigma=0.0))
    assert clean.ranges.tobytes() == zeroed.ranges.tobytes()
    assert clean.power.tobytes() == zeroed.power.tobytes()


def test_scan_power_noise_perturbs_reflectivity():
    noise = NoiseModel(power_sigma=1e-4, seed=3)
    _, _, clean = _scan_fixture()
    _, _, noisy = _scan_fixture(noise=noise)
    assert noisy.reflectivity.tobytes() != clean.reflectivity.tobytes()
    assert noisy.ranges.tobytes() == clean.ranges.tobytes()


def test_scan_empty_mesh_yields_empty_scan():
    mesh = LabeledMesh(vertices=np.empty((0, 3)),
                       triangles=np.empty((0, 3), dtype=np.int64),
                       labels=np.empty(0, dtype=np.uint8))
    scan = simulate_scan(mesh, default_material_table(),
                         DEFAULT_SCAN_PATTERN, hover_trajectory())
    assert len(scan) == 0
    assert scan.points.shape == (0, 3)


def test_scan_short_trajectory_rejected():
    with pytest.raises(InputError):
        simulate_scan(split_plane_mesh(), default_material_table(),
                      DEFAULT_SCAN_PATTERN, hover_trajectory(duration=0.01))


def test_scan_is_rigid_invariant(rng):
    mesh = split_plane_mesh()
    table = default_material_table()
    pattern = ScanPattern(channels=16, horizontal_samples=32)
    trajectory = hover_trajectory(position=(0.5, 0.25, 3.0))
    base = simulate_scan(mesh, table, pattern, trajectory)

    rotation, translation = random_rigid_transform(rng)
    moved_mesh = LabeledMesh(vertices=mesh.vertices @ rotation.T + translation,
                             triangles=mesh.triangles, labels=mesh.labels)
    moved_traj = Trajectory(
        timestamps=trajectory.timestamps,
        translations=trajectory.translations @ rotation.T + translation,
        quaternions=np.stack([
            rotmat_to_quat(rotation @ quat_to_rotmat(q))
            for q in trajectory.quaternions]),
    )
    moved = simulate_scan(moved_mesh, table, pattern, moved_traj)

    assert len(moved) == len(base)
    np.testing.assert_array_equal(moved.triangle_index, base.triangle_index)
    np.testing.assert_array_equal(moved.reflectivity, base.reflectivity)
    np.testing.assert_allclose(moved.ranges, base.ranges, rtol=0.0, atol=1e-9)
    np.testing.assert_allclose(moved.cos_incidence, base.cos_incidence, atol=1e-9)
    np.testing.assert_allclose(moved.points,
                               base.points @ rotation.T + translation, atol=1e-8)


def test_scan_respects_max_range():
    # from 3 m up, the steepest channel (-22.5 deg) hits at ~7.9 m slant range
    pattern = ScanPattern(channels=32, horizontal_samples=64, max_range=8.0)
    mesh, _, scan = _scan_fixture(pattern=pattern)
    assert len(scan) > 0
    assert scan.ranges.max() <= 8.0
    _, _, unlimited = _scan_fixture(
        pattern=ScanPattern(channels=32, horizontal_samples=64, max_range=500.0))
    assert len(unlimited) > len(scan)
