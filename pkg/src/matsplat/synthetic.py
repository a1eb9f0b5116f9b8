"""Analytic test scenes with known geometry, materials, and imagery.

The flagship builder lays out a small street scene: an asphalt ground
plane, a concrete wall, and a glass panel floating above the wall. Because
every triangle's class is known, the scene exercises the whole chain end
to end: masks are rendered by ray casting the true mesh, splats sit at
triangle centroids, and a reference scan carries the exact per-class
reflectivities. The three surfaces share no vertices, so adjacency-based
hole filling cannot leak labels between them.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .bvh import TriangleBvh
from .geometry import look_at, rotmat_to_quat
from .io.colmap import write_cameras
from .io.images import write_mask
from .io.mesh import write_labeled_mesh
from .io.ply import write_gaussian_ply
from .io.pointcloud import write_point_cloud
from .io.trajectory import write_trajectory
from .lidar import ScanPattern, simulate_scan, write_scan_pattern
from .materials import default_material_table, write_material_table
from .types import CameraModel, GaussianCloud, LabeledMesh, MaterialMap, Trajectory

GLASS = 0
CONCRETE = 2
ASPHALT = 3


def grid_quad_mesh(origin, u_vec, v_vec, nu, nv, class_id):
    """A quad subdivided into an nu x nv grid of triangle pairs.

    The normal follows the right-hand rule on (u_vec, v_vec).
    """
    origin = np.asarray(origin, dtype=np.float64)
    u_vec = np.asarray(u_vec, dtype=np.float64)
    v_vec = np.asarray(v_vec, dtype=np.float64)
    us = np.linspace(0.0, 1.0, nu + 1)
    vs = np.linspace(0.0, 1.0, nv + 1)
    vertices = (origin[None, None, :]
                + us[None, :, None] * u_vec[None, None, :]
                + vs[:, None, None] * v_vec[None, None, :]).reshape(-1, 3)
    triangles = []
    for j in range(nv):
        for i in range(nu):
            a = j * (nu + 1) + i
            b = a + 1
            c = a + nu + 1
            d = c + 1
            triangles.append([a, b, d])
            triangles.append([a, d, c])
    triangles = np.asarray(triangles, dtype=np.int64)
    labels = np.full(triangles.shape[0], class_id, dtype=np.uint8)
    return LabeledMesh(vertices=vertices, triangles=triangles, labels=labels)


def merge_meshes(parts):
    """Concatenate meshes without merging vertices (components stay apart)."""
    vertices = []
    triangles = []
    labels = []
    offset = 0
    for part in parts:
        vertices.append(part.vertices)
        triangles.append(part.triangles + offset)
        labels.append(part.labels)
        offset += part.vertices.shape[0]
    return LabeledMesh(
        vertices=np.concatenate(vertices),
        triangles=np.concatenate(triangles),
        labels=np.concatenate(labels),
    )


def splats_at_centroids(mesh, scale_factor=0.35, opacity=0.95):
    """One isotropic splat per triangle, sized to the triangle's area."""
    centroids = mesh.centroids()
    scale = np.clip(scale_factor * np.sqrt(mesh.areas()), 0.02, 1.0)
    scales = np.repeat(scale[:, None], 3, axis=1)
    rotations = np.zeros((len(mesh), 4))
    rotations[:, 0] = 1.0
    return GaussianCloud(
        positions=centroids,
        scales=scales,
        rotations=rotations,
        opacities=np.full(len(mesh), opacity),
    )


def render_class_mask(mesh, camera, bvh=None):
    """Ray-cast the labeled mesh into a camera to get a perfect class mask."""
    if bvh is None:
        bvh = TriangleBvh(mesh)
    us = np.arange(camera.width, dtype=np.float64) + 0.5
    vs = np.arange(camera.height, dtype=np.float64) + 0.5
    x = (us[None, :] - camera.cx) / camera.fx
    y = (vs[:, None] - camera.cy) / camera.fy
    dirs_cam = np.stack([
        np.broadcast_to(x, (camera.height, camera.width)),
        np.broadcast_to(y, (camera.height, camera.width)),
        np.ones((camera.height, camera.width)),
    ], axis=2).reshape(-1, 3)
    dirs_cam /= np.linalg.norm(dirs_cam, axis=1, keepdims=True)
    dirs_world = dirs_cam @ camera.rotation
    origins = np.broadcast_to(camera.position, dirs_world.shape)
    tri, _, _ = bvh.trace(origins, dirs_world)
    class_ids = np.full(tri.shape[0], 255, dtype=np.uint8)
    hit = tri >= 0
    class_ids[hit] = mesh.labels[tri[hit]]
    return MaterialMap(class_ids=class_ids.reshape(camera.height, camera.width))


def corner_scene_mesh():
    """Ground + wall + glass panel with known classes (184 triangles).

    The three surfaces are kept apart: the panel floats above the wall and
    the ground stops short of it, so no surface occludes another from the
    camera side and empty bands separate them in image space. Every splat is
    then fully visible in several views, footprint spill lands on unknown
    pixels, and majority voting settles each splat on its own class.
    """
    ground = grid_quad_mesh(
        origin=(-8.0, -2.0, 0.0), u_vec=(16.0, 0.0, 0.0), v_vec=(0.0, 7.0, 0.0),
        nu=10, nv=5, class_id=ASPHALT)
    wall = grid_quad_mesh(
        origin=(-8.0, 8.0, 0.0), u_vec=(16.0, 0.0, 0.0), v_vec=(0.0, 0.0, 6.0),
        nu=10, nv=3, class_id=CONCRETE)
    panel = grid_quad_mesh(
        origin=(-3.0, 7.7, 6.5), u_vec=(6.0, 0.0, 0.0), v_vec=(0.0, 0.0, 3.0),
        nu=4, nv=3, class_id=GLASS)
    return merge_meshes([ground, wall, panel])


def corner_scene_cameras(width=160, height=120):
    """Five viewpoints sweeping the scene from the street side."""
    cameras = []
    focal = 0.7 * width
    for i, x in enumerate((-6.0, -3.0, 0.0, 3.0, 6.0)):
        eye = np.array([x, -8.0, 4.0])
        target = np.array([x * 1.3, 6.0, 2.23])
        rotation, translation = look_at(eye, target)
        cameras.append(CameraModel(
            fx=focal, fy=focal, cx=width / 2.0, cy=height / 2.0,
            width=width, height=height,
            rotation=rotation, translation=translation,
            camera_id=i + 1, name=f"view_{i:02d}.png",
        ))
    return cameras


def corner_scene_trajectory():
    """A short straight pass in front of the wall, 0.15 s long."""
    start = np.array([-1.0, -6.0, 2.0])
    end = np.array([1.0, -6.0, 2.0])
    rot = np.eye(3)
    q = rotmat_to_quat(rot)
    return Trajectory(
        timestamps=np.array([0.0, 0.15]),
        translations=np.stack([start, end]),
        quaternions=np.stack([q, q]),
    )


def corner_scene_pattern():
    return ScanPattern(channels=32, vfov_min_deg=-22.5, vfov_max_deg=22.5,
                       horizontal_samples=512, revolutions_per_second=20.0,
                       max_range=120.0)


@dataclass
class TwinScene:
    """File layout of a generated scene plus the in-memory ground truth."""

    root: str
    mesh: LabeledMesh
    cameras: list
    table: object
    trajectory: Trajectory
    pattern: ScanPattern
    splats_path: str
    mesh_path: str
    colmap_dir: str
    masks_dir: str
    table_path: str
    trajectory_path: str
    pattern_path: str
    reference_path: str
    manifest_path: str


def build_twin_scene(root, mask_size=(160, 120), fill=True):
    """Generate the corner scene on disk, manifest included.

    The written mesh carries no labels (that is the pipeline's job); the
    returned ``TwinScene.mesh`` keeps the ground-truth classes. The
    reference scan is simulated directly from the ground-truth labels.
    """
    os.makedirs(root, exist_ok=True)
    mesh = corner_scene_mesh()
    cameras = corner_scene_cameras(*mask_size)
    table = default_material_table()
    trajectory = corner_scene_trajectory()
    pattern = corner_scene_pattern()

    splats_path = os.path.join(root, "splats.ply")
    cloud = splats_at_centroids(mesh)
    write_gaussian_ply(cloud, splats_path)

    mesh_path = os.path.join(root, "mesh.ply")
    unlabeled = LabeledMesh(
        vertices=mesh.vertices.copy(),
        triangles=mesh.triangles.copy(),
        labels=np.full(len(mesh), 255, dtype=np.uint8))
    write_labeled_mesh(unlabeled, mesh_path)

    colmap_dir = os.path.join(root, "colmap")
    write_cameras(cameras, colmap_dir)

    masks_dir = os.path.join(root, "masks")
    os.makedirs(masks_dir, exist_ok=True)
    bvh = TriangleBvh(mesh)
    for camera in cameras:
        mask = render_class_mask(mesh, camera, bvh)
        write_mask(mask, os.path.join(masks_dir, camera.name))

    table_path = os.path.join(root, "materials.json")
    write_material_table(table, table_path)

    trajectory_path = os.path.join(root, "trajectory.csv")
    write_trajectory(trajectory, trajectory_path)

    pattern_path = os.path.join(root, "pattern.json")
    write_scan_pattern(pattern, pattern_path)

    reference_path = os.path.join(root, "reference.bin")
    reference = simulate_scan(mesh, table, pattern, trajectory)
    write_point_cloud(reference, reference_path)

    manifest_path = os.path.join(root, "manifest.json")
    manifest = {
        "splats": "splats.ply",
        "mesh": "mesh.ply",
        "cameras": "colmap",
        "masks": "masks",
        "material_table": "materials.json",
        "trajectory": "trajectory.csv",
        "scan_pattern": "pattern.json",
        "reference_cloud": "reference.bin",
        "params": {
            "alpha_threshold": 0.5,
            "knn_k": 1,
            "fill": bool(fill),
            "match_radius": 0.2,
        },
    }
    with open(manifest_path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")

    return TwinScene(
        root=root, mesh=mesh, cameras=cameras, table=table,
        trajectory=trajectory, pattern=pattern,
        splats_path=splats_path, mesh_path=mesh_path, colmap_dir=colmap_dir,
        masks_dir=masks_dir, table_path=table_path,
        trajectory_path=trajectory_path, pattern_path=pattern_path,
        reference_path=reference_path, manifest_path=manifest_path,
    )


def split_plane_mesh(class_left=ASPHALT, class_right=CONCRETE, half=8.0, cells=4):
    """A flat square at z = 0 whose x < 0 half and x >= 0 half differ in class."""
    left = grid_quad_mesh(
        origin=(-half, -half, 0.0), u_vec=(half, 0.0, 0.0), v_vec=(0.0, 2 * half, 0.0),
        nu=cells, nv=cells, class_id=class_left)
    right = grid_quad_mesh(
        origin=(0.0, -half, 0.0), u_vec=(half, 0.0, 0.0), v_vec=(0.0, 2 * half, 0.0),
        nu=cells, nv=cells, class_id=class_right)
    return merge_meshes([left, right])


def hover_trajectory(position=(0.0, 0.0, 3.0), duration=0.05):
    """A static pose held long enough for one revolution at 20 Hz."""
    q = rotmat_to_quat(np.eye(3))
    position = np.asarray(position, dtype=np.float64)
    return Trajectory(
        timestamps=np.array([0.0, duration]),
        translations=np.stack([position, position]),
        quaternions=np.stack([q, q]),
    )
