"""Core value types shared by the reconstruction and simulation stages.

Every constructor validates its invariants and raises ``DataError`` (or a
subclass) instead of clamping silently. The unlabeled sentinel is class ID
255 everywhere: material maps, per-Gaussian labels, and mesh triangles all
use the same value.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, ShapeError
from .geometry import check_rotation

UNKNOWN_CLASS = 255


@dataclass
class CameraModel:
    """A pinhole camera with world-to-camera extrinsics.

    Attributes:
        fx, fy: focal lengths in pixels, > 0.
        cx, cy: principal point in pixels, strictly inside the image.
        width, height: image size in pixels.
        rotation: 3x3 world-to-camera rotation.
        translation: world-to-camera translation, ``x_cam = R @ x_w + t``.
        camera_id: identifier carried through from the source file.
        name: image name this camera was registered for, if any.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    rotation: np.ndarray
    translation: np.ndarray
    camera_id: int = 0
    name: str = ""

    def __post_init__(self):
        if not (self.fx > 0.0 and self.fy > 0.0):
            raise DataError(f"focal lengths must be positive, got fx={self.fx} fy={self.fy}")
        if not (self.width > 0 and self.height > 0):
            raise DataError(f"image size must be positive, got {self.width}x{self.height}")
        if not (0.0 < self.cx < self.width and 0.0 < self.cy < self.height):
            raise DataError(
                f"principal point ({self.cx}, {self.cy}) outside image {self.width}x{self.height}"
            )
        self.rotation = check_rotation(self.rotation, what="camera rotation")
        self.translation = np.asarray(self.translation, dtype=np.float64).reshape(3)

    @property
    def position(self):
        """Camera center in world coordinates."""
        return -self.rotation.T @ self.translation


@dataclass
class GaussianCloud:
    """A cloud of anisotropic 3D Gaussians in decoded (linear) units.

    ``scales`` are standard deviations in meters along the local axes,
    ``rotations`` are scalar-first unit quaternions, ``opacities`` live in
    [0, 1]. ``color_coeffs`` carries any per-splat color coefficients found
    in the source file, unchanged, with their property names.
    """

    positions: np.ndarray
    scales: np.ndarray
    rotations: np.ndarray
    opacities: np.ndarray
    color_coeffs: np.ndarray | None = None
    color_names: tuple = ()

    def __post_init__(self):
        self.positions = _as_2d(self.positions, 3, "positions")
        n = self.positions.shape[0]
        self.scales = _as_2d(self.scales, 3, "scales", n)
        self.rotations = _as_2d(self.rotations, 4, "rotations", n)
        self.opacities = np.asarray(self.opacities, dtype=np.float64).reshape(-1)
        if self.opacities.shape[0] != n:
            raise ShapeError(f"opacities length {self.opacities.shape[0]} != {n} splats")
        for name, arr in (("positions", self.positions), ("scales", self.scales),
                          ("rotations", self.rotations), ("opacities", self.opacities)):
            bad = np.nonzero(~np.isfinite(arr).reshape(arr.shape[0], -1).all(axis=1))[0]
            if bad.size:
                raise DataError(f"non-finite {name} at element {bad[0]}")
        if n:
            if self.scales.min() <= 0.0:
                idx = int(np.argmin(self.scales.min(axis=1)))
                raise DataError(f"non-positive scale at element {idx}")
            norms = np.linalg.norm(self.rotations, axis=1)
            off = np.abs(norms - 1.0)
            if off.max() > 1e-6:
                idx = int(np.argmax(off))
                raise DataError(f"non-unit quaternion at element {idx} (|q|={norms[idx]:.8f})")
            if self.opacities.min() < 0.0 or self.opacities.max() > 1.0:
                idx = int(np.argmax(np.abs(self.opacities - 0.5)))
                raise DataError(f"opacity outside [0, 1] at element {idx}")
        if self.color_coeffs is not None:
            self.color_coeffs = np.asarray(self.color_coeffs, dtype=np.float64)
            if self.color_coeffs.shape[0] != n:
                raise ShapeError("color_coeffs row count does not match splat count")
            self.color_names = tuple(self.color_names)
            if len(self.color_names) != self.color_coeffs.shape[1]:
                raise ShapeError("color_names length does not match color_coeffs columns")

    def __len__(self):
        return self.positions.shape[0]


@dataclass
class MaterialMap:
    """A per-pixel material class image. 255 marks unlabeled pixels."""

    class_ids: np.ndarray
    palette: dict = field(default_factory=dict)

    def __post_init__(self):
        self.class_ids = np.asarray(self.class_ids)
        if self.class_ids.ndim != 2:
            raise ShapeError(f"material map must be 2D, got shape {self.class_ids.shape}")
        if self.class_ids.dtype != np.uint8:
            arr = np.asarray(self.class_ids)
            if arr.min(initial=0) < 0 or arr.max(initial=0) > 255:
                raise DataError("class IDs must fit in uint8")
            self.class_ids = arr.astype(np.uint8)
        present = set(np.unique(self.class_ids).tolist()) - {UNKNOWN_CLASS}
        missing = present - set(self.palette)
        if missing:
            for cid in missing:
                self.palette[cid] = f"class_{cid}"

    @property
    def height(self):
        return self.class_ids.shape[0]

    @property
    def width(self):
        return self.class_ids.shape[1]


@dataclass
class InstanceSet:
    """Binary instance masks over one image. Masks may overlap on input;
    ``remove_overlaps`` produces a disjoint set."""

    masks: np.ndarray

    def __post_init__(self):
        self.masks = np.asarray(self.masks)
        if self.masks.ndim != 3:
            raise ShapeError(f"instance masks must be (K, H, W), got {self.masks.shape}")
        self.masks = self.masks.astype(bool)

    def __len__(self):
        return self.masks.shape[0]

    @property
    def shape(self):
        return self.masks.shape[1:]

    def pixel_counts(self):
        return self.masks.sum(axis=(1, 2))

    def to_label_image(self):
        """Encode as an indexed image: 0 = background, k = instance k.

        Requires disjoint masks; overlapping input raises ``DataError``.
        """
        if len(self) and self.masks.sum(axis=0).max() > 1:
            raise DataError("instance masks overlap; run remove_overlaps first")
        out = np.zeros(self.shape, dtype=np.uint16)
        for k in range(len(self)):
            out[self.masks[k]] = k + 1
        return out

    @classmethod
    def from_label_image(cls, labels):
        labels = np.asarray(labels)
        if labels.ndim != 2:
            raise ShapeError(f"instance label image must be 2D, got {labels.shape}")
        n = int(labels.max(initial=0))
        masks = np.zeros((n, labels.shape[0], labels.shape[1]), dtype=bool)
        for k in range(n):
            masks[k] = labels == k + 1
        return cls(masks)


@dataclass
class LabeledMesh:
    """A triangle mesh with one material class ID per triangle.

    Normals are derived from vertex winding (right-hand rule). Degenerate
    triangles (area <= 1e-12 m^2) are rejected.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.vertices = _as_2d(self.vertices, 3, "vertices")
        self.triangles = np.asarray(self.triangles)
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise ShapeError(f"triangles must be (T, 3), got {self.triangles.shape}")
        self.triangles = self.triangles.astype(np.int64)
        t = self.triangles.shape[0]
        self.labels = np.asarray(self.labels)
        if self.labels.shape != (t,):
            raise ShapeError(f"labels shape {self.labels.shape} != ({t},)")
        if self.labels.dtype != np.uint8:
            if self.labels.min(initial=0) < 0 or self.labels.max(initial=0) > 255:
                raise DataError("triangle labels must fit in uint8")
            self.labels = self.labels.astype(np.uint8)
        if not np.isfinite(self.vertices).all():
            raise DataError("non-finite vertex coordinates")
        if t:
            if self.triangles.min() < 0 or self.triangles.max() >= self.vertices.shape[0]:
                bad = int(np.argmax((self.triangles < 0) | (self.triangles >= len(self.vertices))))
                raise DataError(f"triangle {bad // 3} references a vertex out of range")
            areas = self.areas()
            if areas.min() <= 1e-12:
                raise DataError(f"degenerate triangle {int(np.argmin(areas))} (area <= 1e-12 m^2)")

    def __len__(self):
        return self.triangles.shape[0]

    def corners(self):
        """Triangle corner positions, shape (T, 3, 3)."""
        return self.vertices[self.triangles]

    def centroids(self):
        return self.corners().mean(axis=1)

    def areas(self):
        c = self.corners()
        cross = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
        return 0.5 * np.linalg.norm(cross, axis=1)

    def normals(self):
        """Unit normals from vertex winding, shape (T, 3)."""
        c = self.corners()
        cross = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
        return cross / np.linalg.norm(cross, axis=1, keepdims=True)


@dataclass
class Trajectory:
    """A timestamped sensor path: sensor-to-world poses.

    ``x_world = rotation(t) @ x_sensor + translation(t)``. Quaternions are
    scalar-first. Timestamps must be strictly increasing.
    """

    timestamps: np.ndarray
    translations: np.ndarray
    quaternions: np.ndarray

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=np.float64).reshape(-1)
        m = self.timestamps.shape[0]
        self.translations = _as_2d(self.translations, 3, "translations", m)
        self.quaternions = _as_2d(self.quaternions, 4, "quaternions", m)
        if m == 0:
            raise DataError("trajectory is empty")
        if m > 1 and not (np.diff(self.timestamps) > 0.0).all():
            raise DataError("trajectory timestamps must be strictly increasing")
        norms = np.linalg.norm(self.quaternions, axis=1)
        if np.abs(norms - 1.0).max() > 1e-6:
            idx = int(np.argmax(np.abs(norms - 1.0)))
            raise DataError(f"non-unit trajectory quaternion at sample {idx}")
        self.quaternions = self.quaternions / norms[:, None]

    def __len__(self):
        return self.timestamps.shape[0]

    @property
    def duration(self):
        return float(self.timestamps[-1] - self.timestamps[0])


def _as_2d(arr, cols, name, rows=None):
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 1 and arr.size == 0:
        arr = arr.reshape(0, cols)
    if arr.ndim != 2 or arr.shape[1] != cols:
        raise ShapeError(f"{name} must be (N, {cols}), got {arr.shape}")
    if rows is not None and arr.shape[0] != rows:
        raise ShapeError(f"{name} has {arr.shape[0]} rows, expected {rows}")
    return arr
