"""Small geometry helpers: quaternions, rotation checks, look-at frames.

Conventions used across the package: the world frame is right-handed with
+Z up and units of meters. Camera frames follow the COLMAP convention
(+Z forward, +X right, +Y down) and extrinsics map world points into the
camera frame, ``x_cam = R @ x_world + t``. Quaternions are scalar-first
(w, x, y, z).
"""

from __future__ import annotations

import numpy as np

from .errors import DataError

ROTATION_TOL = 1e-6


def quat_to_rotmat(q):
    """Convert unit quaternions to rotation matrices.

    Args:
        q: array of shape (4,) or (N, 4), scalar-first (w, x, y, z). Need not
            be normalized; zero-norm quaternions raise ``DataError``.

    Returns:
        Array of shape (3, 3) or (N, 3, 3).
    """
    q = np.asarray(q, dtype=np.float64)
    single = q.ndim == 1
    q = np.atleast_2d(q)
    norms = np.linalg.norm(q, axis=1)
    bad = np.nonzero(norms < 1e-12)[0]
    if bad.size:
        raise DataError(f"zero-norm quaternion at index {bad[0]}")
    w, x, y, z = (q / norms[:, None]).T
    rot = np.empty((q.shape[0], 3, 3), dtype=np.float64)
    rot[:, 0, 0] = 1.0 - 2.0 * (y * y + z * z)
    rot[:, 0, 1] = 2.0 * (x * y - w * z)
    rot[:, 0, 2] = 2.0 * (x * z + w * y)
    rot[:, 1, 0] = 2.0 * (x * y + w * z)
    rot[:, 1, 1] = 1.0 - 2.0 * (x * x + z * z)
    rot[:, 1, 2] = 2.0 * (y * z - w * x)
    rot[:, 2, 0] = 2.0 * (x * z - w * y)
    rot[:, 2, 1] = 2.0 * (y * z + w * x)
    rot[:, 2, 2] = 1.0 - 2.0 * (x * x + y * y)
    return rot[0] if single else rot


def rotmat_to_quat(rot):
    """Convert a 3x3 rotation matrix to a scalar-first unit quaternion.

    The sign is fixed so w >= 0.
    """
    rot = np.asarray(rot, dtype=np.float64)
    m00, m11, m22 = rot[0, 0], rot[1, 1], rot[2, 2]
    tr = m00 + m11 + m22
    if tr > 0.0:
        s = np.sqrt(tr + 1.0) * 2.0
        q = np.array([
            0.25 * s,
            (rot[2, 1] - rot[1, 2]) / s,
            (rot[0, 2] - rot[2, 0]) / s,
            (rot[1, 0] - rot[0, 1]) / s,
        ])
    elif m00 >= m11 and m00 >= m22:
        s = np.sqrt(1.0 + m00 - m11 - m22) * 2.0
        q = np.array([
            (rot[2, 1] - rot[1, 2]) / s,
            0.25 * s,
            (rot[0, 1] + rot[1, 0]) / s,
            (rot[0, 2] + rot[2, 0]) / s,
        ])
    elif m11 >= m22:
        s = np.sqrt(1.0 + m11 - m00 - m22) * 2.0
        q = np.array([
            (rot[0, 2] - rot[2, 0]) / s,
            (rot[0, 1] + rot[1, 0]) / s,
            0.25 * s,
            (rot[1, 2] + rot[2, 1]) / s,
        ])
    else:
        s = np.sqrt(1.0 + m22 - m00 - m11) * 2.0
        q = np.array([
            (rot[1, 0] - rot[0, 1]) / s,
            (rot[0, 2] + rot[2, 0]) / s,
            (rot[1, 2] + rot[2, 1]) / s,
            0.25 * s,
        ])
    if q[0] < 0.0:
        q = -q
    return q / np.linalg.norm(q)


def check_rotation(rot, tol=ROTATION_TOL, what="rotation"):
    """Raise ``DataError`` unless ``rot`` is orthonormal with det +1."""
    rot = np.asarray(rot, dtype=np.float64)
    if rot.shape != (3, 3):
        raise DataError(f"{what} must be 3x3, got {rot.shape}")
    err = np.abs(rot @ rot.T - np.eye(3)).max()
    if err > tol:
        raise DataError(f"{what} is not orthonormal (max deviation {err:.3e})")
    det = np.linalg.det(rot)
    if abs(det - 1.0) > tol:
        raise DataError(f"{what} has determinant {det:.6f}, expected +1")
    return rot


def look_at(eye, target, up=(0.0, 0.0, 1.0)):
    """Build a world-to-camera extrinsic looking from ``eye`` at ``target``.

    The camera frame follows the module convention: +Z toward the target,
    +X to the right, +Y down.

    Returns:
        (rotation, translation) with ``x_cam = rotation @ x_world + translation``.
    """
    eye = np.asarray(eye, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - eye
    norm = np.linalg.norm(forward)
    if norm < 1e-12:
        raise DataError("look_at eye and target coincide")
    forward = forward / norm
    right = np.cross(forward, np.asarray(up, dtype=np.float64))
    norm = np.linalg.norm(right)
    if norm < 1e-12:
        raise DataError("look_at view direction is parallel to the up vector")
    right = right / norm
    down = np.cross(forward, right)
    rotation = np.stack([right, down, forward])
    translation = -rotation @ eye
    return rotation, translation


def random_rigid_transform(rng):
    """Draw a uniformly random rotation and a bounded random translation."""
    q = rng.normal(size=4)
    rotation = quat_to_rotmat(q)
    translation = rng.uniform(-10.0, 10.0, size=3)
    return rotation, translation
