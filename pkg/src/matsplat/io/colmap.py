"""COLMAP text-model IO: ``cameras.txt`` intrinsics + ``images.txt`` poses.

Only the pinhole models are supported (PINHOLE, SIMPLE_PINHOLE). Extrinsics
in ``images.txt`` are world-to-camera, quaternion scalar-first, which is the
same convention ``CameraModel`` uses, so values map across directly.
"""

from __future__ import annotations

import os

import numpy as np

from ..errors import DataError, FormatError, UnsupportedModelError
from ..geometry import quat_to_rotmat, rotmat_to_quat
from ..types import CameraModel


def _data_lines(path):
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line and not line.startswith("#"):
                yield line


def load_cameras(path):
    """Load registered cameras from a COLMAP text model directory.

    Args:
        path: directory containing ``cameras.txt`` and ``images.txt``.

    Returns:
        List of ``CameraModel``, one per registered image, sorted by image ID.

    Raises:
        UnsupportedModelError: camera model other than the pinhole models.
        DataError: an image references a camera ID that does not exist.
        FormatError: malformed lines.
    """
    cameras_txt = os.path.join(path, "cameras.txt")
    images_txt = os.path.join(path, "images.txt")

    intrinsics = {}
    for line in _data_lines(cameras_txt):
        tokens = line.split()
        if len(tokens) < 4:
            raise FormatError(f"cameras.txt: short line '{line}'")
        cam_id, model = int(tokens[0]), tokens[1]
        width, height = int(tokens[2]), int(tokens[3])
        params = [float(t) for t in tokens[4:]]
        if model == "PINHOLE":
            if len(params) != 4:
                raise FormatError(f"cameras.txt: PINHOLE expects 4 params, got {len(params)}")
            fx, fy, cx, cy = params
        elif model == "SIMPLE_PINHOLE":
            if len(params) != 3:
                raise FormatError(
                    f"cameras.txt: SIMPLE_PINHOLE expects 3 params, got {len(params)}")
            fx, cx, cy = params
            fy = fx
        else:
            raise UnsupportedModelError(f"unsupported camera model '{model}'")
        intrinsics[cam_id] = (fx, fy, cx, cy, width, height)

    cameras = []
    with open(images_txt, "r", encoding="utf-8") as f:
        raw = [line.strip() for line in f if not line.strip().startswith("#")]
    i = 0
    while i < len(raw):
        line = raw[i]
        i += 1
        if not line:
            continue
        tokens = line.split()
        if len(tokens) < 10:
            raise FormatError(f"images.txt: short image line '{line}'")
        image_id = int(tokens[0])
        qw, qx, qy, qz = (float(t) for t in tokens[1:5])
        tx, ty, tz = (float(t) for t in tokens[5:8])
        cam_id = int(tokens[8])
        name = tokens[9]
        if cam_id not in intrinsics:
            raise DataError(f"image '{name}' references unknown camera {cam_id}")
        fx, fy, cx, cy, width, height = intrinsics[cam_id]
        rotation = quat_to_rotmat(np.array([qw, qx, qy, qz]))
        cameras.append((image_id, CameraModel(
            fx=fx, fy=fy, cx=cx, cy=cy, width=width, height=height,
            rotation=rotation, translation=np.array([tx, ty, tz]),
            camera_id=cam_id, name=name,
        )))
        # every pose line is followed by its (possibly empty) 2D-point line
        if i < len(raw):
            i += 1
    cameras.sort(key=lambda pair: pair[0])
    return [cam for _, cam in cameras]


def write_cameras(cameras, path):
    """Write cameras as a COLMAP text model (one PINHOLE entry per camera)."""
    os.makedirs(path, exist_ok=True)
    with open(os.path.join(path, "cameras.txt"), "w", encoding="utf-8") as f:
        f.write("# Camera list with one line of data per camera:\n")
        f.write("#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n")
        for i, cam in enumerate(cameras, start=1):
            params = " ".join(repr(float(v)) for v in (cam.fx, cam.fy, cam.cx, cam.cy))
            f.write(f"{i} PINHOLE {cam.width} {cam.height} {params}\n")
    with open(os.path.join(path, "images.txt"), "w", encoding="utf-8") as f:
        f.write("# Image list with two lines of data per image:\n")
        f.write("#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n")
        f.write("#   POINTS2D[] as (X, Y, POINT3D_ID)\n")
        for i, cam in enumerate(cameras, start=1):
            q = rotmat_to_quat(cam.rotation)
            t = cam.translation
            name = cam.name or f"image_{i:04d}.png"
            pose = " ".join(repr(float(v))
                            for v in (q[0], q[1], q[2], q[3], t[0], t[1], t[2]))
            f.write(f"{i} {pose} {i} {name}\n")
            f.write("\n")
