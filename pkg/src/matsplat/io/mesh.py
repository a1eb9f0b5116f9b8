"""Triangle mesh IO: PLY (ASCII and binary little-endian) and OBJ.

Per-triangle material class IDs ride along as a scalar face property in PLY
(``material_id``; a few common synonyms are accepted on load) and as
``usemtl class_<id>`` groups in OBJ. Meshes without material information
load with every triangle set to the unlabeled sentinel 255.
"""

from __future__ import annotations

import io as _io

import numpy as np

from ..errors import DataError, FormatError
from ..types import UNKNOWN_CLASS, LabeledMesh
from .ply import read_fixed_element, read_header, read_list_element, skip_element

_MATERIAL_PROPERTY_NAMES = ("material_id", "material", "material_index", "class_id", "label")


def load_mesh(path):
    """Load a triangle mesh with optional per-face material class IDs.

    The format is chosen by extension (.ply or .obj). Non-triangle faces and
    out-of-range indices are rejected.
    """
    lower = str(path).lower()
    if lower.endswith(".ply"):
        return _load_mesh_ply(path)
    if lower.endswith(".obj"):
        return _load_mesh_obj(path)
    raise FormatError(f"unsupported mesh extension for '{path}' (expected .ply or .obj)")


def write_labeled_mesh(mesh, path, binary=True):
    """Write a labeled mesh, format chosen by extension (.ply or .obj)."""
    lower = str(path).lower()
    if lower.endswith(".ply"):
        _write_mesh_ply(mesh, path, binary)
    elif lower.endswith(".obj"):
        _write_mesh_obj(mesh, path)
    else:
        raise FormatError(f"unsupported mesh extension for '{path}' (expected .ply or .obj)")


def _load_mesh_ply(path):
    with open(path, "rb") as f:
        stream = _io.BufferedReader(_io.BytesIO(f.read()))
        is_binary, elements = read_header(stream)
        vertices = None
        triangles = None
        labels = None
        for element in elements:
            if element.name == "vertex" and vertices is None:
                names = element.property_names()
                for axis in ("x", "y", "z"):
                    if axis not in names:
                        raise FormatError(f"mesh vertex element missing property '{axis}'")
                rows = read_fixed_element(stream, element, is_binary)
                vertices = np.stack(
                    [rows["x"], rows["y"], rows["z"]], axis=1).astype(np.float64)
            elif element.name == "face" and triangles is None:
                values, tail = read_list_element(stream, element, is_binary, expect_length=3)
                triangles = values.astype(np.int64)
                if tail is not None:
                    for name in _MATERIAL_PROPERTY_NAMES:
                        if name in tail.dtype.names:
                            raw = tail[name].astype(np.int64)
                            if raw.size and (raw.min() < 0 or raw.max() > 255):
                                raise DataError(
                                    f"face property '{name}' outside [0, 255]")
                            labels = raw.astype(np.uint8)
                            break
            else:
                skip_element(stream, element, is_binary)
    if vertices is None:
        raise FormatError("mesh file has no 'vertex' element")
    if triangles is None:
        raise FormatError("mesh file has no 'face' element")
    if labels is None:
        labels = np.full(triangles.shape[0], UNKNOWN_CLASS, dtype=np.uint8)
    return LabeledMesh(vertices=vertices, triangles=triangles, labels=labels)


def _write_mesh_ply(mesh, path, binary=True):
    n_v = mesh.vertices.shape[0]
    n_t = len(mesh)
    header = ["ply"]
    header.append("format binary_little_endian 1.0" if binary else "format ascii 1.0")
    header += [
        f"element vertex {n_v}",
        "property double x",
        "property double y",
        "property double z",
        f"element face {n_t}",
        "property list uchar int vertex_indices",
        "property uchar material_id",
        "end_header",
    ]
    face_dtype = np.dtype([("n", "u1"), ("idx", "<i4", (3,)), ("material_id", "u1")])
    faces = np.zeros(n_t, dtype=face_dtype)
    faces["n"] = 3
    faces["idx"] = mesh.triangles.astype(np.int32)
    faces["material_id"] = mesh.labels
    with open(path, "wb") as f:
        f.write(("\n".join(header) + "\n").encode("ascii"))
        if binary:
            f.write(mesh.vertices.astype("<f8").tobytes())
            f.write(faces.tobytes())
        else:
            for v in mesh.vertices:
                f.write((" ".join(repr(float(c)) for c in v) + "\n").encode("ascii"))
            for i in range(n_t):
                t = mesh.triangles[i]
                f.write(f"3 {t[0]} {t[1]} {t[2]} {int(mesh.labels[i])}\n".encode("ascii"))


def _parse_usemtl(name, line_no):
    """Extract an integer class ID from a usemtl name like 'class_7' or '7'."""
    tail = name.rsplit("_", 1)[-1]
    try:
        value = int(tail)
    except ValueError:
        raise FormatError(
            f"line {line_no}: cannot read a class ID from material name '{name}'") from None
    if not 0 <= value <= 255:
        raise DataError(f"line {line_no}: material class {value} outside [0, 255]")
    return value


def _load_mesh_obj(path):
    vertices = []
    triangles = []
    labels = []
    current = UNKNOWN_CLASS
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            tokens = line.split()
            if not tokens or tokens[0].startswith("#"):
                continue
            kind = tokens[0]
            if kind == "v":
                if len(tokens) < 4:
                    raise FormatError(f"line {line_no}: vertex line is short")
                vertices.append([float(t) for t in tokens[1:4]])
            elif kind == "f":
                if len(tokens) != 4:
                    raise FormatError(
                        f"line {line_no}: only triangle faces are supported")
                idx = []
                for tok in tokens[1:]:
                    head = tok.split("/")[0]
                    value = int(head)
                    if value <= 0:
                        raise FormatError(
                            f"line {line_no}: only positive face indices are supported")
                    idx.append(value - 1)
                triangles.append(idx)
                labels.append(current)
            elif kind == "usemtl":
                if len(tokens) < 2:
                    raise FormatError(f"line {line_no}: usemtl without a name")
                current = _parse_usemtl(tokens[1], line_no)
            # vn/vt/o/g/s/mtllib are irrelevant here
    return LabeledMesh(
        vertices=np.asarray(vertices, dtype=np.float64).reshape(-1, 3),
        triangles=np.asarray(triangles, dtype=np.int64).reshape(-1, 3),
        labels=np.asarray(labels, dtype=np.uint8),
    )


def _write_mesh_obj(mesh, path):
    lines = []
    for v in mesh.vertices:
        lines.append("v " + " ".join(repr(float(c)) for c in v))
    current = None
    for i in range(len(mesh)):
        label = int(mesh.labels[i])
        if label != current:
            lines.append(f"usemtl class_{label}")
            current = label
        t = mesh.triangles[i]
        lines.append(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}")
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")
