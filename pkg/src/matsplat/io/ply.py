"""PLY container parsing plus the Gaussian-splat vertex layout.

Splat clouds use the de-facto layout produced by splatting trainers: one
``vertex`` element whose properties store position directly, opacity as a
logit, per-axis scales as logs, and the orientation quaternion scalar-first
in ``rot_0..rot_3``. Loading inverts those encodings (logistic, exp,
normalize); color coefficients (``f_dc_*``, ``f_rest_*``) pass through
untouched. ASCII and binary little-endian files are supported.
"""

from __future__ import annotations

import io as _io
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from ..errors import DataError, FormatError
from ..types import GaussianCloud

_SCALAR_TYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "<i2", "int16": "<i2",
    "ushort": "<u2", "uint16": "<u2",
    "int": "<i4", "int32": "<i4",
    "uint": "<u4", "uint32": "<u4",
    "float": "<f4", "float32": "<f4",
    "double": "<f8", "float64": "<f8",
}

_TYPE_NAMES = {
    "u1": "uchar", "i1": "char", "<i2": "short", "<u2": "ushort",
    "<i4": "int", "<u4": "uint", "<f4": "float", "<f8": "double",
}

REQUIRED_SPLAT_PROPERTIES = (
    "x", "y", "z", "opacity",
    "scale_0", "scale_1", "scale_2",
    "rot_0", "rot_1", "rot_2", "rot_3",
)

_LOGIT_EPS = 1e-7


@dataclass
class PlyProperty:
    name: str
    dtype: str
    count_dtype: str | None = None  # set for list properties

    @property
    def is_list(self):
        return self.count_dtype is not None


@dataclass
class PlyElement:
    name: str
    count: int
    properties: list

    def property_names(self):
        return [p.name for p in self.properties]

    def fixed_dtype(self):
        if any(p.is_list for p in self.properties):
            raise FormatError(f"element '{self.name}' has list properties")
        return np.dtype([(p.name, p.dtype) for p in self.properties])


def read_header(stream):
    """Parse a PLY header from a binary stream positioned at the magic.

    Returns:
        (is_binary, elements) where elements is a list of ``PlyElement``.
        The stream is left at the first data byte.
    """
    line = stream.readline()
    if line.strip() != b"ply":
        raise FormatError("not a PLY file (missing 'ply' magic)")
    is_binary = None
    elements = []
    while True:
        raw = stream.readline()
        if not raw:
            raise FormatError("PLY header ended before 'end_header'")
        tokens = raw.decode("ascii", errors="replace").split()
        if not tokens or tokens[0] == "comment" or tokens[0] == "obj_info":
            continue
        if tokens[0] == "end_header":
            break
        if tokens[0] == "format":
            if tokens[1] == "ascii":
                is_binary = False
            elif tokens[1] == "binary_little_endian":
                is_binary = True
            else:
                raise FormatError(f"unsupported PLY format '{tokens[1]}'")
        elif tokens[0] == "element":
            elements.append(PlyElement(tokens[1], int(tokens[2]), []))
        elif tokens[0] == "property":
            if not elements:
                raise FormatError("PLY property declared before any element")
            if tokens[1] == "list":
                count_t, value_t, name = tokens[2], tokens[3], tokens[4]
                if count_t not in _SCALAR_TYPES or value_t not in _SCALAR_TYPES:
                    raise FormatError(f"unknown PLY type in list property '{name}'")
                elements[-1].properties.append(
                    PlyProperty(name, _SCALAR_TYPES[value_t], _SCALAR_TYPES[count_t]))
            else:
                type_name, name = tokens[1], tokens[2]
                if type_name not in _SCALAR_TYPES:
                    raise FormatError(f"unknown PLY type '{type_name}' for property '{name}'")
                elements[-1].properties.append(PlyProperty(name, _SCALAR_TYPES[type_name]))
        else:
            raise FormatError(f"unrecognized PLY header line: {raw.decode(errors='replace').strip()}")
    if is_binary is None:
        raise FormatError("PLY header has no 'format' line")
    return is_binary, elements


def read_fixed_element(stream, element, is_binary):
    """Read an element with scalar properties only into a structured array."""
    dtype = element.fixed_dtype()
    if is_binary:
        data = stream.read(dtype.itemsize * element.count)
        if len(data) < dtype.itemsize * element.count:
            raise FormatError(f"PLY element '{element.name}' is truncated")
        return np.frombuffer(data, dtype=dtype, count=element.count)
    return _read_ascii_rows(stream, element, dtype)


def read_list_element(stream, element, is_binary, expect_length=None):
    """Read an element whose first property is a uniform-length list.

    Returns:
        (list_values, tail) where list_values has shape (count, L) and tail
        is a structured array of the remaining scalar properties.
    """
    props = element.properties
    if not props or not props[0].is_list or any(p.is_list for p in props[1:]):
        raise FormatError(
            f"element '{element.name}' must have a single leading list property")
    head = props[0]
    if is_binary:
        if element.count == 0:
            tail_dtype = np.dtype([(p.name, p.dtype) for p in props[1:]]) if len(props) > 1 else None
            empty_tail = np.empty(0, dtype=tail_dtype) if tail_dtype else None
            return np.empty((0, expect_length or 0), dtype=np.int64), empty_tail
        count_size = np.dtype(head.count_dtype).itemsize
        peek = stream.peek(count_size)[:count_size] if hasattr(stream, "peek") else b""
        if len(peek) < count_size:
            pos = stream.tell()
            peek = stream.read(count_size)
            stream.seek(pos)
        if len(peek) < count_size:
            raise FormatError(f"PLY element '{element.name}' is truncated")
        length = int(np.frombuffer(peek, dtype=head.count_dtype, count=1)[0])
        if expect_length is not None and length != expect_length:
            raise FormatError(
                f"element '{element.name}' has {length}-vertex polygons, expected {expect_length}")
        fields = [("_count", head.count_dtype), ("_values", head.dtype, (length,))]
        fields += [(p.name, p.dtype) for p in props[1:]]
        dtype = np.dtype(fields)
        data = stream.read(dtype.itemsize * element.count)
        if len(data) < dtype.itemsize * element.count:
            raise FormatError(f"PLY element '{element.name}' is truncated")
        rows = np.frombuffer(data, dtype=dtype, count=element.count)
        if not (rows["_count"] == length).all():
            raise FormatError(f"element '{element.name}' mixes polygon sizes")
        tail = rows[[p.name for p in props[1:]]] if len(props) > 1 else None
        return rows["_values"], tail
    # ASCII path: token counts may vary per line, validate as we go.
    lists = []
    tail_cols = {p.name: [] for p in props[1:]}
    for i in range(element.count):
        tokens = _next_data_line(stream, element.name)
        length = int(tokens[0])
        if expect_length is not None and length != expect_length:
            raise FormatError(
                f"element '{element.name}' row {i} has a {length}-vertex polygon, "
                f"expected {expect_length}")
        need = 1 + length + len(props) - 1
        if len(tokens) < need:
            raise FormatError(f"element '{element.name}' row {i} is short")
        lists.append([float(t) for t in tokens[1:1 + length]])
        for p, tok in zip(props[1:], tokens[1 + length:need]):
            tail_cols[p.name].append(float(tok))
    values = np.asarray(lists)
    tail = None
    if len(props) > 1:
        tail = np.zeros(element.count, dtype=np.dtype([(p.name, p.dtype) for p in props[1:]]))
        for p in props[1:]:
            tail[p.name] = np.asarray(tail_cols[p.name])
    return values, tail


def skip_element(stream, element, is_binary):
    if is_binary:
        if any(p.is_list for p in element.properties):
            raise FormatError(
                f"cannot skip PLY element '{element.name}' with list properties")
        stream.seek(element.fixed_dtype().itemsize * element.count, _io.SEEK_CUR)
    else:
        for _ in range(element.count):
            _next_data_line(stream, element.name)


def _next_data_line(stream, element_name):
    while True:
        raw = stream.readline()
        if not raw:
            raise FormatError(f"PLY element '{element_name}' is truncated")
        tokens = raw.decode("ascii", errors="replace").split()
        if tokens:
            return tokens


def _read_ascii_rows(stream, element, dtype):
    out = np.zeros(element.count, dtype=dtype)
    names = element.property_names()
    for i in range(element.count):
        tokens = _next_data_line(stream, element.name)
        if len(tokens) < len(names):
            raise FormatError(f"element '{element.name}' row {i} is short")
        for name, tok in zip(names, tokens):
            out[name][i] = float(tok)
    return out


def load_gaussian_ply(path):
    """Load a splat cloud from a PLY file, decoding stored encodings.

    Opacity logits pass through the logistic function, log-scales are
    exponentiated, quaternions are normalized. Color coefficients are kept
    verbatim.

    Raises:
        FormatError: missing required property, bad container, truncation.
        DataError: non-finite values or zero-norm quaternions.
    """
    with open(path, "rb") as f:
        stream = _io.BufferedReader(_io.BytesIO(f.read()))
        is_binary, elements = read_header(stream)
        vertex = None
        for element in elements:
            if element.name == "vertex":
                vertex = element
                break
            skip_element(stream, element, is_binary)
        if vertex is None:
            raise FormatError("splat file has no 'vertex' element")
        names = set(vertex.property_names())
        for required in REQUIRED_SPLAT_PROPERTIES:
            if required not in names:
                raise FormatError(f"splat file missing required property '{required}'")
        rows = read_fixed_element(stream, vertex, is_binary)

    def col(name):
        return rows[name].astype(np.float64)

    positions = np.stack([col("x"), col("y"), col("z")], axis=1)
    raw_opacity = col("opacity")
    raw_scales = np.stack([col("scale_0"), col("scale_1"), col("scale_2")], axis=1)
    raw_quats = np.stack([col("rot_0"), col("rot_1"), col("rot_2"), col("rot_3")], axis=1)

    stacked = np.concatenate(
        [positions, raw_opacity[:, None], raw_scales, raw_quats], axis=1)
    finite = np.isfinite(stacked).all(axis=1)
    if not finite.all():
        raise DataError(f"non-finite value at element {int(np.argmin(finite))}")

    norms = np.linalg.norm(raw_quats, axis=1)
    if norms.size and norms.min() < 1e-12:
        raise DataError(f"zero-norm quaternion at element {int(np.argmin(norms))}")

    color_props = [p for p in vertex.properties
                   if p.name.startswith("f_dc_") or p.name.startswith("f_rest_")]
    color_coeffs = None
    color_names = ()
    if color_props:
        color_names = tuple(p.name for p in color_props)
        color_coeffs = np.stack([col(p.name) for p in color_props], axis=1)

    return GaussianCloud(
        positions=positions,
        scales=np.exp(raw_scales),
        rotations=raw_quats / norms[:, None] if norms.size else raw_quats,
        opacities=expit(raw_opacity),
        color_coeffs=color_coeffs,
        color_names=color_names,
    )


def write_gaussian_ply(cloud, path, binary=True):
    """Write a splat cloud using the standard encoded layout.

    Opacities are stored as logits (clamped away from 0/1 so the logit is
    finite), scales as logs, everything as float32.
    """
    n = len(cloud)
    names = ["x", "y", "z", "nx", "ny", "nz"]
    names += list(cloud.color_names)
    names += ["opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"]

    opacity = np.clip(cloud.opacities, _LOGIT_EPS, 1.0 - _LOGIT_EPS)
    logits = np.log(opacity / (1.0 - opacity))

    columns = {
        "x": cloud.positions[:, 0], "y": cloud.positions[:, 1], "z": cloud.positions[:, 2],
        "nx": np.zeros(n), "ny": np.zeros(n), "nz": np.zeros(n),
        "opacity": logits,
        "scale_0": np.log(cloud.scales[:, 0]),
        "scale_1": np.log(cloud.scales[:, 1]),
        "scale_2": np.log(cloud.scales[:, 2]),
        "rot_0": cloud.rotations[:, 0], "rot_1": cloud.rotations[:, 1],
        "rot_2": cloud.rotations[:, 2], "rot_3": cloud.rotations[:, 3],
    }
    for j, name in enumerate(cloud.color_names):
        columns[name] = cloud.color_coeffs[:, j]

    rows = np.zeros(n, dtype=np.dtype([(name, "<f4") for name in names]))
    for name in names:
        rows[name] = columns[name].astype(np.float32)

    header = ["ply"]
    header.append("format binary_little_endian 1.0" if binary else "format ascii 1.0")
    header.append(f"element vertex {n}")
    header += [f"property float {name}" for name in names]
    header.append("end_header")

    with open(path, "wb") as f:
        f.write(("\n".join(header) + "\n").encode("ascii"))
        if binary:
            f.write(rows.tobytes())
        else:
            for i in range(n):
                f.write((" ".join(repr(float(rows[name][i])) for name in names) + "\n")
                        .encode("ascii"))
