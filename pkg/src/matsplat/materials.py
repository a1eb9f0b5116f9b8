"""Material definitions and per-triangle binding.

A table maps material class IDs to principled-BSDF-style parameter records
plus an 8-bit diffuse reflectivity used by the LiDAR power model. Every
table carries a fallback record that absorbs the unlabeled class (255), so
binding a mesh to a table is total: each triangle resolves to exactly one
material.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from importlib import resources

import numpy as np

from .errors import SchemaError, UnmappedClassError
from .types import UNKNOWN_CLASS

_UNIT_FIELDS = ("metallic", "roughness", "specular", "clearcoat", "opacity")


@dataclass(frozen=True)
class PbrMaterial:
    """One material record: shading parameters plus LiDAR reflectivity.

    ``base_color`` components and the scalar fields live in [0, 1];
    ``diffuse_reflectivity_255`` is an integer in [0, 255].
    """

    class_id: int
    name: str
    base_color: tuple
    metallic: float
    roughness: float
    specular: float
    clearcoat: float
    opacity: float
    diffuse_reflectivity_255: int

    def __post_init__(self):
        if not 0 <= self.class_id <= 255:
            raise SchemaError(f"material '{self.name}': class_id {self.class_id} outside [0, 255]")
        object.__setattr__(self, "base_color", tuple(float(c) for c in self.base_color))
        if len(self.base_color) != 3 or any(not 0.0 <= c <= 1.0 for c in self.base_color):
            raise SchemaError(
                f"material '{self.name}' (class {self.class_id}): "
                f"base_color must be three values in [0, 1]")
        for fname in _UNIT_FIELDS:
            value = getattr(self, fname)
            if not 0.0 <= value <= 1.0:
                raise SchemaError(
                    f"material '{self.name}' (class {self.class_id}): "
                    f"{fname} = {value} outside [0, 1]")
        r = self.diffuse_reflectivity_255
        if not (isinstance(r, (int, np.integer)) and 0 <= r <= 255):
            raise SchemaError(
                f"material '{self.name}' (class {self.class_id}): "
                f"diffuse_reflectivity_255 = {r} outside integer [0, 255]")

    @property
    def rho(self):
        """Diffuse reflectance in [0, 1]."""
        return self.diffuse_reflectivity_255 / 255.0


@dataclass
class MaterialTable:
    """Class-ID-keyed material records with a mandatory fallback."""

    materials: dict = field(default_factory=dict)
    fallback: PbrMaterial = None

    def __post_init__(self):
        if self.fallback is None:
            raise SchemaError("material table has no fallback material")
        if isinstance(self.materials, (list, tuple)):
            seen = {}
            for m in self.materials:
                if m.class_id in seen:
                    raise SchemaError(f"duplicate class_id {m.class_id} in material table")
                seen[m.class_id] = m
            self.materials = seen
        if UNKNOWN_CLASS in self.materials:
            raise SchemaError("class_id 255 is reserved for the fallback material")

    def resolve(self, class_id):
        """Material for a class ID; unknown IDs fall through to the fallback."""
        return self.materials.get(int(class_id), self.fallback)

    def class_ids(self):
        return sorted(self.materials)

    def __eq__(self, other):
        return (isinstance(other, MaterialTable)
                and self.materials == other.materials
                and self.fallback == other.fallback)


def _material_from_record(record, *, is_fallback=False):
    if not isinstance(record, dict):
        raise SchemaError("material record must be a JSON object")
    required = {"name", "base_color", "metallic", "roughness", "specular",
                "clearcoat", "opacity", "diffuse_reflectivity_255"}
    missing = required - set(record)
    if missing:
        raise SchemaError(f"material record missing fields: {sorted(missing)}")
    class_id = record.get("class_id", UNKNOWN_CLASS if is_fallback else None)
    if class_id is None:
        raise SchemaError(f"material '{record['name']}' has no class_id")
    if is_fallback and class_id != UNKNOWN_CLASS:
        raise SchemaError("fallback material class_id must be 255 when given")
    refl = record["diffuse_reflectivity_255"]
    if isinstance(refl, float) and not refl.is_integer():
        raise SchemaError(
            f"material '{record['name']}': diffuse_reflectivity_255 must be an integer")
    return PbrMaterial(
        class_id=int(class_id),
        name=str(record["name"]),
        base_color=record["base_color"],
        metallic=float(record["metallic"]),
        roughness=float(record["roughness"]),
        specular=float(record["specular"]),
        clearcoat=float(record["clearcoat"]),
        opacity=float(record["opacity"]),
        diffuse_reflectivity_255=int(refl),
    )


def parse_material_table(document):
    """Build a table from a parsed JSON document, validating the schema."""
    if not isinstance(document, dict):
        raise SchemaError("material table must be a JSON object")
    if "fallback" not in document:
        raise SchemaError("material table has no fallback material")
    fallback = _material_from_record(document["fallback"], is_fallback=True)
    entries = document.get("materials", [])
    if not isinstance(entries, list):
        raise SchemaError("'materials' must be a list")
    return MaterialTable(
        materials=[_material_from_record(r) for r in entries],
        fallback=fallback,
    )


def load_material_table(path):
    with open(path, "r", encoding="utf-8") as f:
        try:
            document = json.load(f)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"material table is not valid JSON: {exc}") from None
    return parse_material_table(document)


def material_table_document(table):
    """The JSON-serializable form of a table (sorted by class ID)."""
    fallback = asdict(table.fallback)
    fallback.pop("class_id")
    fallback["base_color"] = list(fallback["base_color"])
    records = []
    for class_id in table.class_ids():
        record = asdict(table.materials[class_id])
        record["base_color"] = list(record["base_color"])
        records.append(record)
    return {"fallback": fallback, "materials": records}


def write_material_table(table, path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(material_table_document(table), f, indent=2, sort_keys=True)
        f.write("\n")


def default_material_table():
    """The table shipped with the package (ten urban surface classes)."""
    ref = resources.files("matsplat.data").joinpath("default_materials.json")
    with ref.open("r", encoding="utf-8") as f:
        return parse_material_table(json.load(f))


@dataclass
class BoundMesh:
    """A labeled mesh joined with its material table.

    ``reflectivity`` holds the per-triangle diffuse reflectance in [0, 1];
    ``material_ids`` the resolved class per triangle (fallback triangles keep
    255). The binding is total by construction.
    """

    mesh: object
    table: MaterialTable
    reflectivity: np.ndarray
    material_ids: np.ndarray


def bind_materials(mesh, table):
    """Attach material records to every triangle of a labeled mesh.

    Triangles labeled 255 bind to the fallback. Any other label missing from
    the table raises ``UnmappedClassError`` listing the offenders.
    """
    labels = mesh.labels
    present = np.unique(labels)
    unmapped = [int(c) for c in present
                if c != UNKNOWN_CLASS and int(c) not in table.materials]
    if unmapped:
        raise UnmappedClassError(
            f"mesh uses class IDs with no material definition: {unmapped}")
    lut_rho = np.empty(256, dtype=np.float64)
    lut_rho.fill(table.fallback.rho)
    for class_id, material in table.materials.items():
        lut_rho[class_id] = material.rho
    return BoundMesh(
        mesh=mesh,
        table=table,
        reflectivity=lut_rho[labels],
        material_ids=labels.copy(),
    )
