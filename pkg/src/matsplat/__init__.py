"""Material-aware 3D Gaussian splat labeling and LiDAR reflectivity simulation.

The package takes a reconstructed splat cloud plus per-view material masks,
votes mask classes onto individual Gaussians, transfers the labels to a mesh,
binds physically based material parameters, and simulates what a spinning
LiDAR would measure against that scene, including the 8-bit reflectivity
channel real sensors report.
"""

__version__ = "0.1.0"

from .errors import (DataError, DomainError, FormatError, InputError,
                     MatsplatError, SchemaError, ShapeError,
                     UnmappedClassError, UnsupportedModelError)
from .lidar import (DEFAULT_SCAN_PATTERN, LidarScan, NoiseModel, RayBundle,
                    ScanPattern, generate_rays, interpolate_poses,
                    lambertian_power, load_scan_pattern,
                    normalize_reflectivity, simulate_scan, write_scan_pattern)
from .materials import (BoundMesh, MaterialTable, PbrMaterial, bind_materials,
                        default_material_table, load_material_table,
                        parse_material_table, write_material_table)
from .meshlabel import (LabelSummary, assign_gaussians_to_triangles,
                        fill_unlabeled, summarize_labels, triangle_adjacency)
from .metrics import (PointMatches, match_points, psnr, reflectivity_error,
                      ssim)
from .project import (GaussianVotes, SplatFootprints, accumulate_votes,
                      aggregate_labels, project_splats, rasterize_votes,
                      rasterize_winners)
from .refine import refine_labels, remove_overlaps
from .types import (UNKNOWN_CLASS, CameraModel, GaussianCloud, InstanceSet,
                    LabeledMesh, MaterialMap, Trajectory)
from .bvh import TriangleBvh

__all__ = [
    "__version__",
    "MatsplatError", "FormatError", "UnsupportedModelError", "SchemaError",
    "DataError", "ShapeError", "DomainError", "UnmappedClassError", "InputError",
    "UNKNOWN_CLASS", "CameraModel", "GaussianCloud", "MaterialMap",
    "InstanceSet", "LabeledMesh", "Trajectory",
    "refine_labels", "remove_overlaps",
    "SplatFootprints", "GaussianVotes", "project_splats", "rasterize_winners",
    "rasterize_votes", "accumulate_votes", "aggregate_labels",
    "assign_gaussians_to_triangles", "triangle_adjacency", "fill_unlabeled",
    "summarize_labels", "LabelSummary",
    "PbrMaterial", "MaterialTable", "BoundMesh", "bind_materials",
    "parse_material_table", "load_material_table", "write_material_table",
    "default_material_table",
    "TriangleBvh",
    "ScanPattern", "DEFAULT_SCAN_PATTERN", "RayBundle", "NoiseModel",
    "LidarScan", "generate_rays", "lambertian_power", "normalize_reflectivity",
    "interpolate_poses", "simulate_scan", "load_scan_pattern",
    "write_scan_pattern",
    "PointMatches", "match_points", "reflectivity_error", "psnr", "ssim",
]
