"""File readers and writers for every format the toolkit touches."""

from .colmap import load_cameras, write_cameras
from .images import load_instances, load_mask, write_instances, write_mask
from .mesh import load_mesh, write_labeled_mesh
from .ply import load_gaussian_ply, write_gaussian_ply
from .pointcloud import (read_point_cloud, read_point_cloud_any,
                         read_point_cloud_csv, write_point_cloud,
                         write_point_cloud_csv)
from .trajectory import load_trajectory, write_trajectory

__all__ = [
    "load_cameras", "write_cameras",
    "load_instances", "load_mask", "write_instances", "write_mask",
    "load_mesh", "write_labeled_mesh",
    "load_gaussian_ply", "write_gaussian_ply",
    "read_point_cloud", "read_point_cloud_any", "read_point_cloud_csv",
    "write_point_cloud", "write_point_cloud_csv",
    "load_trajectory", "write_trajectory",
]
