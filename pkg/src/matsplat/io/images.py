"""Mask and instance-image IO via Pillow.

Material masks are 8-bit single-channel images whose pixel values are class
IDs (255 = unlabeled). Instance sets are stored as indexed label images
(0 = background, k = instance k), 8- or 16-bit depending on instance count.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

from ..errors import DataError, FormatError
from ..types import InstanceSet, MaterialMap


def load_mask(path, palette=None):
    """Load an 8-bit single-channel material mask.

    Multi-channel or 16-bit images are rejected; class IDs are never inferred
    from color values.
    """
    with Image.open(path) as img:
        if img.mode not in ("L", "P"):
            raise FormatError(
                f"mask '{path}' has mode '{img.mode}', expected 8-bit single channel")
        arr = np.asarray(img, dtype=np.uint8)
    return MaterialMap(class_ids=arr, palette=dict(palette) if palette else {})


def write_mask(mask, path):
    Image.fromarray(mask.class_ids, mode="L").save(path)


def load_instances(path):
    """Load an instance set from an indexed label image (8- or 16-bit)."""
    with Image.open(path) as img:
        if img.mode == "L":
            arr = np.asarray(img, dtype=np.uint16)
        elif img.mode in ("I", "I;16"):
            arr = np.asarray(img, dtype=np.int64)
            if arr.min() < 0 or arr.max() > np.iinfo(np.uint16).max:
                raise DataError(f"instance image '{path}' has labels outside uint16 range")
            arr = arr.astype(np.uint16)
        else:
            raise FormatError(
                f"instance image '{path}' has mode '{img.mode}', expected indexed grayscale")
    return InstanceSet.from_label_image(arr)


def write_instances(instances, path):
    """Write a disjoint instance set as a 16-bit indexed label image."""
    if len(instances) > np.iinfo(np.uint16).max - 1:
        raise DataError("too many instances for a 16-bit label image")
    labels = instances.to_label_image()
    Image.fromarray(labels.astype(np.uint16)).save(path)
