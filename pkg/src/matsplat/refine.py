"""Instance-guided material mask refinement.

Instance boundaries are trusted more than per-pixel material labels, so each
instance is flattened to its majority material class. Overlapping instance
claims are settled first: a contested pixel goes to the instance with the
fewest pixels overall, which keeps small objects from being swallowed by
large background segments.
"""

from __future__ import annotations

import numpy as np

from .errors import DataError, ShapeError
from .types import UNKNOWN_CLASS, InstanceSet, MaterialMap


def remove_overlaps(instances):
    """Resolve overlapping instance masks into a disjoint set.

    A pixel claimed by several instances is kept only by the instance with
    the smallest pixel count (counted on the input masks; ties go to the
    lowest instance index). Instances emptied by the rule are dropped;
    surviving instances keep their relative order.
    """
    masks = instances.masks
    if len(instances) == 0:
        return InstanceSet(masks=masks.copy())
    counts = instances.pixel_counts()
    order = np.lexsort((np.arange(len(instances)), counts))
    claimed = np.zeros(instances.shape, dtype=bool)
    resolved = np.zeros_like(masks)
    for k in order:
        keep = masks[k] & ~claimed
        resolved[k] = keep
        claimed |= keep
    survivors = resolved.any(axis=(1, 2))
    return InstanceSet(masks=resolved[survivors])


def instance_vote_histogram(mask, instance_mask):
    """Per-class pixel counts inside one instance; 255 pixels abstain.

    Returns:
        (256,) int64 histogram with the unlabeled bin forced to zero.
    """
    hist = np.bincount(mask.class_ids[instance_mask].ravel(), minlength=256)
    hist[UNKNOWN_CLASS] = 0
    return hist


def refine_labels(mask, instances):
    """Flatten each instance to its majority material class.

    Ties break to the lowest class ID. An instance whose pixels are all
    unlabeled keeps them unlabeled. Pixels outside every instance are left
    untouched.

    Raises:
        ShapeError: mask and instance dimensions disagree.
        DataError: the instance set is not disjoint.
    """
    if instances.masks.shape[1:] != mask.class_ids.shape:
        raise ShapeError(
            f"instance masks {instances.masks.shape[1:]} do not match "
            f"material map {mask.class_ids.shape}")
    if len(instances) and instances.masks.sum(axis=0, dtype=np.int64).max() > 1:
        raise DataError("instance masks overlap; run remove_overlaps first")
    refined = mask.class_ids.copy()
    for k in range(len(instances)):
        hist = instance_vote_histogram(mask, instances.masks[k])
        if hist.sum() == 0:
            continue
        refined[instances.masks[k]] = np.uint8(hist.argmax())
    return MaterialMap(class_ids=refined, palette=dict(mask.palette))
