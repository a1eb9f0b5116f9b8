"""Transfer per-Gaussian labels onto mesh triangles, then fill the holes.

Every labeled Gaussian votes its class onto its k nearest triangle
centroids; each triangle takes the majority class of the votes it received
(ties to the lowest class ID), staying unlabeled when nothing voted for it.
Remaining unlabeled triangles can then inherit labels from the closest
labeled triangle in edge-hop distance, a multi-source breadth-first search
over the shared-edge adjacency graph. Filling never crosses gaps between
disconnected components, so separate objects keep separate labels.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import InputError
from .types import UNKNOWN_CLASS, LabeledMesh


def assign_gaussians_to_triangles(positions, labels, mesh, k=1):
    """Vote Gaussian labels onto triangles by centroid proximity.

    Args:
        positions: (N, 3) Gaussian centers.
        labels: (N,) uint8 class IDs; 255 entries do not vote.
        mesh: target ``LabeledMesh`` (its existing labels are ignored).
        k: number of nearest triangle centroids each Gaussian votes for.

    Returns:
        A new ``LabeledMesh`` with the voted labels.

    Raises:
        InputError: the mesh has no triangles or k < 1.
    """
    if len(mesh) == 0:
        raise InputError("cannot label an empty mesh")
    if k < 1:
        raise InputError(f"k must be >= 1, got {k}")
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    labels = np.asarray(labels).astype(np.uint8).reshape(-1)
    if positions.shape[0] != labels.shape[0]:
        raise InputError("positions and labels disagree on Gaussian count")

    voters = labels != UNKNOWN_CLASS
    out = np.full(len(mesh), UNKNOWN_CLASS, dtype=np.uint8)
    if voters.any():
        centroids = mesh.centroids()
        k_eff = min(k, len(mesh))
        tree = cKDTree(centroids)
        _, nearest = tree.query(positions[voters], k=k_eff)
        if nearest.ndim == 1:
            nearest = nearest[:, None]
        voter_labels = labels[voters]

        classes = np.unique(voter_labels)
        counts = np.zeros((len(mesh), classes.shape[0]), dtype=np.int64)
        cols = np.searchsorted(classes, voter_labels)
        for j in range(k_eff):
            np.add.at(counts, (nearest[:, j], cols), 1)
        voted = counts.sum(axis=1) > 0
        out[voted] = classes[counts[voted].argmax(axis=1)].astype(np.uint8)

    return LabeledMesh(vertices=mesh.vertices.copy(),
                       triangles=mesh.triangles.copy(),
                       labels=out)


def triangle_adjacency(mesh):
    """Neighbor lists over shared edges.

    Returns:
        List of sorted neighbor-index lists, one per triangle.
    """
    edge_faces = defaultdict(list)
    tris = mesh.triangles
    for t in range(len(mesh)):
        a, b, c = int(tris[t, 0]), int(tris[t, 1]), int(tris[t, 2])
        for u, v in ((a, b), (b, c), (c, a)):
            edge_faces[(u, v) if u < v else (v, u)].append(t)
    neighbors = [set() for _ in range(len(mesh))]
    for faces in edge_faces.values():
        if len(faces) > 1:
            for t in faces:
                neighbors[t].update(faces)
    return [sorted(n - {t}) for t, n in enumerate(neighbors)]


def fill_unlabeled(mesh, max_hops=None):
    """Propagate labels to unlabeled triangles by shared-edge hop distance.

    Each unlabeled triangle takes the label of its nearest labeled triangle
    in hop distance; when several labeled triangles are equally near, the
    lowest class ID wins. Labeled triangles are never changed; triangles
    unreachable from any labeled one (or beyond ``max_hops``) stay 255.

    Returns:
        A new ``LabeledMesh``; ``(result.labels != mesh.labels).sum()`` is
        the number of filled triangles.
    """
    labels = mesh.labels.copy()
    seeds = np.nonzero(labels != UNKNOWN_CLASS)[0]
    if seeds.size == 0 or seeds.size == len(mesh):
        return LabeledMesh(vertices=mesh.vertices.copy(),
                           triangles=mesh.triangles.copy(),
                           labels=labels)
    adjacency = triangle_adjacency(mesh)
    reached = labels != UNKNOWN_CLASS
    frontier = seeds.tolist()
    hops = 0
    while frontier and (max_hops is None or hops < max_hops):
        # The minimum over the frontier's labels equals the minimum over the
        # nearest seeds' labels, so propagating per-level minima is exact.
        best = {}
        for t in frontier:
            lab = int(labels[t])
            for nb in adjacency[t]:
                if not reached[nb]:
                    prev = best.get(nb)
                    if prev is None or lab < prev:
                        best[nb] = lab
        for t, lab in best.items():
            labels[t] = lab
            reached[t] = True
        frontier = sorted(best)
        hops += 1
    return LabeledMesh(vertices=mesh.vertices.copy(),
                       triangles=mesh.triangles.copy(),
                       labels=labels)


@dataclass
class LabelSummary:
    """Counts and per-class surface areas for a labeling result."""

    n_triangles: int
    n_labeled: int
    n_unlabeled: int
    n_filled: int
    per_class_area_m2: dict

    def to_document(self):
        return {
            "n_triangles": self.n_triangles,
            "n_labeled": self.n_labeled,
            "n_unlabeled": self.n_unlabeled,
            "n_filled": self.n_filled,
            "per_class_area_m2": {str(k): v for k, v in sorted(self.per_class_area_m2.items())},
        }


def summarize_labels(mesh, n_filled=0):
    """Build the labeling summary emitted alongside a labeled mesh."""
    areas = mesh.areas()
    per_class = {}
    for class_id in np.unique(mesh.labels):
        sel = mesh.labels == class_id
        per_class[int(class_id)] = float(areas[sel].sum())
    n_labeled = int(np.count_nonzero(mesh.labels != UNKNOWN_CLASS))
    return LabelSummary(
        n_triangles=len(mesh),
        n_labeled=n_labeled,
        n_unlabeled=len(mesh) - n_labeled,
        n_filled=int(n_filled),
        per_class_area_m2=per_class,
    )
