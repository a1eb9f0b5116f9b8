"""Axis-aligned BVH over triangles with batched closest-hit queries.

Construction is a median split along the widest centroid axis (leaves hold
up to four triangles). Traversal is breadth-style over (ray, node) pairs so
the whole query stays in vectorized numpy: slab tests prune pairs against
each ray's current best hit, leaves run Moller-Trumbore on the candidate
triangles, and ties on hit distance resolve to the lowest triangle index so
results are reproducible and match a brute-force scan bit for bit.

Grazing hits (|cos| of the incidence angle at or below the cutoff) do not
count as intersections at all; rays pass through and may hit what lies
behind.
"""

from __future__ import annotations

import numpy as np

from .errors import InputError

LEAF_SIZE = 4
GRAZING_COS = 1e-3
_MT_EPS = 1e-12


def ray_triangle_batch(origins, directions, v0, v1, v2, normals, grazing_cos=GRAZING_COS):
    """Moller-Trumbore over paired rays and triangles.

    All inputs are (M, 3); entry i tests ray i against triangle i. Returns
    (t, cos) with t = inf for misses. Hits with |normal . direction| <=
    ``grazing_cos`` are reported as misses.
    """
    e1 = v1 - v0
    e2 = v2 - v0
    h = np.cross(directions, e2)
    a = np.einsum("ij,ij->i", e1, h)
    s = origins - v0
    with np.errstate(divide="ignore", invalid="ignore"):
        f = 1.0 / a
        u = f * np.einsum("ij,ij->i", s, h)
        q = np.cross(s, e1)
        v = f * np.einsum("ij,ij->i", directions, q)
        t = f * np.einsum("ij,ij->i", e2, q)
    cos = np.abs(np.einsum("ij,ij->i", normals, directions))
    ok = (np.abs(a) > _MT_EPS) & (u >= 0.0) & (u <= 1.0) & (v >= 0.0) \
        & (u + v <= 1.0) & (t > 0.0) & (cos > grazing_cos)
    t = np.where(ok, t, np.inf)
    return t, cos


class TriangleBvh:
    """A BVH over one mesh, reused across many trace calls."""

    def __init__(self, mesh, leaf_size=LEAF_SIZE):
        if len(mesh) == 0:
            raise InputError("cannot build a BVH over an empty mesh")
        self.mesh = mesh
        corners = mesh.corners()
        self._v0 = np.ascontiguousarray(corners[:, 0])
        self._v1 = np.ascontiguousarray(corners[:, 1])
        self._v2 = np.ascontiguousarray(corners[:, 2])
        self._normals = mesh.normals()
        centroids = mesh.centroids()
        tri_min = corners.min(axis=1)
        tri_max = corners.max(axis=1)

        n = len(mesh)
        order = np.arange(n)
        # node arrays grow in build order; leaves reference a permutation slice
        bounds_min, bounds_max = [], []
        left, right = [], []
        starts, counts = [], []

        stack = [(0, n, -1, False)]
        while stack:
            lo, hi, parent, is_right = stack.pop()
            node = len(bounds_min)
            sel = order[lo:hi]
            bounds_min.append(tri_min[sel].min(axis=0))
            bounds_max.append(tri_max[sel].max(axis=0))
            left.append(-1)
            right.append(-1)
            if parent >= 0:
                if is_right:
                    right[parent] = node
                else:
                    left[parent] = node
            if hi - lo <= leaf_size:
                starts.append(lo)
                counts.append(hi - lo)
                continue
            extent = centroids[sel].max(axis=0) - centroids[sel].min(axis=0)
            axis = int(extent.argmax())
            if extent[axis] <= 0.0:
                starts.append(lo)
                counts.append(hi - lo)
                continue
            mid = (lo + hi) // 2
            part = np.argsort(centroids[sel, axis], kind="stable")
            order[lo:hi] = sel[part]
            starts.append(-1)
            counts.append(0)
            stack.append((mid, hi, node, True))
            stack.append((lo, mid, node, False))

        self._order = order
        self._bounds_min = np.asarray(bounds_min)
        self._bounds_max = np.asarray(bounds_max)
        self._left = np.asarray(left, dtype=np.int64)
        self._right = np.asarray(right, dtype=np.int64)
        self._starts = np.asarray(starts, dtype=np.int64)
        self._counts = np.asarray(counts, dtype=np.int64)

    @property
    def n_nodes(self):
        return self._bounds_min.shape[0]

    def trace(self, origins, directions, max_range=np.inf, grazing_cos=GRAZING_COS):
        """Closest non-grazing hit per ray.

        Args:
            origins, directions: (R, 3); directions must be unit length.
            max_range: hits farther than this are misses.

        Returns:
            (triangle_index, t, cos) arrays of length R; misses carry
            triangle_index -1, t = inf, cos = 0.
        """
        origins = np.asarray(origins, dtype=np.float64).reshape(-1, 3)
        directions = np.asarray(directions, dtype=np.float64).reshape(-1, 3)
        n_rays = origins.shape[0]
        best_t = np.full(n_rays, np.inf)
        best_tri = np.full(n_rays, -1, dtype=np.int64)
        best_cos = np.zeros(n_rays)
        if n_rays == 0:
            return best_tri, best_t, best_cos

        with np.errstate(divide="ignore", invalid="ignore"):
            inv_dir = 1.0 / directions

        pair_rays = np.arange(n_rays)
        pair_nodes = np.zeros(n_rays, dtype=np.int64)
        while pair_rays.size:
            node_lo = self._bounds_min[pair_nodes]
            node_hi = self._bounds_max[pair_nodes]
            o = origins[pair_rays]
            inv = inv_dir[pair_rays]
            with np.errstate(invalid="ignore"):
                t1 = (node_lo - o) * inv
                t2 = (node_hi - o) * inv
            # NaNs appear when a ray axis is zero on a face plane; treat as hit
            near = np.nanmax(np.minimum(t1, t2), axis=1)
            far = np.nanmin(np.maximum(t1, t2), axis=1)
            limit = np.minimum(best_t[pair_rays], max_range)
            alive = (far >= near) & (far > 0.0) & (near <= limit)
            pair_rays = pair_rays[alive]
            pair_nodes = pair_nodes[alive]
            if pair_rays.size == 0:
                break

            is_leaf = self._counts[pair_nodes] > 0
            if is_leaf.any():
                leaf_rays = pair_rays[is_leaf]
                leaf_nodes = pair_nodes[is_leaf]
                reps = self._counts[leaf_nodes]
                rays_rep = np.repeat(leaf_rays, reps)
                total = int(reps.sum())
                within = np.arange(total) - np.repeat(np.cumsum(reps) - reps, reps)
                offsets = np.repeat(self._starts[leaf_nodes], reps) + within
                tris = self._order[offsets]
                t, cos = ray_triangle_batch(
                    origins[rays_rep], directions[rays_rep],
                    self._v0[tris], self._v1[tris], self._v2[tris],
                    self._normals[tris], grazing_cos)
                hit = t <= max_range
                if hit.any():
                    rr = rays_rep[hit]
                    tt = t[hit]
                    cc = cos[hit]
                    ii = tris[hit]
                    # lexicographic (ray, t, tri) puts each ray's winner first
                    pick = np.lexsort((ii, tt, rr))
                    rr, tt, cc, ii = rr[pick], tt[pick], cc[pick], ii[pick]
                    first = np.ones(rr.size, dtype=bool)
                    first[1:] = rr[1:] != rr[:-1]
                    rr, tt, cc, ii = rr[first], tt[first], cc[first], ii[first]
                    better = (tt < best_t[rr]) | ((tt == best_t[rr]) & (ii < best_tri[rr]))
                    rr, tt, cc, ii = rr[better], tt[better], cc[better], ii[better]
                    best_t[rr] = tt
                    best_tri[rr] = ii
                    best_cos[rr] = cc

            inner_rays = pair_rays[~is_leaf]
            inner_nodes = pair_nodes[~is_leaf]
            pair_rays = np.concatenate([inner_rays, inner_rays])
            pair_nodes = np.concatenate(
                [self._left[inner_nodes], self._right[inner_nodes]])

        best_cos[best_tri < 0] = 0.0
        return best_tri, best_t, best_cos
