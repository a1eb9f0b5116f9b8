"""Splat projection and per-pixel label voting.

Each 3D Gaussian is pushed through the camera with the classic elliptical
weighted average recipe: the world covariance R_q S S^T R_q^T is rotated
into the camera frame, propagated through the local affine approximation of
the perspective map (the Jacobian J), and regularized with a small isotropic
floor so every footprint stays invertible:

    Sigma_2D = J Sigma_cam J^T + 0.3 * I   [px^2]

Labeled mask pixels then vote: walking footprints front to back, the first
splat whose alpha reaches the threshold collects the pixel's class vote; if
none does but the pixel becomes effectively opaque (transmittance < 0.5),
the splat with the largest blending weight alpha * T collects it instead.
A footprint contributes zero alpha beyond 3 sigma (Mahalanobis q > 9),
which is what makes tile-level culling exact rather than approximate.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, ShapeError
from .types import UNKNOWN_CLASS

COVARIANCE_FLOOR_PX2 = 0.3
FOOTPRINT_CUTOFF_Q = 9.0  # Mahalanobis distance^2 at 3 sigma
DEFAULT_ALPHA_THRESHOLD = 0.5
TILE_SIZE = 16


@dataclass
class SplatFootprints:
    """Projected 2D footprints for one view (struct of arrays).

    ``gaussian_index`` maps each footprint back to its source splat. Depths
    are positive view-space z values. The covariance already includes the
    isotropic floor. ``width``/``height`` record the target image size;
    the drop counters say how many splats were culled and why.
    """

    gaussian_index: np.ndarray
    mean_px: np.ndarray
    cov_px: np.ndarray
    depth: np.ndarray
    opacity: np.ndarray
    width: int
    height: int
    n_input: int = 0
    n_behind_camera: int = 0
    n_outside_image: int = 0

    def __len__(self):
        return self.gaussian_index.shape[0]

    def conics(self):
        """Inverse covariances as (A, B, C) with q = A dx^2 + 2 B dx dy + C dy^2."""
        a = self.cov_px[:, 0, 0]
        b = self.cov_px[:, 0, 1]
        c = self.cov_px[:, 1, 1]
        det = a * c - b * b
        return c / det, -b / det, a / det

    def max_eigenvalues(self):
        a = self.cov_px[:, 0, 0]
        b = self.cov_px[:, 0, 1]
        c = self.cov_px[:, 1, 1]
        half_trace = 0.5 * (a + c)
        return half_trace + np.sqrt(np.square(0.5 * (a - c)) + b * b)


def quat_scale_covariances(rotations, scales):
    """World-frame 3x3 covariances from unit quaternions and axis scales."""
    w, x, y, z = rotations.T
    rot = np.empty((rotations.shape[0], 3, 3), dtype=np.float64)
    rot[:, 0, 0] = 1.0 - 2.0 * (y * y + z * z)
    rot[:, 0, 1] = 2.0 * (x * y - w * z)
    rot[:, 0, 2] = 2.0 * (x * z + w * y)
    rot[:, 1, 0] = 2.0 * (x * y + w * z)
    rot[:, 1, 1] = 1.0 - 2.0 * (x * x + z * z)
    rot[:, 1, 2] = 2.0 * (y * z - w * x)
    rot[:, 2, 0] = 2.0 * (x * z - w * y)
    rot[:, 2, 1] = 2.0 * (y * z + w * x)
    rot[:, 2, 2] = 1.0 - 2.0 * (x * x + y * y)
    m = rot * scales[:, None, :]
    return m @ m.transpose(0, 2, 1)


def project_splats(cloud, camera):
    """Project a Gaussian cloud into one camera.

    Splats behind the camera (view-space z <= 0) are dropped, as are
    footprints whose mean lies more than 3 sigma outside the image bounds;
    both are counted in the returned stats rather than raised as errors.

    Returns:
        SplatFootprints for the visible splats.
    """
    n = len(cloud)
    means_cam = cloud.positions @ camera.rotation.T + camera.translation
    tz = means_cam[:, 2]
    in_front = tz > 0.0

    idx = np.nonzero(in_front)[0]
    means_cam = means_cam[idx]
    tx, ty, tz = means_cam.T

    mean_px = np.stack([
        camera.fx * tx / tz + camera.cx,
        camera.fy * ty / tz + camera.cy,
    ], axis=1)

    cov_world = quat_scale_covariances(cloud.rotations[idx], cloud.scales[idx])
    cov_cam = camera.rotation @ cov_world @ camera.rotation.T

    inv_z = 1.0 / tz
    inv_z2 = inv_z * inv_z
    jac = np.zeros((idx.shape[0], 2, 3), dtype=np.float64)
    jac[:, 0, 0] = camera.fx * inv_z
    jac[:, 0, 2] = -camera.fx * tx * inv_z2
    jac[:, 1, 1] = camera.fy * inv_z
    jac[:, 1, 2] = -camera.fy * ty * inv_z2
    cov_px = jac @ cov_cam @ jac.transpose(0, 2, 1)
    cov_px[:, 0, 0] += COVARIANCE_FLOOR_PX2
    cov_px[:, 1, 1] += COVARIANCE_FLOOR_PX2

    half_trace = 0.5 * (cov_px[:, 0, 0] + cov_px[:, 1, 1])
    lam_max = half_trace + np.sqrt(
        np.square(0.5 * (cov_px[:, 0, 0] - cov_px[:, 1, 1])) + np.square(cov_px[:, 0, 1]))
    radius = 3.0 * np.sqrt(lam_max)
    visible = ((mean_px[:, 0] >= -radius) & (mean_px[:, 0] <= camera.width + radius)
               & (mean_px[:, 1] >= -radius) & (mean_px[:, 1] <= camera.height + radius))

    return SplatFootprints(
        gaussian_index=idx[visible],
        mean_px=mean_px[visible],
        cov_px=cov_px[visible],
        depth=tz[visible],
        opacity=cloud.opacities[idx][visible],
        width=camera.width,
        height=camera.height,
        n_input=n,
        n_behind_camera=int(n - idx.shape[0]),
        n_outside_image=int(np.count_nonzero(~visible)),
    )


def rasterize_winners(footprints, alpha_threshold=DEFAULT_ALPHA_THRESHOLD,
                      tile_size=TILE_SIZE):
    """Per-pixel winning Gaussian indices via 16x16 tile rasterization.

    Returns:
        (H, W) int64 image of Gaussian indices, -1 where no splat wins.
    """
    height, width = footprints.height, footprints.width
    winners = np.full((height, width), -1, dtype=np.int64)
    m = len(footprints)
    if m == 0:
        return winners

    order = np.argsort(footprints.depth, kind="stable")
    mean = footprints.mean_px[order]
    depth_sorted_gaussians = footprints.gaussian_index[order]
    opacity = footprints.opacity[order]
    cov = footprints.cov_px[order]
    a_cov = cov[:, 0, 0]
    b_cov = cov[:, 0, 1]
    c_cov = cov[:, 1, 1]
    det = a_cov * c_cov - b_cov * b_cov
    conic_a = c_cov / det
    conic_b = -b_cov / det
    conic_c = a_cov / det

    half_trace = 0.5 * (a_cov + c_cov)
    radius = 3.0 * np.sqrt(half_trace + np.sqrt(
        np.square(0.5 * (a_cov - c_cov)) + b_cov * b_cov))
    x_lo = np.clip(np.floor(mean[:, 0] - radius), 0, width).astype(np.int64)
    x_hi = np.clip(np.ceil(mean[:, 0] + radius), 0, width).astype(np.int64)
    y_lo = np.clip(np.floor(mean[:, 1] - radius), 0, height).astype(np.int64)
    y_hi = np.clip(np.ceil(mean[:, 1] + radius), 0, height).astype(np.int64)

    tiles_x = (width + tile_size - 1) // tile_size
    tiles_y = (height + tile_size - 1) // tile_size
    tile_lists = [[] for _ in range(tiles_x * tiles_y)]
    for i in range(m):
        if x_lo[i] >= x_hi[i] or y_lo[i] >= y_hi[i]:
            continue
        for ty in range(y_lo[i] // tile_size, (y_hi[i] - 1) // tile_size + 1):
            for tx in range(x_lo[i] // tile_size, (x_hi[i] - 1) // tile_size + 1):
                tile_lists[ty * tiles_x + tx].append(i)

    for ty in range(tiles_y):
        y0 = ty * tile_size
        y1 = min(y0 + tile_size, height)
        for tx in range(tiles_x):
            splats = tile_lists[ty * tiles_x + tx]
            if not splats:
                continue
            sel = np.asarray(splats, dtype=np.int64)  # already depth-ordered
            x0 = tx * tile_size
            x1 = min(x0 + tile_size, width)
            xs = np.arange(x0, x1, dtype=np.float64) + 0.5
            ys = np.arange(y0, y1, dtype=np.float64) + 0.5
            dx = xs[None, :, None] - mean[sel, 0][None, None, :]
            dy = ys[:, None, None] - mean[sel, 1][None, None, :]
            q = (conic_a[sel] * dx * dx
                 + 2.0 * conic_b[sel] * dx * dy
                 + conic_c[sel] * dy * dy)
            alpha = opacity[sel] * np.exp(-0.5 * q)
            alpha[q > FOOTPRINT_CUTOFF_Q] = 0.0

            hit = alpha >= alpha_threshold
            any_hit = hit.any(axis=2)
            first_hit = hit.argmax(axis=2)

            one_minus = 1.0 - alpha
            trans_before = np.cumprod(one_minus, axis=2)
            trans_before = np.concatenate(
                [np.ones_like(trans_before[:, :, :1]), trans_before[:, :, :-1]], axis=2)
            weight = alpha * trans_before
            trans_final = trans_before[:, :, -1] * one_minus[:, :, -1]
            fallback = (~any_hit) & (trans_final < 0.5)
            best_weight = weight.argmax(axis=2)

            col = np.where(any_hit, first_hit, best_weight)
            winner = np.where(any_hit | fallback, sel[col], -1)
            winners[y0:y1, x0:x1] = np.where(
                winner >= 0, depth_sorted_gaussians[np.clip(winner, 0, None)], -1)
    return winners


@dataclass
class ViewVotes:
    """Aggregated (gaussian, class) vote counts from one view."""

    gaussian_index: np.ndarray
    class_id: np.ndarray
    count: np.ndarray

    def as_dict(self):
        return {(int(g), int(c)): int(n)
                for g, c, n in zip(self.gaussian_index, self.class_id, self.count)}


def votes_from_winners(winners, mask):
    """Collapse a winner image and a material mask into unique vote triples."""
    valid = (winners >= 0) & (mask.class_ids != UNKNOWN_CLASS)
    pairs = np.stack([winners[valid], mask.class_ids[valid].astype(np.int64)], axis=1)
    if pairs.shape[0] == 0:
        empty = np.empty(0, dtype=np.int64)
        return ViewVotes(empty, empty.copy(), empty.copy())
    uniq, counts = np.unique(pairs, axis=0, return_counts=True)
    return ViewVotes(uniq[:, 0], uniq[:, 1], counts)


def rasterize_votes(footprints, mask, alpha_threshold=DEFAULT_ALPHA_THRESHOLD,
                    tile_size=TILE_SIZE):
    """Collect per-pixel class votes for one view.

    Raises:
        ShapeError: the mask does not match the footprint image size.
    """
    if mask.class_ids.shape != (footprints.height, footprints.width):
        raise ShapeError(
            f"mask {mask.class_ids.shape} does not match image "
            f"({footprints.height}, {footprints.width})")
    winners = rasterize_winners(footprints, alpha_threshold, tile_size)
    return votes_from_winners(winners, mask)


@dataclass
class GaussianVotes:
    """Per-Gaussian class-vote histograms accumulated over views.

    Stored as a dense (n_gaussians, n_seen_classes) matrix whose columns are
    created lazily as new classes appear, so memory stays proportional to
    the classes actually present rather than all 256.
    """

    n_gaussians: int
    counts: np.ndarray = None
    class_columns: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    def __post_init__(self):
        if self.counts is None:
            self.counts = np.zeros((self.n_gaussians, 0), dtype=np.int64)

    def _column(self, class_id):
        hits = np.nonzero(self.class_columns == class_id)[0]
        if hits.size:
            return int(hits[0])
        self.class_columns = np.append(self.class_columns, class_id)
        self.counts = np.concatenate(
            [self.counts, np.zeros((self.n_gaussians, 1), dtype=np.int64)], axis=1)
        return self.counts.shape[1] - 1

    def add(self, view_votes):
        for class_id in np.unique(view_votes.class_id):
            col = self._column(int(class_id))
            sel = view_votes.class_id == class_id
            np.add.at(self.counts[:, col], view_votes.gaussian_index[sel],
                      view_votes.count[sel])

    def histogram(self, gaussian_index):
        """Vote histogram for one splat as a {class_id: count} dict."""
        row = self.counts[gaussian_index]
        return {int(c): int(n) for c, n in zip(self.class_columns, row) if n > 0}

    def total_votes(self):
        return int(self.counts.sum())


def aggregate_labels(votes):
    """Majority class per Gaussian; ties break to the lowest class ID and
    splats with no votes stay unlabeled (255)."""
    labels = np.full(votes.n_gaussians, UNKNOWN_CLASS, dtype=np.uint8)
    if votes.counts.shape[1] == 0:
        return labels
    order = np.argsort(votes.class_columns)
    counts = votes.counts[:, order]
    classes = votes.class_columns[order]
    voted = counts.sum(axis=1) > 0
    labels[voted] = classes[counts[voted].argmax(axis=1)].astype(np.uint8)
    return labels


def accumulate_votes(cloud, views, alpha_threshold=DEFAULT_ALPHA_THRESHOLD,
                     threads=1, tile_size=TILE_SIZE):
    """Project and rasterize every (camera, mask) view, merging the votes.

    Views are processed independently (optionally across ``threads``) and
    merged in list order; integer vote counts make the merge order
    irrelevant, so results are identical for any thread count.

    Raises:
        InputError: the view list is empty.
    """
    if not views:
        raise InputError("no views to accumulate votes from")

    def run_view(pair):
        camera, mask = pair
        footprints = project_splats(cloud, camera)
        return rasterize_votes(footprints, mask, alpha_threshold, tile_size)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_view, views))
    else:
        results = [run_view(pair) for pair in views]

    votes = GaussianVotes(n_gaussians=len(cloud))
    for view_votes in results:
        votes.add(view_votes)
    return votes
