"""Evaluation metrics: point matching, reflectivity error, PSNR, SSIM.

Matching associates each simulated point with its nearest reference point
inside a radius (several simulated points may share one reference point;
unmatched points are counted, not dropped silently). Reflectivity error is
reported as mean absolute error and median absolute error, the median taken
as the lower of the two middle values for even counts. Image metrics follow
the standard definitions for 8-bit data: PSNR against peak 255 with +inf
for identical images, SSIM with an 11x11 Gaussian window (sigma 1.5,
K1 = 0.01, K2 = 0.03), valid-mode windowing, averaged over channels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve2d
from scipy.spatial import cKDTree

from .errors import InputError, ShapeError

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
DEFAULT_MATCH_RADIUS = 0.2


@dataclass
class PointMatches:
    """Nearest-reference pairing of a simulated cloud."""

    sim_index: np.ndarray
    ref_index: np.ndarray
    distance: np.ndarray
    n_sim: int
    n_ref: int

    def __len__(self):
        return self.sim_index.shape[0]

    @property
    def n_unmatched(self):
        return self.n_sim - len(self)

    @property
    def match_fraction(self):
        return len(self) / self.n_sim if self.n_sim else 0.0


def match_points(sim_points, ref_points, radius=DEFAULT_MATCH_RADIUS):
    """Pair each simulated point with its nearest reference point within
    ``radius`` meters.

    Raises:
        InputError: either cloud is empty, or radius is not positive.
    """
    sim_points = np.asarray(sim_points, dtype=np.float64).reshape(-1, 3)
    ref_points = np.asarray(ref_points, dtype=np.float64).reshape(-1, 3)
    if sim_points.shape[0] == 0 or ref_points.shape[0] == 0:
        raise InputError("cannot match empty point clouds")
    if not radius > 0.0:
        raise InputError(f"match radius must be positive, got {radius}")
    tree = cKDTree(ref_points)
    distance, index = tree.query(sim_points, k=1, distance_upper_bound=radius)
    matched = np.isfinite(distance)
    return PointMatches(
        sim_index=np.nonzero(matched)[0],
        ref_index=index[matched].astype(np.int64),
        distance=distance[matched],
        n_sim=sim_points.shape[0],
        n_ref=ref_points.shape[0],
    )


def reflectivity_error(sim_values, ref_values):
    """(MAE, median absolute error) between paired reflectivity values.

    The median uses the lower of the two middle values for even counts.

    Raises:
        InputError: no pairs.
    """
    sim_values = np.asarray(sim_values, dtype=np.float64).reshape(-1)
    ref_values = np.asarray(ref_values, dtype=np.float64).reshape(-1)
    if sim_values.shape[0] != ref_values.shape[0]:
        raise ShapeError("paired value arrays differ in length")
    if sim_values.shape[0] == 0:
        raise InputError("no matched pairs to evaluate")
    errors = np.abs(sim_values - ref_values)
    mae = float(errors.mean())
    ordered = np.sort(errors)
    median = float(ordered[(ordered.shape[0] - 1) // 2])
    return mae, median


def _check_image_pair(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ShapeError(f"image shapes differ: {a.shape} vs {b.shape}")
    if a.ndim == 2:
        a = a[:, :, None]
        b = b[:, :, None]
    if a.ndim != 3:
        raise ShapeError(f"images must be (H, W) or (H, W, C), got {a.shape}")
    if a.dtype != np.uint8 or b.dtype != np.uint8:
        raise InputError("image metrics expect 8-bit (uint8) inputs")
    return a, b


def psnr(a, b):
    """Peak signal-to-noise ratio in dB for 8-bit images; +inf if identical."""
    a, b = _check_image_pair(a, b)
    diff = a.astype(np.float64) - b.astype(np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0 * 255.0 / mse)


def _gaussian_window(size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g = np.exp(-(coords * coords) / (2.0 * sigma * sigma))
    window = np.outer(g, g)
    return window / window.sum()


def ssim(a, b):
    """Mean structural similarity for 8-bit images (averaged over channels).

    Uses the standard 11x11 Gaussian window with sigma 1.5 and valid-mode
    windowing, so images must be at least 11x11.
    """
    a, b = _check_image_pair(a, b)
    if a.shape[0] < SSIM_WINDOW or a.shape[1] < SSIM_WINDOW:
        raise InputError(f"images must be at least {SSIM_WINDOW}x{SSIM_WINDOW} for SSIM")
    window = _gaussian_window()
    c1 = (SSIM_K1 * 255.0) ** 2
    c2 = (SSIM_K2 * 255.0) ** 2
    channel_scores = []
    for ch in range(a.shape[2]):
        x = a[:, :, ch].astype(np.float64)
        y = b[:, :, ch].astype(np.float64)
        mu_x = convolve2d(x, window, mode="valid")
        mu_y = convolve2d(y, window, mode="valid")
        var_x = convolve2d(x * x, window, mode="valid") - mu_x * mu_x
        var_y = convolve2d(y * y, window, mode="valid") - mu_y * mu_y
        cov_xy = convolve2d(x * y, window, mode="valid") - mu_x * mu_y
        score = ((2.0 * mu_x * mu_y + c1) * (2.0 * cov_xy + c2)) \
            / ((mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2))
        channel_scores.append(score.mean())
    return float(np.mean(channel_scores))
