"""Reconstruction scoring: PSNR, SSIM, and scatterer-centroid error distances.

PSNR uses an MSE floor of one gray-level^2, so identical 8-bit images score
the finite cap 10*log10(255^2) = 48.13 dB instead of infinity. SSIM is the
windowed structural similarity on luminance with the standard stabilizers
C1 = (0.01*255)^2 and C2 = (0.03*255)^2. Centroids come from 4-connected
dark components and are matched one-to-one by minimum total distance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.optimize import linear_sum_assignment

from .errors import ShapeMismatchError, TooSmallError
from .reconstruct import luminance

PSNR_CAP_DB = 10.0 * np.log10(255.0**2)  # 48.13 dB for identical images

_SSIM_C1 = (0.01 * 255.0) ** 2
_SSIM_C2 = (0.03 * 255.0) ** 2

_FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])


@dataclass(frozen=True)
class CentroidSet:
    """Scatterer center estimates in room coordinates (meters)."""

    points: tuple
    source: str  # "ground-truth" or "extracted"


@dataclass(frozen=True)
class CentroidErrorStats:
    distances_cm: tuple
    mean_cm: float
    std_cm: float
    unmatched_count: int


@dataclass(frozen=True)
class EvaluationReport:
    psnr: float
    ssim: float
    centroid_errors: tuple  # cm
    mean_error: float  # cm
    std_error: float  # cm
    unmatched_count: int


def _check_pair(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ShapeMismatchError(f"image shapes differ: {a.shape} vs {b.shape}")


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB with an MSE floor of 1.0."""
    a = np.asarray(a)
    b = np.asarray(b)
    _check_pair(a, b)
    mse = float(np.mean((a.astype(float) - b.astype(float)) ** 2))
    return 10.0 * np.log10(255.0**2 / max(mse, 1.0))


def _box_mean(img: np.ndarray, w: int) -> np.ndarray:
    # Sliding-window means over all fully interior windows via integral image.
    s = np.zeros((img.shape[0] + 1, img.shape[1] + 1))
    s[1:, 1:] = np.cumsum(np.cumsum(img, axis=0), axis=1)
    return (s[w:, w:] - s[:-w, w:] - s[w:, :-w] + s[:-w, :-w]) / (w * w)


def ssim(a: np.ndarray, b: np.ndarray, window: int = 8) -> float:
    """Mean local structural similarity over sliding windows on luminance."""
    a = np.asarray(a)
    b = np.asarray(b)
    _check_pair(a, b)
    x = luminance(a)
    y = luminance(b)
    if min(x.shape) < window:
        raise TooSmallError(f"image side {min(x.shape)} smaller than window {window}")
    mu_x = _box_mean(x, window)
    mu_y = _box_mean(y, window)
    xx = _box_mean(x * x, window)
    yy = _box_mean(y * y, window)
    xy = _box_mean(x * y, window)
    mu_xy = mu_x * mu_y
    var_x = xx - mu_x * mu_x
    var_y = yy - mu_y * mu_y
    cov = xy - mu_xy
    num = (2.0 * mu_xy + _SSIM_C1) * (2.0 * cov + _SSIM_C2)
    den = (mu_x * mu_x + mu_y * mu_y + _SSIM_C1) * (var_x + var_y + _SSIM_C2)
    return float(np.mean(num / den))


def extract_centroids(image: np.ndarray,
                      room_extent: tuple[float, float, float] | tuple[float, float],
                      *, threshold: int = 128, min_pixels: int = 4) -> CentroidSet:
    """Centroids of dark 4-connected components, in meters.

    Pixels with luminance < threshold count as object; components smaller
    than min_pixels are discarded. Centroids average pixel centers, so they
    live on a continuous coordinate grid.
    """
    lum = luminance(np.asarray(image))
    mask = lum < threshold
    labels, count = ndimage.label(mask, structure=_FOUR_CONNECTED)
    if count == 0:
        return CentroidSet(points=(), source="extracted")
    lx, ly = room_extent[0], room_extent[1]
    rx, ry = lum.shape
    sizes = np.bincount(labels.ravel())
    points = []
    for lab in range(1, count + 1):
        if sizes[lab] < min_pixels:
            continue
        ii, jj = np.nonzero(labels == lab)
        x = (ii.mean() + 0.5) * lx / rx
        y = (jj.mean() + 0.5) * ly / ry
        points.append((float(x), float(y)))
    return CentroidSet(points=tuple(points), source="extracted")


def scene_centroids(scene) -> CentroidSet:
    """Exact box centers of a scene, as the ground-truth centroid set."""
    return CentroidSet(points=tuple(box.center_xy for box in scene.scatterers),
                       source="ground-truth")


def centroid_error(predicted: CentroidSet, truth: CentroidSet) -> CentroidErrorStats:
    """Optimal one-to-one matching over min(|P|, |T|) pairs, distances in cm."""
    p = np.asarray(predicted.points, dtype=float).reshape(-1, 2)
    t = np.asarray(truth.points, dtype=float).reshape(-1, 2)
    unmatched = abs(p.shape[0] - t.shape[0])
    if p.shape[0] == 0 or t.shape[0] == 0:
        return CentroidErrorStats((), 0.0, 0.0, unmatched)
    cost = np.linalg.norm(p[:, None, :] - t[None, :, :], axis=2)
    rows, cols = linear_sum_assignment(cost)
    dists = cost[rows, cols] * 100.0
    return CentroidErrorStats(
        distances_cm=tuple(float(d) for d in dists),
        mean_cm=float(dists.mean()),
        std_cm=float(dists.std()),
        unmatched_count=unmatched,
    )


def evaluate_pair(prediction: np.ndarray, truth: np.ndarray,
                  room_extent, *, ssim_window: int = 8) -> EvaluationReport:
    """Score one reconstruction against its ground-truth floor plan."""
    stats = centroid_error(
        extract_centroids(prediction, room_extent),
        extract_centroids(truth, room_extent),
    )
    return EvaluationReport(
        psnr=psnr(prediction, truth),
        ssim=ssim(prediction, truth, window=ssim_window),
        centroid_errors=stats.distances_cm,
        mean_error=stats.mean_cm,
        std_error=stats.std_cm,
        unmatched_count=stats.unmatched_count,
    )
