"""Spatial branch: NSS-34 on Y/U/V at two scales and on GM/LoG of the half-scale luma."""

from __future__ import annotations

from typing import Iterable

import numpy as np
from scipy import ndimage

from .nss import N_FEATURES, fallback_nss34, nss34_or_fallback
from .video_io import PlanarFrame, downscale_half

SOBEL_X = np.array([[1.0, 0.0, -1.0], [2.0, 0.0, -2.0], [1.0, 0.0, -1.0]])
SOBEL_Y = np.array([[1.0, 2.0, 1.0], [0.0, 0.0, 0.0], [-1.0, -2.0, -1.0]])
LOG_SIZE = 9
LOG_SIGMA = 1.5

#: Order of the eight 34-feature blocks in the spatial vector.
SPATIAL_BLOCKS = ("Y@1", "Y@0.5", "U@1", "U@0.5", "V@1", "V@0.5", "GM@0.5", "LoG@0.5")
N_SPATIAL = len(SPATIAL_BLOCKS) * N_FEATURES  # 272


def log_kernel(size: int = LOG_SIZE, sigma: float = LOG_SIGMA) -> np.ndarray:
    """Sampled Laplacian-of-Gaussian, shifted to sum to exactly zero."""
    r = size // 2
    y, x = np.mgrid[-r : r + 1, -r : r + 1].astype(np.float64)
    rr = x * x + y * y
    k = (rr - 2 * sigma**2) / (2 * np.pi * sigma**6) * np.exp(-rr / (2 * sigma**2))
    return k - k.mean()


def gradient_magnitude(plane: np.ndarray) -> np.ndarray:
    plane = np.asarray(plane, dtype=np.float64)
    if plane.ndim != 2 or min(plane.shape) < 3:
        raise ValueError("gradient_magnitude needs at least a 3x3 plane")
    gx = ndimage.convolve(plane, SOBEL_X, mode="reflect")
    gy = ndimage.convolve(plane, SOBEL_Y, mode="reflect")
    return np.hypot(gx, gy)


def log_map(plane: np.ndarray) -> np.ndarray:
    plane = np.asarray(plane, dtype=np.float64)
    if plane.ndim != 2 or min(plane.shape) < LOG_SIZE:
        raise ValueError(f"log_map needs at least a {LOG_SIZE}x{LOG_SIZE} plane")
    return ndimage.convolve(plane, log_kernel(), mode="reflect")


def spatial_frame_features(frame: PlanarFrame) -> np.ndarray:
    """The 272 spatial features of a single frame, in ``SPATIAL_BLOCKS`` order."""
    y_half = downscale_half(frame.y)
    blocks = [nss34_or_fallback(frame.y), nss34_or_fallback(y_half)]
    for chroma in (frame.u, frame.v):
        blocks.append(nss34_or_fallback(chroma))
        half = downscale_half(chroma) if min(chroma.shape) >= 2 else chroma
        blocks.append(nss34_or_fallback(half))
    blocks.append(nss34_or_fallback(gradient_magnitude(y_half)))
    if min(y_half.shape) >= LOG_SIZE:
        blocks.append(nss34_or_fallback(log_map(y_half)))
    else:
        blocks.append(fallback_nss34())
    return np.concatenate(blocks)


def extract_spatial(frames: Iterable[PlanarFrame]) -> np.ndarray:
    """Average of the per-frame spatial vectors, accumulated in input order."""
    total = None
    count = 0
    shape = None
    for frame in frames:
        if shape is None:
            shape = frame.y.shape
        elif frame.y.shape != shape:
            raise ValueError("frames differ in geometry")
        feats = spatial_frame_features(frame)
        total = feats if total is None else total + feats
        count += 1
    if count == 0:
        raise ValueError("extract_spatial needs at least one frame")
    return total / count
