"""Temporal branch: 3-level wavelet-packet bandpass filters applied along time.

Each family's seven bandpass filters are the equivalent FIR filters of the
level-3 wavelet packet leaves, built by cascading the base filters with
dyadic upsampling. The all-lowpass leaf is kept separately as ``dc_filter``
and never used for features.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .nss import N_FEATURES, nss34_or_fallback
from .video_io import SamplingPlan, downscale_half

N_SUBBANDS = 7
N_LEVELS = 3
N_TEMPORAL = N_FEATURES * N_SUBBANDS * 2  # 476

_S2 = math.sqrt(2.0)
_S3 = math.sqrt(3.0)

# Decomposition (analysis) filters, convolution order.
WAVELETS: dict[str, tuple[np.ndarray, np.ndarray]] = {
    "haar": (
        np.array([1.0, 1.0]) / _S2,
        np.array([-1.0, 1.0]) / _S2,
    ),
    "db2": (
        np.array([1 - _S3, 3 - _S3, 3 + _S3, 1 + _S3]) / (4 * _S2),
        np.array([-(1 + _S3), 3 + _S3, -(3 - _S3), 1 - _S3]) / (4 * _S2),
    ),
    # bior2.2: 6-tap lowpass and 4-tap highpass, each with one leading zero
    "bior22": (
        np.array([0.0, -1.0, 2.0, 6.0, 2.0, -1.0]) * _S2 / 8,
        np.array([0.0, 1.0, -2.0, 1.0]) * _S2 / 4,
    ),
}


def _upsample(taps: np.ndarray, factor: int) -> np.ndarray:
    out = np.zeros((len(taps) - 1) * factor + 1)
    out[::factor] = taps
    return out


def packet_leaf(lo: np.ndarray, hi: np.ndarray, path: str) -> np.ndarray:
    """Equivalent filter of one packet leaf, e.g. ``path="LHH"``.

    The first letter is the stage run at the full frame rate; stage ``i``
    is upsampled by ``2**i``.
    """
    taps = np.array([1.0])
    for level, branch in enumerate(path):
        base = lo if branch == "L" else hi
        taps = np.convolve(taps, _upsample(base, 2**level))
    return taps


def spectral_centroid(taps: np.ndarray, n_fft: int = 4096) -> float:
    """Energy-weighted mean frequency in cycles/sample, over [0, 0.5]."""
    mag2 = np.abs(np.fft.rfft(taps, n_fft)) ** 2
    freq = np.fft.rfftfreq(n_fft)
    return float(np.sum(freq * mag2) / np.sum(mag2))


@dataclass
class FilterBank:
    family: str
    paths: tuple[str, ...]
    filters: np.ndarray  # (7, filter_length), lowest band first
    dc_filter: np.ndarray  # all-lowpass leaf, same length

    @property
    def filter_length(self) -> int:
        return self.filters.shape[1]


def build_filter_bank(family: str) -> FilterBank:
    family = family.lower()
    if family not in WAVELETS:
        raise ValueError(f"unknown wavelet family {family!r}; expected one of {sorted(WAVELETS)}")
    lo, hi = WAVELETS[family]
    paths = ["".join(p) for p in itertools.product("LH", repeat=N_LEVELS)]
    leaves = {p: packet_leaf(lo, hi, p) for p in paths}
    length = max(len(t) for t in leaves.values())
    padded = {p: np.pad(t, (0, length - len(t))) for p, t in leaves.items()}

    # Drop tap positions that are zero in every leaf; they only delay the window.
    stack = np.array([padded[p] for p in paths])
    nonzero = np.flatnonzero(np.any(stack != 0.0, axis=0))
    lo_idx, hi_idx = nonzero[0], nonzero[-1] + 1
    padded = {p: t[lo_idx:hi_idx] for p, t in padded.items()}

    dc_path = "L" * N_LEVELS
    band_paths = sorted((p for p in paths if p != dc_path), key=lambda p: spectral_centroid(padded[p]))
    return FilterBank(
        family=family,
        paths=tuple(band_paths),
        filters=np.array([padded[p] for p in band_paths]),
        dc_filter=padded[dc_path],
    )


def temporal_subband_window(
    frames: Sequence[np.ndarray], bank: FilterBank, start: int = 0
) -> np.ndarray:
    """Per-pixel inner products of each bandpass filter with one window of frames.

    Returns an array of shape (7, h, w) with
    ``out[k] = sum_t bank.filters[k, t] * frames[start + t]``.
    """
    length = bank.filter_length
    if start < 0 or start + length > len(frames):
        raise IndexError(f"window [{start}, {start + length}) outside {len(frames)} frames")
    window = np.stack([np.asarray(frames[start + t], dtype=np.float64) for t in range(length)])
    # The filters sum to zero, so subtracting a reference frame leaves the
    # result unchanged while making static content give exact zeros.
    window -= window[0]
    h, w = window.shape[1:]
    out = bank.filters @ window.reshape(length, -1)
    return out.reshape(N_SUBBANDS, h, w)


def window_features(responses: np.ndarray) -> np.ndarray:
    """NSS-34 on each subband response at full and half scale: 476 values."""
    blocks = []
    for resp in responses:
        blocks.append(nss34_or_fallback(resp))
        blocks.append(nss34_or_fallback(downscale_half(resp)))
    return np.concatenate(blocks)


def extract_temporal(
    frames: Sequence[np.ndarray] | Callable[[int], np.ndarray],
    bank: FilterBank,
    plan: SamplingPlan,
) -> np.ndarray:
    """Mean over the plan's windows of the 476 temporal features.

    ``frames`` is either an indexable sequence of luma planes (already
    resized to the working height) or a callable returning plane ``i``.
    """
    windows = plan.temporal_window_starts
    if not windows:
        raise ValueError("sampling plan has no temporal windows")
    get = frames if callable(frames) else frames.__getitem__
    total = None
    for start, length in windows:
        if length != bank.filter_length:
            raise ValueError(f"plan window length {length} != filter length {bank.filter_length}")
        clip = [get(start + t) for t in range(length)]
        feats = window_features(temporal_subband_window(clip, bank, 0))
        total = feats if total is None else total + feats
    return total / len(windows)
