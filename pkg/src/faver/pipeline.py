"""Video-level feature extraction: spatial + temporal = 748 features."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spatial import extract_spatial
from .temporal import build_filter_bank, extract_temporal
from .video_io import VideoSource, build_sampling_plan, read_frame, read_luma, resize_to_height

TEMPORAL_HEIGHT = 512


@dataclass
class ExtractConfig:
    wavelet: str = "bior22"
    stride: str = "1s"  # "1s" or a frame count such as "16"
    temporal_height: int = TEMPORAL_HEIGHT


class _LumaCache:
    """Resized luma frames; keeps only the last ``span`` frame indices."""

    def __init__(self, source: VideoSource, height: int, span: int):
        self.source = source
        self.height = height
        self.span = span
        self.newest = -1
        self.frames: dict[int, np.ndarray] = {}

    def __call__(self, index: int) -> np.ndarray:
        plane = self.frames.get(index)
        if plane is None:
            plane = resize_to_height(read_luma(self.source, index), self.height)
            self.frames[index] = plane
        if index > self.newest:
            self.newest = index
            for k in [k for k in self.frames if k <= index - self.span]:
                del self.frames[k]
        return plane


def extract_video(source: VideoSource, cfg: ExtractConfig | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Return the (272,) spatial and (476,) temporal vectors of one video."""
    cfg = cfg or ExtractConfig()
    bank = build_filter_bank(cfg.wavelet)
    plan = build_sampling_plan(source, cfg.stride, bank.filter_length)

    spatial = extract_spatial(read_frame(source, i) for i in plan.spatial_frame_indices)

    cache = _LumaCache(source, cfg.temporal_height, bank.filter_length)
    temporal = extract_temporal(cache, bank, plan)
    return spatial, temporal
