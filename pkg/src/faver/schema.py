"""Feature layout of the 748-dim vector, ablation masks and the schema hash."""

from __future__ import annotations

import hashlib
import json

import numpy as np

from . import nss, spatial, temporal, video_io

N_SPATIAL = spatial.N_SPATIAL
N_TEMPORAL = temporal.N_TEMPORAL
N_TOTAL = N_SPATIAL + N_TEMPORAL
TEMPORAL_SCALES = ("1", "0.5")


def spatial_names() -> list[str]:
    return [f"spt_{blk}_{name}" for blk in spatial.SPATIAL_BLOCKS for name in nss.NSS34_NAMES]


def temporal_names() -> list[str]:
    return [
        f"tmp_b{band}@{scale}_{name}"
        for band in range(1, temporal.N_SUBBANDS + 1)
        for scale in TEMPORAL_SCALES
        for name in nss.NSS34_NAMES
    ]


def feature_names() -> list[str]:
    return spatial_names() + temporal_names()


def design_constants() -> dict:
    """Every constant that changes feature values; feeds the schema hash."""
    return {
        "mscn_c": nss.MSCN_C,
        "mscn_radius": nss.MSCN_RADIUS,
        "mscn_sigma": nss.MSCN_SIGMA,
        "mscn_variance": "two-pass, median-centred",
        "log_c": nss.LOG_C,
        "shape_grid": [nss.SHAPE_MIN, nss.SHAPE_MAX, nss.SHAPE_STEP],
        "min_fit_samples": nss.MIN_FIT_SAMPLES,
        "ggd_fallback": list(nss.GGD_FALLBACK),
        "aggd_fallback": list(nss.AGGD_FALLBACK),
        "rho_sentinel": nss.RHO_SENTINEL,
        "downscale_sigma": video_io.DOWNSCALE_SIGMA,
        "log_size": spatial.LOG_SIZE,
        "log_sigma": spatial.LOG_SIGMA,
        "temporal_height": 512,
        "temporal_luma_only": True,
        "wavelets": {k: [lo.tolist(), hi.tolist()] for k, (lo, hi) in temporal.WAVELETS.items()},
    }


def schema_hash() -> str:
    doc = {"names": feature_names(), "constants": design_constants()}
    blob = json.dumps(doc, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _spatial_block_indices(*blocks: str) -> np.ndarray:
    idx = []
    for blk in blocks:
        b = spatial.SPATIAL_BLOCKS.index(blk)
        idx.extend(range(b * nss.N_FEATURES, (b + 1) * nss.N_FEATURES))
    return np.array(sorted(idx), dtype=np.intp)


def subband_indices(band: int) -> np.ndarray:
    """Positions (within the 748 vector) of one subband's 68 temporal features."""
    if not 1 <= band <= temporal.N_SUBBANDS:
        raise ValueError(f"subband must be in 1..{temporal.N_SUBBANDS}")
    width = 2 * nss.N_FEATURES
    start = N_SPATIAL + (band - 1) * width
    return np.arange(start, start + width, dtype=np.intp)


_Y = ("Y@1", "Y@0.5")

ABLATIONS: dict[str, np.ndarray] = {
    "Y": _spatial_block_indices(*_Y),
    "YUV": _spatial_block_indices(*_Y, "U@1", "U@0.5", "V@1", "V@0.5"),
    "YGM": _spatial_block_indices(*_Y, "GM@0.5"),
    "YLOG": _spatial_block_indices(*_Y, "LoG@0.5"),
    "YGMLOG": _spatial_block_indices(*_Y, "GM@0.5", "LoG@0.5"),
    "FAVER-Spt": np.arange(N_SPATIAL, dtype=np.intp),
    "FAVER-Tmp": np.arange(N_SPATIAL, N_TOTAL, dtype=np.intp),
    "FAVER-All": np.arange(N_TOTAL, dtype=np.intp),
}


def ablation_mask(name: str) -> np.ndarray:
    if name not in ABLATIONS:
        raise KeyError(f"unknown ablation {name!r}; valid: {', '.join(ABLATIONS)}")
    return ABLATIONS[name]
