"""Synthetic videos and feature datasets for tests, scripts and benchmarks."""

from __future__ import annotations

import numpy as np

from . import schema
from .regression import FeatureRecord
from .video_io import PlanarFrame


def smooth_noise(rng: np.random.Generator, shape: tuple[int, int], blur: float = 1.5) -> np.ndarray:
    """Gaussian-blurred white noise rescaled to roughly [16, 235]."""
    from scipy.ndimage import gaussian_filter

    n = gaussian_filter(rng.normal(size=shape), blur, mode="wrap")
    n = (n - n.mean()) / (n.std() + 1e-12)
    return np.clip(128 + 40 * n, 16, 235)


def translating_noise(
    height: int,
    width: int,
    n_frames: int,
    speed: float = 1.0,
    seed: int = 0,
    chroma: str = "420",
) -> list[PlanarFrame]:
    """A textured plane panning horizontally by ``speed`` pixels per frame."""
    rng = np.random.default_rng(seed)
    span = int(np.ceil(speed * n_frames)) + width + 2
    canvas = smooth_noise(rng, (height, span))
    ch, cw = ((height + 1) // 2, (width + 1) // 2) if chroma == "420" else (height, width)
    u = np.full((ch, cw), 128.0)
    v = np.full((ch, cw), 128.0)
    frames = []
    for t in range(n_frames):
        x = speed * t
        i = int(np.floor(x))
        f = x - i
        y = (1 - f) * canvas[:, i : i + width] + f * canvas[:, i + 1 : i + 1 + width]
        frames.append(PlanarFrame(y=np.rint(y), u=u, v=v, chroma_subsampling=chroma))
    return frames


def drop_frames(frames: list[PlanarFrame], factor: int) -> list[PlanarFrame]:
    """Keep every ``factor``-th frame and repeat it to preserve duration."""
    out = []
    for i in range(0, len(frames), factor):
        out.extend([frames[i]] * min(factor, len(frames) - i))
    return out


def duplicate_frames(frames: list[PlanarFrame], factor: int) -> list[PlanarFrame]:
    """Repeat each frame ``factor`` times (same content at a higher frame rate)."""
    return [f for f in frames for _ in range(factor)]


def constructive_records(
    n_contents: int = 20,
    versions: int = 4,
    seed: int = 0,
    informative: int = 12,
    noise: float = 0.05,
    mos_noise: float = 0.0,
) -> list[FeatureRecord]:
    """Records whose MOS is a fixed monotone function of a latent quality.

    A handful of spatial and temporal dimensions carry the latent quality
    (plus small noise); the rest are nuisance noise or constants.
    """
    rng = np.random.default_rng(seed)
    n = n_contents * versions
    latent = rng.uniform(-1, 1, n)
    feats = rng.normal(size=(n, schema.N_TOTAL))
    feats[:, ::7] = 3.0  # constant columns, like fallback features
    s_dims = rng.choice(schema.N_SPATIAL, informative, replace=False)
    t_dims = schema.N_SPATIAL + rng.choice(schema.N_TEMPORAL, informative, replace=False)
    for d in np.concatenate([s_dims, t_dims]):
        feats[:, d] = rng.uniform(0.5, 2.0) * latent + noise * rng.normal(size=n)
    mos = 50 + 30 * np.tanh(1.5 * latent) + mos_noise * rng.normal(size=n)
    records = []
    for k in range(n):
        records.append(
            FeatureRecord(
                video_id=f"c{k // versions:02d}_v{k % versions}",
                content_id=f"c{k // versions:02d}",
                spatial=feats[k, : schema.N_SPATIAL],
                temporal=feats[k, schema.N_SPATIAL :],
                mos=float(mos[k]),
                framerate=float((24, 30, 60, 120)[k % 4]),
                wavelet="bior22",
            )
        )
    return records


def null_records(n_contents: int = 20, versions: int = 4, seed: int = 0) -> list[FeatureRecord]:
    """Records whose MOS is noise independent of the features."""
    recs = constructive_records(n_contents, versions, seed=seed)
    rng = np.random.default_rng(seed + 1)
    for r in recs:
        r.mos = float(rng.uniform(20, 80))
    return recs
