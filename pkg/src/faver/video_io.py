"""Frame access for YUV4MPEG2 and raw planar YUV files, plus rescaling helpers.

Only 8-bit 4:2:0 and 4:4:4 content is decoded. Frames are read lazily by
index; a :class:`VideoSource` holds no open file handle, so it can be shared
between worker processes and threads.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import ndimage

from .errors import EmptyPlanError, FormatError, UnsupportedFormatError

Y4M_MAGIC = b"YUV4MPEG2"
MIN_DIMENSION = 16

# Y4M colorspace tags mapped to the two layouts we decode.
_Y4M_CHROMA = {
    "420": "420",
    "420jpeg": "420",
    "420mpeg2": "420",
    "420paldv": "420",
    "444": "444",
}

_RAW_PIXFMT = {
    "yuv420p": "420",
    "i420": "420",
    "420": "420",
    "yuv444p": "444",
    "i444": "444",
    "444": "444",
}

DOWNSCALE_SIGMA = 0.5


@dataclass
class PlanarFrame:
    y: np.ndarray
    u: np.ndarray
    v: np.ndarray
    chroma_subsampling: str = "420"

    @property
    def height(self) -> int:
        return self.y.shape[0]

    @property
    def width(self) -> int:
        return self.y.shape[1]


@dataclass
class VideoSource:
    path: str
    width: int
    height: int
    framerate: Fraction
    num_frames: int
    pixel_format: str  # "420" or "444"
    colorspace: str = ""
    container: str = "raw"
    # Byte offset of each frame's Y plane.
    frame_offsets: list[int] = field(default_factory=list, repr=False)

    def __post_init__(self) -> None:
        if self.framerate <= 0:
            raise FormatError(f"{self.path}: framerate must be positive")
        if self.width < MIN_DIMENSION or self.height < MIN_DIMENSION:
            raise FormatError(
                f"{self.path}: {self.width}x{self.height} is below the "
                f"{MIN_DIMENSION}x{MIN_DIMENSION} minimum"
            )
        if self.num_frames < 1:
            raise FormatError(f"{self.path}: no frames")

    @property
    def chroma_shape(self) -> tuple[int, int]:
        return chroma_shape(self.height, self.width, self.pixel_format)

    @property
    def frame_bytes(self) -> int:
        ch, cw = self.chroma_shape
        return self.width * self.height + 2 * ch * cw

    @property
    def duration(self) -> float:
        return float(self.num_frames / self.framerate)


def chroma_shape(height: int, width: int, pixel_format: str) -> tuple[int, int]:
    if pixel_format == "420":
        return (height + 1) // 2, (width + 1) // 2
    if pixel_format == "444":
        return height, width
    raise UnsupportedFormatError(f"pixel format {pixel_format!r}")


def _parse_rate(token: str) -> Fraction:
    try:
        num, den = token.split(":")
        rate = Fraction(int(num), int(den))
    except (ValueError, ZeroDivisionError) as exc:
        raise FormatError(f"bad frame rate {token!r}") from exc
    if rate <= 0:
        raise FormatError(f"bad frame rate {token!r}")
    return rate


def parse_y4m_header(line: bytes) -> dict:
    """Parse the stream header line (without the trailing newline)."""
    parts = line.split(b" ")
    if parts[0] != Y4M_MAGIC:
        raise FormatError("missing YUV4MPEG2 signature")
    info: dict = {"colorspace": "420"}
    for raw in parts[1:]:
        if not raw:
            continue
        tag, value = chr(raw[0]), raw[1:].decode("ascii", errors="replace")
        if tag == "W":
            info["width"] = int(value)
        elif tag == "H":
            info["height"] = int(value)
        elif tag == "F":
            info["framerate"] = _parse_rate(value)
        elif tag == "C":
            info["colorspace"] = value
        elif tag in "IAX":
            info[tag] = value
    for key in ("width", "height", "framerate"):
        if key not in info:
            raise FormatError(f"header lacks {key}")
    return info


def open_y4m(path: str | os.PathLike) -> VideoSource:
    path = os.fspath(path)
    size = os.path.getsize(path)
    with open(path, "rb") as fh:
        header = fh.readline(4096)
        if not header.endswith(b"\n"):
            raise FormatError(f"{path}: unterminated stream header")
        try:
            info = parse_y4m_header(header[:-1])
        except ValueError as exc:
            raise FormatError(f"{path}: {exc}") from exc
        colorspace = info["colorspace"]
        if colorspace not in _Y4M_CHROMA:
            raise UnsupportedFormatError(f"{path}: colorspace {colorspace!r} not supported")
        pix = _Y4M_CHROMA[colorspace]
        ch, cw = chroma_shape(info["height"], info["width"], pix)
        frame_bytes = info["width"] * info["height"] + 2 * ch * cw

        offsets = []
        pos = fh.tell()
        while pos < size:
            fh.seek(pos)
            marker = fh.readline(1024)
            if not marker.startswith(b"FRAME") or not marker.endswith(b"\n"):
                raise FormatError(f"{path}: bad frame marker at byte {pos}")
            start = pos + len(marker)
            if start + frame_bytes > size:
                raise FormatError(f"{path}: truncated payload in frame {len(offsets)}")
            offsets.append(start)
            pos = start + frame_bytes

    if not offsets:
        raise FormatError(f"{path}: no frames")
    return VideoSource(
        path=path,
        width=info["width"],
        height=info["height"],
        framerate=info["framerate"],
        num_frames=len(offsets),
        pixel_format=pix,
        colorspace=colorspace,
        container="y4m",
        frame_offsets=offsets,
    )


def open_raw_yuv(
    path: str | os.PathLike,
    width: int,
    height: int,
    framerate: Fraction | float | str,
    pixel_format: str = "yuv420p",
) -> VideoSource:
    path = os.fspath(path)
    pix = _RAW_PIXFMT.get(str(pixel_format).lower())
    if pix is None:
        raise UnsupportedFormatError(f"pixel format {pixel_format!r} not supported")
    if isinstance(framerate, str) and ":" in framerate:
        rate = _parse_rate(framerate)
    else:
        rate = Fraction(framerate).limit_denominator(1001 * 1000)
    ch, cw = chroma_shape(height, width, pix)
    frame_bytes = width * height + 2 * ch * cw
    size = os.path.getsize(path)
    if size == 0 or size % frame_bytes:
        raise FormatError(
            f"{path}: {size} bytes is not a multiple of the {frame_bytes}-byte frame size"
        )
    n = size // frame_bytes
    return VideoSource(
        path=path,
        width=width,
        height=height,
        framerate=rate,
        num_frames=n,
        pixel_format=pix,
        container="raw",
        frame_offsets=[i * frame_bytes for i in range(n)],
    )


def open_video(path: str | os.PathLike, **raw_geometry) -> VideoSource:
    """Open ``path`` as Y4M when it carries the signature, else as raw YUV."""
    with open(path, "rb") as fh:
        magic = fh.read(len(Y4M_MAGIC))
    if magic == Y4M_MAGIC:
        return open_y4m(path)
    missing = [k for k in ("width", "height", "framerate") if raw_geometry.get(k) is None]
    if missing:
        raise FormatError(f"{path}: raw YUV input needs {', '.join(missing)}")
    return open_raw_yuv(path, **raw_geometry)


def read_frame(source: VideoSource, index: int) -> PlanarFrame:
    if not 0 <= index < source.num_frames:
        raise IndexError(f"frame {index} outside [0, {source.num_frames})")
    ch, cw = source.chroma_shape
    ny = source.width * source.height
    nc = ch * cw
    with open(source.path, "rb") as fh:
        fh.seek(source.frame_offsets[index])
        buf = fh.read(ny + 2 * nc)
    if len(buf) != ny + 2 * nc:
        raise FormatError(f"{source.path}: short read in frame {index}")
    raw = np.frombuffer(buf, dtype=np.uint8)
    y = raw[:ny].reshape(source.height, source.width).astype(np.float64)
    u = raw[ny : ny + nc].reshape(ch, cw).astype(np.float64)
    v = raw[ny + nc :].reshape(ch, cw).astype(np.float64)
    return PlanarFrame(y=y, u=u, v=v, chroma_subsampling=source.pixel_format)


def read_luma(source: VideoSource, index: int) -> np.ndarray:
    """Read only the Y plane of one frame."""
    if not 0 <= index < source.num_frames:
        raise IndexError(f"frame {index} outside [0, {source.num_frames})")
    ny = source.width * source.height
    with open(source.path, "rb") as fh:
        fh.seek(source.frame_offsets[index])
        buf = fh.read(ny)
    if len(buf) != ny:
        raise FormatError(f"{source.path}: short read in frame {index}")
    return np.frombuffer(buf, dtype=np.uint8).reshape(source.height, source.width).astype(np.float64)


def _frame_payload(frame: PlanarFrame) -> bytes:
    parts = []
    for plane in (frame.y, frame.u, frame.v):
        if np.any(plane < 0) or np.any(plane > 255):
            raise ValueError("samples outside the 8-bit range")
        parts.append(np.rint(plane).astype(np.uint8).tobytes())
    return b"".join(parts)


def write_raw_yuv(path: str | os.PathLike, frames: Sequence[PlanarFrame]) -> None:
    with open(path, "wb") as fh:
        for frame in frames:
            fh.write(_frame_payload(frame))


def write_y4m(
    path: str | os.PathLike,
    frames: Sequence[PlanarFrame],
    framerate: Fraction | int,
) -> None:
    first = frames[0]
    rate = Fraction(framerate)
    tag = "420jpeg" if first.chroma_subsampling == "420" else "444"
    header = (
        f"YUV4MPEG2 W{first.width} H{first.height} "
        f"F{rate.numerator}:{rate.denominator} Ip A1:1 C{tag}\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        for frame in frames:
            fh.write(b"FRAME\n")
            fh.write(_frame_payload(frame))


def gaussian_taps(sigma: float, radius: int | None = None) -> np.ndarray:
    """Unit-sum 1-D Gaussian taps on integer offsets ``-radius..radius``."""
    if radius is None:
        radius = int(math.ceil(3 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    g = np.exp(-0.5 * (x / sigma) ** 2)
    return g / g.sum()


def downscale_kernel() -> np.ndarray:
    """2-D smoothing kernel applied before 2:1 decimation."""
    g = gaussian_taps(DOWNSCALE_SIGMA)
    return np.outer(g, g)


def downscale_half(plane: np.ndarray) -> np.ndarray:
    """Gaussian smoothing (symmetric borders) then keep rows/cols 0, 2, 4, ..."""
    plane = np.asarray(plane, dtype=np.float64)
    if plane.ndim != 2 or min(plane.shape) < 2:
        raise ValueError("downscale_half needs a 2-D plane of at least 2x2")
    g = gaussian_taps(DOWNSCALE_SIGMA)
    smooth = ndimage.correlate1d(plane, g, axis=0, mode="reflect")
    smooth = ndimage.correlate1d(smooth, g, axis=1, mode="reflect")
    return smooth[::2, ::2]


def _linear_axis(n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # Pixel-centre alignment, clamped to the edge samples.
    scale = n_in / n_out
    pos = (np.arange(n_out) + 0.5) * scale - 0.5
    pos = np.clip(pos, 0.0, n_in - 1)
    i0 = np.floor(pos).astype(np.intp)
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, pos - i0


def resize_to_height(plane: np.ndarray, target_height: int = 512) -> np.ndarray:
    """Bilinear resize preserving aspect ratio; never upscales."""
    if target_height < MIN_DIMENSION:
        raise ValueError(f"target height must be at least {MIN_DIMENSION}")
    plane = np.asarray(plane, dtype=np.float64)
    h, w = plane.shape
    if h <= target_height:
        return plane
    new_w = max(1, int(round(w * target_height / h)))
    r0, r1, rw = _linear_axis(h, target_height)
    rows = plane[r0] * (1.0 - rw)[:, None] + plane[r1] * rw[:, None]
    c0, c1, cw = _linear_axis(w, new_w)
    return rows[:, c0] * (1.0 - cw) + rows[:, c1] * cw


@dataclass
class SamplingPlan:
    mode: str  # "per_second" or "stride"
    stride: int | None
    spatial_frame_indices: list[int]
    temporal_window_starts: list[tuple[int, int]]

    @property
    def tag(self) -> str:
        return "1s" if self.mode == "per_second" else str(self.stride)


def parse_stride(value: str | int) -> int | None:
    """``"1s"`` means one window per second (``None``); otherwise a frame stride."""
    if isinstance(value, str) and value.strip().lower() in ("1s", "per_second", "second"):
        return None
    n = int(value)
    if n < 1:
        raise ValueError("stride must be a positive frame count")
    return n


def per_second_indices(framerate: Fraction, num_frames: int) -> list[int]:
    out = []
    k = 0
    while True:
        idx = math.floor(k * Fraction(framerate))
        if idx >= num_frames:
            return out
        out.append(idx)
        k += 1


def build_sampling_plan(
    source: VideoSource, stride: str | int | None, filter_length: int
) -> SamplingPlan:
    """Frame indices for spatial features and start frames for temporal windows.

    Spatial frames are always taken once per second. Temporal windows start
    once per second (``stride`` of ``None``/``"1s"``) or every ``stride``
    frames; windows running past the last frame are dropped.
    """
    if isinstance(stride, str) or stride is None:
        stride = parse_stride(stride or "1s")
    n = source.num_frames
    spatial = per_second_indices(source.framerate, n)
    if stride is None:
        starts = spatial
    else:
        starts = list(range(0, n, stride))
    windows = [(s, filter_length) for s in starts if s + filter_length <= n]
    if not windows:
        raise EmptyPlanError(
            f"{source.path}: {n} frames cannot hold a {filter_length}-frame window"
        )
    return SamplingPlan(
        mode="per_second" if stride is None else "stride",
        stride=stride,
        spatial_frame_indices=spatial,
        temporal_window_starts=windows,
    )
