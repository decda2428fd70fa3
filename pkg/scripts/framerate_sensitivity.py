"""Compare temporal subband statistics of a pan at 120 fps and with frames dropped.

Prints, for each wavelet family and drop factor, the largest relative change of
the per-subband MSCN GGD spread.

    python3 scripts/framerate_sensitivity.py --factors 2 4 5
"""

import argparse
import tempfile
from pathlib import Path

import numpy as np

from faver.nss import NSS34_NAMES
from faver.pipeline import ExtractConfig, extract_video
from faver.synthetic import drop_frames, translating_noise
from faver.temporal import WAVELETS
from faver.video_io import open_video, write_y4m

SIGMA = NSS34_NAMES.index("mscn_ggd_sigma")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--factors", type=int, nargs="+", default=[2, 4, 5])
    parser.add_argument("--height", type=int, default=96)
    parser.add_argument("--width", type=int, default=128)
    parser.add_argument("--frames", type=int, default=150)
    parser.add_argument("--speed", type=float, default=2.0)
    args = parser.parse_args()

    frames = translating_noise(args.height, args.width, args.frames, speed=args.speed, seed=1)
    with tempfile.TemporaryDirectory() as tmp:
        ref = Path(tmp) / "ref.y4m"
        write_y4m(ref, frames, 120)
        for wavelet in WAVELETS:
            cfg = ExtractConfig(wavelet=wavelet)
            base = extract_video(open_video(ref), cfg)[1].reshape(14, 34)[:, SIGMA]
            for factor in args.factors:
                path = Path(tmp) / f"drop{factor}.y4m"
                write_y4m(path, drop_frames(frames, factor), 120)
                other = extract_video(open_video(path), cfg)[1].reshape(14, 34)[:, SIGMA]
                rel = np.abs(other - base) / np.abs(base)
                k = int(rel.argmax())
                print(
                    f"{wavelet:7s} keep 1/{factor}: max change {rel.max():6.1%} "
                    f"(subband {k // 2 + 1}, scale {k % 2 + 1})"
                )


if __name__ == "__main__":
    main()
