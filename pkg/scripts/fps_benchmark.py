"""Time extraction on one clip stored at 30, 60 and 120 fps by frame duplication.

    python3 scripts/fps_benchmark.py --height 1080 --width 1920 --repeats 3
"""

import argparse
import json
import tempfile
from pathlib import Path

from faver.cli import benchmark
from faver.dataset import ManifestRow
from faver.pipeline import ExtractConfig
from faver.synthetic import duplicate_frames, translating_noise
from faver.video_io import write_y4m


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--height", type=int, default=1080)
    parser.add_argument("--width", type=int, default=1920)
    parser.add_argument("--seconds", type=int, default=1)
    parser.add_argument("--wavelet", default="bior22")
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--out")
    args = parser.parse_args()

    base = translating_noise(args.height, args.width, 30 * args.seconds, speed=2.0, seed=0)
    with tempfile.TemporaryDirectory() as tmp:
        rows = []
        for fps in (30, 60, 120):
            path = Path(tmp) / f"pan{fps}.y4m"
            write_y4m(path, duplicate_frames(base, fps // 30), fps)
            rows.append(ManifestRow(str(path), f"pan{fps}", "pan", float(fps), None, None))
        report = benchmark(rows, ExtractConfig(wavelet=args.wavelet), repeats=args.repeats)
    for fps, c in report["classes"].items():
        print(f"{fps:>3s} fps: mean {c['mean']:.3f} s  min {c['min']:.3f} s")
    print(f"120/30 cost ratio: {report['ratio_120_30']:.3f}")
    if args.out:
        Path(args.out).write_text(json.dumps(report, indent=1))


if __name__ == "__main__":
    main()
