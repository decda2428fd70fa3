"""Command-line interface: extract, train, predict, evaluate, benchmark, filters.

Exit codes: 0 success, 1 usage error, 2 data or I/O error, 3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import platform
import sys
import time
import traceback
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import schema
from .dataset import (
    ManifestRow,
    attach_manifest,
    feature_header,
    format_feature_row,
    read_features,
    read_manifest,
)
from .errors import FaverError
from .evaluation import run_kfold, run_protocol, subband_study, write_report
from .pipeline import ExtractConfig, extract_video
from .regression import EnsembleModel, FeatureRecord, SearchConfig, train_ensemble
from .temporal import WAVELETS, build_filter_bank
from .video_io import open_video, parse_stride

log = logging.getLogger("faver")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3
CACHE_ENV = "FAVER_CACHE_DIR"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------- extraction


def _raw_geometry(args) -> dict:
    return {
        "width": args.width,
        "height": args.height,
        "framerate": args.fps,
        "pixel_format": args.pix_fmt,
    }


def _cache_path(video_path: str, cfg: ExtractConfig) -> str | None:
    root = os.environ.get(CACHE_ENV)
    if not root:
        return None
    st = os.stat(video_path)
    key = json.dumps(
        [os.path.abspath(video_path), st.st_size, st.st_mtime_ns, cfg.wavelet, cfg.stride, cfg.temporal_height]
    )
    digest = hashlib.sha256(key.encode()).hexdigest()[:20]
    return os.path.join(root, schema.schema_hash(), f"{digest}.npz")


def extract_one(video_path: str, cfg: ExtractConfig, geometry: dict | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Extract one video, going through the binary cache when it is enabled."""
    cache = _cache_path(video_path, cfg)
    if cache and os.path.exists(cache):
        with np.load(cache) as z:
            return z["spatial"], z["temporal"]
    source = open_video(video_path, **(geometry or {}))
    spatial, temporal = extract_video(source, cfg)
    if cache:
        os.makedirs(os.path.dirname(cache), exist_ok=True)
        tmp = cache + ".tmp.npz"
        np.savez(tmp, spatial=spatial, temporal=temporal)
        os.replace(tmp, cache)
    return spatial, temporal


def _geometry_for(row: ManifestRow, geometry: dict) -> dict:
    g = dict(geometry)
    if g.get("framerate") is None and row.framerate:
        g["framerate"] = row.framerate
    return g


def _extract_task(task):
    row, cfg, geometry = task
    try:
        s, t = extract_one(row.video_path, cfg, _geometry_for(row, geometry))
        return row.video_id, s, t, None
    except Exception as exc:  # recorded per video, never fatal
        return row.video_id, None, None, f"{type(exc).__name__}: {exc}"


def _run_tasks(fn, tasks, jobs: int):
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(min(jobs, len(tasks))) as pool:
            yield from pool.map(fn, tasks)
    else:
        for t in tasks:
            yield fn(t)


def _existing_rows(path: str) -> dict[str, list[str]]:
    """Rows of an earlier run that can be reused (same header, same schema)."""
    if not os.path.exists(path):
        return {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        if next(reader, None) != feature_header():
            return {}
        h = schema.schema_hash()
        return {row[0]: row for row in reader if row and row[2] == h}


def cmd_extract(args) -> int:
    manifest = read_manifest(args.manifest, allow_missing=True)
    if not manifest:
        raise UsageError("manifest has no rows")
    cfg = ExtractConfig(wavelet=args.wavelet, stride=args.stride)
    stride_tag = "1s" if parse_stride(cfg.stride) is None else str(parse_stride(cfg.stride))
    cfg.stride = stride_tag
    done = {
        vid: row
        for vid, row in _existing_rows(args.out).items()
        if row[3] == cfg.wavelet and row[4] == stride_tag
    }
    todo = [r for r in manifest if r.video_id not in done]
    log.info("%d videos, %d already extracted", len(manifest), len(manifest) - len(todo))

    geometry = _raw_geometry(args)
    errors = []
    for vid, s, t, err in _run_tasks(_extract_task, [(r, cfg, geometry) for r in todo], args.jobs):
        if err is not None:
            log.warning("%s: %s", vid, err)
            errors.append((vid, err))
            continue
        row = next(r for r in manifest if r.video_id == vid)
        rec = FeatureRecord(vid, row.content_id, s, t, wavelet=cfg.wavelet, stride=stride_tag)
        done[vid] = format_feature_row(rec)

    # single writer, manifest order, atomic replace
    tmp = args.out + ".tmp"
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(feature_header())
        for r in manifest:
            if r.video_id in done:
                w.writerow(done[r.video_id])
    os.replace(tmp, args.out)

    err_path = args.out + ".errors.csv"
    if errors:
        with open(err_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["video_id", "error"])
            w.writerows(errors)
    elif os.path.exists(err_path):
        os.remove(err_path)
    print(f"wrote {len(done)} rows to {args.out}; {len(errors)} failed")
    if errors and len(errors) == len(manifest):
        return EXIT_DATA
    return EXIT_OK


# ---------------------------------------------------------------- training


def _load_records(features: str, manifest: str) -> list[FeatureRecord]:
    records = read_features(features)
    return attach_manifest(records, read_manifest(manifest, allow_missing=True))


def _mask(name: str | None) -> np.ndarray | None:
    if name is None:
        return None
    try:
        return schema.ablation_mask(name)
    except KeyError:
        raise UsageError(f"unknown ablation {name!r}; valid names: {', '.join(schema.ABLATIONS)}") from None


def _write_scores(fh, rows) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["video_id", "score", "error"])
    for vid, score, err in rows:
        w.writerow([vid, "" if score is None else repr(float(score)), err or ""])


def cmd_train(args) -> int:
    records = _load_records(args.features, args.manifest)
    cfg = SearchConfig(budget=args.budget)
    model = train_ensemble(records, seed=args.seed, cfg=cfg, mask=_mask(args.ablation))
    model.save(args.out_model)
    for branch, info in model.search.items():
        hp = ", ".join(f"{k}={v:.6g}" for k, v in info["hyperparams"].items())
        print(f"{branch}: kernel={info['kernel']} {hp} cv_srocc={info['cv_score']:.4f}", file=sys.stderr)
    print(f"model written to {args.out_model}", file=sys.stderr)
    scores = model.predict_features(np.array([r.features for r in records]))
    _write_scores(sys.stdout, [(r.video_id, s, None) for r, s in zip(records, scores)])
    return EXIT_OK


# ---------------------------------------------------------------- prediction


def _predict_task(task):
    vid, path, geometry, cfg, model_doc = task
    try:
        s, t = extract_one(path, cfg, geometry)
        model = EnsembleModel.from_dict(model_doc)
        return vid, float(model.predict_features(np.concatenate([s, t]))[0]), None
    except Exception as exc:
        return vid, None, f"{type(exc).__name__}: {exc}"


def cmd_predict(args) -> int:
    model = EnsembleModel.load(args.model)
    if args.features:
        records = read_features(args.features)
        feats = np.array([r.features for r in records]).reshape(len(records), schema.N_TOTAL)
        scores = model.predict_features(feats) if records else []
        rows = [(r.video_id, s, None) for r, s in zip(records, scores)]
    else:
        cfg = ExtractConfig(wavelet=model.wavelet or "bior22", stride=model.stride or "1s")
        geometry = _raw_geometry(args)
        if args.manifest:
            items = [(r.video_id, r.video_path, _geometry_for(r, geometry)) for r in read_manifest(args.manifest, True)]
        else:
            items = [(os.path.splitext(os.path.basename(p))[0], p, geometry) for p in args.video]
        doc = model.to_dict()
        rows = list(_run_tasks(_predict_task, [(*it, cfg, doc) for it in items], args.jobs))
    if args.out:
        with open(args.out, "w", newline="") as fh:
            _write_scores(fh, rows)
    else:
        _write_scores(sys.stdout, rows)
    if rows and all(r[1] is None for r in rows):
        return EXIT_DATA
    return EXIT_OK


# ---------------------------------------------------------------- evaluation


def cmd_evaluate(args) -> int:
    mask = _mask(args.ablation)
    records = _load_records(args.features, args.manifest)
    cfg = SearchConfig(budget=args.budget)
    label = args.ablation or "FAVER-All"
    os.makedirs(args.out_dir, exist_ok=True)
    if args.subbands:
        rows = subband_study(records, args.iterations, args.seed, args.ratio, cfg, args.jobs)
        path = os.path.join(args.out_dir, "subbands.csv")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["subband", "srocc", "plcc"])
            for r in rows:
                w.writerow([r["subband"], repr(r["srocc"]), repr(r["plcc"])])
                print(f"subband {r['subband']}: srocc={r['srocc']:.4f} plcc={r['plcc']:.4f}")
        return EXIT_OK
    if args.kfold:
        report = run_kfold(records, args.kfold, args.seed, mask, cfg, label)
    else:
        report = run_protocol(records, args.iterations, args.seed, args.ratio, mask, cfg, args.jobs, label)
    paths = write_report(report, args.out_dir, prefix=label)
    print(
        f"{label}: median srocc={report.median_srocc:.4f} "
        f"plcc={report.median_plcc:.4f} rmse={report.median_rmse:.4f}"
    )
    for kind, p in paths.items():
        print(f"{kind}: {p}")
    return EXIT_OK


# ---------------------------------------------------------------- benchmark


def machine_descriptor() -> dict:
    return {
        "platform": platform.platform(),
        "processor": platform.processor() or platform.machine(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "cpus": os.cpu_count(),
    }


def benchmark(rows: list[ManifestRow], cfg: ExtractConfig, repeats: int = 3, geometry: dict | None = None) -> dict:
    """Time end-to-end extraction of every video ``repeats`` times."""
    per_video = []
    for row in rows:
        g = _geometry_for(row, geometry or {})
        source = open_video(row.video_path, **g)
        times = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            extract_video(open_video(row.video_path, **g), cfg)
            times.append(time.perf_counter() - t0)
        per_video.append(
            {
                "video_id": row.video_id,
                "framerate": float(source.framerate),
                "resolution": f"{source.width}x{source.height}",
                "seconds": times,
                "mean": float(np.mean(times)),
                "min": float(np.min(times)),
            }
        )
    classes = {}
    for v in per_video:
        key = str(round(v["framerate"]))
        classes.setdefault(key, []).append(v)
    summary = {
        k: {"n": len(vs), "mean": float(np.mean([v["mean"] for v in vs])), "min": float(np.min([v["min"] for v in vs]))}
        for k, vs in sorted(classes.items(), key=lambda kv: int(kv[0]))
    }
    ratio = None
    if "120" in summary and "30" in summary:
        ratio = summary["120"]["mean"] / summary["30"]["mean"]
    return {
        "wavelet": cfg.wavelet,
        "stride": cfg.stride,
        "repeats": repeats,
        "videos": per_video,
        "classes": summary,
        "ratio_120_30": ratio,
        "machine": machine_descriptor(),
    }


def cmd_benchmark(args) -> int:
    if args.repeats < 3:
        raise UsageError("--repeats must be at least 3")
    rows = read_manifest(args.manifest)
    if not rows:
        raise UsageError("manifest has no rows")
    report = benchmark(rows, ExtractConfig(wavelet=args.wavelet, stride=args.stride), args.repeats, _raw_geometry(args))
    for fps, c in report["classes"].items():
        print(f"{fps} fps: n={c['n']} mean={c['mean']:.3f}s min={c['min']:.3f}s")
    if report["ratio_120_30"] is not None:
        print(f"120/30 cost ratio: {report['ratio_120_30']:.3f}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(report, fh, indent=1)
    return EXIT_OK


# ---------------------------------------------------------------- filters


def cmd_filters(args) -> int:
    families = list(WAVELETS) if args.wavelet == "all" else [args.wavelet]
    doc = {}
    for fam in families:
        bank = build_filter_bank(fam)
        doc[fam] = {
            "length": bank.filter_length,
            "subbands": [
                {"band": i + 1, "path": p, "taps": bank.filters[i].tolist()} for i, p in enumerate(bank.paths)
            ],
            "dc": bank.dc_filter.tolist(),
        }
    text = json.dumps(doc, indent=1)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _add_geometry(p) -> None:
    g = p.add_argument_group("raw YUV geometry")
    g.add_argument("--width", type=int)
    g.add_argument("--height", type=int)
    g.add_argument("--fps", type=float, help="frame rate (falls back to the manifest column)")
    g.add_argument("--pix-fmt", default="yuv420p", choices=["yuv420p", "i420", "yuv444p", "i444"])


def _positive(value: str) -> int:
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return n


def _stride(value: str) -> str:
    try:
        parse_stride(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="faver", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    wavelets = list(WAVELETS)

    p = sub.add_parser("extract", help="extract features for every video in a manifest")
    p.add_argument("manifest")
    p.add_argument("--wavelet", choices=wavelets, default="bior22")
    p.add_argument("--stride", type=_stride, default="1s", help="1s or a frame count (16, 8, 4)")
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=_positive, default=1)
    _add_geometry(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="train the two-branch SVR ensemble")
    p.add_argument("features")
    p.add_argument("manifest")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget", type=_positive, default=20)
    p.add_argument("--ablation")
    p.add_argument("--out-model", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="score videos or precomputed features")
    p.add_argument("--model", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--features")
    src.add_argument("--video", nargs="+")
    src.add_argument("--manifest")
    p.add_argument("--out")
    p.add_argument("--jobs", type=_positive, default=1)
    _add_geometry(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="repeated content-separated train/test evaluation")
    p.add_argument("features")
    p.add_argument("manifest")
    p.add_argument("--iterations", type=_positive, default=100)
    p.add_argument("--ratio", default="0.8", help="train fraction or train:test, e.g. 4:1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ablation", help=f"one of {', '.join(schema.ABLATIONS)}")
    p.add_argument("--kfold", type=_positive, help="content-grouped k-fold instead of random splits")
    p.add_argument("--subbands", action="store_true", help="one temporal model per subband")
    p.add_argument("--budget", type=_positive, default=20)
    p.add_argument("--out-dir", default="eval_out")
    p.add_argument("--jobs", type=_positive, default=1)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("benchmark", help="time feature extraction per frame-rate class")
    p.add_argument("manifest")
    p.add_argument("--wavelet", choices=wavelets, default="bior22")
    p.add_argument("--stride", type=_stride, default="1s")
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--out")
    _add_geometry(p)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("filters", help="dump temporal filter-bank taps as JSON")
    p.add_argument("--wavelet", choices=wavelets + ["all"], default="all")
    p.add_argument("--out")
    p.set_defaults(func=cmd_filters)
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FaverError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
