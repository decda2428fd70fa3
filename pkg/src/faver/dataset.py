"""Dataset manifest and feature-file CSV formats."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from . import schema
from .errors import DataError, SchemaMismatchError
from .regression import FeatureRecord

MANIFEST_COLUMNS = ("video_path", "video_id", "content_id", "framerate", "crf", "mos")
FEATURE_META_COLUMNS = ("video_id", "content_id", "schema_hash", "wavelet", "stride")


@dataclass
class ManifestRow:
    video_path: str
    video_id: str
    content_id: str
    framerate: float | None
    crf: float | None
    mos: float | None


def _opt_float(value: str, what: str, vid: str) -> float | None:
    value = (value or "").strip()
    if not value:
        return None
    try:
        return float(value)
    except ValueError as exc:
        raise DataError(f"{vid}: {what} {value!r} is not numeric") from exc


def read_manifest(path: str | os.PathLike, allow_missing: bool = False) -> list[ManifestRow]:
    """Parse a manifest; relative video paths resolve against its directory."""
    base = os.path.dirname(os.path.abspath(path))
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in MANIFEST_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise DataError(f"manifest lacks columns: {', '.join(missing)}")
        rows = []
        seen = set()
        for raw in reader:
            vid = raw["video_id"].strip()
            if not vid:
                raise DataError("manifest row with empty video_id")
            if vid in seen:
                raise DataError(f"duplicate video_id {vid!r} in manifest")
            seen.add(vid)
            vpath = raw["video_path"].strip()
            if vpath and not os.path.isabs(vpath):
                vpath = os.path.join(base, vpath)
            if not allow_missing and not os.path.exists(vpath):
                raise DataError(f"{vid}: video {vpath} not found")
            rows.append(
                ManifestRow(
                    video_path=vpath,
                    video_id=vid,
                    content_id=raw["content_id"].strip() or vid,
                    framerate=_opt_float(raw["framerate"], "framerate", vid),
                    crf=_opt_float(raw["crf"], "crf", vid),
                    mos=_opt_float(raw["mos"], "mos", vid),
                )
            )
    return rows


def write_manifest(path: str | os.PathLike, rows: list[ManifestRow]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(MANIFEST_COLUMNS)
        for r in rows:
            w.writerow(
                [
                    r.video_path,
                    r.video_id,
                    r.content_id,
                    "" if r.framerate is None else repr(r.framerate),
                    "" if r.crf is None else repr(r.crf),
                    "" if r.mos is None else repr(r.mos),
                ]
            )


def feature_header() -> list[str]:
    return list(FEATURE_META_COLUMNS) + schema.feature_names()


def format_feature_row(rec: FeatureRecord, schema_hash: str | None = None) -> list[str]:
    meta = [rec.video_id, rec.content_id, schema_hash or schema.schema_hash(), rec.wavelet, rec.stride]
    return meta + [repr(float(v)) for v in rec.features]


def write_features(path: str | os.PathLike, records: list[FeatureRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(feature_header())
        h = schema.schema_hash()
        for rec in records:
            w.writerow(format_feature_row(rec, h))


def read_features(path: str | os.PathLike, check_schema: bool = True) -> list[FeatureRecord]:
    expected = schema.schema_hash()
    records = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return []
        if len(header) != len(FEATURE_META_COLUMNS) + schema.N_TOTAL:
            raise DataError(
                f"{path}: {len(header)} columns, expected {len(FEATURE_META_COLUMNS) + schema.N_TOTAL}"
            )
        for row in reader:
            if not row:
                continue
            vid, cid, shash, wavelet, stride = row[:5]
            if check_schema and shash != expected:
                raise SchemaMismatchError(
                    f"{vid}: feature schema {shash} does not match this build ({expected})"
                )
            vals = np.array([float(v) for v in row[5:]])
            records.append(
                FeatureRecord(
                    video_id=vid,
                    content_id=cid,
                    spatial=vals[: schema.N_SPATIAL],
                    temporal=vals[schema.N_SPATIAL :],
                    wavelet=wavelet,
                    stride=stride,
                )
            )
    return records


def attach_manifest(records: list[FeatureRecord], manifest: list[ManifestRow]) -> list[FeatureRecord]:
    """Fill MOS, framerate, CRF and content id from the manifest, by video_id."""
    by_id = {r.video_id: r for r in manifest}
    out = []
    for rec in records:
        row = by_id.get(rec.video_id)
        if row is None:
            raise DataError(f"{rec.video_id}: not in manifest")
        rec.mos = row.mos
        rec.crf = row.crf
        rec.framerate = row.framerate or 0.0
        rec.content_id = row.content_id
        out.append(rec)
    return out
