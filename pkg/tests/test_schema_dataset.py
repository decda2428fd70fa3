import csv

import numpy as np
import pytest

from faver import nss, schema
from faver.dataset import (
    ManifestRow,
    attach_manifest,
    feature_header,
    read_features,
    read_manifest,
    write_features,
    write_manifest,
)
from faver.errors import DataError, SchemaMismatchError
from faver.synthetic import constructive_records


class TestSchema:
    def test_counts(self):
        assert (schema.N_SPATIAL, schema.N_TEMPORAL, schema.N_TOTAL) == (272, 476, 748)
        names = schema.feature_names()
        assert len(names) == 748 and len(set(names)) == 748
        assert len(feature_header()) == 753

    def test_ablation_sizes(self):
        sizes = {k: len(schema.ablation_mask(k)) for k in schema.ABLATIONS}
        assert sizes == {
            "Y": 68,
            "YUV": 204,
            "YGM": 102,
            "YLOG": 102,
            "YGMLOG": 136,
            "FAVER-Spt": 272,
            "FAVER-Tmp": 476,
            "FAVER-All": 748,
        }
        names = schema.feature_names()
        assert all(names[i].startswith("spt_Y@") for i in schema.ablation_mask("Y"))

    def test_unknown_ablation(self):
        with pytest.raises(KeyError, match="FAVER-Spt"):
            schema.ablation_mask("UV")

    def test_subband_names(self):
        names = schema.feature_names()
        for band in range(1, 8):
            assert {names[i].split("@")[0] for i in schema.subband_indices(band)} == {f"tmp_b{band}"}
        with pytest.raises(ValueError):
            schema.subband_indices(8)

    def test_hash_tracks_constants(self, monkeypatch):
        h = schema.schema_hash()
        assert h == schema.schema_hash()
        monkeypatch.setattr(nss, "MSCN_C", nss.MSCN_C + 1)
        assert schema.schema_hash() != h
        monkeypatch.undo()
        monkeypatch.setattr(nss, "MIN_FIT_SAMPLES", nss.MIN_FIT_SAMPLES + 1)
        assert schema.schema_hash() != h


def _write_csv(path, rows):
    with open(path, "w", newline="") as fh:
        csv.writer(fh).writerows(rows)


HEADER = ["video_path", "video_id", "content_id", "framerate", "crf", "mos"]


class TestManifest:
    def test_roundtrip(self, tmp_path):
        rows = [
            ManifestRow(str(tmp_path / "a.y4m"), "a", "c1", 120.0, 0.0, 61.5),
            ManifestRow(str(tmp_path / "b.y4m"), "b", "c1", 24.0, None, None),
        ]
        write_manifest(tmp_path / "m.csv", rows)
        assert read_manifest(tmp_path / "m.csv", allow_missing=True) == rows

    def test_relative_paths_and_defaults(self, tmp_path):
        (tmp_path / "v.y4m").write_bytes(b"")
        _write_csv(tmp_path / "m.csv", [HEADER, ["v.y4m", "v1", "", "60", "", "50"]])
        (row,) = read_manifest(tmp_path / "m.csv")
        assert row.video_path == str(tmp_path / "v.y4m")
        assert row.content_id == "v1" and row.crf is None and row.mos == 50.0

    def test_duplicate_ids_rejected(self, tmp_path):
        _write_csv(tmp_path / "m.csv", [HEADER, ["x", "a", "c", "", "", ""], ["y", "a", "c", "", "", ""]])
        with pytest.raises(DataError, match="duplicate"):
            read_manifest(tmp_path / "m.csv", allow_missing=True)

    @pytest.mark.parametrize(
        "rows,match",
        [
            ([HEADER[:-1], ["x", "a", "c", "", ""]], "lacks columns: mos"),
            ([HEADER, ["x", "", "c", "", "", ""]], "empty video_id"),
            ([HEADER, ["x", "a", "c", "fast", "", ""]], "framerate"),
            ([HEADER, ["x", "a", "c", "", "", "good"]], "mos"),
        ],
    )
    def test_bad_manifests(self, tmp_path, rows, match):
        _write_csv(tmp_path / "m.csv", rows)
        with pytest.raises(DataError, match=match):
            read_manifest(tmp_path / "m.csv", allow_missing=True)

    def test_missing_video(self, tmp_path):
        _write_csv(tmp_path / "m.csv", [HEADER, ["nope.y4m", "a", "c", "", "", ""]])
        with pytest.raises(DataError, match="not found"):
            read_manifest(tmp_path / "m.csv")


class TestFeatureFile:
    def test_roundtrip_exact(self, tmp_path):
        recs = constructive_records(n_contents=3, versions=2)
        write_features(tmp_path / "f.csv", recs)
        back = read_features(tmp_path / "f.csv")
        assert [r.video_id for r in back] == [r.video_id for r in recs]
        for a, b in zip(recs, back):
            assert np.array_equal(a.features, b.features)
            assert b.wavelet == "bior22" and b.mos is None

    def test_schema_mismatch(self, tmp_path):
        recs = constructive_records(n_contents=2, versions=1)
        write_features(tmp_path / "f.csv", recs)
        text = (tmp_path / "f.csv").read_text().replace(schema.schema_hash(), "deadbeefdeadbeef")
        (tmp_path / "f.csv").write_text(text)
        with pytest.raises(SchemaMismatchError):
            read_features(tmp_path / "f.csv")
        assert len(read_features(tmp_path / "f.csv", check_schema=False)) == 2

    def test_column_count(self, tmp_path):
        _write_csv(tmp_path / "f.csv", [["video_id", "x"], ["a", "1"]])
        with pytest.raises(DataError, match="753"):
            read_features(tmp_path / "f.csv")

    def test_attach_manifest(self, tmp_path):
        recs = constructive_records(n_contents=2, versions=1)
        rows = [ManifestRow("", r.video_id, "orig", 60.0, 4.0, 42.0) for r in recs]
        out = attach_manifest(recs, rows)
        assert all(r.mos == 42.0 and r.content_id == "orig" and r.framerate == 60.0 for r in out)
        with pytest.raises(DataError, match="not in manifest"):
            attach_manifest(recs, rows[:1])
