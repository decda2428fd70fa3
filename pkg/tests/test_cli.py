import csv
import io
import json
import os
import shutil

import numpy as np
import pytest

from faver import cli, schema
from faver.dataset import ManifestRow, read_features, write_manifest
from faver.synthetic import translating_noise
from faver.video_io import write_y4m


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    """Twelve short clips (6 contents x 2 versions) with a made-up MOS."""
    root = tmp_path_factory.mktemp("corpus")
    rows = []
    for c in range(6):
        for v, speed in enumerate((0.5, 3.0)):
            vid = f"c{c}_v{v}"
            frames = translating_noise(48, 64, 40, speed=speed + 0.3 * c, seed=c)
            write_y4m(root / f"{vid}.y4m", frames, 20)
            rows.append(ManifestRow(f"{vid}.y4m", vid, f"c{c}", 20.0, None, 80.0 - 8 * speed - 2 * c))
    write_manifest(root / "manifest.csv", rows)
    assert cli.main(["extract", str(root / "manifest.csv"), "--wavelet", "haar", "--out", str(root / "feats.csv")]) == 0
    return root


def run(args, capsys):
    code = cli.main([str(a) for a in args])
    out, err = capsys.readouterr()
    return code, out, err


def read_scores(text):
    rows = list(csv.DictReader(io.StringIO(text)))
    return {r["video_id"]: (float(r["score"]) if r["score"] else None, r["error"]) for r in rows}


class TestExtract:
    def test_feature_file(self, corpus):
        with open(corpus / "feats.csv") as fh:
            rows = list(csv.reader(fh))
        assert len(rows) == 13 and all(len(r) == 753 for r in rows)
        assert rows[1][:5] == ["c0_v0", "c0", schema.schema_hash(), "haar", "1s"]
        assert not os.path.exists(str(corpus / "feats.csv") + ".errors.csv")

    def test_rerun_is_idempotent(self, corpus, tmp_path, capsys, monkeypatch):
        out = tmp_path / "f.csv"
        shutil.copy(corpus / "feats.csv", out)
        before = out.read_bytes()

        def boom(*a, **k):
            raise AssertionError("recomputed")

        monkeypatch.setattr(cli, "extract_video", boom)
        code, _, _ = run(["extract", corpus / "manifest.csv", "--wavelet", "haar", "--out", out], capsys)
        assert code == 0 and out.read_bytes() == before

    def test_resume_fills_missing_rows(self, corpus, tmp_path, capsys):
        out = tmp_path / "f.csv"
        lines = (corpus / "feats.csv").read_text().splitlines(keepends=True)
        out.write_text("".join(lines[:1] + lines[3:]))
        code, _, _ = run(["extract", corpus / "manifest.csv", "--wavelet", "haar", "--out", out], capsys)
        assert code == 0 and out.read_bytes() == (corpus / "feats.csv").read_bytes()

    def test_parallel_matches_serial(self, corpus, tmp_path, capsys):
        out = tmp_path / "f.csv"
        code, _, _ = run(["extract", corpus / "manifest.csv", "--wavelet", "haar", "--out", out, "--jobs", 2], capsys)
        assert code == 0 and out.read_bytes() == (corpus / "feats.csv").read_bytes()

    def test_corrupt_video(self, corpus, tmp_path, capsys):
        shutil.copy(corpus / "c0_v0.y4m", tmp_path / "good.y4m")
        (tmp_path / "bad.y4m").write_bytes(b"YUV4MPEG2 W64 H48 F20:1 C420jpeg\nFRAME\n" + b"\x00" * 100)
        rows = [
            ManifestRow("good.y4m", "good", "g", 20.0, None, None),
            ManifestRow("bad.y4m", "bad", "b", 20.0, None, None),
        ]
        write_manifest(tmp_path / "m.csv", rows)
        out = tmp_path / "f.csv"
        code, _, _ = run(["extract", tmp_path / "m.csv", "--wavelet", "haar", "--out", out], capsys)
        assert code == 0
        assert [r.video_id for r in read_features(out)] == ["good"]
        errors = list(csv.reader(open(str(out) + ".errors.csv")))
        assert errors[0] == ["video_id", "error"] and len(errors) == 2 and errors[1][0] == "bad"

        write_manifest(tmp_path / "m2.csv", rows[1:])
        code, _, _ = run(["extract", tmp_path / "m2.csv", "--out", tmp_path / "g.csv"], capsys)
        assert code == 2

    def test_duplicate_ids_rejected_early(self, tmp_path, capsys, monkeypatch):
        rows = [ManifestRow("a.y4m", "a", "c", None, None, None)] * 2
        write_manifest(tmp_path / "m.csv", rows)
        monkeypatch.setattr(cli, "extract_video", lambda *a, **k: pytest.fail("work started"))
        code, _, err = run(["extract", tmp_path / "m.csv", "--out", tmp_path / "f.csv"], capsys)
        assert code == 2 and "duplicate" in err

    def test_binary_cache(self, corpus, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("FAVER_CACHE_DIR", str(tmp_path / "cache"))
        out = tmp_path / "f.csv"
        assert run(["extract", corpus / "manifest.csv", "--wavelet", "haar", "--out", out], capsys)[0] == 0
        cached = list((tmp_path / "cache" / schema.schema_hash()).glob("*.npz"))
        assert len(cached) == 12
        os.remove(out)
        monkeypatch.setattr(cli, "extract_video", lambda *a, **k: pytest.fail("cache missed"))
        assert run(["extract", corpus / "manifest.csv", "--wavelet", "haar", "--out", out], capsys)[0] == 0
        assert out.read_bytes() == (corpus / "feats.csv").read_bytes()


@pytest.fixture(scope="module")
def trained(corpus):
    model = corpus / "model.json"
    argv = ["train", corpus / "feats.csv", corpus / "manifest.csv", "--seed", "3", "--budget", "3"]
    return model, [str(a) for a in argv] + ["--out-model", str(model)]


class TestTrainPredict:
    def test_train_outputs(self, trained, capsys):
        model, argv = trained
        code, out, err = run(argv, capsys)
        assert code == 0 and model.exists()
        scores = read_scores(out)
        assert len(scores) == 12 and all(np.isfinite(s) for s, _ in scores.values())
        assert "spatial: kernel=rbf" in err and "temporal: kernel=rbf" in err and "cv_srocc=" in err

    def test_same_seed_same_bytes(self, trained, tmp_path, capsys):
        model, argv = trained
        run(argv, capsys)
        first = model.read_bytes()
        other = tmp_path / "m.json"
        run(argv[:-1] + [str(other)], capsys)
        assert other.read_bytes() == first

    def test_predict_routes_agree(self, trained, corpus, capsys):
        model, argv = trained
        _, train_out, _ = run(argv, capsys)
        code, feat_out, _ = run(["predict", "--model", model, "--features", corpus / "feats.csv"], capsys)
        assert code == 0 and feat_out == train_out
        code, vid_out, _ = run(["predict", "--model", model, "--manifest", corpus / "manifest.csv"], capsys)
        assert code == 0
        a, b = read_scores(feat_out), read_scores(vid_out)
        assert a.keys() == b.keys()
        for k in a:
            assert abs(a[k][0] - b[k][0]) <= 1e-9
        code, one, _ = run(["predict", "--model", model, "--video", corpus / "c2_v1.y4m"], capsys)
        assert code == 0 and abs(read_scores(one)["c2_v1"][0] - a["c2_v1"][0]) <= 1e-9

    def test_predict_error_rows(self, trained, corpus, tmp_path, capsys):
        model, argv = trained
        run(argv, capsys)
        (tmp_path / "bad.y4m").write_bytes(b"not a video at all")
        code, out, _ = run(
            ["predict", "--model", model, "--video", corpus / "c0_v0.y4m", tmp_path / "bad.y4m", "--out", tmp_path / "s.csv"],
            capsys,
        )
        scores = read_scores((tmp_path / "s.csv").read_text())
        assert code == 0 and scores["bad"][0] is None and scores["bad"][1]
        code, _, _ = run(["predict", "--model", model, "--video", tmp_path / "bad.y4m"], capsys)
        assert code == 2

    def test_missing_model(self, corpus, tmp_path, capsys):
        code, _, err = run(["predict", "--model", tmp_path / "none.json", "--features", corpus / "feats.csv"], capsys)
        assert code == 2 and "none.json" in err

    def test_schema_mismatch_refused(self, corpus, tmp_path, capsys):
        text = (corpus / "feats.csv").read_text().replace(schema.schema_hash(), "0123456789abcdef")
        (tmp_path / "f.csv").write_text(text)
        code, _, err = run(
            ["train", tmp_path / "f.csv", corpus / "manifest.csv", "--budget", 1, "--out-model", tmp_path / "m.json"],
            capsys,
        )
        assert code == 2 and "schema" in err and not (tmp_path / "m.json").exists()


class TestEvaluate:
    def _base(self, corpus, tmp_path):
        return ["evaluate", corpus / "feats.csv", corpus / "manifest.csv", "--ratio", "2:1", "--budget", 2, "--out-dir", tmp_path]

    def test_protocol_report(self, corpus, tmp_path, capsys):
        code, out, _ = run(self._base(corpus, tmp_path) + ["--iterations", 3, "--ablation", "FAVER-Spt"], capsys)
        assert code == 0 and "FAVER-Spt: median srocc=" in out
        (report,) = tmp_path.glob("FAVER-Spt_*[!v].json")
        doc = json.loads(report.read_text())
        assert len(doc["srocc"]) == 3 and doc["config"]["n_features"] == 272
        assert doc["median_srocc"] == sorted(doc["srocc"])[1]

    def test_unknown_ablation(self, corpus, tmp_path, capsys):
        code, _, err = run(self._base(corpus, tmp_path) + ["--ablation", "UV"], capsys)
        assert code == 1 and "YGMLOG" in err and "FAVER-Tmp" in err

    def test_kfold_and_subbands(self, corpus, tmp_path, capsys):
        code, out, _ = run(self._base(corpus, tmp_path) + ["--kfold", 3], capsys)
        assert code == 0 and "median srocc" in out
        code, out, _ = run(self._base(corpus, tmp_path) + ["--subbands", "--iterations", 1], capsys)
        assert code == 0
        rows = list(csv.reader(open(tmp_path / "subbands.csv")))
        assert len(rows) == 8 and rows[0] == ["subband", "srocc", "plcc"]


class TestMisc:
    def test_filters(self, tmp_path, capsys):
        code, out, _ = run(["filters"], capsys)
        doc = json.loads(out)
        assert code == 0 and {k: v["length"] for k, v in doc.items()} == {"haar": 8, "db2": 22, "bior22": 29}
        assert all(len(v["subbands"]) == 7 for v in doc.values())
        assert run(["filters", "--wavelet", "haar", "--out", tmp_path / "f.json"], capsys)[0] == 0
        assert list(json.loads((tmp_path / "f.json").read_text())) == ["haar"]

    def test_usage_errors(self, tmp_path, capsys):
        assert run([], capsys)[0] == 1
        assert run(["extract"], capsys)[0] == 1
        assert run(["frobnicate"], capsys)[0] == 1
        assert run(["extract", "m.csv", "--out", "x", "--stride", "0"], capsys)[0] == 1

    def test_benchmark_usage(self, corpus, tmp_path, capsys):
        write_manifest(tmp_path / "empty.csv", [])
        assert run(["benchmark", tmp_path / "empty.csv"], capsys)[0] == 1
        assert run(["benchmark", corpus / "manifest.csv", "--repeats", 2], capsys)[0] == 1

    def test_benchmark_report(self, corpus, tmp_path, capsys):
        rows = [ManifestRow(str(corpus / "c0_v0.y4m"), "c0_v0", "c0", 20.0, None, None)]
        write_manifest(tmp_path / "m.csv", rows)
        code, out, _ = run(["benchmark", tmp_path / "m.csv", "--wavelet", "haar", "--out", tmp_path / "b.json"], capsys)
        assert code == 0 and "20 fps: n=1" in out
        doc = json.loads((tmp_path / "b.json").read_text())
        (video,) = doc["videos"]
        assert len(video["seconds"]) == 3 and all(t > 0 for t in video["seconds"])
        assert video["min"] <= video["mean"] and video["resolution"] == "64x48"
        assert doc["classes"]["20"]["n"] == 1 and doc["machine"]["cpus"] >= 1
        assert doc["ratio_120_30"] is None

