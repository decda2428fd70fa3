"""Content-separated train/test protocol and the study drivers built on it."""

from __future__ import annotations

import csv
import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import schema
from .errors import ProtocolError, UndefinedCorrelationError
from .metrics import logistic_fit, mapped_plcc_rmse, srocc
from .regression import FeatureRecord, SearchConfig, train_ensemble


def parse_ratio(value: str | float) -> float:
    """``"13:3"`` -> 13/16; plain numbers are taken as the train fraction."""
    if isinstance(value, str) and ":" in value:
        a, b = (int(v) for v in value.split(":"))
        return a / (a + b)
    r = float(value)
    if not 0 < r < 1:
        raise ValueError("train ratio must lie in (0, 1)")
    return r


def lower_median(values) -> float:
    s = sorted(values)
    return float(s[(len(s) - 1) // 2])


@dataclass
class SplitSpec:
    contents: list[str]
    train_ratio: float = 0.8

    @property
    def n_train(self) -> int:
        n = len(self.contents)
        return int(min(max(round(n * self.train_ratio), 1), n - 1))

    def draw(self, rng: np.random.Generator) -> tuple[set[str], set[str]]:
        order = rng.permutation(len(self.contents))
        train = {self.contents[i] for i in order[: self.n_train]}
        test = {self.contents[i] for i in order[self.n_train :]}
        return train, test


@dataclass
class IterationResult:
    srocc: float
    plcc: float
    rmse: float
    beta: list[float]
    mapping: str  # "logistic", "affine" or "none"
    test_ids: list[str]
    pred: list[float]
    mapped: list[float]
    mos: list[float]


@dataclass
class EvalReport:
    srocc: list[float]
    plcc: list[float]
    rmse: list[float]
    median_srocc: float
    median_plcc: float
    median_rmse: float
    logistic_params: list[list[float]]
    scatter: dict
    config: dict = field(default_factory=dict)

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.config, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:10]


def score_predictions(pred: np.ndarray, mos: np.ndarray) -> tuple[float, float, float, list[float], np.ndarray, str]:
    """SROCC on raw scores; PLCC/RMSE after logistic mapping.

    With fewer than 8 test videos the logistic is replaced by an affine
    least-squares map. A constant predictor scores zero correlation and
    its mapped output is the mean MOS.
    """
    pred = np.asarray(pred, dtype=np.float64)
    mos = np.asarray(mos, dtype=np.float64)
    if len(pred) < 3:
        raise ProtocolError(f"test split holds {len(pred)} videos; at least 3 are needed")
    if np.ptp(pred) == 0:
        mapped = np.full_like(mos, mos.mean())
        return 0.0, 0.0, float(np.sqrt(np.mean((mapped - mos) ** 2))), [], mapped, "none"
    s = srocc(pred, mos)
    if len(pred) >= 8:
        fit = logistic_fit(pred, mos)
        mapped, beta, how = fit.mapped, list(fit.beta), "logistic"
    else:
        slope, icpt = np.polyfit(pred, mos, 1)
        mapped, beta, how = slope * pred + icpt, [float(slope), float(icpt)], "affine"
    try:
        p, r = mapped_plcc_rmse(mapped, mos)
    except UndefinedCorrelationError:
        p, r = 0.0, float(np.sqrt(np.mean((mapped - mos) ** 2)))
    return s, p, r, beta, mapped, how


def _one_iteration(args) -> IterationResult:
    records, spec, seed_seq, mask, cfg = args
    split_ss, train_ss = seed_seq.spawn(2)
    train_c, _ = spec.draw(np.random.default_rng(split_ss))
    train = [r for r in records if r.content_id in train_c]
    test = [r for r in records if r.content_id not in train_c]
    model = train_ensemble(train, seed=int(train_ss.generate_state(1)[0]), cfg=cfg, mask=mask)
    feats = np.array([r.features for r in test])
    pred = model.predict_features(feats)
    mos = np.array([r.mos for r in test], dtype=np.float64)
    s, p, r, beta, mapped, how = score_predictions(pred, mos)
    return IterationResult(
        srocc=s,
        plcc=p,
        rmse=r,
        beta=beta,
        mapping=how,
        test_ids=[r_.video_id for r_ in test],
        pred=pred.tolist(),
        mapped=np.asarray(mapped).tolist(),
        mos=mos.tolist(),
    )


def _check_records(records: list[FeatureRecord], min_contents: int = 4) -> list[str]:
    if any(r.mos is None for r in records):
        raise ProtocolError("every record needs a MOS")
    contents = sorted({r.content_id for r in records})
    if len(contents) < min_contents:
        raise ProtocolError(f"need at least {min_contents} distinct contents, got {len(contents)}")
    return contents


def run_protocol(
    records: list[FeatureRecord],
    iterations: int = 100,
    seed: int = 0,
    train_ratio: str | float = 0.8,
    mask: np.ndarray | None = None,
    search: SearchConfig | None = None,
    jobs: int = 1,
    label: str = "",
) -> EvalReport:
    """Repeated content-separated random splits; medians over iterations."""
    contents = _check_records(records)
    spec = SplitSpec(contents, parse_ratio(train_ratio))
    search = search or SearchConfig()
    children = np.random.SeedSequence(seed).spawn(iterations)
    tasks = [(records, spec, ss, mask, search) for ss in children]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            results = list(pool.map(_one_iteration, tasks))
    else:
        results = [_one_iteration(t) for t in tasks]

    sroccs = [r.srocc for r in results]
    # scatter data from the iteration sitting at the SROCC median
    med = lower_median(sroccs)
    rep = results[sroccs.index(med)]
    config = {
        "label": label,
        "iterations": iterations,
        "seed": seed,
        "train_ratio": spec.train_ratio,
        "n_records": len(records),
        "n_contents": len(contents),
        "n_features": schema.N_TOTAL if mask is None else int(len(mask)),
        "search": asdict(search),
        "schema_hash": schema.schema_hash(),
    }
    return EvalReport(
        srocc=sroccs,
        plcc=[r.plcc for r in results],
        rmse=[r.rmse for r in results],
        median_srocc=med,
        median_plcc=lower_median(r.plcc for r in results),
        median_rmse=lower_median(r.rmse for r in results),
        logistic_params=[r.beta for r in results],
        scatter={"video_id": rep.test_ids, "pred": rep.pred, "mapped": rep.mapped, "mos": rep.mos},
        config=config,
    )


def run_kfold(
    records: list[FeatureRecord],
    k: int = 5,
    seed: int = 0,
    mask: np.ndarray | None = None,
    search: SearchConfig | None = None,
    label: str = "",
) -> EvalReport:
    """Content-grouped k-fold CV; metrics on the pooled out-of-fold predictions.

    The per-iteration arrays hold the per-fold metrics; the medians field
    holds the pooled metrics.
    """
    contents = _check_records(records, min_contents=k)
    search = search or SearchConfig()
    ss = np.random.SeedSequence(seed)
    fold_ss, *train_ss = ss.spawn(k + 1)
    order = np.random.default_rng(fold_ss).permutation(len(contents))
    fold_of = {contents[g]: i % k for i, g in enumerate(order)}

    ids, preds, moss, per_fold = [], [], [], []
    for fold in range(k):
        train = [r for r in records if fold_of[r.content_id] != fold]
        test = [r for r in records if fold_of[r.content_id] == fold]
        model = train_ensemble(train, seed=int(train_ss[fold].generate_state(1)[0]), cfg=search, mask=mask)
        pred = model.predict_features(np.array([r.features for r in test]))
        mos = np.array([r.mos for r in test])
        per_fold.append(score_predictions(pred, mos)[:3])
        ids += [r.video_id for r in test]
        preds += pred.tolist()
        moss += mos.tolist()
    s, p, r, beta, mapped, _ = score_predictions(np.array(preds), np.array(moss))
    config = {
        "label": label,
        "kfold": k,
        "seed": seed,
        "n_records": len(records),
        "n_features": schema.N_TOTAL if mask is None else int(len(mask)),
        "search": asdict(search),
        "schema_hash": schema.schema_hash(),
    }
    return EvalReport(
        srocc=[f[0] for f in per_fold],
        plcc=[f[1] for f in per_fold],
        rmse=[f[2] for f in per_fold],
        median_srocc=s,
        median_plcc=p,
        median_rmse=r,
        logistic_params=[beta],
        scatter={"video_id": ids, "pred": preds, "mapped": np.asarray(mapped).tolist(), "mos": moss},
        config=config,
    )


def subband_study(
    records: list[FeatureRecord],
    iterations: int = 100,
    seed: int = 0,
    train_ratio: str | float = 0.8,
    search: SearchConfig | None = None,
    jobs: int = 1,
) -> list[dict]:
    """One temporal-only protocol run per subband (68 features each)."""
    rows = []
    for band in range(1, 8):
        rep = run_protocol(
            records,
            iterations=iterations,
            seed=seed,
            train_ratio=train_ratio,
            mask=schema.subband_indices(band),
            search=search,
            jobs=jobs,
            label=f"subband-{band}",
        )
        rows.append({"subband": band, "srocc": rep.median_srocc, "plcc": rep.median_plcc})
    return rows


def write_report(report: EvalReport, out_dir: str | os.PathLike, prefix: str = "eval") -> dict[str, str]:
    """Write JSON summary, per-iteration CSV and scatter CSV; returns their paths."""
    os.makedirs(out_dir, exist_ok=True)
    tag = f"{prefix}_{report.config_hash}"
    paths = {
        "report": os.path.join(out_dir, f"{tag}.json"),
        "iterations": os.path.join(out_dir, f"{tag}_iterations.csv"),
        "scatter": os.path.join(out_dir, f"{tag}_scatter.csv"),
    }
    with open(paths["report"], "w") as fh:
        json.dump(asdict(report), fh, indent=1)
    with open(paths["iterations"], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "srocc", "plcc", "rmse"])
        for i, row in enumerate(zip(report.srocc, report.plcc, report.rmse)):
            w.writerow([i, *map(repr, row)])
    with open(paths["scatter"], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["video_id", "pred", "mapped", "mos"])
        sc = report.scatter
        for row in zip(sc["video_id"], sc["pred"], sc["mapped"], sc["mos"]):
            w.writerow([row[0], *map(repr, row[1:])])
    return paths

