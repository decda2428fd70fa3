"""Two-branch SVR ensemble with randomized hyperparameter search."""

from __future__ import annotations

import json
import logging
import os
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import schema
from .errors import DataError, SchemaMismatchError, UndefinedCorrelationError
from .metrics import pearson, srocc
from .svr import SvrModel, check_finite, train_svr

log = logging.getLogger(__name__)

MODEL_FORMAT_VERSION = 1
LINEAR_ABOVE_DIMS = 1000


@dataclass
class FeatureRecord:
    video_id: str
    content_id: str
    spatial: np.ndarray
    temporal: np.ndarray
    framerate: float = 0.0
    crf: float | None = None
    mos: float | None = None
    wavelet: str = ""
    stride: str = "1s"

    def __post_init__(self) -> None:
        self.spatial = np.asarray(self.spatial, dtype=np.float64)
        self.temporal = np.asarray(self.temporal, dtype=np.float64)
        if self.spatial.shape != (schema.N_SPATIAL,):
            raise DataError(f"{self.video_id}: spatial vector has shape {self.spatial.shape}")
        if self.temporal.shape != (schema.N_TEMPORAL,):
            raise DataError(f"{self.video_id}: temporal vector has shape {self.temporal.shape}")

    @property
    def features(self) -> np.ndarray:
        return np.concatenate([self.spatial, self.temporal])


@dataclass
class SearchConfig:
    budget: int = 20
    folds: int = 5
    metric: str = "srocc"  # or "plcc"
    c_range: tuple[float, float] = (2.0**-5, 2.0**15)
    gamma_range: tuple[float, float] = (2.0**-15, 2.0**3)
    epsilon_range: tuple[float, float] = (1e-3, 1.0)  # linear kernel, in units of std(y)
    tol: float = 1e-3


def choose_kernel(n_dims: int) -> str:
    return "linear" if n_dims > LINEAR_ABOVE_DIMS else "rbf"


def _log_uniform(rng: np.random.Generator, lo: float, hi: float) -> float:
    return float(np.exp(rng.uniform(np.log(lo), np.log(hi))))


def sample_hyperparams(rng: np.random.Generator, kernel: str, cfg: SearchConfig) -> dict:
    c = _log_uniform(rng, *cfg.c_range)
    if kernel == "rbf":
        return {"C": c, "gamma": _log_uniform(rng, *cfg.gamma_range)}
    return {"C": c, "epsilon_scale": _log_uniform(rng, *cfg.epsilon_range)}


def group_folds(groups: np.ndarray, n_folds: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Assign whole groups to folds; returns per-fold test indices."""
    uniq = np.unique(groups)
    order = rng.permutation(len(uniq))
    fold_of_group = {uniq[g]: k % n_folds for k, g in enumerate(order)}
    assign = np.array([fold_of_group[g] for g in groups])
    return [np.flatnonzero(assign == k) for k in range(n_folds)]


def _fit(x, y, kernel, hp, cfg: SearchConfig, ids=None) -> SvrModel:
    if kernel == "rbf":
        return train_svr(x, y, "rbf", c=hp["C"], gamma=hp["gamma"], tol=cfg.tol, ids=ids)
    eps = hp["epsilon_scale"] * float(np.std(y))
    return train_svr(x, y, "linear", c=hp["C"], epsilon=eps, tol=cfg.tol, ids=ids)


def _score(pred: np.ndarray, truth: np.ndarray, metric: str) -> float:
    try:
        if metric == "plcc":
            return pearson(pred, truth)
        return srocc(pred, truth)
    except (UndefinedCorrelationError, ValueError):
        return 0.0


@dataclass
class SearchResult:
    hyperparams: dict
    score: float
    trials: list[tuple[dict, float]] = field(default_factory=list)


def random_search(
    x: np.ndarray,
    y: np.ndarray,
    kernel: str = "rbf",
    budget: int | None = None,
    seed: int | np.random.SeedSequence = 0,
    groups: np.ndarray | None = None,
    cfg: SearchConfig | None = None,
) -> SearchResult:
    """Pick hyperparameters by mean per-fold correlation over grouped CV folds.

    Folds never split a group (content). With fewer groups than folds the
    fold count drops to the number of groups (minimum 2).
    """
    cfg = cfg or SearchConfig()
    budget = cfg.budget if budget is None else budget
    if budget < 1:
        raise ValueError("budget must be at least 1")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    groups = np.arange(len(y)) if groups is None else np.asarray(groups)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    fold_ss, trial_ss = ss.spawn(2)
    rng = np.random.default_rng(trial_ss)
    candidates = [sample_hyperparams(rng, kernel, cfg) for _ in range(budget)]

    n_groups = len(np.unique(groups))
    n_folds = min(cfg.folds, n_groups)
    if n_folds < cfg.folds:
        warnings.warn(f"only {n_groups} groups; using {max(n_folds, 2)} folds", stacklevel=2)
    n_folds = max(n_folds, 2)
    if n_groups < 2:
        # cannot cross-validate; every candidate scores zero
        return SearchResult(candidates[0], 0.0, [(hp, 0.0) for hp in candidates])
    folds = group_folds(groups, n_folds, np.random.default_rng(fold_ss))

    trials = []
    best_hp, best_score = candidates[0], -np.inf
    for hp in candidates:
        scores = []
        for test in folds:
            if len(test) == 0:
                continue
            train = np.setdiff1d(np.arange(len(y)), test)
            model = _fit(x[train], y[train], kernel, hp, cfg)
            scores.append(_score(model.predict(x[test]), y[test], cfg.metric))
        s = float(np.mean(scores))
        trials.append((hp, s))
        if s > best_score:
            best_hp, best_score = hp, s
    return SearchResult(best_hp, best_score, trials)


@dataclass
class EnsembleModel:
    """Spatial and temporal SVRs; the score is the mean of the branches present.

    ``spatial_idx`` / ``temporal_idx`` index into the 748 feature vector.
    Ablated models may carry only one branch.
    """

    spatial_model: SvrModel | None
    temporal_model: SvrModel | None
    spatial_idx: np.ndarray
    temporal_idx: np.ndarray
    schema_hash: str = field(default_factory=schema.schema_hash)
    wavelet: str = ""
    stride: str = "1s"
    search: dict = field(default_factory=dict)

    def branch_predictions(self, features: np.ndarray) -> list[np.ndarray]:
        f = np.atleast_2d(np.asarray(features, dtype=np.float64))
        if f.shape[1] != schema.N_TOTAL:
            raise DataError(f"expected {schema.N_TOTAL} features, got {f.shape[1]}")
        out = []
        if self.spatial_model is not None:
            out.append(self.spatial_model.predict(f[:, self.spatial_idx]))
        if self.temporal_model is not None:
            out.append(self.temporal_model.predict(f[:, self.temporal_idx]))
        return out

    def predict_features(self, features: np.ndarray) -> np.ndarray:
        branches = self.branch_predictions(features)
        if len(branches) == 2:
            return (branches[0] + branches[1]) / 2
        return branches[0]

    def to_dict(self) -> dict:
        return {
            "format": "faver-ensemble",
            "version": MODEL_FORMAT_VERSION,
            "schema_hash": self.schema_hash,
            "wavelet": self.wavelet,
            "stride": self.stride,
            "combine": "mean",
            "spatial_idx": self.spatial_idx.tolist(),
            "temporal_idx": self.temporal_idx.tolist(),
            "spatial": None if self.spatial_model is None else self.spatial_model.to_dict(),
            "temporal": None if self.temporal_model is None else self.temporal_model.to_dict(),
            "search": self.search,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    def save(self, path) -> None:
        text = self.dumps()
        tmp = f"{path}.tmp"
        with open(tmp, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)

    @classmethod
    def from_dict(cls, d: dict, check_schema: bool = True) -> "EnsembleModel":
        if d.get("format") != "faver-ensemble":
            raise DataError("not a model document")
        if d.get("version") != MODEL_FORMAT_VERSION:
            raise DataError(f"unsupported model version {d.get('version')}")
        if check_schema and d["schema_hash"] != schema.schema_hash():
            raise SchemaMismatchError(
                f"model schema {d['schema_hash']} does not match features schema {schema.schema_hash()}"
            )
        return cls(
            spatial_model=None if d["spatial"] is None else SvrModel.from_dict(d["spatial"]),
            temporal_model=None if d["temporal"] is None else SvrModel.from_dict(d["temporal"]),
            spatial_idx=np.array(d["spatial_idx"], dtype=np.intp),
            temporal_idx=np.array(d["temporal_idx"], dtype=np.intp),
            schema_hash=d["schema_hash"],
            wavelet=d.get("wavelet", ""),
            stride=d.get("stride", "1s"),
            search=d.get("search", {}),
        )

    @classmethod
    def load(cls, path, check_schema: bool = True) -> "EnsembleModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh), check_schema=check_schema)


def split_mask(mask: np.ndarray | None) -> tuple[np.ndarray, np.ndarray]:
    """Split 748-vector indices into their spatial and temporal parts."""
    idx = np.arange(schema.N_TOTAL) if mask is None else np.asarray(mask, dtype=np.intp)
    return idx[idx < schema.N_SPATIAL], idx[idx >= schema.N_SPATIAL]


def _branch(x, y, groups, seed, cfg: SearchConfig, ids) -> tuple[SvrModel, dict]:
    kernel = choose_kernel(x.shape[1])
    result = random_search(x, y, kernel, seed=seed, groups=groups, cfg=cfg)
    model = _fit(x, y, kernel, result.hyperparams, cfg, ids=ids)
    return model, {"kernel": kernel, "hyperparams": result.hyperparams, "cv_score": result.score}


def train_ensemble(
    records: list[FeatureRecord],
    seed: int = 0,
    cfg: SearchConfig | None = None,
    mask: np.ndarray | None = None,
) -> EnsembleModel:
    """Search and fit one SVR per branch; ``mask`` restricts the feature set."""
    cfg = cfg or SearchConfig()
    if len(records) < 8:
        raise DataError(f"need at least 8 training records, got {len(records)}")
    missing = [r.video_id for r in records if r.mos is None]
    if missing:
        raise DataError(f"records without MOS: {', '.join(missing[:5])}")
    ids = [r.video_id for r in records]
    feats = np.array([r.features for r in records])
    check_finite(feats, ids)
    y = np.array([r.mos for r in records], dtype=np.float64)
    groups = np.array([r.content_id for r in records])
    s_idx, t_idx = split_mask(mask)
    s_seed, t_seed = np.random.SeedSequence(seed).spawn(2)

    spatial = temporal = None
    search = {}
    if len(s_idx):
        spatial, search["spatial"] = _branch(feats[:, s_idx], y, groups, s_seed, cfg, ids)
    if len(t_idx):
        temporal, search["temporal"] = _branch(feats[:, t_idx], y, groups, t_seed, cfg, ids)
    if spatial is None and temporal is None:
        raise DataError("feature mask selects no dimensions")
    return EnsembleModel(
        spatial_model=spatial,
        temporal_model=temporal,
        spatial_idx=s_idx,
        temporal_idx=t_idx,
        wavelet=records[0].wavelet,
        stride=records[0].stride,
        search=search,
    )


def predict(model: EnsembleModel, record: FeatureRecord) -> float:
    feats = record.features
    if not np.all(np.isfinite(feats)):
        raise DataError(f"{record.video_id}: non-finite features")
    return float(model.predict_features(feats)[0])
