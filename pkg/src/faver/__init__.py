"""Frame-rate-aware no-reference video quality features and SVR regression."""

from .errors import (
    DataError,
    DegenerateInputError,
    EmptyPlanError,
    FaverError,
    FormatError,
    ProtocolError,
    SchemaMismatchError,
    UndefinedCorrelationError,
    UnsupportedFormatError,
)
from .evaluation import EvalReport, run_kfold, run_protocol, subband_study
from .metrics import logistic_fit, pearson, plcc_rmse, srocc
from .nss import compute_mscn, extract_nss34, fit_aggd, fit_ggd
from .pipeline import ExtractConfig, extract_video
from .regression import EnsembleModel, FeatureRecord, SearchConfig, predict, train_ensemble
from .schema import N_SPATIAL, N_TEMPORAL, N_TOTAL, ablation_mask, feature_names, schema_hash
from .spatial import extract_spatial
from .temporal import build_filter_bank, extract_temporal
from .video_io import build_sampling_plan, open_video

__version__ = "0.1.0"
