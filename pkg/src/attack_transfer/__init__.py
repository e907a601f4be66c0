"""Cross-attack transferability experiments for flow-based intrusion detection."""

__version__ = "0.1.0"

from .augment import AugmentPlan, bootstrap_resample, make_binary_trainset, smote_generate
from .ingest import (
    CleanReport,
    DatasetSplit,
    FlowDataset,
    FlowRecord,
    class_histogram,
    clean,
    load_cache,
    load_csv,
    load_csvs,
    save_cache,
    split,
)
from .labels import CLASS_NAMES, LabelMap, default_label_map
from .nn import EvalResult, ModelConfig, ModelParams, evaluate, forward, init_params, train
from .preprocess import (
    Standardizer,
    TransformSpec,
    dct_batch,
    dct_by_batches,
    differential,
    standardize_apply,
    standardize_fit,
    temporal_average,
)
from .rfe import FeatureRanking, common_features, rfe_pair, rfe_single
from .transfer import (
    TransferCellResult,
    TransferMatrix,
    TransferRelation,
    build_matrix,
    classify_relations,
    run_cell,
)

__all__ = [
    "AugmentPlan",
    "CLASS_NAMES",
    "CleanReport",
    "DatasetSplit",
    "EvalResult",
    "FeatureRanking",
    "FlowDataset",
    "FlowRecord",
    "LabelMap",
    "ModelConfig",
    "ModelParams",
    "Standardizer",
    "TransferCellResult",
    "TransferMatrix",
    "TransferRelation",
    "TransformSpec",
    "bootstrap_resample",
    "build_matrix",
    "class_histogram",
    "classify_relations",
    "clean",
    "common_features",
    "dct_batch",
    "dct_by_batches",
    "default_label_map",
    "differential",
    "evaluate",
    "forward",
    "init_params",
    "load_cache",
    "load_csv",
    "load_csvs",
    "make_binary_trainset",
    "rfe_pair",
    "rfe_single",
    "run_cell",
    "save_cache",
    "smote_generate",
    "split",
    "standardize_apply",
    "standardize_fit",
    "temporal_average",
    "train",
]
