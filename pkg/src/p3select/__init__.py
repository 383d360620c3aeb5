"""Policy-driven, pace-adaptive, diversity-promoting training-data selection."""

from .difficulty import action_probability, difficulty, segment_output
from .dpp import (
    FeatureMatrix,
    GreedySelection,
    KernelMatrix,
    QualityVector,
    greedy_map,
    kernel_matrix,
    similarity_matrix,
    subset_log_det,
)
from .pipeline import (
    DirectoryScoreSource,
    EpochState,
    RunConfig,
    SelectionManifest,
    baseline_select,
    dynamic_select,
    load_manifest,
    run,
)
from .records import Sample, ScoreRecord, load_dataset, load_scores, write_dataset, write_scores
from .report import diversity_report, write_report
from .simulate import SynthSpec, simulate
from .spl import (
    AdjustedDifficulty,
    DifficultyHistory,
    PaceConfig,
    compute_threshold,
    filter_pool,
    regularizer,
    schedule_percentile,
    spl_weight,
)

__version__ = "0.1.0"

__all__ = [
    "AdjustedDifficulty",
    "DifficultyHistory",
    "DirectoryScoreSource",
    "EpochState",
    "FeatureMatrix",
    "GreedySelection",
    "KernelMatrix",
    "PaceConfig",
    "QualityVector",
    "RunConfig",
    "Sample",
    "ScoreRecord",
    "SelectionManifest",
    "SynthSpec",
    "action_probability",
    "baseline_select",
    "compute_threshold",
    "difficulty",
    "diversity_report",
    "dynamic_select",
    "filter_pool",
    "greedy_map",
    "kernel_matrix",
    "load_dataset",
    "load_manifest",
    "load_scores",
    "regularizer",
    "run",
    "schedule_percentile",
    "segment_output",
    "similarity_matrix",
    "simulate",
    "spl_weight",
    "subset_log_det",
    "write_dataset",
    "write_report",
    "write_scores",
]
