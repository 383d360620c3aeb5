"""Causal-LM scorer emitting engine-compatible score records."""

from .config import EMBEDDING_POOLING, AdapterConfig, echo_config
from .scorer import ModelScorer, SampleScore, SkippedSample, read_samples, score_dataset
from .segmentation import SEGMENTATION_STRATEGIES, segment_output

__version__ = "0.1.0"

__all__ = [
    "EMBEDDING_POOLING",
    "AdapterConfig",
    "ModelScorer",
    "SEGMENTATION_STRATEGIES",
    "SampleScore",
    "SkippedSample",
    "echo_config",
    "read_samples",
    "score_dataset",
    "segment_output",
]
