from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

from .errors import AdapterError
from .segmentation import SEGMENTATION_STRATEGIES

EMBEDDING_POOLING = "mean over final hidden states"


@dataclass(frozen=True)
class AdapterConfig:
    """Scoring configuration; the hash of it travels in every model_tag."""

    model_id: str
    segmentation: str = "lines"
    batch_size: int = 8
    max_length: int = 1024
    device: str = "cpu"

    def __post_init__(self):
        if not self.model_id:
            raise AdapterError("model_id must be nonempty")
        if self.segmentation not in SEGMENTATION_STRATEGIES:
            raise AdapterError(f"unknown segmentation {self.segmentation!r}")
        if self.batch_size < 1:
            raise AdapterError("batch_size must be >= 1")
        if self.max_length < 8:
            raise AdapterError("max_length must be >= 8")


def echo_config(config: AdapterConfig) -> str:
    """Stable hash over the fields that change scoring semantics."""
    payload = json.dumps(
        {
            "segmentation": config.segmentation,
            "model_id": config.model_id,
            "pooling": EMBEDDING_POOLING,
        },
        sort_keys=True,
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:12]
