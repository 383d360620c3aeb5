"""Deterministic mock scorer.

Stands in for a language model so the engine can run standalone: action
probabilities and embeddings are derived from a seeded hash of the sample,
with an optional per-epoch improvement to mimic a model that learns.
"""

from __future__ import annotations

import hashlib
from typing import Sequence

import numpy as np

from .difficulty import segment_output
from .records import Sample, ScoreRecord

DEFAULT_EMBED_DIM = 32
DEFAULT_IMPROVE = 0.05


def rng_for(*parts) -> np.random.Generator:
    """Stable generator keyed by the given parts."""
    digest = hashlib.sha256(":".join(str(p) for p in parts).encode("utf-8")).digest()
    entropy = np.frombuffer(digest, dtype=np.uint64)
    return np.random.default_rng(entropy.tolist())


def mock_score_records(
    samples: Sequence[Sample],
    epoch: int,
    seed: int = 0,
    segmentation: str = "lines",
    dim: int = DEFAULT_EMBED_DIM,
    improve: float = DEFAULT_IMPROVE,
) -> list[ScoreRecord]:
    """Schema-valid score records derived deterministically from the inputs.

    Base per-action probabilities are hashed from (seed, sample id); each
    later epoch shifts them up by ``improve`` to mimic learning.
    """
    records = []
    for sample in samples:
        rng = rng_for("p3-mock", seed, sample.id)
        actions = segment_output(sample.output, segmentation)
        base = rng.uniform(0.05, 0.95, size=len(actions))
        probs = np.clip(base + improve * (epoch - 1), 1e-6, 1.0)
        emb = rng.normal(size=dim)
        emb = emb / np.linalg.norm(emb)
        records.append(
            ScoreRecord(
                sample_id=sample.id,
                epoch=epoch,
                model_tag=f"mock-seed{seed}",
                action_probs=tuple(float(p) for p in probs),
                embedding=tuple(float(x) for x in emb),
                token_counts={
                    "question": len(sample.instruction.split()),
                    "answer": len(sample.output.split()),
                },
            )
        )
    return records


class MockScoreSource:
    """In-memory score source backed by the mock scorer."""

    def __init__(
        self,
        samples: Sequence[Sample],
        seed: int = 0,
        segmentation: str = "lines",
        dim: int = DEFAULT_EMBED_DIM,
        improve: float = DEFAULT_IMPROVE,
    ):
        self.samples = list(samples)
        self.seed = seed
        self.segmentation = segmentation
        self.dim = dim
        self.improve = improve

    def records_for_epoch(self, epoch: int) -> dict[str, ScoreRecord]:
        records = mock_score_records(
            self.samples,
            epoch,
            seed=self.seed,
            segmentation=self.segmentation,
            dim=self.dim,
            improve=self.improve,
        )
        return {r.sample_id: r for r in records}
