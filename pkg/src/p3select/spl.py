"""Pace-adaptive filtering.

Each epoch, every sample's difficulty is adjusted by an inter-epoch
regularizer, a percentile threshold is computed on a schedule that rises
from an easy percentile to a hard one, and samples at or below the
threshold are kept.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyPoolError


@dataclass(frozen=True)
class PaceConfig:
    """Threshold schedule and regularizer factor."""

    start_percentile: float = 50.0
    end_percentile: float = 95.0
    alpha: float = 0.5
    epochs: int = 1

    def __post_init__(self):
        if not 0.0 < self.start_percentile < 100.0:
            raise ValueError(f"start_percentile must be in (0, 100), got {self.start_percentile}")
        if not 0.0 < self.end_percentile < 100.0:
            raise ValueError(f"end_percentile must be in (0, 100), got {self.end_percentile}")
        if self.start_percentile > self.end_percentile:
            raise ValueError("start_percentile must not exceed end_percentile")
        if self.alpha < 0.0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")


@dataclass(frozen=True)
class DifficultyHistory:
    """Current difficulty plus the previous epoch's value, when one exists."""

    sample_id: str
    current: float
    previous: float | None = None


@dataclass(frozen=True)
class AdjustedDifficulty:
    """Raw difficulty plus the inter-epoch regularizer."""

    sample_id: str
    raw: float
    regularizer: float

    @property
    def adjusted(self) -> float:
        return self.raw + self.regularizer


def regularizer(current: float, previous: float | None, alpha: float) -> float:
    """Inter-epoch adjustment: alpha times the difficulty change.

    Zero at the first epoch, when no previous difficulty exists.
    """
    if alpha < 0.0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    if previous is None:
        return 0.0
    return alpha * (current - previous)


def schedule_percentile(epoch: int, config: PaceConfig) -> float:
    """Percentile used at `epoch`, linear from start to end over the run.

    A single-epoch run is its own final epoch and uses the end percentile.
    """
    if config.epochs == 1:
        return config.end_percentile
    span = config.end_percentile - config.start_percentile
    return config.start_percentile + span * (epoch - 1) / (config.epochs - 1)


def compute_threshold(adjusted: Sequence[float], epoch: int, config: PaceConfig) -> float:
    """Threshold for `epoch`: the scheduled percentile of the adjusted pool.

    Uses linear interpolation between closest order statistics.
    """
    if len(adjusted) == 0:
        raise EmptyPoolError("cannot compute a threshold over an empty pool")
    if not 1 <= epoch <= config.epochs:
        raise ValueError(f"epoch {epoch} outside 1..{config.epochs}")
    q = schedule_percentile(epoch, config)
    return float(np.percentile(np.asarray(adjusted, dtype=float), q))


def spl_weight(f: float, lam: float) -> int:
    """Binary sample weight: 1 when the score is at or below the threshold."""
    return 1 if f <= lam else 0


def adjust(histories: Sequence[DifficultyHistory], alpha: float) -> list[AdjustedDifficulty]:
    return [
        AdjustedDifficulty(
            sample_id=h.sample_id,
            raw=h.current,
            regularizer=regularizer(h.current, h.previous, alpha),
        )
        for h in histories
    ]


def filter_pool(
    histories: Sequence[DifficultyHistory],
    epoch: int,
    config: PaceConfig,
) -> tuple[float, list[AdjustedDifficulty]]:
    """Threshold the pool; returns the threshold and the kept samples.

    The threshold is computed over the adjusted difficulties of the full
    pool, and the kept set is exactly the samples whose adjusted difficulty
    is at or below it. The kept set is never empty: the pool minimum always
    sits at or below any percentile.
    """
    if len(histories) == 0:
        raise EmptyPoolError("cannot filter an empty pool")
    adjusted = adjust(histories, config.alpha)
    lam = compute_threshold([a.adjusted for a in adjusted], epoch, config)
    kept = [a for a in adjusted if spl_weight(a.adjusted, lam)]
    return lam, kept
