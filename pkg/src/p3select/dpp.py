"""Diversity-promoting subset selection.

Builds a quality-weighted cosine kernel L = Q S Q over unit-norm feature
rows and greedily selects the subset whose kernel submatrix determinant is
(approximately) maximal, using the incremental-Cholesky fast greedy update:
each step costs O(n) per candidate scan after an O(n) residual update.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    DimensionMismatchError,
    IndexOutOfRangeError,
    KTooLargeError,
    NotPSDError,
    SizeMismatchError,
)

QUALITY_FLOOR = 1e-6
JITTER_LIMIT = 1e-3


@dataclass(frozen=True)
class FeatureMatrix:
    """Unit-norm feature rows, one per sample."""

    rows: np.ndarray

    @classmethod
    def from_rows(cls, rows) -> "FeatureMatrix":
        if isinstance(rows, np.ndarray):
            data = rows.astype(float)
        else:
            rows = list(rows)
            dim = len(rows[0])
            for i, r in enumerate(rows):
                if len(r) != dim:
                    raise DimensionMismatchError(
                        f"row {i} has length {len(r)}, expected {dim}"
                    )
            data = np.asarray(rows, dtype=float)
        if data.ndim != 2 or data.shape[0] < 1:
            raise DimensionMismatchError(f"expected a nonempty 2-d array, got shape {data.shape}")
        norms = np.linalg.norm(data, axis=1, keepdims=True)
        if np.any(norms == 0.0):
            raise DimensionMismatchError("zero feature vector cannot be normalized")
        return cls(rows=data / norms)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]


@dataclass(frozen=True)
class QualityVector:
    """Per-sample quality weights, clamped to [QUALITY_FLOOR, 1]."""

    values: np.ndarray

    @classmethod
    def from_difficulties(cls, difficulties) -> "QualityVector":
        vals = np.clip(np.asarray(difficulties, dtype=float), QUALITY_FLOOR, 1.0)
        return cls(values=vals)

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class KernelMatrix:
    """Symmetric PSD kernel, with the diagonal jitter actually applied."""

    entries: np.ndarray
    jitter: float

    @property
    def n(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class GreedySelection:
    """Greedy MAP result: chosen indices in pick order.

    ``rank_fill`` counts trailing slots that had to be filled by descending
    quality because every remaining marginal determinant gain was -inf.
    """

    indices: list[int]
    rank_fill: int


def similarity_matrix(features: FeatureMatrix) -> np.ndarray:
    """Cosine similarity of the (pre-normalized) feature rows."""
    s = features.rows @ features.rows.T
    s = (s + s.T) / 2.0
    np.clip(s, -1.0, 1.0, out=s)
    np.fill_diagonal(s, 1.0)
    return s


def kernel_matrix(
    quality: QualityVector,
    similarity: np.ndarray,
    jitter_base: float = 1e-10,
) -> KernelMatrix:
    """Quality-weighted kernel L_ij = q_i * S_ij * q_j, repaired to PSD.

    The smallest jitter from {0, jitter_base, 10*jitter_base, ...} that lets
    a Cholesky factorization succeed is added to the diagonal and recorded;
    escalation past JITTER_LIMIT raises NotPSDError.
    """
    similarity = np.asarray(similarity, dtype=float)
    n = quality.n
    if similarity.shape != (n, n):
        raise SizeMismatchError(
            f"similarity is {similarity.shape}, expected ({n}, {n})"
        )
    q = quality.values
    base = q[:, None] * similarity * q[None, :]
    base = (base + base.T) / 2.0
    for jitter in _jitter_ladder(jitter_base):
        candidate = base if jitter == 0.0 else base + jitter * np.eye(n)
        try:
            np.linalg.cholesky(candidate)
        except np.linalg.LinAlgError:
            continue
        return KernelMatrix(entries=candidate, jitter=jitter)
    raise NotPSDError(f"kernel not PSD after jitter escalation up to {JITTER_LIMIT}")


def _jitter_ladder(jitter_base: float) -> list[float]:
    ladder = [0.0]
    if jitter_base > 0.0:
        j = jitter_base
        while j <= JITTER_LIMIT:
            ladder.append(j)
            j *= 10.0
    return ladder


def subset_log_det(kernel: KernelMatrix, indices: Sequence[int]) -> float:
    """log det of the kernel submatrix; -inf when singular, 0 for empty Y."""
    idx = list(indices)
    if len(set(idx)) != len(idx):
        raise IndexOutOfRangeError(f"duplicate indices in {idx}")
    for i in idx:
        if not 0 <= i < kernel.n:
            raise IndexOutOfRangeError(f"index {i} outside 0..{kernel.n - 1}")
    if not idx:
        return 0.0
    sub = kernel.entries[np.ix_(idx, idx)]
    try:
        chol = np.linalg.cholesky(sub)
    except np.linalg.LinAlgError:
        return float("-inf")
    return float(2.0 * np.sum(np.log(np.diag(chol))))


def greedy_map(kernel: KernelMatrix, k: int) -> GreedySelection:
    """Select k indices by greedy incremental log-det maximization.

    Each step picks the candidate with the largest squared Cholesky
    residual (equivalently, the largest marginal log-det gain), breaking
    ties toward the lowest index. If every remaining gain is -inf before k
    items are chosen, the rest are filled by descending kernel diagonal.
    """
    n = kernel.n
    if k > n:
        raise KTooLargeError(f"cannot select {k} items from a pool of {n}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")

    entries = kernel.entries
    diag0 = np.diag(entries).copy()
    di2s = diag0.astype(float).copy()
    cis = np.zeros((k, n))
    selected: list[int] = []

    while len(selected) < k:
        j = int(np.argmax(di2s))
        dj2 = float(di2s[j])
        if not (dj2 > 0.0 and math.isfinite(dj2)):
            break
        t = len(selected)
        selected.append(j)
        if len(selected) == k:
            break
        eis = (entries[j, :] - cis[:t, j] @ cis[:t, :]) / math.sqrt(dj2)
        cis[t, :] = eis
        di2s -= np.square(eis)
        di2s[j] = float("-inf")

    rank_fill = 0
    if len(selected) < k:
        chosen = set(selected)
        remaining = sorted(
            (i for i in range(n) if i not in chosen),
            key=lambda i: (-diag0[i], i),
        )
        fill = remaining[: k - len(selected)]
        rank_fill = len(fill)
        selected.extend(fill)
    return GreedySelection(indices=selected, rank_fill=rank_fill)
