"""Per-epoch selection orchestration.

Each epoch: recompute difficulties from that epoch's score records, adjust
them against the previous epoch, threshold, filter, select (quality-weighted
diverse subset or a baseline strategy), write a manifest, update state.
"""

from __future__ import annotations

import hashlib
import json
import os
import subprocess
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol, Sequence

import numpy as np

from .difficulty import SEGMENTATION_STRATEGIES, difficulty
from .dpp import (
    QUALITY_FLOOR,
    FeatureMatrix,
    QualityVector,
    greedy_map,
    kernel_matrix,
    similarity_matrix,
)
from .errors import (
    EmptyPoolError,
    HookFailureError,
    KTooLargeError,
    MissingMetricError,
    MissingScoresError,
    SchemaError,
)
from .records import Sample, ScoreRecord
from .spl import AdjustedDifficulty, DifficultyHistory, PaceConfig, adjust, filter_pool, schedule_percentile

STRATEGIES = ("p3", "spl_only", "random", "curriculum")
CURRICULUM_METRICS = ("answer_rows", "answer_length", "question_length", "level")

CONFIG_KEYS = (
    "epochs",
    "k",
    "alpha",
    "start_percentile",
    "end_percentile",
    "seed",
    "segmentation",
    "strategy",
    "curriculum_metric",
    "jitter_base",
    "warmup_k",
)


@dataclass(frozen=True)
class RunConfig:
    """Full configuration of one selection run."""

    epochs: int
    k: int
    pace: PaceConfig = field(default_factory=PaceConfig)
    segmentation: str = "lines"
    seed: int = 0
    jitter_base: float = 1e-10
    strategy: str = "p3"
    curriculum_metric: str | None = None
    warmup_k: int = 0
    kernel_diagnostics: bool = False

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.segmentation not in SEGMENTATION_STRATEGIES:
            raise ValueError(f"unknown segmentation {self.segmentation!r}")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.strategy == "curriculum" and self.curriculum_metric not in CURRICULUM_METRICS:
            raise ValueError("curriculum strategy requires a curriculum_metric")
        if self.jitter_base < 0.0:
            raise ValueError("jitter_base must be >= 0")
        if self.warmup_k < 0:
            raise ValueError("warmup_k must be >= 0")
        if self.pace.epochs != self.epochs:
            raise ValueError("pace.epochs must equal epochs")

    @classmethod
    def from_dict(cls, obj: dict) -> "RunConfig":
        unknown = set(obj) - set(CONFIG_KEYS)
        if unknown:
            raise SchemaError(f"unknown config keys: {sorted(unknown)}")
        if "epochs" not in obj or "k" not in obj:
            raise SchemaError("config requires 'epochs' and 'k'")
        epochs = int(obj["epochs"])
        try:
            pace = PaceConfig(
                start_percentile=float(obj.get("start_percentile", 50.0)),
                end_percentile=float(obj.get("end_percentile", 95.0)),
                alpha=float(obj.get("alpha", 0.5)),
                epochs=epochs,
            )
            return cls(
                epochs=epochs,
                k=int(obj["k"]),
                pace=pace,
                segmentation=str(obj.get("segmentation", "lines")),
                seed=int(obj.get("seed", 0)),
                jitter_base=float(obj.get("jitter_base", 1e-10)),
                strategy=str(obj.get("strategy", "p3")),
                curriculum_metric=obj.get("curriculum_metric"),
                warmup_k=int(obj.get("warmup_k", 0)),
            )
        except ValueError as exc:
            raise SchemaError(f"bad config: {exc}") from exc

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        try:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(obj, dict):
            raise SchemaError(f"{path}: config must be a JSON object")
        return cls.from_dict(obj)

    def to_flat_dict(self) -> dict:
        return {
            "epochs": self.epochs,
            "k": self.k,
            "alpha": self.pace.alpha,
            "start_percentile": self.pace.start_percentile,
            "end_percentile": self.pace.end_percentile,
            "seed": self.seed,
            "segmentation": self.segmentation,
            "strategy": self.strategy,
            "curriculum_metric": self.curriculum_metric,
            "jitter_base": self.jitter_base,
            "warmup_k": self.warmup_k,
        }

    @property
    def config_hash(self) -> str:
        canonical = json.dumps(self.to_flat_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class SelectedEntry:
    sample_id: str
    difficulty: float | None
    adjusted: float | None
    quality: float | None

    def to_json_obj(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "difficulty": self.difficulty,
            "adjusted": self.adjusted,
            "quality": self.quality,
        }


@dataclass(frozen=True)
class SelectionManifest:
    """Per-epoch machine-readable selection record."""

    epoch: int
    strategy: str
    lam: float | None
    percentile: float | None
    pool_size: int
    kept_size: int
    expanded: bool
    rank_fill: int
    jitter: float
    selected: tuple[SelectedEntry, ...]
    seed: int
    config_hash: str
    budget_fraction: float
    kernel_diag: dict | None = None

    @property
    def selected_ids(self) -> list[str]:
        return [e.sample_id for e in self.selected]

    def to_json_obj(self) -> dict:
        obj = {
            "epoch": self.epoch,
            "strategy": self.strategy,
            "lambda": self.lam,
            "percentile": self.percentile,
            "pool_size": self.pool_size,
            "kept_size": self.kept_size,
            "expanded": self.expanded,
            "rank_fill": self.rank_fill,
            "jitter": self.jitter,
            "selected": [e.to_json_obj() for e in self.selected],
            "seed": self.seed,
            "config_hash": self.config_hash,
            "budget_fraction": self.budget_fraction,
        }
        if self.kernel_diag is not None:
            obj["kernel"] = self.kernel_diag
        return obj

    def write(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(json.dumps(self.to_json_obj(), indent=2) + "\n", encoding="utf-8")
        os.replace(tmp, path)


def load_manifest(path: str | Path) -> dict:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(obj, dict) or "selected" not in obj:
        raise SchemaError(f"{path}: not a selection manifest")
    return obj


@dataclass
class EpochState:
    """Carry-over between epochs: last completed epoch and its difficulties."""

    epoch: int = 0
    difficulty: dict[str, float] = field(default_factory=dict)
    seed: int = 0
    config_hash: str = ""

    def to_json_obj(self) -> dict:
        return {
            "epoch": self.epoch,
            "seed": self.seed,
            "config_hash": self.config_hash,
            "difficulty": self.difficulty,
        }

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(json.dumps(self.to_json_obj(), indent=2) + "\n", encoding="utf-8")
        os.replace(tmp, path)

    @classmethod
    def load(cls, path: str | Path) -> "EpochState":
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            epoch=int(obj["epoch"]),
            difficulty={str(k): float(v) for k, v in obj["difficulty"].items()},
            seed=int(obj.get("seed", 0)),
            config_hash=str(obj.get("config_hash", "")),
        )


class ScoreSource(Protocol):
    def records_for_epoch(self, epoch: int) -> dict[str, ScoreRecord]: ...


class DirectoryScoreSource:
    """Reads scores.epochE.jsonl files from a directory."""

    def __init__(self, scores_dir: str | Path, sample_ids: set[str] | None = None):
        self.scores_dir = Path(scores_dir)
        self.sample_ids = sample_ids

    def path_for_epoch(self, epoch: int) -> Path:
        return self.scores_dir / f"scores.epoch{epoch}.jsonl"

    def records_for_epoch(self, epoch: int) -> dict[str, ScoreRecord]:
        from .records import load_scores

        path = self.path_for_epoch(epoch)
        if not path.exists():
            raise SchemaError(f"missing score file {path}")
        return load_scores(path, self.sample_ids)


def compute_difficulties(dataset: Sequence[Sample], scores: dict[str, ScoreRecord]) -> dict[str, float]:
    """Difficulty per dataset sample from this epoch's score records."""
    missing = [s.id for s in dataset if s.id not in scores]
    if missing:
        head = ", ".join(missing[:10])
        more = "" if len(missing) <= 10 else f" (+{len(missing) - 10} more)"
        raise MissingScoresError(f"score records missing for {len(missing)} samples: {head}{more}")
    return {s.id: difficulty(scores[s.id].action_probs) for s in dataset}


def _histories(
    dataset: Sequence[Sample],
    diffs: dict[str, float],
    state: EpochState,
    epoch: int,
) -> list[DifficultyHistory]:
    use_previous = epoch >= 2 and state.epoch == epoch - 1
    return [
        DifficultyHistory(
            sample_id=s.id,
            current=diffs[s.id],
            previous=state.difficulty.get(s.id) if use_previous else None,
        )
        for s in dataset
    ]


def _entries(kept: Sequence[AdjustedDifficulty]) -> list[SelectedEntry]:
    return [
        SelectedEntry(
            sample_id=a.sample_id,
            difficulty=a.raw,
            adjusted=a.adjusted,
            quality=float(np.clip(a.raw, QUALITY_FLOOR, 1.0)),
        )
        for a in kept
    ]


def dynamic_select(
    dataset: Sequence[Sample],
    scores: dict[str, ScoreRecord],
    state: EpochState,
    config: RunConfig,
    epoch: int,
) -> SelectionManifest:
    """One epoch of threshold filtering plus subset selection.

    Handles the ``p3`` (diverse) and ``spl_only`` (threshold-then-top-k)
    strategies; baselines live in :func:`baseline_select`.
    """
    if not dataset:
        raise EmptyPoolError("dataset is empty")
    if config.k > len(dataset):
        raise KTooLargeError(f"k={config.k} exceeds dataset size {len(dataset)}")

    diffs = compute_difficulties(dataset, scores)
    histories = _histories(dataset, diffs, state, epoch)
    lam, kept = filter_pool(histories, epoch, config.pace)

    expanded = False
    if len(kept) < config.k:
        all_adjusted = adjust(histories, config.pace.alpha)
        kept = sorted(all_adjusted, key=lambda a: a.adjusted)[: config.k]
        expanded = True

    jitter = 0.0
    rank_fill = 0
    kernel_diag = None
    if config.strategy == "p3":
        ids = [a.sample_id for a in kept]
        rows = [scores[i].embedding for i in ids]
        features = FeatureMatrix.from_rows(rows)
        quality = QualityVector.from_difficulties([a.raw for a in kept])
        kern = kernel_matrix(quality, similarity_matrix(features), config.jitter_base)
        sel = greedy_map(kern, config.k)
        chosen = [kept[i] for i in sel.indices]
        jitter = kern.jitter
        rank_fill = sel.rank_fill
        if config.kernel_diagnostics:
            diag = np.diag(kern.entries)
            kernel_diag = {
                "min_diag": float(diag.min()),
                "max_diag": float(diag.max()),
                "jitter": kern.jitter,
            }
    elif config.strategy == "spl_only":
        chosen = sorted(kept, key=lambda a: a.adjusted)[: config.k]
    else:
        raise ValueError(f"dynamic_select does not handle strategy {config.strategy!r}")

    return SelectionManifest(
        epoch=epoch,
        strategy=config.strategy,
        lam=lam,
        percentile=schedule_percentile(epoch, config.pace),
        pool_size=len(dataset),
        kept_size=len(kept),
        expanded=expanded,
        rank_fill=rank_fill,
        jitter=jitter,
        selected=tuple(_entries(chosen)),
        seed=config.seed,
        config_hash=config.config_hash,
        budget_fraction=config.k / len(dataset),
        kernel_diag=kernel_diag,
    )


def _curriculum_value(sample: Sample, record: ScoreRecord | None, metric: str) -> float:
    if metric == "answer_rows":
        return float(sample.output.count("\n"))
    if metric == "answer_length":
        if record is not None and "answer" in record.token_counts:
            return float(record.token_counts["answer"])
        return float(len(sample.output.split()))
    if metric == "question_length":
        if record is not None and "question" in record.token_counts:
            return float(record.token_counts["question"])
        return float(len(sample.instruction.split()))
    if metric == "level":
        raw = sample.meta.get("level")
        if raw is None:
            raise MissingMetricError(f"sample {sample.id!r} has no 'level' metadata")
        try:
            return float(raw)
        except ValueError as exc:
            raise MissingMetricError(f"sample {sample.id!r} level {raw!r} is not numeric") from exc
    raise MissingMetricError(f"unknown curriculum metric {metric!r}")


def _bucket_bounds(n: int, parts: int) -> list[tuple[int, int]]:
    # first n % parts buckets get one extra item, like np.array_split
    size, extra = divmod(n, parts)
    bounds = []
    start = 0
    for b in range(parts):
        end = start + size + (1 if b < extra else 0)
        bounds.append((start, end))
        start = end
    return bounds


def baseline_select(
    dataset: Sequence[Sample],
    scores: dict[str, ScoreRecord],
    state: EpochState,
    config: RunConfig,
    epoch: int,
) -> SelectionManifest:
    """Random or curriculum baseline selection for one epoch."""
    if config.strategy not in ("random", "curriculum"):
        raise ValueError(f"baseline_select does not handle strategy {config.strategy!r}")
    if not dataset:
        raise EmptyPoolError("dataset is empty")
    if config.k > len(dataset):
        raise KTooLargeError(f"k={config.k} exceeds dataset size {len(dataset)}")

    diffs = compute_difficulties(dataset, scores)
    adjusted = adjust(_histories(dataset, diffs, state, epoch), config.pace.alpha)
    by_id = {a.sample_id: a for a in adjusted}

    if config.strategy == "random":
        rng = np.random.default_rng([config.seed, epoch])
        picks = rng.permutation(len(dataset))[: config.k]
        chosen = [adjusted[int(i)] for i in picks]
    else:
        metric = config.curriculum_metric or ""
        keyed = [
            (_curriculum_value(s, scores.get(s.id), metric), i)
            for i, s in enumerate(dataset)
        ]
        order = [i for _, i in sorted(keyed, key=lambda t: t[0])]
        bounds = _bucket_bounds(len(order), config.epochs)
        b = epoch - 1
        pool = list(order[bounds[b][0] : bounds[b][1]])
        # pad short buckets from neighbors, easier side first
        distance = 1
        while len(pool) < config.k and distance < config.epochs:
            for nb in (b - distance, b + distance):
                if 0 <= nb < config.epochs:
                    pool.extend(order[bounds[nb][0] : bounds[nb][1]])
            distance += 1
        chosen = [by_id[dataset[i].id] for i in pool[: config.k]]

    return SelectionManifest(
        epoch=epoch,
        strategy=config.strategy,
        lam=None,
        percentile=None,
        pool_size=len(dataset),
        kept_size=len(dataset),
        expanded=False,
        rank_fill=0,
        jitter=0.0,
        selected=tuple(_entries(chosen)),
        seed=config.seed,
        config_hash=config.config_hash,
        budget_fraction=config.k / len(dataset),
    )


def select_epoch(
    dataset: Sequence[Sample],
    scores: dict[str, ScoreRecord],
    state: EpochState,
    config: RunConfig,
    epoch: int,
) -> SelectionManifest:
    if config.strategy in ("p3", "spl_only"):
        return dynamic_select(dataset, scores, state, config, epoch)
    return baseline_select(dataset, scores, state, config, epoch)


def _warmup_manifest(dataset: Sequence[Sample], config: RunConfig) -> SelectionManifest:
    rng = np.random.default_rng([config.seed, 0])
    picks = rng.permutation(len(dataset))[: config.warmup_k]
    entries = [
        SelectedEntry(sample_id=dataset[int(i)].id, difficulty=None, adjusted=None, quality=None)
        for i in picks
    ]
    return SelectionManifest(
        epoch=0,
        strategy="warmup",
        lam=None,
        percentile=None,
        pool_size=len(dataset),
        kept_size=len(dataset),
        expanded=False,
        rank_fill=0,
        jitter=0.0,
        selected=tuple(entries),
        seed=config.seed,
        config_hash=config.config_hash,
        budget_fraction=config.warmup_k / len(dataset),
    )


@contextmanager
def _state_lock(state_dir: Path):
    state_dir.mkdir(parents=True, exist_ok=True)
    lock = state_dir / "lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise SchemaError(
            f"state dir {state_dir} is locked by another run (remove {lock} if stale)"
        ) from None
    try:
        os.write(fd, f"{os.getpid()}\n".encode())
        os.close(fd)
        yield
    finally:
        lock.unlink(missing_ok=True)


def _run_hook(cmd: Sequence[str], manifest_path: Path) -> None:
    proc = subprocess.run([*cmd, str(manifest_path)])
    if proc.returncode != 0:
        raise HookFailureError(
            f"trainer hook {' '.join(cmd)} exited {proc.returncode} for {manifest_path.name}",
            proc.returncode,
        )


def manifest_path(out_dir: str | Path, epoch: int) -> Path:
    return Path(out_dir) / "manifests" / f"manifest.epoch{epoch}.json"


def run(
    dataset: Sequence[Sample],
    score_source: ScoreSource,
    config: RunConfig,
    out_dir: str | Path,
    trainer_hook: Sequence[str] | None = None,
    state_dir: str | Path | None = None,
    only_epoch: int | None = None,
    log: Callable[[str], None] | None = None,
) -> list[SelectionManifest]:
    """Run selection for all epochs (or one), writing manifests and state.

    The trainer hook, when given, is invoked with the manifest path appended
    after each epoch; a nonzero exit aborts the run. The engine itself never
    trains anything.
    """
    out_dir = Path(out_dir)
    state_dir = Path(state_dir) if state_dir is not None else out_dir / "state"
    history_path = state_dir / "history.json"

    if only_epoch is not None and not 1 <= only_epoch <= config.epochs:
        raise SchemaError(f"--epoch {only_epoch} outside 1..{config.epochs}")
    epochs = [only_epoch] if only_epoch is not None else list(range(1, config.epochs + 1))

    manifests: list[SelectionManifest] = []
    with _state_lock(state_dir):
        if epochs[0] == 1:
            state = EpochState(seed=config.seed, config_hash=config.config_hash)
        else:
            if not history_path.exists():
                raise SchemaError(
                    f"missing state for epoch {epochs[0] - 1}: {history_path} not found"
                )
            state = EpochState.load(history_path)
            if state.epoch != epochs[0] - 1:
                raise SchemaError(
                    f"missing state for epoch {epochs[0] - 1}: last completed epoch is {state.epoch}"
                )
            if state.config_hash and state.config_hash != config.config_hash:
                raise SchemaError("state belongs to a different config (hash mismatch)")

        if epochs[0] == 1 and config.warmup_k > 0:
            warmup = _warmup_manifest(dataset, config)
            path = manifest_path(out_dir, 0)
            warmup.write(path)
            manifests.append(warmup)
            if log:
                log(f"epoch 0 (warmup): k={config.warmup_k}")
            if trainer_hook:
                _run_hook(trainer_hook, path)

        for epoch in epochs:
            scores = score_source.records_for_epoch(epoch)
            manifest = select_epoch(dataset, scores, state, config, epoch)
            path = manifest_path(out_dir, epoch)
            manifest.write(path)
            manifests.append(manifest)

            state = EpochState(
                epoch=epoch,
                difficulty=compute_difficulties(dataset, scores),
                seed=config.seed,
                config_hash=config.config_hash,
            )
            state.save(history_path)

            observe = getattr(score_source, "observe", None)
            if observe is not None:
                observe(manifest)
            if log:
                lam = "-" if manifest.lam is None else f"{manifest.lam:.6f}"
                log(
                    f"epoch {epoch}: strategy={manifest.strategy} lambda={lam} "
                    f"pool={manifest.pool_size} kept={manifest.kept_size} k={len(manifest.selected)}"
                )
            if trainer_hook:
                _run_hook(trainer_hook, path)
    return manifests
