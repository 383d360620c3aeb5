"""Dataset and score-record wire formats.

Datasets are JSONL files of {"id", "instruction", "output", "meta"} objects;
score files are JSONL of {"sample_id", "epoch", "model_tag", "action_probs",
"token_counts", "embedding"} objects, one file per epoch.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .errors import SchemaError

EMBEDDING_NORM_TOL = 1e-6


@dataclass(frozen=True)
class Sample:
    """One training example: the unit being scored and selected."""

    id: str
    instruction: str
    output: str
    meta: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class ScoreRecord:
    """Per-sample policy evidence for one epoch."""

    sample_id: str
    epoch: int
    model_tag: str
    action_probs: tuple[float, ...]
    embedding: tuple[float, ...]
    token_counts: dict[str, int] = field(default_factory=dict)

    def to_json_obj(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "epoch": self.epoch,
            "model_tag": self.model_tag,
            "action_probs": list(self.action_probs),
            "token_counts": dict(self.token_counts),
            "embedding": list(self.embedding),
        }


def _read_jsonl(path: Path) -> Iterable[tuple[int, dict]]:
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path.name} line {lineno}: invalid JSON ({exc})") from exc
            if not isinstance(obj, dict):
                raise SchemaError(f"{path.name} line {lineno}: expected an object")
            yield lineno, obj


def check_dataset_file(path: Path) -> tuple[list[Sample], list[str]]:
    """Parse a dataset file, collecting per-record problems."""
    samples: list[Sample] = []
    problems: list[str] = []
    seen: set[str] = set()
    for lineno, obj in _read_jsonl(path):
        where = f"{path.name} line {lineno}"
        sid = obj.get("id")
        if not isinstance(sid, str) or not sid:
            problems.append(f"{where}: missing or empty id")
            continue
        if sid in seen:
            problems.append(f"{where}: duplicate sample id {sid!r}")
            continue
        seen.add(sid)
        instruction = obj.get("instruction")
        output = obj.get("output")
        if not isinstance(instruction, str):
            problems.append(f"{where}: id {sid!r} missing instruction")
            continue
        if not isinstance(output, str) or not output.strip():
            problems.append(f"{where}: id {sid!r} has empty output")
            continue
        meta = obj.get("meta", {})
        if not isinstance(meta, dict):
            problems.append(f"{where}: id {sid!r} meta must be an object")
            continue
        samples.append(
            Sample(id=sid, instruction=instruction, output=output, meta={str(k): str(v) for k, v in meta.items()})
        )
    if not samples and not problems:
        problems.append(f"{path.name}: no records")
    return samples, problems


def check_scores_file(
    path: Path,
    sample_ids: set[str] | None = None,
) -> tuple[dict[str, ScoreRecord], list[str]]:
    """Parse a score file, collecting per-record problems.

    When ``sample_ids`` is given, each record must refer to a known sample.
    """
    records: dict[str, ScoreRecord] = {}
    problems: list[str] = []
    dim: int | None = None
    for lineno, obj in _read_jsonl(path):
        where = f"{path.name} line {lineno}"
        sid = obj.get("sample_id")
        if not isinstance(sid, str) or not sid:
            problems.append(f"{where}: missing sample_id")
            continue
        if sid in records:
            problems.append(f"{where}: duplicate sample_id {sid!r}")
            continue
        if sample_ids is not None and sid not in sample_ids:
            problems.append(f"{where}: sample_id {sid!r} not in dataset")
            continue
        epoch = obj.get("epoch")
        if not isinstance(epoch, int) or epoch < 1:
            problems.append(f"{where}: {sid!r} epoch must be an integer >= 1")
            continue
        probs = obj.get("action_probs")
        if not isinstance(probs, list) or not probs:
            problems.append(f"{where}: {sid!r} action_probs must be a nonempty list")
            continue
        bad_prob = next(
            (p for p in probs if not isinstance(p, (int, float)) or not 0.0 < float(p) <= 1.0),
            None,
        )
        if bad_prob is not None:
            problems.append(f"{where}: {sid!r} action_prob {bad_prob!r} outside (0, 1]")
            continue
        emb = obj.get("embedding")
        if not isinstance(emb, list) or not emb:
            problems.append(f"{where}: {sid!r} embedding must be a nonempty list")
            continue
        if dim is None:
            dim = len(emb)
        elif len(emb) != dim:
            problems.append(f"{where}: {sid!r} embedding dimension {len(emb)} != {dim}")
            continue
        norm = math.sqrt(math.fsum(float(x) * float(x) for x in emb))
        if abs(norm - 1.0) > EMBEDDING_NORM_TOL:
            problems.append(f"{where}: {sid!r} embedding norm {norm:.6f} not within 1e-6 of 1")
            continue
        counts = obj.get("token_counts", {})
        if not isinstance(counts, dict):
            problems.append(f"{where}: {sid!r} token_counts must be an object")
            continue
        records[sid] = ScoreRecord(
            sample_id=sid,
            epoch=epoch,
            model_tag=str(obj.get("model_tag", "")),
            action_probs=tuple(float(p) for p in probs),
            embedding=tuple(float(x) for x in emb),
            token_counts={str(k): int(v) for k, v in counts.items()},
        )
    if not records and not problems:
        problems.append(f"{path.name}: no records")
    return records, problems


def load_dataset(path: str | Path) -> list[Sample]:
    """Load and validate a dataset file; raise on the first batch of problems."""
    samples, problems = check_dataset_file(Path(path))
    if problems:
        raise SchemaError("; ".join(problems[:5]) + ("" if len(problems) <= 5 else f" (+{len(problems) - 5} more)"))
    return samples


def load_scores(path: str | Path, sample_ids: set[str] | None = None) -> dict[str, ScoreRecord]:
    """Load and validate a score file; raise on the first batch of problems."""
    records, problems = check_scores_file(Path(path), sample_ids)
    if problems:
        raise SchemaError("; ".join(problems[:5]) + ("" if len(problems) <= 5 else f" (+{len(problems) - 5} more)"))
    return records


def write_scores(path: str | Path, records: Iterable[ScoreRecord]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json_obj()) + "\n")


def write_dataset(path: str | Path, samples: Iterable[Sample]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for s in samples:
            obj = {"id": s.id, "instruction": s.instruction, "output": s.output, "meta": s.meta}
            fh.write(json.dumps(obj) + "\n")
