"""Teacher-forced scoring of reference outputs with a causal LM.

For each sample the output is segmented into actions; every action's token
log-probabilities are computed conditioned on the instruction plus all
preceding actions (gold prefixes, one forward pass per sample row). The
per-action probability is the length-normalized exp(mean log-prob). The
sample embedding is the mean-pooled final hidden state of the full
instruction+output sequence, L2-normalized.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .config import AdapterConfig, echo_config
from .errors import AdapterError
from .segmentation import SEPARATORS, segment_output

PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class ActionScore:
    text: str
    token_logprobs: tuple[float, ...]

    @property
    def probability(self) -> float:
        mean = math.fsum(self.token_logprobs) / len(self.token_logprobs)
        return min(max(math.exp(mean), PROB_FLOOR), 1.0)


@dataclass(frozen=True)
class SampleScore:
    sample_id: str
    actions: tuple[ActionScore, ...]
    embedding: tuple[float, ...]
    token_counts: dict[str, int]

    @property
    def action_probs(self) -> list[float]:
        return [a.probability for a in self.actions]


@dataclass(frozen=True)
class SkippedSample:
    sample_id: str
    reason: str
    tokens: int


@dataclass
class _Prepared:
    sample_id: str
    ids: list[int]
    spans: list[tuple[int, int]]
    action_texts: list[str]
    prompt_tokens: int
    answer_tokens: int


def read_samples(path: str | Path) -> list[dict]:
    """Minimal dataset.jsonl reader: id, instruction, output (meta ignored)."""
    samples = []
    seen: set[str] = set()
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise AdapterError(f"{path} line {lineno}: invalid JSON ({exc})") from exc
            sid = obj.get("id")
            if not isinstance(sid, str) or not sid or sid in seen:
                raise AdapterError(f"{path} line {lineno}: missing, empty, or duplicate id")
            seen.add(sid)
            if not isinstance(obj.get("instruction"), str):
                raise AdapterError(f"{path} line {lineno}: id {sid!r} missing instruction")
            output = obj.get("output")
            if not isinstance(output, str) or not output.strip():
                raise AdapterError(f"{path} line {lineno}: id {sid!r} has empty output")
            samples.append(obj)
    if not samples:
        raise AdapterError(f"{path}: no records")
    return samples


class ModelScorer:
    """Wraps a causal LM plus tokenizer for batch teacher-forced scoring."""

    def __init__(self, config: AdapterConfig, checkpoint_path: str | None = None):
        from transformers import AutoModelForCausalLM, AutoTokenizer

        self.config = config
        source = checkpoint_path or config.model_id
        try:
            self.tokenizer = AutoTokenizer.from_pretrained(source)
        except Exception:
            if checkpoint_path is None:
                raise
            # fine-tuned checkpoints may carry only weights
            self.tokenizer = AutoTokenizer.from_pretrained(config.model_id)
        self.model = AutoModelForCausalLM.from_pretrained(source)
        self.model.eval()
        self.device = torch.device(config.device)
        self.model.to(self.device)
        self._pad_id = (
            self.tokenizer.pad_token_id
            if self.tokenizer.pad_token_id is not None
            else (self.tokenizer.eos_token_id or 0)
        )
        self._bos_id = (
            self.tokenizer.bos_token_id
            if self.tokenizer.bos_token_id is not None
            else (self.tokenizer.eos_token_id or self._pad_id)
        )
        self.model_tag = f"p3score-{echo_config(config)}"

    def _encode(self, text: str) -> list[int]:
        return self.tokenizer(text, add_special_tokens=False)["input_ids"]

    def _prepare(self, sample: dict) -> _Prepared | SkippedSample:
        sid = sample["id"]
        actions = segment_output(sample["output"], self.config.segmentation)
        separator = SEPARATORS[self.config.segmentation]
        prompt_ids = self._encode(sample["instruction"] + "\n")
        if not prompt_ids:
            prompt_ids = [self._bos_id]  # every scored token needs left context
        ids = list(prompt_ids)
        spans: list[tuple[int, int]] = []
        texts: list[str] = []
        answer_tokens = 0
        for i, action in enumerate(actions):
            piece = action if i == 0 else separator + action
            piece_ids = self._encode(piece)
            if not piece_ids:
                continue
            spans.append((len(ids), len(ids) + len(piece_ids)))
            texts.append(action)
            ids.extend(piece_ids)
            answer_tokens += len(piece_ids)
        if not spans:
            return SkippedSample(sample_id=sid, reason="output tokenized to nothing", tokens=len(ids))
        if len(ids) > self.config.max_length:
            return SkippedSample(sample_id=sid, reason="over max_length", tokens=len(ids))
        return _Prepared(
            sample_id=sid,
            ids=ids,
            spans=spans,
            action_texts=texts,
            prompt_tokens=len(prompt_ids),
            answer_tokens=answer_tokens,
        )

    @torch.no_grad()
    def _score_batch(self, batch: list[_Prepared]) -> list[SampleScore]:
        width = max(len(p.ids) for p in batch)
        input_ids = torch.full((len(batch), width), self._pad_id, dtype=torch.long)
        mask = torch.zeros((len(batch), width), dtype=torch.long)
        for row, p in enumerate(batch):
            input_ids[row, : len(p.ids)] = torch.tensor(p.ids, dtype=torch.long)
            mask[row, : len(p.ids)] = 1
        input_ids = input_ids.to(self.device)
        mask = mask.to(self.device)
        out = self.model(input_ids=input_ids, attention_mask=mask, output_hidden_states=True)
        logprobs = torch.log_softmax(out.logits.float(), dim=-1)
        hidden = out.hidden_states[-1].float()

        scores: list[SampleScore] = []
        for row, p in enumerate(batch):
            length = len(p.ids)
            row_ids = input_ids[row]
            actions = []
            for (start, end), text in zip(p.spans, p.action_texts):
                lps = [
                    float(min(logprobs[row, t - 1, row_ids[t]].item(), 0.0))
                    for t in range(start, end)
                ]
                actions.append(ActionScore(text=text, token_logprobs=tuple(lps)))
            pooled = hidden[row, :length].mean(dim=0).cpu().numpy().astype(np.float64)
            norm = float(np.linalg.norm(pooled))
            if norm == 0.0:
                raise AdapterError(f"zero embedding for sample {p.sample_id!r}")
            embedding = tuple(float(x) for x in pooled / norm)
            scores.append(
                SampleScore(
                    sample_id=p.sample_id,
                    actions=tuple(actions),
                    embedding=embedding,
                    token_counts={"question": p.prompt_tokens, "answer": p.answer_tokens},
                )
            )
        return scores

    def score_samples(self, samples: list[dict]) -> tuple[list[SampleScore], list[SkippedSample]]:
        prepared: list[_Prepared] = []
        skipped: list[SkippedSample] = []
        for sample in samples:
            result = self._prepare(sample)
            if isinstance(result, SkippedSample):
                skipped.append(result)
            else:
                prepared.append(result)
        scores: list[SampleScore] = []
        for i in range(0, len(prepared), self.config.batch_size):
            scores.extend(self._score_batch(prepared[i : i + self.config.batch_size]))
        return scores, skipped


def score_dataset(
    dataset_path: str | Path,
    config: AdapterConfig,
    epoch: int,
    out_path: str | Path,
    checkpoint_path: str | None = None,
) -> tuple[int, list[SkippedSample]]:
    """Score a dataset file into scores.epochE.jsonl wire format.

    Overlong or untokenizable samples are skipped and listed in a sidecar
    report (``<out>.skipped.jsonl``), never silently dropped.
    """
    if epoch < 1:
        raise AdapterError(f"epoch must be >= 1, got {epoch}")
    samples = read_samples(dataset_path)
    scorer = ModelScorer(config, checkpoint_path)
    scores, skipped = scorer.score_samples(samples)

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with out_path.open("w", encoding="utf-8") as fh:
        for score in scores:
            record = {
                "sample_id": score.sample_id,
                "epoch": epoch,
                "model_tag": scorer.model_tag,
                "action_probs": score.action_probs,
                "token_counts": score.token_counts,
                "embedding": list(score.embedding),
            }
            fh.write(json.dumps(record) + "\n")

    sidecar = out_path.with_name(out_path.name + ".skipped.jsonl")
    if skipped:
        with sidecar.open("w", encoding="utf-8") as fh:
            for item in skipped:
                fh.write(
                    json.dumps(
                        {"sample_id": item.sample_id, "reason": item.reason, "tokens": item.tokens}
                    )
                    + "\n"
                )
    elif sidecar.exists():
        sidecar.unlink()
    return len(scores), skipped
