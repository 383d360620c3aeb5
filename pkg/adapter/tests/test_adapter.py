from __future__ import annotations

import json
import math

import numpy as np
import pytest

from p3score.config import AdapterConfig, echo_config
from p3score.errors import AdapterError
from p3score.scorer import ModelScorer, read_samples, score_dataset
from p3score.segmentation import segment_output


def test_segment_lines():
    assert segment_output("a=1\nb=2", "lines") == ["a=1", "b=2"]


def test_segment_whole():
    assert segment_output("solution text", "whole") == ["solution text"]


def test_segment_steps_blank_line_boundaries():
    assert segment_output("step one\n\nstep two", "steps") == ["step one", "step two"]


def test_segment_rejects_empty():
    with pytest.raises(AdapterError):
        segment_output("   \n ", "lines")


def test_echo_config_stable_and_sensitive():
    base = AdapterConfig(model_id="m")
    assert echo_config(base) == echo_config(AdapterConfig(model_id="m"))
    assert echo_config(base) != echo_config(AdapterConfig(model_id="m", segmentation="steps"))
    assert echo_config(base) != echo_config(AdapterConfig(model_id="other"))
    # batch size does not change scoring semantics
    assert echo_config(base) == echo_config(AdapterConfig(model_id="m", batch_size=2))


def test_read_samples_rejects_duplicates(tmp_path):
    path = tmp_path / "d.jsonl"
    row = {"id": "a", "instruction": "q", "output": "o"}
    path.write_text(json.dumps(row) + "\n" + json.dumps(row) + "\n")
    with pytest.raises(AdapterError, match="duplicate"):
        read_samples(path)


def test_score_samples_probability_and_embedding_contracts(tiny_model_dir, toy_dataset):
    config = AdapterConfig(model_id=str(tiny_model_dir), batch_size=2, max_length=128)
    scorer = ModelScorer(config)
    samples = read_samples(toy_dataset)
    scores, skipped = scorer.score_samples(samples)
    assert not skipped
    assert len(scores) == 5
    dims = {len(s.embedding) for s in scores}
    assert dims == {32}
    for score in scores:
        assert abs(np.linalg.norm(score.embedding) - 1.0) <= 1e-6
        assert score.token_counts["question"] >= 1
        assert score.token_counts["answer"] >= 1
        for action in score.actions:
            assert action.token_logprobs
            assert all(lp <= 0.0 for lp in action.token_logprobs)
            p = action.probability
            assert 0.0 < p <= 1.0
            mean_lp = math.fsum(action.token_logprobs) / len(action.token_logprobs)
            assert abs(math.log(p) - mean_lp) <= 1e-6


def test_single_line_output_yields_one_action(tiny_model_dir, toy_dataset):
    config = AdapterConfig(model_id=str(tiny_model_dir), max_length=128)
    scorer = ModelScorer(config)
    samples = [s for s in read_samples(toy_dataset) if s["id"] == "oneline"]
    scores, _ = scorer.score_samples(samples)
    assert len(scores[0].actions) == 1


def test_steps_segmentation_scores_three_actions(tiny_model_dir, toy_dataset):
    config = AdapterConfig(model_id=str(tiny_model_dir), segmentation="steps", max_length=128)
    scorer = ModelScorer(config)
    samples = [s for s in read_samples(toy_dataset) if s["id"] == "math1"]
    scores, _ = scorer.score_samples(samples)
    assert len(scores[0].actions) == 3


def test_empty_instruction_still_scores(tiny_model_dir, tmp_path):
    path = tmp_path / "d.jsonl"
    path.write_text(json.dumps({"id": "a", "instruction": "", "output": "x = 1"}) + "\n")
    config = AdapterConfig(model_id=str(tiny_model_dir), max_length=64)
    scores, skipped = ModelScorer(config).score_samples(read_samples(path))
    assert not skipped
    assert scores[0].actions[0].token_logprobs


def test_overlong_samples_skipped_with_sidecar(tiny_model_dir, tmp_path):
    rows = [
        {"id": "short", "instruction": "q", "output": "x = 1"},
        {
            "id": "long",
            "instruction": "q",
            "output": "\n".join(f"value_{i} = {i}" for i in range(60)),
        },
    ]
    path = tmp_path / "d.jsonl"
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
    out = tmp_path / "scores.epoch1.jsonl"
    config = AdapterConfig(model_id=str(tiny_model_dir), max_length=32)
    written, skipped = score_dataset(path, config, 1, out)
    assert written == 1
    assert [s.sample_id for s in skipped] == ["long"]
    sidecar = json.loads((tmp_path / "scores.epoch1.jsonl.skipped.jsonl").read_text())
    assert sidecar["sample_id"] == "long"
    assert sidecar["reason"] == "over max_length"


def test_rescoring_is_deterministic(tiny_model_dir, toy_dataset, tmp_path):
    config = AdapterConfig(model_id=str(tiny_model_dir), batch_size=3, max_length=128)
    outputs = []
    for attempt in ("a", "b"):
        out = tmp_path / f"scores-{attempt}.jsonl"
        score_dataset(toy_dataset, config, 1, out)
        outputs.append(
            [json.loads(line) for line in out.read_text().splitlines()]
        )
    for first, second in zip(*outputs):
        assert first["sample_id"] == second["sample_id"]
        assert np.allclose(first["action_probs"], second["action_probs"], atol=1e-6)
        assert np.allclose(first["embedding"], second["embedding"], atol=1e-6)


def test_model_tag_carries_config_hash(tiny_model_dir, toy_dataset, tmp_path):
    config = AdapterConfig(model_id=str(tiny_model_dir), max_length=128)
    out = tmp_path / "scores.epoch1.jsonl"
    score_dataset(toy_dataset, config, 1, out)
    records = [json.loads(line) for line in out.read_text().splitlines()]
    tags = {r["model_tag"] for r in records}
    assert tags == {f"p3score-{echo_config(config)}"}
