from __future__ import annotations

import json
import sys
from pathlib import Path

import pytest

from p3select.cli import main
from p3select.records import Sample, write_dataset


def _write_dataset(path: Path, n: int = 10) -> list[Sample]:
    samples = [
        Sample(
            id=f"s{i}",
            instruction=f"solve problem {i} with care",
            output=f"a{i} = {i}\nb{i} = {i * i}\nreturn a{i} + b{i}",
            meta={"level": str(1 + i % 5)},
        )
        for i in range(n)
    ]
    write_dataset(path, samples)
    return samples


def _write_config(path: Path, **kw) -> Path:
    cfg = {"epochs": 3, "k": 2, "alpha": 0.5, "seed": 7}
    cfg.update(kw)
    path.write_text(json.dumps(cfg))
    return path


def _mock_scores(tmp_path: Path, dataset: Path, epochs: int = 3, seed: int = 7) -> Path:
    scores_dir = tmp_path / "scores"
    rc = main(
        [
            "score-mock",
            "--dataset",
            str(dataset),
            "--out",
            str(scores_dir),
            "--epochs",
            str(epochs),
            "--seed",
            str(seed),
            "--quiet",
        ]
    )
    assert rc == 0
    return scores_dir


def test_validate_ok(tmp_path, capsys):
    dataset = tmp_path / "dataset.jsonl"
    _write_dataset(dataset)
    scores_dir = _mock_scores(tmp_path, dataset, epochs=1)
    rc = main(["validate", str(dataset), str(scores_dir / "scores.epoch1.jsonl")])
    assert rc == 0
    assert "OK N=10, scored=10" in capsys.readouterr().out


def test_validate_rejects_bad_embedding_norm(tmp_path, capsys):
    dataset = tmp_path / "dataset.jsonl"
    _write_dataset(dataset, n=2)
    scores = tmp_path / "scores.jsonl"
    lines = [
        {
            "sample_id": "s0",
            "epoch": 1,
            "model_tag": "t",
            "action_probs": [0.5],
            "token_counts": {"question": 1, "answer": 1},
            "embedding": [1.0, 0.0],
        },
        {
            "sample_id": "s1",
            "epoch": 1,
            "model_tag": "t",
            "action_probs": [0.5],
            "token_counts": {"question": 1, "answer": 1},
            "embedding": [0.5, 0.0],
        },
    ]
    scores.write_text("\n".join(json.dumps(x) for x in lines) + "\n")
    rc = main(["validate", str(dataset), str(scores)])
    assert rc == 2
    err = capsys.readouterr().err
    assert "s1" in err and "norm" in err


def test_validate_rejects_duplicate_ids(tmp_path, capsys):
    dataset = tmp_path / "dataset.jsonl"
    row = {"id": "dup", "instruction": "q", "output": "o", "meta": {}}
    dataset.write_text(json.dumps(row) + "\n" + json.dumps(row) + "\n")
    rc = main(["validate", str(dataset)])
    assert rc == 2
    assert "duplicate" in capsys.readouterr().err


def test_validate_missing_file_is_usage_error(tmp_path):
    rc = main(["validate", str(tmp_path / "nope.jsonl")])
    assert rc == 1


def test_select_full_run_writes_all_manifests(tmp_path, capsys):
    dataset = tmp_path / "dataset.jsonl"
    _write_dataset(dataset)
    scores_dir = _mock_scores(tmp_path, dataset)
    config = _write_config(tmp_path / "config.json")
    out = tmp_path / "out"
    rc = main(
        [
            "select",
            "--config",
            str(config),
            "--dataset",
            str(dataset),
            "--scores-dir",
            str(scores_dir),
            "--out",
            str(out),
        ]
    )
    assert rc == 0
    stdout = capsys.readouterr().out
    assert stdout.count("epoch") == 3
    assert "lambda=" in stdout
    for e in (1, 2, 3):
        assert (out / "manifests" / f"manifest.epoch{e}.json").exists()


@pytest.mark.parametrize("strategy", ["p3", "spl_only", "random", "curriculum"])
def test_select_rerun_is_byte_identical(tmp_path, strategy):
    dataset = tmp_path / "dataset.jsonl"
    _write_dataset(dataset)
    scores_dir = _mock_scores(tmp_path, dataset)
    config = _write_config(
        tmp_path / "config.json",
        strategy=strategy,
        curriculum_metric="level" if strategy == "curriculum" else None,
    )
    blobs = []
    for attempt in ("a", "b"):
        out = tmp_path / strategy / attempt
        rc = main(
            [
                "select",
                "--config",
                str(config),
                "--dataset",
                str(dataset),
                "--scores-dir",
                str(scores_dir),
                "--out",
                str(out),
                "--quiet",
            ]
        )
        assert rc == 0
        blobs.append([(out / "manifests" / f"manifest.epoch{e}.json").read_bytes() for e in (1, 2, 3)])
    assert blobs[0] == blobs[1]


def test_select_single_epoch_requires_state(tmp_path, capsys):
    dataset = tmp_path / "dataset.jsonl"
    _write_dataset(dataset)
    scores_dir = _mock_scores(tmp_path, dataset)
    config = _write_config(tmp_path / "config.json")
    out = tmp_path / "out"
    args = [
        "select",
        "--config",
        str(config),
        "--dataset",
        str(dataset),
        "--scores-dir",
        str(scores_dir),
        "--out",
        str(out),
        "--quiet",
    ]
    rc = main(args + ["--epoch", "3"])
    assert rc == 2
    assert "missing state" in capsys.readouterr().err
    assert main(args + ["--epoch", "1"]) == 0
    assert main(args + ["--epoch", "2"]) == 0
    assert main(args + ["--epoch", "3"]) == 0


def test_select_state_dir_env_override(tmp_path, monkeypatch):
    dataset = tmp_path / "dataset.jsonl"
    _write_dataset(dataset)
    scores_dir = _mock_scores(tmp_path, dataset, epochs=1)
    config = _write_config(tmp_path / "config.json", epochs=1)
    state_dir = tmp_path / "custom-state"
    monkeypatch.setenv("P3_STATE_DIR", str(state_dir))
    out = tmp_path / "out"
    rc = main(
        [
            "select",
            "--config",
            str(config),
            "--dataset",
            str(dataset),
            "--scores-dir",
            str(scores_dir),
            "--out",
            str(out),
            "--quiet",
        ]
    )
    assert rc == 0
    assert (state_dir / "history.json").exists()
    assert not (out / "state").exists()


def test_select_hook_failure_exit_code(tmp_path):
    dataset = tmp_path / "dataset.jsonl"
    _write_dataset(dataset)
    scores_dir = _mock_scores(tmp_path, dataset)
    config = _write_config(tmp_path / "config.json")
    out = tmp_path / "out"
    hook = f'{sys.executable} -c "import sys; sys.exit(1 if \'epoch2\' in sys.argv[1] else 0)"'
    rc = main(
        [
            "select",
            "--config",
            str(config),
            "--dataset",
            str(dataset),
            "--scores-dir",
            str(scores_dir),
            "--out",
            str(out),
            "--hook",
            hook,
            "--quiet",
        ]
    )
    assert rc == 4
    assert (out / "manifests" / "manifest.epoch2.json").exists()
    assert not (out / "manifests" / "manifest.epoch3.json").exists()


def test_baseline_requires_strategy_flag(tmp_path):
    dataset = tmp_path / "dataset.jsonl"
    _write_dataset(dataset)
    scores_dir = _mock_scores(tmp_path, dataset, epochs=1)
    config = _write_config(tmp_path / "config.json", epochs=1)
    out = tmp_path / "out"
    rc = main(
        [
            "baseline",
            "--config",
            str(config),
            "--dataset",
            str(dataset),
            "--scores-dir",
            str(scores_dir),
            "--out",
            str(out),
            "--strategy",
            "random",
            "--quiet",
        ]
    )
    assert rc == 0
    manifest = json.loads((out / "manifests" / "manifest.epoch1.json").read_text())
    assert manifest["strategy"] == "random"


def test_simulate_missing_spec_file_is_usage_error(tmp_path):
    rc = main(["simulate", str(tmp_path / "nope.json"), "--out", str(tmp_path / "out")])
    assert rc == 1


def test_simulate_with_spec_writes_tables(tmp_path, capsys):
    spec = tmp_path / "spec.json"
    spec.write_text(
        json.dumps(
            {
                "config": {"epochs": 2, "k": 8, "alpha": 0.5, "seed": 3},
                "synth": {"n": 60, "dim": 8, "clusters": 3, "eta": 0.1, "seed": 3},
            }
        )
    )
    out = tmp_path / "out"
    rc = main(["simulate", str(spec), "--out", str(out)])
    assert rc == 0
    assert (out / "summary.tsv").exists()
    assert (out / "difficulty_hist.png").exists()
    stdout = capsys.readouterr().out
    assert stdout.count("epoch") == 2


def test_simulate_eta_zero_keeps_histograms_identical(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(
        json.dumps(
            {
                "config": {
                    "epochs": 2,
                    "k": 10,
                    "alpha": 0.5,
                    "seed": 3,
                    "start_percentile": 95,
                    "end_percentile": 95,
                    "strategy": "spl_only",
                },
                "synth": {"n": 40, "dim": 8, "clusters": 2, "eta": 0.0, "seed": 3},
            }
        )
    )
    out = tmp_path / "out"
    assert main(["simulate", str(spec), "--out", str(out), "--quiet"]) == 0
    lines = (out / "difficulty_hist.tsv").read_text().splitlines()
    assert lines[1].split("\t")[1:] == lines[2].split("\t")[1:]


def test_report_over_run_outputs(tmp_path):
    dataset = tmp_path / "dataset.jsonl"
    _write_dataset(dataset)
    scores_dir = _mock_scores(tmp_path, dataset)
    config = _write_config(tmp_path / "config.json")
    out = tmp_path / "out"
    assert (
        main(
            [
                "select",
                "--config",
                str(config),
                "--dataset",
                str(dataset),
                "--scores-dir",
                str(scores_dir),
                "--out",
                str(out),
                "--quiet",
            ]
        )
        == 0
    )
    report_dir = tmp_path / "report"
    rc = main(
        [
            "report",
            "--manifests",
            str(out / "manifests"),
            "--scores-dir",
            str(scores_dir),
            "--out",
            str(report_dir),
            "--dataset",
            str(dataset),
            "--quiet",
        ]
    )
    assert rc == 0
    hist = (report_dir / "difficulty_hist.tsv").read_text().splitlines()
    div = (report_dir / "diversity.tsv").read_text().splitlines()
    assert len(hist) == 4 and len(div) == 4  # header + 3 epochs
    assert (report_dir / "difficulty_hist.png").exists()
    assert (report_dir / "diversity.png").exists()


def test_report_empty_manifest_dir_is_data_error(tmp_path):
    empty = tmp_path / "manifests"
    empty.mkdir()
    scores = tmp_path / "scores"
    scores.mkdir()
    rc = main(
        [
            "report",
            "--manifests",
            str(empty),
            "--scores-dir",
            str(scores),
            "--out",
            str(tmp_path / "rep"),
        ]
    )
    assert rc == 2


def test_usage_error_for_unknown_command():
    assert main(["frobnicate"]) == 1


def test_commands_do_not_mutate_inputs(tmp_path):
    dataset = tmp_path / "dataset.jsonl"
    _write_dataset(dataset)
    scores_dir = _mock_scores(tmp_path, dataset, epochs=1)
    before = dataset.read_bytes(), (scores_dir / "scores.epoch1.jsonl").read_bytes()
    config = _write_config(tmp_path / "config.json", epochs=1)
    main(
        [
            "select",
            "--config",
            str(config),
            "--dataset",
            str(dataset),
            "--scores-dir",
            str(scores_dir),
            "--out",
            str(tmp_path / "out"),
            "--quiet",
        ]
    )
    after = dataset.read_bytes(), (scores_dir / "scores.epoch1.jsonl").read_bytes()
    assert before == after
