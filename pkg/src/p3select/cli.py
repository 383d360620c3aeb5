"""Command-line surface.

Subcommands: validate, select, baseline, simulate, report, score-mock.
Exit codes are stable: 0 success, 1 usage error, 2 data/schema error,
3 numerical failure, 4 trainer-hook failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import re
import shlex
import sys
from pathlib import Path

from .errors import P3Error, SchemaError, UsageError
from .mock import DEFAULT_EMBED_DIM, DEFAULT_IMPROVE, mock_score_records
from .pipeline import DirectoryScoreSource, RunConfig, load_manifest, run
from .records import check_dataset_file, check_scores_file, load_dataset, load_scores, write_scores
from .report import write_report
from .simulate import default_sim_spec, load_sim_spec, simulate

_MANIFEST_RE = re.compile(r"manifest\.epoch(\d+)\.json$")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="p3select", description="Training-data selection engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p_val = sub.add_parser("validate", help="schema-check dataset and score files")
    p_val.add_argument("dataset", help="dataset.jsonl path")
    p_val.add_argument("scores", nargs="*", help="score file paths")
    p_val.add_argument("--quiet", action="store_true")

    for name in ("select", "baseline"):
        p = sub.add_parser(name, help=f"run {name} selection over epochs")
        p.add_argument("--config", required=True, help="run config JSON")
        p.add_argument("--dataset", required=True, help="dataset.jsonl path")
        p.add_argument("--scores-dir", required=True, help="directory of scores.epochE.jsonl files")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--epoch", type=int, default=None, help="run a single epoch")
        p.add_argument("--hook", default=None, help="trainer command invoked with each manifest path")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--kernel-diag", action="store_true", help="record kernel diagnostics in manifests")
        p.add_argument("--quiet", action="store_true")
        if name == "baseline":
            p.add_argument(
                "--strategy",
                required=True,
                choices=("random", "curriculum"),
                help="baseline strategy (overrides config)",
            )
            p.add_argument("--metric", default=None, help="curriculum metric override")

    p_sim = sub.add_parser("simulate", help="run the bundled synthetic-learner simulation")
    p_sim.add_argument("spec", nargs="?", default=None, help="simulation spec JSON (default: bundled)")
    p_sim.add_argument("--out", required=True, help="output directory")
    p_sim.add_argument("--seed", type=int, default=None, help="override config and synth seeds")
    p_sim.add_argument("--quiet", action="store_true")

    p_rep = sub.add_parser("report", help="emit difficulty and diversity tables plus figures")
    p_rep.add_argument("--manifests", required=True, help="directory of manifest.epochE.json files")
    p_rep.add_argument("--scores-dir", required=True, help="directory of scores.epochE.jsonl files")
    p_rep.add_argument("--out", required=True, help="output directory")
    p_rep.add_argument("--dataset", default=None, help="dataset.jsonl for cluster labels")
    p_rep.add_argument("--quiet", action="store_true")

    p_mock = sub.add_parser("score-mock", help="write deterministic mock score files")
    p_mock.add_argument("--dataset", required=True, help="dataset.jsonl path")
    p_mock.add_argument("--out", required=True, help="output directory")
    p_mock.add_argument("--epochs", type=int, default=1, help="number of epoch files to write")
    p_mock.add_argument("--seed", type=int, default=0)
    p_mock.add_argument("--segmentation", default="lines", choices=("lines", "steps", "whole"))
    p_mock.add_argument("--dim", type=int, default=DEFAULT_EMBED_DIM)
    p_mock.add_argument("--improve", type=float, default=DEFAULT_IMPROVE)
    p_mock.add_argument("--quiet", action="store_true")

    return parser


def _require_file(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} not found: {path}")
    return p


def _require_dir(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_dir():
        raise UsageError(f"{what} not found: {path}")
    return p


def _say(args, message: str) -> None:
    if not getattr(args, "quiet", False):
        print(message)


def _cmd_validate(args) -> int:
    dataset_path = _require_file(args.dataset, "dataset file")
    samples, problems = check_dataset_file(dataset_path)
    ids = {s.id for s in samples}
    scored = 0
    for score_path in args.scores:
        path = _require_file(score_path, "score file")
        records, score_problems = check_scores_file(path, ids)
        problems.extend(score_problems)
        scored += len(records)
    if problems:
        for line in problems:
            print(line, file=sys.stderr)
        raise SchemaError(f"{len(problems)} validation problem(s)")
    _say(args, f"OK N={len(samples)}, scored={scored}")
    return 0


def _load_config(args, strategy: str | None = None, metric: str | None = None) -> RunConfig:
    config = RunConfig.from_file(_require_file(args.config, "config file"))
    updates: dict = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if strategy is not None:
        updates["strategy"] = strategy
    if metric is not None:
        updates["curriculum_metric"] = metric
    if getattr(args, "kernel_diag", False):
        updates["kernel_diagnostics"] = True
    if updates:
        try:
            config = dataclasses.replace(config, **updates)
        except ValueError as exc:
            raise SchemaError(f"bad config: {exc}") from exc
    return config


def _cmd_select(args, strategy: str | None = None, metric: str | None = None) -> int:
    config = _load_config(args, strategy=strategy, metric=metric)
    dataset = load_dataset(_require_file(args.dataset, "dataset file"))
    scores_dir = _require_dir(args.scores_dir, "scores directory")
    source = DirectoryScoreSource(scores_dir, {s.id for s in dataset})
    hook = shlex.split(args.hook) if args.hook else None
    state_dir = os.environ.get("P3_STATE_DIR")
    run(
        dataset,
        source,
        config,
        args.out,
        trainer_hook=hook,
        state_dir=state_dir,
        only_epoch=args.epoch,
        log=None if args.quiet else print,
    )
    return 0


def _cmd_baseline(args) -> int:
    return _cmd_select(args, strategy=args.strategy, metric=args.metric)


def _cmd_simulate(args) -> int:
    if args.spec is not None:
        config, synth = load_sim_spec(_require_file(args.spec, "simulation spec"))
    else:
        config, synth = default_sim_spec()
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
        synth = dataclasses.replace(synth, seed=args.seed)
    simulate(config, synth, args.out, log=None if args.quiet else print)
    return 0


def _cmd_report(args) -> int:
    manifest_dir = _require_dir(args.manifests, "manifest directory")
    scores_dir = _require_dir(args.scores_dir, "scores directory")
    paths = sorted(manifest_dir.glob("manifest.epoch*.json"))
    manifests = []
    for path in paths:
        match = _MANIFEST_RE.search(path.name)
        if match is None or int(match.group(1)) == 0:
            continue  # warmup manifests carry no difficulties or scores
        manifests.append(load_manifest(path))
    if not manifests:
        raise SchemaError(f"no epoch manifests found in {manifest_dir}")
    dataset = load_dataset(_require_file(args.dataset, "dataset file")) if args.dataset else None
    scores_by_epoch = {}
    for obj in manifests:
        epoch = int(obj["epoch"])
        score_path = scores_dir / f"scores.epoch{epoch}.jsonl"
        if not score_path.exists():
            raise SchemaError(f"missing score file {score_path} (no embeddings for epoch {epoch})")
        scores_by_epoch[epoch] = load_scores(score_path)
    written = write_report(manifests, scores_by_epoch, args.out, dataset=dataset)
    _say(args, f"wrote {written['difficulty_hist']} and {written['diversity']}")
    return 0


def _cmd_score_mock(args) -> int:
    if args.epochs < 1:
        raise UsageError("--epochs must be >= 1")
    dataset = load_dataset(_require_file(args.dataset, "dataset file"))
    out_dir = Path(args.out)
    for epoch in range(1, args.epochs + 1):
        records = mock_score_records(
            dataset,
            epoch,
            seed=args.seed,
            segmentation=args.segmentation,
            dim=args.dim,
            improve=args.improve,
        )
        path = out_dir / f"scores.epoch{epoch}.jsonl"
        write_scores(path, records)
        _say(args, f"wrote {path} ({len(records)} records)")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        handlers = {
            "validate": _cmd_validate,
            "select": _cmd_select,
            "baseline": _cmd_baseline,
            "simulate": _cmd_simulate,
            "report": _cmd_report,
            "score-mock": _cmd_score_mock,
        }
        return handlers[args.command](args)
    except P3Error as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
