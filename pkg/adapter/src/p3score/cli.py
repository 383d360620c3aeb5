"""p3-score: produce engine-compatible score files from a causal LM."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import AdapterConfig
from .errors import AdapterError, UsageError
from .scorer import score_dataset


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="p3-score", description="Score a dataset with a causal LM")
    parser.add_argument("--dataset", required=True, help="dataset.jsonl path")
    parser.add_argument("--model", required=True, help="model id or local path")
    parser.add_argument("--epoch", type=int, required=True, help="epoch tag for the records")
    parser.add_argument("--out", required=True, help="output scores.epochE.jsonl path")
    parser.add_argument("--checkpoint", default=None, help="fine-tuned checkpoint path")
    parser.add_argument("--segmentation", default="lines", choices=("lines", "steps", "whole"))
    parser.add_argument("--batch-size", type=int, default=8)
    parser.add_argument("--max-length", type=int, default=1024)
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--quiet", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if not Path(args.dataset).is_file():
            raise UsageError(f"dataset not found: {args.dataset}")
        config = AdapterConfig(
            model_id=args.model,
            segmentation=args.segmentation,
            batch_size=args.batch_size,
            max_length=args.max_length,
            device=args.device,
        )
        written, skipped = score_dataset(
            args.dataset, config, args.epoch, args.out, checkpoint_path=args.checkpoint
        )
        if not args.quiet:
            print(f"wrote {written} records to {args.out}")
            if skipped:
                print(f"skipped {len(skipped)} samples (see {args.out}.skipped.jsonl)", file=sys.stderr)
        return 0
    except AdapterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
