"""Output segmentation, contract-identical to the engine's strategy names.

The engine and this adapter share only wire formats and strategy names;
the splitting rules here must match what the engine documents for
``lines``, ``steps``, and ``whole``.
"""

from __future__ import annotations

import re

from .errors import AdapterError

SEGMENTATION_STRATEGIES = ("lines", "steps", "whole")

_BLANK_LINE = re.compile(r"\n\s*\n")

SEPARATORS = {"lines": "\n", "steps": "\n\n", "whole": ""}


def segment_output(output: str, strategy: str = "lines") -> list[str]:
    if strategy not in SEGMENTATION_STRATEGIES:
        raise AdapterError(f"unknown segmentation strategy {strategy!r}")
    if not output.strip():
        raise AdapterError("output is empty or whitespace-only")
    if strategy == "whole":
        return [output]
    if strategy == "lines":
        return _split_lines(output)
    segments = [part.strip() for part in _BLANK_LINE.split(output)]
    segments = [part for part in segments if part]
    if len(segments) == 1 and len(output.splitlines()) >= 4:
        return _split_lines(output)
    return segments


def _split_lines(output: str) -> list[str]:
    return [line for line in output.split("\n") if line.strip()]
