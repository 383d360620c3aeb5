"""Policy-driven difficulty scoring.

A sample's reference output is segmented into actions; each action carries
the token log-probabilities assigned by the scoring model. An action's
generation probability is the length-normalized (geometric mean) token
probability, and the sample's difficulty is one minus the mean action
probability.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence

from .errors import EmptyActionError, EmptyActionListError, EmptyOutputError

SEGMENTATION_STRATEGIES = ("lines", "steps", "whole")

# Floor applied before any log/exp round trip; guards underflow in the
# downstream kernel math.
PROB_FLOOR = 1e-12

_BLANK_LINE = re.compile(r"\n\s*\n")


def segment_output(output: str, strategy: str = "lines") -> list[str]:
    """Split a reference output into action texts.

    ``lines`` splits on newlines and drops whitespace-only segments.
    ``steps`` splits on blank-line boundaries and falls back to ``lines``
    when that yields a single segment for an output of four or more lines.
    ``whole`` returns the output as one action.
    """
    if strategy not in SEGMENTATION_STRATEGIES:
        raise ValueError(f"unknown segmentation strategy {strategy!r}")
    if not output.strip():
        raise EmptyOutputError("output is empty or whitespace-only")

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


def action_probability(token_logprobs: Sequence[float]) -> float:
    """Length-normalized generation probability of one action.

    Returns ``exp(mean(token_logprobs))``, floored at ``PROB_FLOOR`` so that
    extremely unlikely actions never collapse to exact zero.
    """
    if len(token_logprobs) == 0:
        raise EmptyActionError("action has no token log-probabilities")
    mean = math.fsum(token_logprobs) / len(token_logprobs)
    return min(max(math.exp(mean), PROB_FLOOR), 1.0)


def difficulty(action_probs: Sequence[float]) -> float:
    """Difficulty score: complement of the mean action probability."""
    if len(action_probs) == 0:
        raise EmptyActionListError("sample has no action probabilities")
    mean = math.fsum(action_probs) / len(action_probs)
    return min(max(1.0 - mean, 0.0), 1.0)


@dataclass(frozen=True)
class Action:
    """One scored segment of a reference output."""

    text: str
    token_logprobs: tuple[float, ...]

    def __post_init__(self):
        if len(self.token_logprobs) == 0:
            raise EmptyActionError("action has no token log-probabilities")

    @property
    def probability(self) -> float:
        return action_probability(self.token_logprobs)


@dataclass(frozen=True)
class ActionSequence:
    """Segmented, scored output of one sample."""

    sample_id: str
    actions: tuple[Action, ...]
    segmentation: str = "lines"

    def __post_init__(self):
        if len(self.actions) == 0:
            raise EmptyActionListError(f"sample {self.sample_id!r} has no actions")

    @property
    def action_probs(self) -> list[float]:
        return [a.probability for a in self.actions]

    @property
    def difficulty(self) -> float:
        return difficulty(self.action_probs)
