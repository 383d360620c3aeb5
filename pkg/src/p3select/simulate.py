"""Desk-scale synthetic runs.

Generates a clustered synthetic dataset with latent per-sample base
probabilities, scores it with a mock model whose action probabilities rise
by a fixed increment each time a sample is selected, and drives the full
selection pipeline, emitting per-epoch histograms, diversity tables, and
summary lines.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .difficulty import difficulty
from .errors import InvalidSpecError
from .mock import rng_for
from .pipeline import RunConfig, SelectionManifest, run
from .records import Sample, ScoreRecord
from .report import pairwise_cosine_stats, write_report

SYNTH_KEYS = (
    "n",
    "dim",
    "clusters",
    "eta",
    "actions_min",
    "actions_max",
    "cluster_spread",
    "prob_low",
    "prob_high",
    "prob_sigma",
    "seed",
)


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of the synthetic dataset and mock learner."""

    n: int = 2000
    dim: int = 64
    clusters: int = 4
    eta: float = 0.12
    actions_min: int = 1
    actions_max: int = 6
    cluster_spread: float = 0.35
    prob_low: float = 0.2
    prob_high: float = 0.9
    prob_sigma: float = 0.08
    seed: int = 7

    def __post_init__(self):
        if self.n < 1 or self.dim < 1 or self.clusters < 1:
            raise InvalidSpecError("n, dim, and clusters must all be >= 1")
        if self.clusters > self.n:
            raise InvalidSpecError("more clusters than samples")
        if not 1 <= self.actions_min <= self.actions_max:
            raise InvalidSpecError("need 1 <= actions_min <= actions_max")
        if self.eta < 0.0:
            raise InvalidSpecError("eta must be >= 0")
        if not 0.0 < self.prob_low <= self.prob_high < 1.0:
            raise InvalidSpecError("need 0 < prob_low <= prob_high < 1")
        if self.cluster_spread < 0.0 or self.prob_sigma < 0.0:
            raise InvalidSpecError("spreads must be >= 0")

    @classmethod
    def from_dict(cls, obj: dict) -> "SynthSpec":
        unknown = set(obj) - set(SYNTH_KEYS)
        if unknown:
            raise InvalidSpecError(f"unknown synth keys: {sorted(unknown)}")
        try:
            return cls(**{k: obj[k] for k in SYNTH_KEYS if k in obj})
        except TypeError as exc:
            raise InvalidSpecError(str(exc)) from exc


@dataclass(frozen=True)
class SynthData:
    samples: list[Sample]
    embeddings: np.ndarray
    base_probs: list[np.ndarray]
    clusters: list[int]


def make_synthetic(spec: SynthSpec) -> SynthData:
    """Clustered unit embeddings plus latent per-action base probabilities.

    Cluster means of the base probability run from prob_high down to
    prob_low, so higher cluster indices are harder for the mock learner.
    """
    rng = rng_for("p3-sim", spec.seed)
    centers = rng.normal(size=(spec.clusters, spec.dim))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    if spec.clusters > 1:
        means = np.linspace(spec.prob_high, spec.prob_low, spec.clusters)
    else:
        means = np.array([(spec.prob_low + spec.prob_high) / 2.0])

    samples: list[Sample] = []
    embeddings = np.zeros((spec.n, spec.dim))
    base_probs: list[np.ndarray] = []
    clusters: list[int] = []
    for i in range(spec.n):
        c = i % spec.clusters
        vec = centers[c] + spec.cluster_spread * rng.normal(size=spec.dim)
        embeddings[i] = vec / np.linalg.norm(vec)
        n_actions = int(rng.integers(spec.actions_min, spec.actions_max + 1))
        base = np.clip(rng.normal(means[c], spec.prob_sigma, size=n_actions), 0.02, 0.98)
        base_probs.append(base)
        clusters.append(c)
        samples.append(
            Sample(
                id=f"syn{i:05d}",
                instruction=f"synthetic task {i} cluster {c}",
                output="\n".join(f"step {j} of task {i}" for j in range(n_actions)),
                meta={"cluster": str(c), "level": str(c + 1)},
            )
        )
    return SynthData(samples=samples, embeddings=embeddings, base_probs=base_probs, clusters=clusters)


class LearningScoreSource:
    """Mock scorer whose probabilities rise with each prior selection."""

    def __init__(self, data: SynthData, eta: float, model_tag: str = "sim-learner"):
        self.data = data
        self.eta = eta
        self.model_tag = model_tag
        self.counts: dict[str, int] = {s.id: 0 for s in data.samples}
        self.emitted: dict[int, dict[str, ScoreRecord]] = {}
        self._index = {s.id: i for i, s in enumerate(data.samples)}

    def records_for_epoch(self, epoch: int) -> dict[str, ScoreRecord]:
        if epoch in self.emitted:
            return self.emitted[epoch]
        records = {}
        for sample in self.data.samples:
            i = self._index[sample.id]
            probs = np.clip(
                self.data.base_probs[i] + self.eta * self.counts[sample.id], 1e-6, 1.0
            )
            records[sample.id] = ScoreRecord(
                sample_id=sample.id,
                epoch=epoch,
                model_tag=self.model_tag,
                action_probs=tuple(float(p) for p in probs),
                embedding=tuple(float(x) for x in self.data.embeddings[i]),
                token_counts={
                    "question": len(sample.instruction.split()),
                    "answer": len(sample.output.split()),
                },
            )
        self.emitted[epoch] = records
        return records

    def observe(self, manifest: SelectionManifest) -> None:
        for sid in manifest.selected_ids:
            self.counts[sid] += 1

    def initial_difficulty(self) -> dict[str, float]:
        return {
            s.id: difficulty(np.clip(self.data.base_probs[i], 1e-6, 1.0).tolist())
            for i, s in enumerate(self.data.samples)
        }


@dataclass(frozen=True)
class EpochSummary:
    epoch: int
    lam: float | None
    percentile: float | None
    pool_size: int
    kept_size: int
    expanded: bool
    median_initial_difficulty: float
    mean_pairwise_cosine: float
    clusters_covered: int


@dataclass(frozen=True)
class SimulationResult:
    manifests: list[SelectionManifest]
    summaries: list[EpochSummary]
    data: SynthData


def load_sim_spec(path: str | Path) -> tuple[RunConfig, SynthSpec]:
    """Parse a simulation spec file: {"config": {...}, "synth": {...}}."""
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InvalidSpecError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(obj, dict) or set(obj) - {"config", "synth"}:
        raise InvalidSpecError(f"{path}: expected an object with 'config' and 'synth'")
    config = RunConfig.from_dict(obj.get("config", {}))
    synth = SynthSpec.from_dict(obj.get("synth", {}))
    return config, synth


def default_sim_spec() -> tuple[RunConfig, SynthSpec]:
    """The bundled desk-scale simulation: N=2000, D=64, E=5, k=200."""
    config = RunConfig.from_dict({"epochs": 5, "k": 200, "alpha": 0.5, "seed": 7})
    return config, SynthSpec()


def simulate(
    config: RunConfig,
    spec: SynthSpec,
    out_dir: str | Path,
    log: Callable[[str], None] | None = None,
) -> SimulationResult:
    """Generate synthetic data, run the pipeline, emit tables and figures."""
    out_dir = Path(out_dir)
    data = make_synthetic(spec)
    source = LearningScoreSource(data, eta=spec.eta)
    init_difficulty = source.initial_difficulty()

    manifests = run(data.samples, source, config, out_dir)
    epoch_manifests = [m for m in manifests if m.epoch >= 1]

    cluster_of = {s.id: c for s, c in zip(data.samples, data.clusters)}
    index = {s.id: i for i, s in enumerate(data.samples)}
    summaries: list[EpochSummary] = []
    for manifest in epoch_manifests:
        ids = manifest.selected_ids
        emb = data.embeddings[[index[i] for i in ids]]
        mean_cos, _, _ = pairwise_cosine_stats(emb)
        summary = EpochSummary(
            epoch=manifest.epoch,
            lam=manifest.lam,
            percentile=manifest.percentile,
            pool_size=manifest.pool_size,
            kept_size=manifest.kept_size,
            expanded=manifest.expanded,
            median_initial_difficulty=float(np.median([init_difficulty[i] for i in ids])),
            mean_pairwise_cosine=mean_cos,
            clusters_covered=len({cluster_of[i] for i in ids}),
        )
        summaries.append(summary)
        if log:
            lam = "-" if summary.lam is None else f"{summary.lam:.4f}"
            log(
                f"epoch {summary.epoch}: lambda={lam} kept={summary.kept_size} "
                f"median_init_difficulty={summary.median_initial_difficulty:.4f} "
                f"mean_cosine={summary.mean_pairwise_cosine:.4f} "
                f"clusters={summary.clusters_covered}"
            )

    _write_summary(summaries, out_dir / "summary.tsv")
    scores_by_epoch = {m.epoch: source.records_for_epoch(m.epoch) for m in epoch_manifests}
    write_report(epoch_manifests, scores_by_epoch, out_dir, dataset=data.samples)
    return SimulationResult(manifests=epoch_manifests, summaries=summaries, data=data)


def _write_summary(summaries: Sequence[EpochSummary], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(
            "epoch\tlambda\tpercentile\tpool_size\tkept_size\texpanded\t"
            "median_initial_difficulty\tmean_pairwise_cosine\tclusters_covered\n"
        )
        for s in summaries:
            lam = "" if s.lam is None else f"{s.lam:.8f}"
            pct = "" if s.percentile is None else f"{s.percentile:.4f}"
            fh.write(
                f"{s.epoch}\t{lam}\t{pct}\t{s.pool_size}\t{s.kept_size}\t"
                f"{int(s.expanded)}\t{s.median_initial_difficulty:.8f}\t"
                f"{s.mean_pairwise_cosine:.8f}\t{s.clusters_covered}\n"
            )
