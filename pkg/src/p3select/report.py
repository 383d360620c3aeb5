"""Selection analysis: difficulty distributions and diversity of selections.

Emits delimiter-separated tables (one row per epoch) plus rendered figures,
and a raw selected-embedding table per epoch for external projection tools.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .errors import MissingEmbeddingError
from .pipeline import SelectionManifest
from .records import Sample, ScoreRecord

HIST_BINS = 10


def _manifest_obj(manifest) -> dict:
    if isinstance(manifest, SelectionManifest):
        return manifest.to_json_obj()
    return manifest


def pairwise_cosine_stats(embeddings: np.ndarray) -> tuple[float, float, int]:
    """Mean and max cosine over unordered pairs; zeros when under two rows."""
    n = embeddings.shape[0]
    if n < 2:
        return 0.0, 0.0, 0
    rows = embeddings / np.linalg.norm(embeddings, axis=1, keepdims=True)
    sims = rows @ rows.T
    iu = np.triu_indices(n, k=1)
    vals = sims[iu]
    return float(vals.mean()), float(vals.max()), int(vals.size)


def diversity_report(
    manifest,
    scores: Mapping[str, ScoreRecord],
    dataset: Sequence[Sample] | None = None,
) -> dict:
    """Diversity summary of one epoch's selection.

    Requires an embedding for every selected id; cluster counts are included
    when the dataset carries ``cluster`` metadata.
    """
    obj = _manifest_obj(manifest)
    ids = [entry["sample_id"] for entry in obj["selected"]]
    missing = [i for i in ids if i not in scores]
    if missing:
        raise MissingEmbeddingError(f"no embedding for selected ids: {', '.join(missing[:10])}")
    emb = np.asarray([scores[i].embedding for i in ids], dtype=float)
    mean_cos, max_cos, pairs = pairwise_cosine_stats(emb) if ids else (0.0, 0.0, 0)

    cluster_counts: dict[str, int] | None = None
    if dataset is not None:
        labels = {s.id: s.meta.get("cluster") for s in dataset}
        if any(labels.get(i) is not None for i in ids):
            cluster_counts = {}
            for i in ids:
                label = labels.get(i) or "unlabeled"
                cluster_counts[label] = cluster_counts.get(label, 0) + 1

    return {
        "epoch": obj["epoch"],
        "selected": len(ids),
        "pairs": pairs,
        "mean_pairwise_cosine": mean_cos,
        "max_pairwise_cosine": max_cos,
        "cluster_counts": cluster_counts,
        "embeddings": {i: list(scores[i].embedding) for i in ids},
    }


def difficulty_histogram(manifest, bins: int = HIST_BINS) -> list[int]:
    """Counts of selected difficulties over equal-width bins of [0, 1]."""
    obj = _manifest_obj(manifest)
    values = [e["difficulty"] for e in obj["selected"] if e["difficulty"] is not None]
    counts, _ = np.histogram(values, bins=bins, range=(0.0, 1.0))
    return [int(c) for c in counts]


def _bin_labels(bins: int) -> list[str]:
    edges = np.linspace(0.0, 1.0, bins + 1)
    return [f"bin_{edges[i]:.2f}_{edges[i + 1]:.2f}" for i in range(bins)]


def write_report(
    manifests: Sequence,
    scores_by_epoch: Mapping[int, Mapping[str, ScoreRecord]],
    out_dir: str | Path,
    dataset: Sequence[Sample] | None = None,
) -> dict[str, Path]:
    """Write histogram and diversity tables, figures, and embedding dumps."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    objs = sorted((_manifest_obj(m) for m in manifests), key=lambda o: o["epoch"])

    hist_rows = []
    div_rows = []
    for obj in objs:
        epoch = obj["epoch"]
        hist_rows.append((epoch, difficulty_histogram(obj)))
        report = diversity_report(obj, scores_by_epoch[epoch], dataset)
        div_rows.append(report)
        emb_path = out_dir / f"embeddings.epoch{epoch}.tsv"
        with emb_path.open("w", encoding="utf-8") as fh:
            for sid, vec in report["embeddings"].items():
                fh.write(sid + "\t" + "\t".join(f"{x:.8f}" for x in vec) + "\n")

    hist_path = out_dir / "difficulty_hist.tsv"
    with hist_path.open("w", encoding="utf-8") as fh:
        fh.write("epoch\t" + "\t".join(_bin_labels(HIST_BINS)) + "\n")
        for epoch, counts in hist_rows:
            fh.write(str(epoch) + "\t" + "\t".join(str(c) for c in counts) + "\n")

    div_path = out_dir / "diversity.tsv"
    with div_path.open("w", encoding="utf-8") as fh:
        fh.write("epoch\tselected\tpairs\tmean_pairwise_cosine\tmax_pairwise_cosine\tclusters_covered\n")
        for report in div_rows:
            covered = len(report["cluster_counts"]) if report["cluster_counts"] else 0
            fh.write(
                f"{report['epoch']}\t{report['selected']}\t{report['pairs']}\t"
                f"{report['mean_pairwise_cosine']:.8f}\t{report['max_pairwise_cosine']:.8f}\t{covered}\n"
            )

    paths = {
        "difficulty_hist": hist_path,
        "diversity": div_path,
        "difficulty_hist_png": _plot_histograms(hist_rows, out_dir),
        "diversity_png": _plot_diversity(div_rows, out_dir),
    }
    return paths


def _plot_histograms(hist_rows, out_dir: Path) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4))
    centers = (np.arange(HIST_BINS) + 0.5) / HIST_BINS
    for epoch, counts in hist_rows:
        ax.plot(centers, counts, marker="o", label=f"epoch {epoch}")
    ax.set_xlabel("difficulty")
    ax.set_ylabel("selected samples")
    ax.set_title("Difficulty distribution of selections per epoch")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = out_dir / "difficulty_hist.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _plot_diversity(div_rows, out_dir: Path) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4))
    epochs = [r["epoch"] for r in div_rows]
    ax.plot(epochs, [r["mean_pairwise_cosine"] for r in div_rows], marker="o", label="mean")
    ax.plot(epochs, [r["max_pairwise_cosine"] for r in div_rows], marker="s", label="max")
    ax.set_xlabel("epoch")
    ax.set_ylabel("pairwise cosine of selections")
    ax.set_title("Diversity of selections per epoch")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = out_dir / "diversity.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
