"""Headless figure rendering for score, ranking, and curation outputs.

Every function draws from the same objects the delimited writers consume,
so a figure can always be regenerated from the files next to it.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .curation import BucketReport, SampleWeights
from .ranking import Ranking
from .surprise import ScoreTable

# Dropping the Software chunk keeps PNG bytes stable across library versions.
_PNG_METADATA = {"Software": None}


def _save(fig, path: str | Path) -> None:
    fig.savefig(path, dpi=120, metadata=_PNG_METADATA)
    plt.close(fig)


def save_score_histogram(table: ScoreTable, path: str | Path, bins: int = 30) -> None:
    """One histogram panel per metric in the table."""
    metrics = table.metrics()
    fig, axes = plt.subplots(len(metrics), 1, figsize=(7.0, 2.6 * len(metrics)),
                             squeeze=False)
    for ax, metric in zip(axes[:, 0], metrics):
        values = [row.score for row in table.rows if row.metric == metric]
        ax.hist(values, bins=bins, color="#4878cf", edgecolor="white")
        ax.set_title(metric)
        ax.set_xlabel("score")
        ax.set_ylabel("count")
    fig.tight_layout()
    _save(fig, path)


def save_ranking_curve(ranking: Ranking, scores: dict[str, float],
                       path: str | Path) -> None:
    """Score against rank position, highest score first."""
    ys = [scores[sid] for sid in ranking.ids]
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    ax.plot(range(1, len(ys) + 1), ys, color="#4878cf")
    ax.set_xlabel("rank")
    ax.set_ylabel("score")
    ax.set_title("ranked scores")
    fig.tight_layout()
    _save(fig, path)


def save_bucket_chart(reports: list[BucketReport], path: str | Path) -> None:
    """Mean time-to-collision per rank bucket, sentinel-inclusive."""
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    xs = [r.bucket for r in reports]
    ax.bar(xs, [r.mean_ttc for r in reports], color="#4878cf")
    ax.set_xticks(xs)
    ax.set_xlabel("bucket")
    ax.set_ylabel("mean ttc (s)")
    ax.set_title("planner stress by bucket")
    fig.tight_layout()
    _save(fig, path)


def save_weight_curve(weights: SampleWeights, path: str | Path) -> None:
    """Normalized sampling weight against rank position."""
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    ax.plot(range(1, len(weights.ids) + 1), weights.normalized, color="#4878cf")
    ax.set_xlabel("rank")
    ax.set_ylabel("weight")
    ax.set_title("rank-decay sampling weights")
    fig.tight_layout()
    _save(fig, path)
