"""Pairwise-preference reward model and ranking evaluation.

Annotator choices between scenario pairs train a linear Bradley-Terry
model over per-scenario metric features; the fitted model scores and ranks
the whole dataset. Rankings are compared with Spearman correlation and a
top-fraction AUC-ROC, both tie-aware.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .surprise import ScoreTable

CHOICES = ("A", "B", "skip")


@dataclass(frozen=True)
class PreferenceRecord:
    annotator: str
    a: str
    b: str
    choice: str
    ts: float

    def __post_init__(self) -> None:
        if self.a == self.b:
            raise DataError(f"preference pairs need distinct scenarios, got {self.a!r} twice")
        if self.choice not in CHOICES:
            raise DataError(f"choice must be one of {CHOICES}, got {self.choice!r}")


def load_preferences(path: str | os.PathLike) -> list[PreferenceRecord]:
    records: list[PreferenceRecord] = []
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read preferences {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                records.append(
                    PreferenceRecord(
                        annotator=str(obj["annotator"]),
                        a=str(obj["a"]),
                        b=str(obj["b"]),
                        choice=str(obj["choice"]),
                        ts=float(obj["ts"]),
                    )
                )
            except (ValueError, KeyError, TypeError, DataError) as exc:
                raise DataError(f"{path}:{lineno}: malformed preference record: {exc}") from exc
    return records


def save_preferences(records: list[PreferenceRecord], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(
                json.dumps(
                    {"annotator": r.annotator, "a": r.a, "b": r.b, "choice": r.choice, "ts": r.ts}
                )
                + "\n"
            )


def build_feature_map(
    tables: list[ScoreTable], feature_names: list[str]
) -> dict[str, np.ndarray]:
    """Per-scenario feature vectors gathered from score tables, ordered by
    feature_names. Every named feature must cover every scenario seen."""
    if not feature_names:
        raise DataError("empty feature set")
    per_metric: dict[str, dict[str, float]] = {}
    ids: list[str] = []
    seen = set()
    for table in tables:
        for row in table.rows:
            per_metric.setdefault(row.metric, {})[row.scenario_id] = row.score
            if row.scenario_id not in seen:
                seen.add(row.scenario_id)
                ids.append(row.scenario_id)
    for name in feature_names:
        if name not in per_metric:
            raise DataError(f"missing feature {name!r}: no score rows carry that metric")
    out: dict[str, np.ndarray] = {}
    for sid in ids:
        values = []
        for name in feature_names:
            if sid not in per_metric[name]:
                raise DataError(f"missing feature {name!r} for scenario {sid!r}")
            values.append(per_metric[name][sid])
        out[sid] = np.array(values)
    return out


@dataclass
class RewardModel:
    feature_names: list[str]
    weights: np.ndarray
    bias: float
    mean: np.ndarray
    scale: np.ndarray
    meta: dict = field(default_factory=dict)

    def score(self, raw: np.ndarray) -> float:
        z = (np.asarray(raw, dtype=float) - self.mean) / self.scale
        return float(self.weights @ z + self.bias)

    def score_map(self, features: dict[str, np.ndarray]) -> dict[str, float]:
        return {sid: self.score(vec) for sid, vec in features.items()}


def save_reward_model(model: RewardModel, path: str | os.PathLike) -> None:
    payload = {
        "features": model.feature_names,
        "weights": [float(w) for w in model.weights],
        "bias": float(model.bias),
        "standardization": {
            "mean": [float(v) for v in model.mean],
            "scale": [float(v) for v in model.scale],
        },
        "meta": model.meta,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def load_reward_model(path: str | os.PathLike) -> RewardModel:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read reward model {path}: {exc}") from exc
    try:
        return RewardModel(
            feature_names=[str(f) for f in obj["features"]],
            weights=np.asarray(obj["weights"], dtype=float),
            bias=float(obj.get("bias", 0.0)),
            mean=np.asarray(obj["standardization"]["mean"], dtype=float),
            scale=np.asarray(obj["standardization"]["scale"], dtype=float),
            meta=dict(obj.get("meta", {})),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: malformed reward model: {exc}") from exc


def fit_reward(
    prefs: list[PreferenceRecord],
    features: dict[str, np.ndarray],
    feature_names: list[str],
    l2: float = 1e-3,
    step: float = 0.1,
    max_iters: int = 10000,
    grad_tol: float = 1e-6,
    seed: int = 0,
) -> RewardModel:
    """Fit the Bradley-Terry model by full-batch gradient descent.

    The step halves within an iteration whenever it would increase the
    regularized loss, so the loss curve is non-increasing. Standardization
    constants come from the items referenced by the training pairs.
    """
    usable = [r for r in prefs if r.choice != "skip"]
    if not usable:
        raise DataError("no non-skip preference records to train on")
    train_ids = sorted({r.a for r in usable} | {r.b for r in usable})
    missing = [sid for sid in train_ids if sid not in features]
    if missing:
        raise DataError(f"preferences reference scenarios without features: {missing[:5]}")

    X = np.stack([features[sid] for sid in train_ids])
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0  # constant features carry no signal; keep them inert
    standardized = {sid: (features[sid] - mean) / scale for sid in train_ids}

    # each record becomes a difference vector: winner minus loser
    diffs = np.stack(
        [
            standardized[r.a] - standardized[r.b]
            if r.choice == "A"
            else standardized[r.b] - standardized[r.a]
            for r in usable
        ]
    )

    def loss_and_grad(w: np.ndarray) -> tuple[float, np.ndarray]:
        s = diffs @ w
        # -log sigmoid(s), stable on both tails
        loss = float(np.logaddexp(0.0, -s).sum()) + l2 * float(w @ w)
        # 1 - sigmoid(s) = exp(-logaddexp(0, s)), stable on both tails too
        one_minus_sigma = np.exp(-np.logaddexp(0.0, s))
        grad = -(diffs * one_minus_sigma[:, None]).sum(axis=0) + 2.0 * l2 * w
        return loss, grad

    w = np.zeros(len(feature_names))
    loss, grad = loss_and_grad(w)
    curve = [loss]
    iterations = 0
    for iterations in range(1, max_iters + 1):
        if float(np.linalg.norm(grad)) < grad_tol:
            break
        trial_step = step
        while True:
            candidate = w - trial_step * grad
            cand_loss, cand_grad = loss_and_grad(candidate)
            if cand_loss <= loss or trial_step < 1e-16:
                break
            trial_step /= 2.0
        if cand_loss > loss:
            break  # no descent direction left at float precision
        w, loss, grad = candidate, cand_loss, cand_grad
        curve.append(loss)
    return RewardModel(
        feature_names=list(feature_names),
        weights=w,
        bias=0.0,
        mean=mean,
        scale=scale,
        meta={
            "iterations": iterations,
            "final_loss": loss,
            "grad_norm": float(np.linalg.norm(grad)),
            "n_records": len(usable),
            "seed": seed,
            "loss_curve_head": [float(v) for v in curve[:20]],
        },
    )


@dataclass
class Ranking:
    """Scenario ids in rank order (index 0 = rank 1 = most interactive)."""

    ids: list[str]
    source: str = ""

    def __post_init__(self) -> None:
        if len(set(self.ids)) != len(self.ids):
            raise DataError("ranking contains duplicate ids")

    def __len__(self) -> int:
        return len(self.ids)

    def ranks(self) -> dict[str, int]:
        return {sid: i + 1 for i, sid in enumerate(self.ids)}


def ranking_from_scores(scores: dict[str, float], source: str = "") -> Ranking:
    """Descending score order; ties break toward the smaller id."""
    ids = sorted(scores, key=lambda sid: (-scores[sid], sid))
    return Ranking(ids=ids, source=source)


def rank_dataset(model: RewardModel, features: dict[str, np.ndarray]) -> Ranking:
    return ranking_from_scores(model.score_map(features), source="reward-model")


def save_ranking(ranking: Ranking, scores: dict[str, float], path: str | os.PathLike) -> None:
    import csv

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scenario_id", "rank", "score"])
        for i, sid in enumerate(ranking.ids, start=1):
            writer.writerow([sid, i, repr(float(scores[sid]))])


def load_ranking(path: str | os.PathLike) -> tuple[Ranking, dict[str, float]]:
    import csv

    ids: list[str] = []
    scores: dict[str, float] = {}
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise DataError(f"cannot read ranking {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["scenario_id", "rank", "score"]:
            raise DataError(f"{path}: unexpected header {header}")
        for row in reader:
            ids.append(row[0])
            scores[row[0]] = float(row[2])
    return Ranking(ids=ids, source=str(path)), scores


def fractional_ranks(values: np.ndarray) -> np.ndarray:
    """Average ranks (1-based); tied values share the mean of their span."""
    values = np.asarray(values, dtype=float)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(x, y) -> float:
    """Spearman correlation of two aligned value sequences, with average
    ranks under ties."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DataError(f"spearman needs two equal-length vectors, got {x.shape} and {y.shape}")
    if x.size < 2:
        raise DataError("spearman needs at least 2 items")
    rx = fractional_ranks(x)
    ry = fractional_ranks(y)
    rx = rx - rx.mean()
    ry = ry - ry.mean()
    denom = math.sqrt(float(rx @ rx) * float(ry @ ry))
    if denom == 0:
        raise DataError("spearman undefined: a rank vector has zero variance")
    return float(rx @ ry) / denom


def spearman_rankings(r1: Ranking, r2: Ranking) -> float:
    if set(r1.ids) != set(r2.ids):
        raise DataError("rankings cover different id sets")
    ranks2 = r2.ranks()
    x = [float(i + 1) for i in range(len(r1.ids))]
    y = [float(ranks2[sid]) for sid in r1.ids]
    return spearman(x, y)


def auc_roc(scores: dict[str, float], labels: dict[str, bool]) -> float:
    """Probability a positive outranks a negative (ties count half),
    computed by rank-sum."""
    ids = sorted(scores)
    if set(ids) != set(labels):
        raise DataError("scores and labels cover different id sets")
    y = np.array([bool(labels[sid]) for sid in ids])
    n_pos = int(y.sum())
    n_neg = len(ids) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("AUC undefined: both classes must be present")
    values = np.array([scores[sid] for sid in ids])
    ranks = fractional_ranks(values)
    rank_sum = float(ranks[y].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def derive_labels(ranking: Ranking, top_frac: float) -> dict[str, bool]:
    """Mark the ceil(top_frac * N) best-ranked ids positive."""
    if not 0.0 < top_frac < 1.0:
        raise DataError(f"top_frac must be in (0, 1), got {top_frac}")
    cutoff = math.ceil(top_frac * len(ranking.ids))
    return {sid: i < cutoff for i, sid in enumerate(ranking.ids)}
