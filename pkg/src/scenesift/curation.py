"""Downstream uses of an interactivity ranking.

Quantile bucketing of ranked scenarios, per-bucket planner stress tests
(mean TTC of a plan against the recorded traffic), rank-based upsampling
weights for training-set curation, and plan-quality metrics.
"""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .ranking import Ranking
from .scenario import Agent, AgentState, ScenarioSet, Segment, canonical_segment
from .surprise import rule_plan, ttc

PLANNERS = ("rule", "predictor")


@dataclass
class Bucket:
    index: int  # 0 = highest-ranked slice
    ids: list[str]


def bucket_split(ranking: Ranking, n_buckets: int) -> list[Bucket]:
    """Contiguous rank slices of near-equal size; when N % B != 0 the
    earliest buckets take the extra item."""
    n = len(ranking.ids)
    if n_buckets < 1:
        raise DataError(f"need at least 1 bucket, got {n_buckets}")
    if n < n_buckets:
        raise DataError(f"cannot split {n} scenarios into {n_buckets} buckets")
    base, remainder = divmod(n, n_buckets)
    out: list[Bucket] = []
    start = 0
    for b in range(n_buckets):
        size = base + (1 if b < remainder else 0)
        out.append(Bucket(index=b, ids=ranking.ids[start : start + size]))
        start += size
    return out


@dataclass
class SampleWeights:
    ids: list[str]  # rank order
    tau: float
    raw: np.ndarray
    normalized: np.ndarray


def upsample_weights(ranking: Ranking, tau: float) -> SampleWeights:
    """Training-sample weights w_i = exp(-r_i / (tau * N)) over 1-based
    ranks; large tau flattens toward uniform."""
    if not (tau > 0 and math.isfinite(tau)):
        raise DataError(f"tau must be positive and finite, got {tau}")
    n = len(ranking.ids)
    if n == 0:
        raise DataError("empty ranking")
    ranks = np.arange(1, n + 1, dtype=float)
    raw = np.exp(-ranks / (tau * n))
    return SampleWeights(ids=list(ranking.ids), tau=tau, raw=raw, normalized=raw / raw.sum())


def save_weights(weights: SampleWeights, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scenario_id", "rank", "weight", "weight_normalized"])
        for i, sid in enumerate(weights.ids):
            writer.writerow(
                [sid, i + 1, repr(float(weights.raw[i])), repr(float(weights.normalized[i]))]
            )


def predictor_plan(seg: Segment, predictor) -> np.ndarray:
    """Ego plan from the predictor's top-weight ego mode. (T, 2) positions."""
    scenario = seg.scenario
    joint = predictor.predict_for(scenario.scenario_id, "base", seg, None, None, 0)
    if scenario.ego_id not in joint:
        raise DataError(f"predictor produced no ego modes for {scenario.scenario_id!r}")
    gmm = joint[scenario.ego_id]
    top = max(range(len(gmm.modes)), key=lambda i: (gmm.modes[i].weight, -i))
    return gmm.modes[top].mean.reshape(-1, 2)


def plan_positions(seg: Segment, planner: str, predictor=None) -> np.ndarray:
    if planner == "rule":
        return rule_plan(seg)[:, 0:2]
    if planner == "predictor":
        if predictor is None:
            raise DataError("predictor planner needs a predictor")
        return predictor_plan(seg, predictor)
    raise DataError(f"unknown planner {planner!r} (valid: {PLANNERS})")


def _segment_with_plan(seg: Segment, plan_xy: np.ndarray) -> Segment:
    """Rewrite the ego's future states to follow the plan, for metrics that
    extrapolate from the split with the plan's implied velocity."""
    scenario = seg.scenario
    if plan_xy.shape[0] != seg.n_future:
        raise DataError(
            f"plan length {plan_xy.shape[0]} does not match future horizon {seg.n_future}"
        )
    times = scenario.times()
    agents: list[Agent] = []
    for agent in scenario.agents:
        if agent.id != scenario.ego_id:
            agents.append(agent)
            continue
        states = list(agent.states)
        prev = states[seg.split_index]
        assert prev is not None
        prev_xy = prev.position
        split_vel = (plan_xy[0] - prev_xy) / seg.dt
        states[seg.split_index] = AgentState(
            t=prev.t, x=prev.x, y=prev.y,
            heading=prev.heading, vx=float(split_vel[0]), vy=float(split_vel[1]),
        )
        for i, k in enumerate(seg.future_indices()):
            delta = plan_xy[i] - (plan_xy[i - 1] if i > 0 else prev_xy)
            heading = math.atan2(delta[1], delta[0]) if np.hypot(*delta) > 1e-9 else prev.heading
            states[k] = AgentState(
                t=float(times[k]),
                x=float(plan_xy[i, 0]),
                y=float(plan_xy[i, 1]),
                heading=heading,
                vx=float(delta[0] / seg.dt),
                vy=float(delta[1] / seg.dt),
            )
        agents.append(Agent(agent.id, agent.kind, agent.length, agent.width, states))
    return seg.with_scenario(scenario.replace_agents(agents))


@dataclass
class BucketReport:
    bucket: int
    planner: str
    mean_ttc: float
    mean_ttc_excluding_sentinel: float
    n: int


def evaluate_planner(
    planner: str, bucket: Bucket, data: ScenarioSet, predictor=None
) -> BucketReport:
    """Mean TTC of the planner's ego plan against recorded traffic over a
    bucket. Reported twice: counting no-contact scenarios at the sentinel,
    and excluding them (NaN mean when every scenario is contact-free)."""
    if not bucket.ids:
        raise DataError(f"bucket {bucket.index} is empty")
    values: list[float] = []
    sentinels: list[bool] = []
    for sid in bucket.ids:
        scenario = data.get(sid)
        seg = canonical_segment(scenario)
        plan_xy = plan_positions(seg, planner, predictor)
        value = plan_ttc(seg, plan_xy)
        values.append(value)
        sentinels.append(value >= scenario.future_horizon + scenario.dt)
    non_sentinel = [v for v, s in zip(values, sentinels) if not s]
    return BucketReport(
        bucket=bucket.index,
        planner=planner,
        mean_ttc=float(np.mean(values)),
        mean_ttc_excluding_sentinel=float(np.mean(non_sentinel)) if non_sentinel else float("nan"),
        n=len(values),
    )


def plan_ttc(seg: Segment, plan_xy: np.ndarray) -> float:
    """TTC of a planned ego against recorded agents: the plan replaces the
    ego's future, then the usual split-state extrapolation applies."""
    return ttc(_segment_with_plan(seg, plan_xy))


def save_bucket_report(reports: list[BucketReport], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bucket", "planner", "mean_ttc", "mean_ttc_excluding_sentinel", "n"])
        for r in reports:
            writer.writerow(
                [
                    r.bucket,
                    r.planner,
                    repr(float(r.mean_ttc)),
                    repr(float(r.mean_ttc_excluding_sentinel)),
                    r.n,
                ]
            )


@dataclass
class PlanMetrics:
    ade: float
    fde: float
    collision: int
    ttc: float


def plan_metrics(plan_xy: np.ndarray, seg: Segment) -> PlanMetrics:
    """Displacement errors against the recorded ego future, disc-contact
    collision flag against recorded agents, and the plan's TTC."""
    plan_xy = np.asarray(plan_xy, dtype=float)
    if plan_xy.shape != (seg.n_future, 2):
        raise DataError(f"plan must be ({seg.n_future}, 2), got {plan_xy.shape}")
    scenario = seg.scenario
    recorded = seg.future_positions(scenario.ego_id)
    deltas = [
        float(np.linalg.norm(plan_xy[i] - recorded[i]))
        for i in range(seg.n_future)
        if not np.any(np.isnan(recorded[i]))
    ]
    if not deltas:
        raise DataError(f"ego has no recorded future in scenario {scenario.scenario_id!r}")
    last_present = max(
        i for i in range(seg.n_future) if not np.any(np.isnan(recorded[i]))
    )
    ade = float(np.mean(deltas))
    fde = float(np.linalg.norm(plan_xy[last_present] - recorded[last_present]))

    ego = scenario.agent(scenario.ego_id)
    collision = 0
    for i, k in enumerate(seg.future_indices()):
        for other in scenario.agents:
            if other.id == ego.id:
                continue
            state = other.states[k]
            if state is None:
                continue
            gap = float(np.linalg.norm(plan_xy[i] - state.position))
            if gap <= ego.radius + other.radius:
                collision = 1
                break
        if collision:
            break
    return PlanMetrics(ade=ade, fde=fde, collision=collision, ttc=plan_ttc(seg, plan_xy))


def load_plans(path: str | os.PathLike) -> dict[str, np.ndarray]:
    """External plan file: one JSON object per line {scenario_id, plan[][2]}."""
    plans: dict[str, np.ndarray] = {}
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read plans {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                sid = str(obj["scenario_id"])
                plan = np.asarray(obj["plan"], dtype=float)
                if plan.ndim != 2 or plan.shape[1] != 2:
                    raise ValueError(f"plan must be (T, 2), got {plan.shape}")
            except (ValueError, KeyError, TypeError) as exc:
                raise DataError(f"{path}:{lineno}: malformed plan record: {exc}") from exc
            if sid in plans:
                raise DataError(f"{path}:{lineno}: duplicate plan for {sid!r}")
            plans[sid] = plan
    return plans


def save_plans(plans: dict[str, np.ndarray], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sid, plan in plans.items():
            fh.write(
                json.dumps({"scenario_id": sid, "plan": [[float(x), float(y)] for x, y in plan]})
                + "\n"
            )
