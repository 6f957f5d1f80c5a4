"""Scenario interactivity scoring.

The headline score of the package: edit a segment with a nominal and a
counterfactual generator, predict every agent's future under each variant,
and measure how much the predictions of the non-target agents shift. A
scenario where an edit to one agent barely moves anyone else's predicted
future is non-interactive; large shifts mark scenes worth keeping.

Also computes the rule baselines (kinematic heuristics such as max speed,
min distance, TTC) that the scoring is compared against.
"""
from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .counterfactuals import (
    GeneratorKind,
    PrimitiveLibrary,
    Variant,
    cvm_rollout,
    generate,
    lane_follow_rollout,
)
from .errors import DataError, ScenesiftError, ScoringError
from .prediction import Condition, JointPrediction, fnv1a64
from .scenario import ScenarioSet, Segment, canonical_segment, closest_lane
from .shift import kld_gmm, l2_topk, w2_gmm

METRICS = ("L2", "KLD", "W2")
AGENT_AGGREGATIONS = ("max", "mean", "sum")
VARIANT_AGGREGATIONS = ("max", "mean")
TARGET_POLICIES = ("ego", "each-agent")

ORIENTATION = "higher-more-interactive"

# score for "no other agents" in distance-flavored rules; finite so the
# table stays loadable, extreme so ranking treats it as least interactive
FAR_DISTANCE = 1e6

RULE_NAMES = (
    "rule-vel",
    "rule-acc",
    "rule-dist",
    "rule-num",
    "rule-ttc",
    "rule-ttce",
    "rule-lane",
    "rule-err",
)

RULE_NUM_RADIUS = 5.0


def stable_seed(*parts) -> int:
    """Deterministic sub-seed from heterogeneous parts (order matters)."""
    return fnv1a64("|".join(str(p) for p in parts)) & 0x7FFFFFFF


@dataclass
class SurpriseConfig:
    """One point in the scoring grid: which edit is compared to which,
    under which shift measure."""

    nominal: GeneratorKind = GeneratorKind.FUT_NONE
    counterfactual: GeneratorKind = GeneratorKind.HIST_PRIM
    metric: str = "W2"
    K: int = 4
    target_policy: str = "ego"
    agent_aggregation: str = "max"
    variant_aggregation: str = "max"
    max_variants: int = 8
    kld_samples: int = 2000
    l2_exponent: float = 0.5
    seed: int = 0
    label: str | None = None

    def __post_init__(self) -> None:
        if isinstance(self.nominal, str):
            self.nominal = GeneratorKind.parse(self.nominal)
        if isinstance(self.counterfactual, str):
            self.counterfactual = GeneratorKind.parse(self.counterfactual)
        if self.metric not in METRICS:
            raise DataError(f"metric must be one of {METRICS}, got {self.metric!r}")
        if not 1 <= self.K <= 15:
            raise DataError(f"K must be in [1, 15], got {self.K}")
        if self.target_policy not in TARGET_POLICIES:
            raise DataError(f"target_policy must be one of {TARGET_POLICIES}")
        if self.agent_aggregation not in AGENT_AGGREGATIONS:
            raise DataError(f"agent_aggregation must be one of {AGENT_AGGREGATIONS}")
        if self.variant_aggregation not in VARIANT_AGGREGATIONS:
            raise DataError(f"variant_aggregation must be one of {VARIANT_AGGREGATIONS}")

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        return f"sp-{self.nominal.value}-{self.counterfactual.value}-{self.metric}"


@dataclass
class SurpriseResult:
    scenario_id: str
    config_name: str
    score: float
    per_agent: dict[str, float] = field(default_factory=dict)
    diagnostics: list[str] = field(default_factory=list)


@dataclass
class ScoreRow:
    scenario_id: str
    metric: str
    score: float
    orientation: str = ORIENTATION


@dataclass
class ScoreTable:
    rows: list[ScoreRow] = field(default_factory=list)
    diagnostics: list[str] = field(default_factory=list)

    def scores_for(self, metric: str) -> dict[str, float]:
        return {r.scenario_id: r.score for r in self.rows if r.metric == metric}

    def metrics(self) -> list[str]:
        seen: list[str] = []
        for r in self.rows:
            if r.metric not in seen:
                seen.append(r.metric)
        return seen


def _shift(metric: str, g1, g2, cfg: SurpriseConfig, seed: int) -> float:
    if metric == "W2":
        return w2_gmm(g1, g2)
    if metric == "L2":
        return l2_topk(g1, g2, exponent=cfg.l2_exponent)
    value = kld_gmm(g1, g2, n_samples=cfg.kld_samples, seed=seed)
    if not math.isfinite(value):
        raise ScoringError("KLD diverged: reference density vanished at sampled points")
    return max(value, 0.0)  # MC noise can dip below zero; scores stay >= 0


def _aggregate(values: list[float], how: str) -> float:
    if not values:
        return 0.0
    if how == "max":
        return max(values)
    if how == "mean":
        return sum(values) / len(values)
    return sum(values)


def _predict_variants(
    variants: list[Variant],
    target: str,
    scenario_id: str,
    predictor,
    K: int,
    seed: int,
) -> list[tuple[Variant, JointPrediction]]:
    out = []
    for v in variants:
        cond = Condition(target, v.condition) if v.condition is not None else None
        out.append((v, predictor.predict_for(scenario_id, v.variant_id, v.segment, cond, K, seed)))
    return out


def surprise(
    seg: Segment,
    cfg: SurpriseConfig,
    lib: PrimitiveLibrary | None = None,
    predictor=None,
) -> SurpriseResult:
    """Score one segment under one configuration.

    Returns per-agent shifts and their aggregate. Pairs of identical
    variants are skipped when both generators are the same kind, so a
    config compared against itself scores exactly zero.
    """
    if predictor is None:
        raise DataError("surprise scoring requires a predictor")
    scenario = seg.scenario
    if cfg.target_policy == "ego":
        targets = [scenario.ego_id]
    else:
        targets = [a.id for a in seg.agents_present_at_split()]

    best: SurpriseResult | None = None
    for target in targets:
        result = _surprise_one_target(seg, cfg, target, lib, predictor)
        if best is None or result.score > best.score:
            best = result
    assert best is not None
    return best


def _surprise_one_target(
    seg: Segment, cfg: SurpriseConfig, target: str, lib, predictor
) -> SurpriseResult:
    scenario = seg.scenario
    gen_seed = stable_seed(cfg.seed, scenario.scenario_id, target, "generate")
    nominal = generate(
        seg, target, cfg.nominal, lib=lib, predictor=predictor,
        max_variants=cfg.max_variants, seed=gen_seed,
    )
    same_kind = cfg.nominal is cfg.counterfactual
    if same_kind:
        counterfactual = nominal
    else:
        counterfactual = generate(
            seg, target, cfg.counterfactual, lib=lib, predictor=predictor,
            max_variants=cfg.max_variants, seed=gen_seed,
        )

    pred_seed = stable_seed(cfg.seed, scenario.scenario_id, target, "predict")
    nom_preds = _predict_variants(nominal.variants, target, scenario.scenario_id, predictor, cfg.K, pred_seed)
    cf_preds = (
        nom_preds
        if same_kind
        else _predict_variants(counterfactual.variants, target, scenario.scenario_id, predictor, cfg.K, pred_seed)
    )

    result = SurpriseResult(scenario.scenario_id, cfg.name, 0.0)
    per_agent_values: dict[str, list[float]] = {}
    pairs = 0
    for vn, gn in nom_preds:
        for vc, gc in cf_preds:
            if same_kind and vn.variant_id == vc.variant_id:
                continue
            pairs += 1
            common = [a for a in gn if a in gc and a != target]
            for agent_id in common:
                pair_seed = stable_seed(
                    cfg.seed, scenario.scenario_id, target, vn.variant_id, vc.variant_id, agent_id
                )
                value = _shift(cfg.metric, gn[agent_id], gc[agent_id], cfg, pair_seed)
                per_agent_values.setdefault(agent_id, []).append(value)

    if pairs == 0:
        result.diagnostics.append(
            f"single shared variant under {cfg.nominal.value}; no cross pairs, scored 0"
        )
        return result
    if not per_agent_values:
        result.diagnostics.append("no common non-target agents across variants; scored 0")
        return result

    result.per_agent = {
        a: _aggregate(vals, cfg.variant_aggregation) for a, vals in per_agent_values.items()
    }
    result.score = _aggregate(
        [result.per_agent[a] for a in sorted(result.per_agent)], cfg.agent_aggregation
    )
    return result


# rule baselines


def ttc(seg: Segment) -> float:
    """Time to first disc contact between the ego and any other agent under
    constant-velocity extrapolation from the split; future_horizon + dt
    when no contact happens within the horizon."""
    scenario = seg.scenario
    horizon = scenario.future_horizon
    sentinel = horizon + seg.dt
    ego = scenario.agent(scenario.ego_id)
    ego_state = seg.split_state(scenario.ego_id)
    if ego_state is None:
        return sentinel
    best = sentinel
    for other in seg.agents_present_at_split():
        if other.id == scenario.ego_id:
            continue
        state = seg.split_state(other.id)
        p = state.position - ego_state.position
        v = state.velocity - ego_state.velocity
        r = ego.radius + other.radius
        c = float(p @ p) - r * r
        if c <= 0:
            return 0.0
        a = float(v @ v)
        if a == 0.0:
            continue
        b = 2.0 * float(p @ v)
        disc = b * b - 4.0 * a * c
        if disc < 0:
            continue
        t = (-b - math.sqrt(disc)) / (2.0 * a)
        if 0.0 <= t <= horizon:
            best = min(best, t)
    return best


def ttce(seg: Segment) -> float:
    """Time of the closest ego-to-agent center approach within the horizon,
    under the same extrapolation as ttc. Constant-gap pairs peak at t=0."""
    scenario = seg.scenario
    horizon = scenario.future_horizon
    ego_state = seg.split_state(scenario.ego_id)
    if ego_state is None:
        return 0.0
    best: tuple[float, float, str] | None = None  # (distance^2, t, agent id)
    for other in seg.agents_present_at_split():
        if other.id == scenario.ego_id:
            continue
        state = seg.split_state(other.id)
        p = state.position - ego_state.position
        v = state.velocity - ego_state.velocity
        a = float(v @ v)
        b = 2.0 * float(p @ v)
        t = min(max(-b / (2.0 * a), 0.0), horizon) if a > 0 else 0.0
        d2 = float(p @ p) + b * t + a * t * t
        key = (d2, t, other.id)
        if best is None or key < best:
            best = key
    return best[1] if best is not None else 0.0


def rule_scores(seg: Segment, predictor=None) -> dict[str, float]:
    """All rule baselines for one segment, each oriented so that a larger
    value reads as more interactive."""
    scenario = seg.scenario
    window = list(seg.history_indices()) + list(seg.future_indices())
    ego = scenario.agent(scenario.ego_id)

    max_speed = 0.0
    max_accel = 0.0
    for agent in scenario.agents:
        prev = None
        for k in window:
            state = agent.states[k]
            if state is None:
                prev = None
                continue
            max_speed = max(max_speed, state.speed)
            if prev is not None:
                dv = math.hypot(state.vx - prev.vx, state.vy - prev.vy)
                max_accel = max(max_accel, dv / seg.dt)
            prev = state

    min_dist = FAR_DISTANCE
    max_near = 0
    for k in window:
        ego_state = ego.states[k]
        if ego_state is None:
            continue
        near = 0
        for other in scenario.agents:
            if other.id == ego.id:
                continue
            state = other.states[k]
            if state is None:
                continue
            d = float(np.linalg.norm(state.position - ego_state.position))
            min_dist = min(min_dist, d)
            if d <= RULE_NUM_RADIUS:
                near += 1
        max_near = max(max_near, near)

    out = {
        "rule-vel": max_speed,
        "rule-acc": max_accel,
        "rule-dist": -min_dist,
        "rule-num": float(max_near),
        "rule-ttc": -ttc(seg),
        "rule-ttce": -ttce(seg),
        "rule-lane": _lane_deviation(seg),
        "rule-err": _prediction_error(seg, predictor),
    }
    return out


def _lane_deviation(seg: Segment) -> float:
    """ADE of the ego's recorded future against a keep-lane constant-speed
    rollout (constant velocity when no lane is near)."""
    scenario = seg.scenario
    split = seg.split_state(scenario.ego_id)
    if split is None:
        return 0.0
    plan = rule_plan(seg)
    recorded = seg.future_positions(scenario.ego_id)
    return _ade(plan[:, 0:2], recorded)


def _prediction_error(seg: Segment, predictor) -> float:
    """Mean ADE between recorded futures and each agent's top-weight
    predicted mode."""
    if predictor is None:
        return 0.0
    scenario = seg.scenario
    joint = predictor.predict_for(
        scenario.scenario_id, "base", seg, None, None, 0
    )
    errors = []
    for agent_id, gmm in sorted(joint.items()):
        top = max(range(len(gmm.modes)), key=lambda i: (gmm.modes[i].weight, -i))
        mean = gmm.modes[top].mean.reshape(-1, 2)
        recorded = seg.future_positions(agent_id)
        err = _ade(mean, recorded)
        if not math.isnan(err):
            errors.append(err)
    return float(np.mean(errors)) if errors else 0.0


def _ade(plan_xy: np.ndarray, recorded_xy: np.ndarray) -> float:
    """Mean displacement over steps where the recorded track is present;
    NaN when it never is."""
    n = min(plan_xy.shape[0], recorded_xy.shape[0])
    deltas = [
        float(np.linalg.norm(plan_xy[i] - recorded_xy[i]))
        for i in range(n)
        if not np.any(np.isnan(recorded_xy[i]))
    ]
    return float(np.mean(deltas)) if deltas else float("nan")


def rule_plan(seg: Segment) -> np.ndarray:
    """Keep-lane constant-speed ego plan over the future horizon; falls
    back to constant velocity without a nearby lane. (T, 5) trajectory."""
    scenario = seg.scenario
    split = seg.split_state(scenario.ego_id)
    if split is None:
        raise DataError(f"ego absent at split in scenario {scenario.scenario_id!r}")
    if scenario.lanes:
        lane, _, dist = closest_lane(split.position, scenario)
        if dist <= 10.0:
            return lane_follow_rollout(split, lane, scenario.future_horizon, seg.dt)
    return cvm_rollout(split, scenario.future_horizon, seg.dt)


# batch scoring


def _score_one(args) -> tuple[list[ScoreRow], list[str]]:
    scenario, cfgs, lib, predictor, seed = args
    rows: list[ScoreRow] = []
    notes: list[str] = []
    try:
        seg = canonical_segment(scenario)
    except ScenesiftError as exc:
        return [], [f"{scenario.scenario_id}: {exc}"]
    for cfg in cfgs:
        run_cfg = replace(cfg, seed=stable_seed(seed, cfg.seed, cfg.name))
        try:
            result = surprise(seg, run_cfg, lib=lib, predictor=predictor)
            rows.append(ScoreRow(scenario.scenario_id, cfg.name, result.score))
            notes.extend(f"{scenario.scenario_id}/{cfg.name}: {d}" for d in result.diagnostics)
        except ScenesiftError as exc:
            notes.append(f"{scenario.scenario_id}/{cfg.name}: {exc}")
    return rows, notes


def batch_score(
    data: ScenarioSet,
    cfgs: list[SurpriseConfig],
    lib: PrimitiveLibrary | None = None,
    predictor=None,
    seed: int = 0,
    jobs: int = 1,
) -> ScoreTable:
    """Score every scenario under every config. A scenario that cannot be
    scored under some config becomes a diagnostic, never an abort; row
    order follows the dataset regardless of parallelism."""
    table = ScoreTable()
    work = [(s, cfgs, lib, predictor, seed) for s in data]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_score_one, work))
    else:
        results = [_score_one(w) for w in work]
    for rows, notes in results:
        table.rows.extend(rows)
        table.diagnostics.extend(notes)
    return table


def batch_rules(data: ScenarioSet, predictor=None) -> ScoreTable:
    table = ScoreTable()
    for scenario in data:
        try:
            seg = canonical_segment(scenario)
            scores = rule_scores(seg, predictor)
        except ScenesiftError as exc:
            table.diagnostics.append(f"{scenario.scenario_id}: {exc}")
            continue
        for name in RULE_NAMES:
            table.rows.append(ScoreRow(scenario.scenario_id, name, scores[name]))
    return table


# delimited table round-trip


def save_scores(table: ScoreTable, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scenario_id", "metric", "score", "orientation"])
        for r in table.rows:
            writer.writerow([r.scenario_id, r.metric, repr(float(r.score)), r.orientation])
    if table.diagnostics:
        with open(f"{path}.errors", "w", encoding="utf-8") as fh:
            for note in table.diagnostics:
                fh.write(note + "\n")


def load_scores(path: str | os.PathLike) -> ScoreTable:
    table = ScoreTable()
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise DataError(f"cannot read score table {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["scenario_id", "metric", "score", "orientation"]:
            raise DataError(f"{path}: unexpected header {header}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 4:
                raise DataError(f"{path}:{lineno}: expected 4 columns, got {len(row)}")
            try:
                table.rows.append(ScoreRow(row[0], row[1], float(row[2]), row[3]))
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: bad score: {exc}") from exc
    return table
