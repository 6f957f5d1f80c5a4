"""Scenario editing: motion primitives and the counterfactual generators.

A generator takes a segment plus a target agent and produces edited
variants. Future-side kinds leave the log untouched and attach a condition
trajectory (a fixed future for the target); history-side kinds rewrite the
target's past (or remove the agent) and attach no condition. Trajectories
are (T, 5) float arrays with columns x, y, heading, vx, vy on the segment's
time grid.
"""
from __future__ import annotations

import json
import math
import os
import random
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DataError
from .geometry import obb_corners, obb_overlap, point_on_polyline, project_to_polyline, rot2d, wrap_angle
from .scenario import Agent, AgentState, LaneSegment, ScenarioSet, Segment, closest_lane

TRAJ_COLUMNS = ("x", "y", "heading", "vx", "vy")

DEFAULT_MAX_VARIANTS = 8


class GeneratorKind(str, Enum):
    """The eight scenario edits. Fut* kinds condition the target's future;
    Hist* kinds rewrite its past or delete it."""

    FUT_NONE = "FutNone"
    FUT_GT = "FutGt"
    FUT_CVM = "FutCvm"
    FUT_CVM_LANE = "FutCvmLane"
    FUT_PRED = "FutPred"
    FUT_PRIM = "FutPrim"
    HIST_RMV = "HistRmv"
    HIST_PRIM = "HistPrim"

    @classmethod
    def parse(cls, name: str) -> "GeneratorKind":
        for kind in cls:
            if kind.value.lower() == name.lower():
                return kind
        valid = ", ".join(k.value for k in cls)
        raise DataError(f"unknown generator kind {name!r} (valid: {valid})")

    @property
    def conditions_future(self) -> bool:
        return self in (
            GeneratorKind.FUT_GT,
            GeneratorKind.FUT_CVM,
            GeneratorKind.FUT_CVM_LANE,
            GeneratorKind.FUT_PRED,
            GeneratorKind.FUT_PRIM,
        )


def state_to_row(s: AgentState) -> np.ndarray:
    return np.array([s.x, s.y, s.heading, s.vx, s.vy])


def row_to_state(row: np.ndarray, t: float) -> AgentState:
    x, y, heading, vx, vy = (float(v) for v in row)
    return AgentState(t=t, x=x, y=y, heading=wrap_angle(heading), vx=vx, vy=vy)


@dataclass
class MotionPrimitive:
    """A frame-normalized trajectory snippet: first state at the origin
    with heading 0, uniform dt, duration (T-1)*dt seconds."""

    id: str
    relative_states: np.ndarray  # (T, 5)
    duration: float
    dt: float
    source: str

    @property
    def n_states(self) -> int:
        return int(self.relative_states.shape[0])

    def behavior_bin(self) -> tuple[int, int, int, int]:
        """Coarse behavior signature: quantized endpoint displacement
        (longitudinal, lateral), heading change, and speed change."""
        rs = self.relative_states
        dx, dy = rs[-1, 0], rs[-1, 1]
        dheading = wrap_angle(rs[-1, 2] - rs[0, 2])
        dspeed = math.hypot(rs[-1, 3], rs[-1, 4]) - math.hypot(rs[0, 3], rs[0, 4])
        return (
            int(math.floor(dx / 4.0)),
            int(math.floor(dy / 2.0)),
            int(math.floor(dheading / (math.pi / 12))),
            int(math.floor(dspeed / 1.5)),
        )


@dataclass
class PrimitiveLibrary:
    primitives: list[MotionPrimitive]

    def __len__(self) -> int:
        return len(self.primitives)

    def with_n_states(self, n: int) -> list[MotionPrimitive]:
        return [p for p in self.primitives if p.n_states == n]


def save_library(lib: PrimitiveLibrary, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in lib.primitives:
            fh.write(
                json.dumps(
                    {
                        "id": p.id,
                        "duration": p.duration,
                        "dt": p.dt,
                        "relative_states": [[float(v) for v in row] for row in p.relative_states],
                        "source": p.source,
                    }
                )
                + "\n"
            )


def load_library(path: str | os.PathLike) -> PrimitiveLibrary:
    prims: list[MotionPrimitive] = []
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read primitive library {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                rs = np.asarray(obj["relative_states"], dtype=float)
                if rs.ndim != 2 or rs.shape[1] != 5 or rs.shape[0] < 2:
                    raise ValueError(f"relative_states must be (T>=2, 5), got {rs.shape}")
                prims.append(
                    MotionPrimitive(
                        id=str(obj["id"]),
                        relative_states=rs,
                        duration=float(obj["duration"]),
                        dt=float(obj["dt"]),
                        source=str(obj.get("source", "")),
                    )
                )
            except (ValueError, KeyError, TypeError) as exc:
                raise DataError(f"{path}:{lineno}: malformed primitive record: {exc}") from exc
    return PrimitiveLibrary(prims)


def _canonicalize(window: list[AgentState]) -> np.ndarray:
    """Rigidly move a state window so its first state sits at the origin
    with heading 0."""
    first = window[0]
    R = rot2d(-first.heading)
    out = np.empty((len(window), 5))
    for i, s in enumerate(window):
        p = R @ np.array([s.x - first.x, s.y - first.y])
        v = R @ np.array([s.vx, s.vy])
        out[i] = (p[0], p[1], wrap_angle(s.heading - first.heading), v[0], v[1])
    return out


def extract_primitives(
    data: ScenarioSet, horizon: float, max_count: int, seed: int
) -> PrimitiveLibrary:
    """Mine frame-normalized trajectory snippets from agent tracks.

    Every gap-free window of horizon length becomes a candidate; windows
    are deduplicated into behavior bins (endpoint displacement, heading
    change, speed change) and the library is filled bin round-robin so
    distinct behaviors survive the cap. Deterministic given the seed.
    """
    if max_count < 1:
        raise DataError(f"max_count must be >= 1, got {max_count}")
    candidates: list[MotionPrimitive] = []
    for scenario in data:
        n = int(round(horizon / scenario.dt)) + 1
        if n < 2 or abs(horizon / scenario.dt - (n - 1)) > 1e-9:
            raise DataError(
                f"horizon {horizon} is not a multiple of dt={scenario.dt} "
                f"in scenario {scenario.scenario_id!r}"
            )
        for agent in scenario.agents:
            states = agent.states
            for start in range(0, len(states) - n + 1):
                window = states[start : start + n]
                if any(s is None for s in window):
                    continue
                candidates.append(
                    MotionPrimitive(
                        id="",
                        relative_states=_canonicalize(window),  # type: ignore[arg-type]
                        duration=(n - 1) * scenario.dt,
                        dt=scenario.dt,
                        source=f"{scenario.scenario_id}/{agent.id}@{start}",
                    )
                )
    if not candidates:
        raise DataError(f"no gap-free {horizon} s windows in dataset")

    bins: dict[tuple, list[MotionPrimitive]] = {}
    for prim in candidates:
        bins.setdefault(prim.behavior_bin(), []).append(prim)
    rng = random.Random(seed)
    for members in bins.values():
        rng.shuffle(members)
    ordered_bins = [bins[key] for key in sorted(bins.keys())]

    picked: list[MotionPrimitive] = []
    depth = 0
    while len(picked) < max_count:
        advanced = False
        for members in ordered_bins:
            if depth < len(members):
                picked.append(members[depth])
                advanced = True
                if len(picked) == max_count:
                    break
        if not advanced:
            break
        depth += 1
    for i, prim in enumerate(picked):
        prim.id = f"prim-{i:04d}"
    return PrimitiveLibrary(picked)


def place_primitive(prim: MotionPrimitive, anchor: AgentState) -> np.ndarray:
    """Rigidly transform a primitive so its first state takes the anchor's
    pose; velocities rotate with the frame."""
    return _place(prim.relative_states, prim.relative_states[0], anchor)


def place_primitive_final(prim: MotionPrimitive, anchor: AgentState) -> np.ndarray:
    """As place_primitive but pinning the final state to the anchor, for
    history substitution that must rejoin the present pose."""
    return _place(prim.relative_states, prim.relative_states[-1], anchor)


def _place(rel: np.ndarray, ref_row: np.ndarray, anchor: AgentState) -> np.ndarray:
    dtheta = wrap_angle(anchor.heading - ref_row[2])
    R = rot2d(dtheta)
    out = np.empty_like(rel)
    pos = (rel[:, 0:2] - ref_row[0:2]) @ R.T + np.array([anchor.x, anchor.y])
    vel = rel[:, 3:5] @ R.T
    out[:, 0:2] = pos
    out[:, 2] = np.array([wrap_angle(h - ref_row[2] + anchor.heading) for h in rel[:, 2]])
    out[:, 3:5] = vel
    return out


def feasible(traj: np.ndarray, seg: Segment, target: str, start_index: int | None = None) -> bool:
    """True when the target, driven along traj, never intersects another
    agent's recorded box and stays inside the drivable region.

    ``start_index`` is the grid step of traj's first row (defaults to the
    split). Scenarios without any map are unconstrained in space.
    """
    scenario = seg.scenario
    agent = scenario.agent(target)
    k0 = seg.split_index if start_index is None else start_index
    region = scenario.drivable_region()
    for i, row in enumerate(np.asarray(traj, dtype=float)):
        k = k0 + i
        if not region.empty and not region.contains(row[0:2]):
            return False
        box = obb_corners(row[0:2], float(row[2]), agent.length, agent.width)
        for other in scenario.agents:
            if other.id == target or k >= len(other.states):
                continue
            state = other.states[k]
            if state is None:
                continue
            other_box = obb_corners(state.position, state.heading, other.length, other.width)
            if obb_overlap(box, other_box):
                return False
    return True


def cvm_rollout(state: AgentState, horizon: float, dt: float) -> np.ndarray:
    """Constant-velocity future: horizon/dt steps after (not including)
    the given state."""
    n = int(round(horizon / dt))
    steps = np.arange(1, n + 1, dtype=float)[:, None]
    out = np.empty((n, 5))
    out[:, 0:2] = np.array([state.x, state.y]) + steps * dt * np.array([state.vx, state.vy])
    out[:, 2] = state.heading
    out[:, 3] = state.vx
    out[:, 4] = state.vy
    return out


def lane_follow_rollout(state: AgentState, lane: LaneSegment, horizon: float, dt: float) -> np.ndarray:
    """Advance along the lane centerline at the current speed, holding the
    final centerline point once the lane runs out."""
    n = int(round(horizon / dt))
    speed = state.speed
    _, arc0 = project_to_polyline(state.position, lane.centerline)
    out = np.empty((n, 5))
    for k in range(1, n + 1):
        point, heading = point_on_polyline(lane.centerline, arc0 + speed * k * dt)
        out[k - 1, 0:2] = point
        out[k - 1, 2] = heading
        out[k - 1, 3] = speed * math.cos(heading)
        out[k - 1, 4] = speed * math.sin(heading)
    return out


@dataclass
class Variant:
    variant_id: str
    segment: Segment
    condition: np.ndarray | None = None  # (n_future, 5) target future


@dataclass
class CounterfactualSet:
    scenario_id: str
    target: str
    kind: GeneratorKind
    variants: list[Variant] = field(default_factory=list)


def _replace_history(seg: Segment, target: str, placed: np.ndarray) -> Segment:
    """Rebuild the scenario with the target's history steps taken from the
    last n_history rows of a placed trajectory (split pose included)."""
    scenario = seg.scenario
    hist = list(seg.history_indices())
    rows = placed[-len(hist) :]
    agents: list[Agent] = []
    for agent in scenario.agents:
        if agent.id != target:
            agents.append(agent)
            continue
        states = list(agent.states)
        times = scenario.times()
        for k, row in zip(hist, rows):
            states[k] = row_to_state(row, float(times[k]))
        agents.append(Agent(id=agent.id, kind=agent.kind, length=agent.length, width=agent.width, states=states))
    return seg.with_scenario(scenario.replace_agents(agents))


def _remove_agent(seg: Segment, target: str) -> Segment:
    scenario = seg.scenario
    agents = [a for a in scenario.agents if a.id != target]
    return seg.with_scenario(scenario.replace_agents(agents))


def _recorded_future(seg: Segment, target: str) -> np.ndarray:
    states = seg.future_states(target)
    if any(s is None for s in states):
        raise DataError(f"target {target!r} has absent future steps; recorded-future edit undefined")
    return np.stack([state_to_row(s) for s in states])  # type: ignore[arg-type]


def generate(
    seg: Segment,
    target: str,
    kind: GeneratorKind,
    lib: PrimitiveLibrary | None = None,
    predictor=None,
    max_variants: int = DEFAULT_MAX_VARIANTS,
    seed: int = 0,
) -> CounterfactualSet:
    """Produce the edited variants for one generator kind.

    Single-variant kinds return exactly one variant; primitive and
    prediction kinds return up to max_variants, deterministically chosen.
    The input segment is never mutated.
    """
    scenario = seg.scenario
    if kind is not GeneratorKind.FUT_NONE and not scenario.has_agent(target):
        raise DataError(f"target {target!r} not in scenario {scenario.scenario_id!r}")
    out = CounterfactualSet(scenario_id=scenario.scenario_id, target=target, kind=kind)
    split = seg.split_state(target) if scenario.has_agent(target) else None
    if kind is not GeneratorKind.FUT_NONE and split is None:
        raise DataError(
            f"target {target!r} absent at the split step in scenario {scenario.scenario_id!r}"
        )

    if kind is GeneratorKind.FUT_NONE:
        out.variants.append(Variant("base", seg))
    elif kind is GeneratorKind.FUT_GT:
        out.variants.append(Variant("gt", seg, condition=_recorded_future(seg, target)))
    elif kind is GeneratorKind.FUT_CVM:
        cond = cvm_rollout(split, scenario.future_horizon, seg.dt)
        out.variants.append(Variant("cvm", seg, condition=cond))
    elif kind is GeneratorKind.FUT_CVM_LANE:
        if scenario.lanes:
            lane, _, _ = closest_lane(split.position, scenario)
            cond = lane_follow_rollout(split, lane, scenario.future_horizon, seg.dt)
        else:
            cond = cvm_rollout(split, scenario.future_horizon, seg.dt)
        out.variants.append(Variant("cvm-lane", seg, condition=cond))
    elif kind is GeneratorKind.FUT_PRED:
        if predictor is None:
            raise DataError("FutPred requires a predictor")
        prediction = predictor.predict(seg, cond=None, K=max_variants, seed=seed)
        if target not in prediction:
            raise DataError(f"predictor produced no modes for target {target!r}")
        seen: set[bytes] = set()
        for mode in prediction[target].modes:
            key = mode.mean.tobytes()
            if key in seen:
                continue
            seen.add(key)
            if len(out.variants) == max_variants:
                break
            traj = mode.mean.reshape(-1, 2)
            cond = np.empty((traj.shape[0], 5))
            cond[:, 0:2] = traj
            cond[:, 2:5] = _pose_from_positions(traj, split, seg.dt)
            out.variants.append(Variant(f"pred-{len(out.variants)}", seg, condition=cond))
    elif kind in (GeneratorKind.FUT_PRIM, GeneratorKind.HIST_PRIM):
        if lib is None or not len(lib):
            raise DataError(f"{kind.value} requires a primitive library")
        future_side = kind is GeneratorKind.FUT_PRIM
        needed = seg.n_future + 1 if future_side else seg.n_history
        usable = lib.with_n_states(needed)
        if not usable:
            raise DataError(
                f"{kind.value}: no primitive with {needed} states "
                f"(library durations do not match this horizon)"
            )
        picked = _diverse_order(usable, seed)
        count = 0
        for prim in picked:
            if count == max_variants:
                break
            if future_side:
                placed = place_primitive(prim, split)
                if not feasible(placed, seg, target, start_index=seg.split_index):
                    continue
                out.variants.append(Variant(f"prim-{prim.id}", seg, condition=placed[1:]))
            else:
                placed = place_primitive_final(prim, split)
                start = seg.split_index - seg.n_history + 1
                if not feasible(placed, seg, target, start_index=start):
                    continue
                out.variants.append(Variant(f"prim-{prim.id}", _replace_history(seg, target, placed)))
            count += 1
        if not out.variants:
            raise DataError(f"{kind.value}: no feasible primitive for target {target!r}")
    elif kind is GeneratorKind.HIST_RMV:
        out.variants.append(Variant("rmv", _remove_agent(seg, target)))
    else:  # pragma: no cover
        raise DataError(f"unhandled generator kind {kind}")
    return out


def _pose_from_positions(traj: np.ndarray, split: AgentState, dt: float) -> np.ndarray:
    """Back out heading and velocity columns from a position-only future by
    finite differences against the split state."""
    n = traj.shape[0]
    out = np.empty((n, 3))
    prev = np.array([split.x, split.y])
    heading = split.heading
    for i in range(n):
        delta = traj[i] - prev
        v = delta / dt
        if np.hypot(delta[0], delta[1]) > 1e-9:
            heading = math.atan2(delta[1], delta[0])
        out[i] = (heading, v[0], v[1])
        prev = traj[i]
    return out


def _diverse_order(prims: list[MotionPrimitive], seed: int) -> list[MotionPrimitive]:
    """Round-robin across behavior bins, seed-shuffled within each bin."""
    bins: dict[tuple, list[MotionPrimitive]] = {}
    for prim in prims:
        bins.setdefault(prim.behavior_bin(), []).append(prim)
    rng = random.Random(seed)
    for members in bins.values():
        rng.shuffle(members)
    ordered = [bins[key] for key in sorted(bins.keys())]
    out: list[MotionPrimitive] = []
    depth = 0
    while len(out) < len(prims):
        for members in ordered:
            if depth < len(members):
                out.append(members[depth])
        depth += 1
    return out
