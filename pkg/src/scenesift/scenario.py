"""Canonical scenario data model, dataset ingestion, and time slicing.

A scenario is a fixed-rate multi-agent log: every agent shares one time
grid (``t0 + k * dt``), with unobserved steps stored as explicit ``None``
entries, never interpolated. Scenarios are immutable after load; all
downstream stages treat them as read-only.

Dataset files are UTF-8 JSON lines, one scenario object per line. Numeric
values round-trip exactly through ``json`` (shortest-repr floats).
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import DataError
from .geometry import DrivableRegion, polygon_is_simple, project_to_polyline

AGENT_KINDS = ("vehicle", "pedestrian", "cyclist")

DEFAULT_DT = 0.5
DEFAULT_HISTORY_HORIZON = 5.0
DEFAULT_FUTURE_HORIZON = 4.0

_GRID_TOL = 1e-6


@dataclass(frozen=True, slots=True)
class AgentState:
    """One observed sample of an agent: pose plus planar velocity."""

    t: float
    x: float
    y: float
    heading: float
    vx: float
    vy: float

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])

    @property
    def velocity(self) -> np.ndarray:
        return np.array([self.vx, self.vy])

    @property
    def speed(self) -> float:
        return math.hypot(self.vx, self.vy)


@dataclass
class Agent:
    """A tracked road user with a fixed bounding box and a gappy track."""

    id: str
    kind: str
    length: float
    width: float
    states: list[AgentState | None]

    @property
    def radius(self) -> float:
        """Disc radius used by coarse proximity checks: half the box diagonal."""
        return math.hypot(self.length, self.width) / 2.0

    def present_indices(self) -> list[int]:
        return [k for k, s in enumerate(self.states) if s is not None]

    def positions(self) -> np.ndarray:
        """(N, 2) positions with NaN rows at absent steps."""
        out = np.full((len(self.states), 2), np.nan)
        for k, s in enumerate(self.states):
            if s is not None:
                out[k] = (s.x, s.y)
        return out


@dataclass
class LaneSegment:
    id: str
    width: float
    centerline: np.ndarray  # (N, 2)


@dataclass
class Scenario:
    """A complete multi-agent driving segment on a uniform time grid."""

    scenario_id: str
    dt: float
    ego_id: str
    agents: list[Agent]
    lanes: list[LaneSegment]
    drivable_area: list[np.ndarray]
    history_horizon: float = DEFAULT_HISTORY_HORIZON
    future_horizon: float = DEFAULT_FUTURE_HORIZON

    def __post_init__(self) -> None:
        self._by_id = {a.id: a for a in self.agents}

    def agent(self, agent_id: str) -> Agent:
        return self._by_id[agent_id]

    def has_agent(self, agent_id: str) -> bool:
        return agent_id in self._by_id

    @property
    def n_steps(self) -> int:
        return max((len(a.states) for a in self.agents), default=0)

    @property
    def t0(self) -> float:
        """Grid origin, recovered from the first observed state."""
        for a in self.agents:
            for k, s in enumerate(a.states):
                if s is not None:
                    return s.t - k * self.dt
        raise DataError(f"scenario {self.scenario_id!r} has no observed states")

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_steps)

    @property
    def n_history_steps(self) -> int:
        return int(round(self.history_horizon / self.dt))

    @property
    def n_future_steps(self) -> int:
        return int(round(self.future_horizon / self.dt))

    def drivable_region(self) -> DrivableRegion:
        corridors = [(lane.centerline, lane.width) for lane in self.lanes]
        return DrivableRegion(self.drivable_area, corridors if not self.drivable_area else [])

    def replace_agents(self, agents: list[Agent]) -> "Scenario":
        """New scenario sharing everything but the agent list. Used by
        counterfactual editing; the result is not re-validated (an edit may
        legitimately delete the ego)."""
        return Scenario(
            scenario_id=self.scenario_id,
            dt=self.dt,
            ego_id=self.ego_id,
            agents=agents,
            lanes=self.lanes,
            drivable_area=self.drivable_area,
            history_horizon=self.history_horizon,
            future_horizon=self.future_horizon,
        )


@dataclass(frozen=True)
class Violation:
    code: str
    subject: str
    message: str

    def __str__(self) -> str:
        return f"[{self.code}] {self.subject}: {self.message}"


@dataclass
class ValidationReport:
    scenario_id: str
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, code: str, subject: str, message: str) -> None:
        self.violations.append(Violation(code, subject, message))

    def __str__(self) -> str:
        if self.ok:
            return f"{self.scenario_id}: ok"
        lines = "\n  ".join(str(v) for v in self.violations)
        return f"{self.scenario_id}: {len(self.violations)} violation(s)\n  {lines}"


def _finite(*vals: float) -> bool:
    return all(math.isfinite(v) for v in vals)


def validate_scenario(s: Scenario) -> ValidationReport:
    """Check every structural invariant; violations are data, not failures."""
    rep = ValidationReport(s.scenario_id)
    if not (s.dt > 0 and math.isfinite(s.dt)):
        rep.add("dt", "scenario", f"dt must be positive and finite, got {s.dt}")
        return rep
    for name, horizon in (("history_horizon", s.history_horizon), ("future_horizon", s.future_horizon)):
        if not (horizon > 0 and math.isfinite(horizon)):
            rep.add("horizon", name, f"must be positive, got {horizon}")
        else:
            ratio = horizon / s.dt
            if abs(ratio - round(ratio)) > 1e-9:
                rep.add("horizon", name, f"{horizon} is not an integer multiple of dt={s.dt}")

    if not s.agents:
        rep.add("agents", "scenario", "no agents")
    if not s.has_agent(s.ego_id):
        rep.add("ego", "scenario", f"ego_id {s.ego_id!r} names no agent")

    n_steps = s.n_steps
    t0 = None
    for a in s.agents:
        subject = f"agent {a.id}"
        if a.kind not in AGENT_KINDS:
            rep.add("kind", subject, f"unknown kind {a.kind!r}")
        if not (a.length > 0):
            rep.add("bbox", subject, f"length must be > 0, got {a.length}")
        if not (a.width > 0):
            rep.add("bbox", subject, f"width must be > 0, got {a.width}")
        if len(a.states) != n_steps:
            rep.add("grid", subject, f"{len(a.states)} steps, scenario grid has {n_steps}")
        present = a.present_indices()
        if not present:
            rep.add("states", subject, "no observed state")
            continue
        if t0 is None:
            first = a.states[present[0]]
            t0 = first.t - present[0] * s.dt
        for k in present:
            st = a.states[k]
            if not _finite(st.t, st.x, st.y, st.heading, st.vx, st.vy):
                rep.add("finite", subject, f"non-finite field at step {k}")
                continue
            if not (-math.pi - 1e-12 < st.heading <= math.pi + 1e-12):
                rep.add("heading", subject, f"heading {st.heading} outside (-pi, pi] at step {k}")
            expected = t0 + k * s.dt
            if abs(st.t - expected) > _GRID_TOL:
                rep.add("grid", subject, f"t={st.t} at step {k}, expected {expected} (off-grid)")

    for lane in s.lanes:
        subject = f"lane {lane.id}"
        pts = np.asarray(lane.centerline, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 2:
            rep.add("lane", subject, "centerline needs at least 2 points of (x, y)")
            continue
        if not (lane.width > 0):
            rep.add("lane", subject, f"width must be > 0, got {lane.width}")
        steps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        if np.any(steps == 0):
            rep.add("lane", subject, "consecutive centerline points must be distinct")

    for i, ring in enumerate(s.drivable_area):
        if not polygon_is_simple(np.asarray(ring, dtype=float)):
            rep.add("drivable", f"polygon {i}", "self-intersecting polygon")

    return rep


@dataclass
class ScenarioSet:
    """Scenarios in file order with unique ids."""

    scenarios: list[Scenario]

    def __post_init__(self) -> None:
        self._by_id = {s.scenario_id: s for s in self.scenarios}

    def __len__(self) -> int:
        return len(self.scenarios)

    def __iter__(self) -> Iterator[Scenario]:
        return iter(self.scenarios)

    def ids(self) -> list[str]:
        return [s.scenario_id for s in self.scenarios]

    def get(self, scenario_id: str) -> Scenario:
        try:
            return self._by_id[scenario_id]
        except KeyError:
            raise DataError(f"unknown scenario id {scenario_id!r}") from None


def _state_from_json(obj: dict | None) -> AgentState | None:
    if obj is None:
        return None
    return AgentState(
        t=float(obj["t"]),
        x=float(obj["x"]),
        y=float(obj["y"]),
        heading=float(obj["heading"]),
        vx=float(obj["vx"]),
        vy=float(obj["vy"]),
    )


def scenario_from_json(obj: dict) -> Scenario:
    agents = [
        Agent(
            id=str(a["id"]),
            kind=str(a["kind"]),
            length=float(a["length"]),
            width=float(a["width"]),
            states=[_state_from_json(s) for s in a["states"]],
        )
        for a in obj["agents"]
    ]
    lanes = [
        LaneSegment(id=str(l["id"]), width=float(l["width"]), centerline=np.asarray(l["centerline"], dtype=float))
        for l in obj.get("lanes", [])
    ]
    drivable = [np.asarray(ring, dtype=float) for ring in obj.get("drivable_area", [])]
    return Scenario(
        scenario_id=str(obj["scenario_id"]),
        dt=float(obj["dt"]),
        ego_id=str(obj["ego_id"]),
        agents=agents,
        lanes=lanes,
        drivable_area=drivable,
        history_horizon=float(obj.get("history_horizon", DEFAULT_HISTORY_HORIZON)),
        future_horizon=float(obj.get("future_horizon", DEFAULT_FUTURE_HORIZON)),
    )


def scenario_to_json(s: Scenario) -> dict:
    return {
        "scenario_id": s.scenario_id,
        "dt": s.dt,
        "ego_id": s.ego_id,
        "history_horizon": s.history_horizon,
        "future_horizon": s.future_horizon,
        "agents": [
            {
                "id": a.id,
                "kind": a.kind,
                "length": a.length,
                "width": a.width,
                "states": [
                    None
                    if st is None
                    else {"t": st.t, "x": st.x, "y": st.y, "heading": st.heading, "vx": st.vx, "vy": st.vy}
                    for st in a.states
                ],
            }
            for a in s.agents
        ],
        "lanes": [
            {"id": l.id, "width": l.width, "centerline": [[float(x), float(y)] for x, y in l.centerline]}
            for l in s.lanes
        ],
        "drivable_area": [[[float(x), float(y)] for x, y in ring] for ring in s.drivable_area],
    }


def load_dataset(path: str | os.PathLike) -> ScenarioSet:
    """Load and validate a JSON-lines scenario file.

    Any malformed record or invariant violation is a hard error naming the
    offending line; invalid data is never silently skipped.
    """
    scenarios: list[Scenario] = []
    seen: set[str] = set()
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read dataset {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                scenario = scenario_from_json(obj)
            except (ValueError, KeyError, TypeError) as exc:
                raise DataError(f"{path}:{lineno}: malformed scenario record: {exc}") from exc
            if scenario.scenario_id in seen:
                raise DataError(f"{path}:{lineno}: duplicate scenario_id {scenario.scenario_id!r}")
            seen.add(scenario.scenario_id)
            report = validate_scenario(scenario)
            if not report.ok:
                raise DataError(f"{path}:{lineno}: invalid scenario: {report}")
            scenarios.append(scenario)
    return ScenarioSet(scenarios)


def save_dataset(data: ScenarioSet, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in data:
            fh.write(json.dumps(scenario_to_json(s)) + "\n")


@dataclass
class Segment:
    """A history/future view into a scenario around one split step.

    History covers the ``n_history_steps`` grid steps ending at
    ``split_index`` (the split step is the last observed "present");
    future covers the ``n_future_steps`` steps after it. Slicing never
    fabricates states: absent steps stay absent.
    """

    scenario: Scenario
    split_index: int

    @property
    def n_history(self) -> int:
        return self.scenario.n_history_steps

    @property
    def n_future(self) -> int:
        return self.scenario.n_future_steps

    @property
    def dt(self) -> float:
        return self.scenario.dt

    def history_indices(self) -> range:
        return range(self.split_index - self.n_history + 1, self.split_index + 1)

    def future_indices(self) -> range:
        return range(self.split_index + 1, self.split_index + 1 + self.n_future)

    def history_states(self, agent_id: str) -> list[AgentState | None]:
        states = self.scenario.agent(agent_id).states
        return [states[k] for k in self.history_indices()]

    def future_states(self, agent_id: str) -> list[AgentState | None]:
        states = self.scenario.agent(agent_id).states
        return [states[k] for k in self.future_indices()]

    def split_state(self, agent_id: str) -> AgentState | None:
        return self.scenario.agent(agent_id).states[self.split_index]

    def agents_present_at_split(self) -> list[Agent]:
        return [a for a in self.scenario.agents if a.states[self.split_index] is not None]

    def future_positions(self, agent_id: str) -> np.ndarray:
        """(n_future, 2) recorded future positions, NaN where absent."""
        out = np.full((self.n_future, 2), np.nan)
        for i, st in enumerate(self.future_states(agent_id)):
            if st is not None:
                out[i] = (st.x, st.y)
        return out

    def with_scenario(self, scenario: Scenario) -> "Segment":
        return Segment(scenario=scenario, split_index=self.split_index)


def slice_segment(s: Scenario, split_time: float) -> Segment:
    """Slice a scenario at a grid time into a history/future segment."""
    k = (split_time - s.t0) / s.dt
    split_index = int(round(k))
    if abs(k - split_index) > 1e-6:
        raise DataError(f"split_time {split_time} is off the t0={s.t0}, dt={s.dt} grid")
    n_hist, n_fut = s.n_history_steps, s.n_future_steps
    if split_index - n_hist + 1 < 0:
        raise DataError(
            f"insufficient history before t={split_time}: "
            f"need {n_hist} steps, have {split_index + 1}"
        )
    if split_index + n_fut > s.n_steps - 1:
        raise DataError(
            f"insufficient future after t={split_time}: "
            f"need {n_fut} steps, have {s.n_steps - 1 - split_index}"
        )
    return Segment(scenario=s, split_index=split_index)


def canonical_segment(s: Scenario) -> Segment:
    """The earliest valid segment of a scenario (split right after the
    history horizon). Datasets trimmed to exactly history+future steps
    have a single canonical segment."""
    return slice_segment(s, s.t0 + (s.n_history_steps - 1) * s.dt)


def closest_lane(p: np.ndarray, s: Scenario) -> tuple[LaneSegment, float, float]:
    """Lane nearest to a point, with the projected arc length.

    Returns ``(lane, arc_length, distance)``. Ties break to the smaller
    lane id; the result is invariant to lane-set order otherwise.
    """
    if not s.lanes:
        raise DataError(f"scenario {s.scenario_id!r} has no lanes")
    best: tuple[LaneSegment, float, float] | None = None
    for lane in sorted(s.lanes, key=lambda l: l.id):
        d, arc = project_to_polyline(np.asarray(p, dtype=float), lane.centerline)
        if best is None or d < best[2]:
            best = (lane, arc, d)
    assert best is not None
    return best
