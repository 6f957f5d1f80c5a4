"""Shared scene builders for the test suite.

All builders use the default grid: dt = 0.5 s, 5 s history, 4 s future,
18 states with the split at index 9 (t = 4.5 s).
"""

from __future__ import annotations

import math

import numpy as np

from scenesift.counterfactuals import MotionPrimitive, PrimitiveLibrary
from scenesift.scenario import Agent, AgentState, LaneSegment, Scenario

DT = 0.5
N_HISTORY = 10
N_FUTURE = 8
TIMES = [k * DT for k in range(N_HISTORY + N_FUTURE)]
SPLIT_T = (N_HISTORY - 1) * DT


def state(t: float, x: float, y: float, heading: float = 0.0,
          vx: float = 0.0, vy: float = 0.0) -> AgentState:
    return AgentState(t=t, x=x, y=y, heading=heading, vx=vx, vy=vy)


def const_agent(aid: str, x0: float, y0: float, heading: float, speed: float,
                times: list[float] | None = None, kind: str = "vehicle",
                length: float = 4.5, width: float = 2.0) -> Agent:
    """Constant-velocity track anchored at the first grid time."""
    times = TIMES if times is None else times
    ux, uy = math.cos(heading), math.sin(heading)
    states = [
        state(t, x0 + ux * speed * (t - times[0]), y0 + uy * speed * (t - times[0]),
              heading, ux * speed, uy * speed)
        for t in times
    ]
    return Agent(id=aid, kind=kind, length=length, width=width, states=states)


def const_agent_at_split(aid: str, x_split: float, y_split: float, heading: float,
                         speed: float, **kwargs) -> Agent:
    """Constant-velocity track positioned by its split-time pose."""
    ux, uy = math.cos(heading), math.sin(heading)
    return const_agent(aid, x_split - ux * speed * SPLIT_T,
                       y_split - uy * speed * SPLIT_T, heading, speed, **kwargs)


def scenario(agents: list[Agent], scenario_id: str = "scene", ego_id: str | None = None,
             lanes: list[LaneSegment] | None = None,
             drivable_area: list[np.ndarray] | None = None) -> Scenario:
    return Scenario(
        scenario_id=scenario_id,
        dt=DT,
        ego_id=ego_id or agents[0].id,
        agents=agents,
        lanes=lanes or [],
        drivable_area=drivable_area or [],
    )


def straight_lane(lane_id: str = "lane-0", y: float = 0.0, width: float = 4.0,
                  x0: float = -100.0, x1: float = 300.0) -> LaneSegment:
    return LaneSegment(id=lane_id, width=width,
                       centerline=np.array([[x0, y], [x1, y]], dtype=float))


def car_following_scene(gap: float = 26.0, speed: float = 10.0,
                        bystander_at: float | None = None,
                        scenario_id: str = "follow") -> Scenario:
    """Ego leads a same-speed follower; optional distant bystander."""
    agents = [
        const_agent_at_split("ego", 0.0, 0.0, 0.0, speed),
        const_agent_at_split("follower", -gap, 0.0, 0.0, speed),
    ]
    if bystander_at is not None:
        agents.append(const_agent_at_split("bystander", 0.0, bystander_at, 0.0, speed))
    return scenario(agents, scenario_id=scenario_id)


def straight_primitive(prim_id: str, n_states: int, speed: float,
                       dt: float = DT) -> MotionPrimitive:
    rel = np.zeros((n_states, 5))
    rel[:, 0] = speed * dt * np.arange(n_states)
    rel[:, 3] = speed
    return MotionPrimitive(id=prim_id, relative_states=rel,
                           duration=(n_states - 1) * dt, dt=dt, source="test")


def brake_primitive(prim_id: str, n_states: int, v0: float, a: float = -3.0,
                    dt: float = DT) -> MotionPrimitive:
    """Euler-integrated braking along +x, clamped at standstill."""
    rel = np.zeros((n_states, 5))
    x, v = 0.0, v0
    for k in range(n_states):
        rel[k, 0] = x
        rel[k, 3] = v
        x += v * dt
        v = max(0.0, v + a * dt)
    return MotionPrimitive(id=prim_id, relative_states=rel,
                           duration=(n_states - 1) * dt, dt=dt, source="test")


def turn_primitive(prim_id: str, n_states: int, speed: float, yaw_rate: float,
                   dt: float = DT) -> MotionPrimitive:
    """Constant-speed arc with the given yaw rate."""
    rel = np.zeros((n_states, 5))
    x = y = 0.0
    heading = 0.0
    for k in range(n_states):
        rel[k] = (x, y, heading, speed * math.cos(heading), speed * math.sin(heading))
        x += speed * math.cos(heading) * dt
        y += speed * math.sin(heading) * dt
        heading += yaw_rate * dt
    return MotionPrimitive(id=prim_id, relative_states=rel,
                           duration=(n_states - 1) * dt, dt=dt, source="test")


def library(*prims: MotionPrimitive) -> PrimitiveLibrary:
    return PrimitiveLibrary(primitives=list(prims))
