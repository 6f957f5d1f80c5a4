"""Synthetic labeled corpora for benchmarks and demos.

Scenes come in two flavors.  Conflict scenes put a second vehicle on a
latent or overt collision course with the ego (tight car-following, or a
crossing timed to co-arrive), so counterfactual edits of the ego change
what a reactive predictor expects of the other agent.  Free-flow scenes
keep every other agent far outside the interaction radius, so edits of
the ego cannot move any prediction at all.
"""

from __future__ import annotations

import math

import numpy as np

from .scenario import Agent, AgentState, Scenario, ScenarioSet

VEHICLE_LENGTH = 4.5
VEHICLE_WIDTH = 2.0

# Fraction of conflict scenes that are tight car-following; the rest are
# timed crossings with a finite time-to-collision at the split.
FOLLOW_FRACTION = 0.6


def _const_states(times: list[float], x0: float, y0: float, heading: float,
                  speed: float) -> list[AgentState]:
    """Constant-velocity track anchored at the first grid time."""
    ux, uy = math.cos(heading), math.sin(heading)
    return [
        AgentState(t=t, x=x0 + ux * speed * (t - times[0]),
                   y=y0 + uy * speed * (t - times[0]),
                   heading=heading, vx=ux * speed, vy=uy * speed)
        for t in times
    ]


def _euler_states(times: list[float], x0: float, y0: float, heading: float,
                  v0: float, accel: float, accel_from: int = 0) -> list[AgentState]:
    """Piecewise track: constant speed, then Euler-integrated acceleration."""
    ux, uy = math.cos(heading), math.sin(heading)
    dt = times[1] - times[0]
    states = []
    x, y, v = x0, y0, v0
    for k, t in enumerate(times):
        states.append(AgentState(t=t, x=x, y=y, heading=heading, vx=ux * v, vy=uy * v))
        x += ux * v * dt
        y += uy * v * dt
        if k >= accel_from:
            v = max(0.0, v + accel * dt)
    return states


def _vehicle(agent_id: str, states: list[AgentState]) -> Agent:
    return Agent(id=agent_id, kind="vehicle", length=VEHICLE_LENGTH,
                 width=VEHICLE_WIDTH, states=list(states))


def _follow_scene(scenario_id: str, times: list[float], split_t: float,
                  rng: np.random.Generator) -> Scenario:
    """Ego leads a same-speed follower inside the interaction radius.

    The gap is wider than the follower's two-second envelope, so nothing
    conflicts in the recorded log, but narrow enough that a slowed ego
    variant puts the follower on a catch-up course within the horizon.
    """
    speed = float(rng.uniform(8.0, 10.0))
    gap = float(rng.uniform(2.0 * speed + 6.5, 28.5))
    x_split = 0.0
    ego = _const_states(times, x_split - speed * split_t, 0.0, 0.0, speed)
    follower = _const_states(times, x_split - speed * split_t - gap, 0.0, 0.0, speed)
    return Scenario(scenario_id=scenario_id, dt=times[1] - times[0], ego_id="ego",
                    agents=[_vehicle("ego", ego), _vehicle("follower", follower)],
                    lanes=[], drivable_area=[])


def _crossing_scene(scenario_id: str, times: list[float], split_t: float,
                    rng: np.random.Generator) -> Scenario:
    """Ego and a crossing vehicle timed to co-arrive under constant velocity.

    The recorded crosser yields after the split, so the log itself stays
    collision-free while the split-state extrapolation closes to contact.
    """
    speed = float(rng.uniform(9.0, 11.0))
    # Keep the split-time separation hypot(ahead, cross_speed*t_arrive)
    # safely inside the predictor's interaction radius.
    ahead = float(rng.uniform(16.0, 19.0))
    cross_speed = float(rng.uniform(7.0, 9.0))
    t_arrive = ahead / speed
    ego = _const_states(times, -speed * split_t, 0.0, 0.0, speed)
    # Crosser moves +y along x = ahead; at the split it is t_arrive short
    # of the ego's path, then brakes in the recorded future.
    y_split = -cross_speed * t_arrive
    split_index = round(split_t / (times[1] - times[0]))
    history_times = times[: split_index + 1]
    future_times = times[split_index:]
    head = _const_states(history_times, ahead,
                         y_split - cross_speed * split_t, math.pi / 2, cross_speed)
    tail = _euler_states(future_times, ahead, y_split, math.pi / 2,
                         cross_speed, accel=-3.0)
    crosser = head + tail[1:]
    return Scenario(scenario_id=scenario_id, dt=times[1] - times[0], ego_id="ego",
                    agents=[_vehicle("ego", ego), _vehicle("crosser", crosser)],
                    lanes=[], drivable_area=[])


def _freeflow_scene(scenario_id: str, times: list[float], split_t: float,
                    rng: np.random.Generator, with_braking: bool) -> Scenario:
    """Ego cruises with all other traffic far outside the interaction radius."""
    speed = float(rng.uniform(8.0, 12.0))
    ego = _const_states(times, -speed * split_t, 0.0, 0.0, speed)
    agents = [_vehicle("ego", ego)]
    cruise_speed = float(rng.uniform(8.0, 12.0))
    agents.append(_vehicle("cruiser", _const_states(
        times, float(rng.uniform(-10.0, 10.0)), 45.0, 0.0, cruise_speed)))
    if with_braking:
        # Distant hard-braking track; also the corpus source of slowing
        # behavior windows for primitive extraction.
        agents.append(_vehicle("brakecar", _euler_states(
            times, float(rng.uniform(-10.0, 10.0)), -50.0, 0.0, 10.0, accel=-2.0)))
    return Scenario(scenario_id=scenario_id, dt=times[1] - times[0], ego_id="ego",
                    agents=agents, lanes=[], drivable_area=[])


def build_corpus(n_conflict: int = 100, n_freeflow: int = 100, seed: int = 0,
                 dt: float = 0.5, history_horizon: float = 5.0,
                 future_horizon: float = 4.0) -> tuple[ScenarioSet, dict[str, bool]]:
    """Generate a corpus with per-scenario conflict labels.

    Returns the scenario set and a map from scenario id to True for
    conflict scenes.  Deterministic for a fixed seed.
    """
    rng = np.random.default_rng(seed)
    n_history = round(history_horizon / dt)
    n_future = round(future_horizon / dt)
    times = [k * dt for k in range(n_history + n_future)]
    split_t = (n_history - 1) * dt
    scenarios = []
    labels: dict[str, bool] = {}
    n_follow = round(n_conflict * FOLLOW_FRACTION)
    for i in range(n_conflict):
        sid = f"conflict-{i:03d}"
        if i < n_follow:
            scenarios.append(_follow_scene(sid, times, split_t, rng))
        else:
            scenarios.append(_crossing_scene(sid, times, split_t, rng))
        labels[sid] = True
    for i in range(n_freeflow):
        sid = f"freeflow-{i:03d}"
        scenarios.append(_freeflow_scene(sid, times, split_t, rng, with_braking=i % 3 == 0))
        labels[sid] = False
    for scenario in scenarios:
        scenario.history_horizon = history_horizon
        scenario.future_horizon = future_horizon
    return ScenarioSet(scenarios), labels
