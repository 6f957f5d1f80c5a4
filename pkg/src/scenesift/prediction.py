"""Future prediction over segments: per-agent Gaussian-mixture futures.

Two interchangeable sources implement the same lookup surface: a
deterministic interaction-aware kinematic predictor (behavior hypotheses
rolled out and reweighted by conflicts with neighbors) and a read-only
cache of externally computed predictions keyed by scenario, variant, and
condition. Means are flattened future positions (x1, y1, ..., xF, yF).
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .counterfactuals import cvm_rollout, lane_follow_rollout
from .errors import DataError
from .scenario import AgentState, Segment, closest_lane

_WEIGHT_TOL = 1e-9


@dataclass
class GaussianMode:
    """One mixture component over a flattened future trajectory."""

    weight: float
    mean: np.ndarray  # (2F,)
    cov: np.ndarray  # (2F, 2F) symmetric PSD

    def __post_init__(self) -> None:
        self.mean = np.asarray(self.mean, dtype=float)
        self.cov = np.asarray(self.cov, dtype=float)
        if self.cov.ndim == 1:
            self.cov = np.diag(self.cov)
        if not (0.0 <= self.weight <= 1.0 + _WEIGHT_TOL):
            raise DataError(f"mode weight {self.weight} outside [0, 1]")
        if self.mean.ndim != 1 or self.cov.shape != (self.mean.size, self.mean.size):
            raise DataError(
                f"mode shape mismatch: mean {self.mean.shape}, cov {self.cov.shape}"
            )
        if not np.all(np.isfinite(self.mean)):
            raise DataError("non-finite mode mean")

    @property
    def dim(self) -> int:
        return self.mean.size


@dataclass
class GmmPrediction:
    agent_id: str
    modes: list[GaussianMode]

    def __post_init__(self) -> None:
        if not self.modes:
            raise DataError(f"agent {self.agent_id!r}: empty mixture")
        dims = {m.dim for m in self.modes}
        if len(dims) != 1:
            raise DataError(f"agent {self.agent_id!r}: modes disagree on dimension {dims}")
        total = sum(m.weight for m in self.modes)
        if abs(total - 1.0) > _WEIGHT_TOL:
            raise DataError(f"agent {self.agent_id!r}: mode weights sum to {total}, not 1")

    @property
    def dim(self) -> int:
        return self.modes[0].dim

    def weights(self) -> np.ndarray:
        return np.array([m.weight for m in self.modes])


JointPrediction = dict[str, GmmPrediction]


@dataclass(frozen=True)
class Condition:
    """A fixed future imposed on one agent while predicting the others."""

    agent_id: str
    trajectory: np.ndarray  # (F, >=2); columns x, y lead


def fnv1a64(text: str) -> int:
    """64-bit FNV-1a over UTF-8 bytes; the package's stable string hash."""
    h = 0xCBF29CE484222325
    for b in text.encode("utf-8"):
        h ^= b
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def condition_key(cond: Condition | None) -> str:
    """Stable text key for a condition: 'none', or a 64-bit FNV-1a hash of
    the trajectory values rounded to 1e-3 and comma-joined row-major."""
    if cond is None:
        return "none"
    text = ",".join("%.3f" % float(v) for v in np.asarray(cond.trajectory, dtype=float).ravel())
    return f"{fnv1a64(text):016x}"


@dataclass
class PredictorConfig:
    """Constants of the kinematic reference predictor."""

    a_brake: float = -3.0
    a_accel: float = 1.5
    priors: tuple[float, ...] = (0.4, 0.3, 0.2, 0.1)  # CV, lane, brake, accel
    sigma0: float = 0.25
    r_conflict: float = 4.0
    t_conflict: float = 2.0
    interaction_radius: float = 30.0
    brake_boost: float = 3.0
    lane_attach_radius: float = 10.0
    default_k: int = 4


class ReferencePredictor:
    """Deterministic kinematic predictor with four behavior hypotheses.

    Each present agent gets constant-velocity, lane-follow, brake, and
    accelerate rollouts under a fixed prior. A hypothesis that would pass
    within ``r_conflict`` of a neighbor's future shortly after the neighbor
    (within ``t_conflict``) is replaced by the braking response, and the
    brake hypothesis gains weight. Neighbors beyond ``interaction_radius``
    at the split never influence an agent, so conditioning far away leaves
    a prediction bitwise unchanged.
    """

    def __init__(self, config: PredictorConfig | None = None):
        self.config = config or PredictorConfig()

    def predict(
        self, seg: Segment, cond: Condition | None = None, K: int | None = None, seed: int = 0
    ) -> JointPrediction:
        K = self.config.default_k if K is None else K
        if not 1 <= K <= 15:
            raise DataError(f"K must be in [1, 15], got {K}")
        if cond is not None and not seg.scenario.has_agent(cond.agent_id):
            raise DataError(
                f"conditioned agent {cond.agent_id!r} not in scenario {seg.scenario.scenario_id!r}"
            )
        out: JointPrediction = {}
        for agent in seg.agents_present_at_split():
            if cond is not None and agent.id == cond.agent_id:
                continue
            modes = self._reference_modes(agent.id, seg, cond)
            out[agent.id] = GmmPrediction(agent.id, _adapt_k(modes, K))
        return out

    def predict_for(
        self,
        scenario_id: str,
        variant_id: str,
        seg: Segment,
        cond: Condition | None,
        K: int | None,
        seed: int,
    ) -> JointPrediction:
        return self.predict(seg, cond, K, seed)

    # hypothesis machinery

    def _rollouts(self, state: AgentState, seg: Segment) -> list[np.ndarray]:
        """(F, 2) position rollouts for CV, lane-follow, brake, accelerate."""
        cfg = self.config
        horizon = seg.scenario.future_horizon
        dt = seg.dt
        cv = cvm_rollout(state, horizon, dt)[:, 0:2]
        lane_positions = cv
        if seg.scenario.lanes:
            lane, _, dist = closest_lane(state.position, seg.scenario)
            if dist <= cfg.lane_attach_radius:
                lane_positions = lane_follow_rollout(state, lane, horizon, dt)[:, 0:2]
        return [
            cv,
            lane_positions,
            _accel_rollout(state, cfg.a_brake, seg.n_future, dt),
            _accel_rollout(state, cfg.a_accel, seg.n_future, dt),
        ]

    def _environment(
        self, agent_id: str, seg: Segment, cond: Condition | None
    ) -> list[np.ndarray]:
        """Future position tracks of nearby agents: the condition for a
        conditioned neighbor, constant velocity for the rest."""
        cfg = self.config
        me = seg.split_state(agent_id)
        assert me is not None
        env: list[np.ndarray] = []
        for other in seg.agents_present_at_split():
            if other.id == agent_id:
                continue
            other_state = seg.split_state(other.id)
            if float(np.linalg.norm(other_state.position - me.position)) > cfg.interaction_radius:
                continue
            if cond is not None and other.id == cond.agent_id:
                env.append(np.asarray(cond.trajectory, dtype=float)[:, 0:2])
            else:
                env.append(cvm_rollout(other_state, seg.scenario.future_horizon, seg.dt)[:, 0:2])
        return env

    def _reference_modes(
        self, agent_id: str, seg: Segment, cond: Condition | None
    ) -> list[GaussianMode]:
        cfg = self.config
        state = seg.split_state(agent_id)
        assert state is not None
        rollouts = self._rollouts(state, seg)
        env = self._environment(agent_id, seg, cond)
        dt = seg.dt
        brake_positions = rollouts[2]

        weights = np.array(cfg.priors, dtype=float)
        any_conflict = False
        final = list(rollouts)
        for h, positions in enumerate(rollouts):
            if any(_conflicts(positions, track, dt, cfg.r_conflict, cfg.t_conflict) for track in env):
                any_conflict = True
                final[h] = brake_positions
        if any_conflict:
            weights = weights.copy()
            weights[2] *= cfg.brake_boost
        weights = weights / weights.sum()

        cov = _step_covariance(seg.n_future, cfg.sigma0)
        return [
            GaussianMode(weight=float(w), mean=positions.ravel().copy(), cov=cov)
            for w, positions in zip(weights, final)
        ]


def _accel_rollout(state: AgentState, accel: float, n_steps: int, dt: float) -> np.ndarray:
    """Straight-line rollout at constant acceleration, speed clamped at 0.
    Direction follows current velocity, falling back to heading at rest."""
    speed = state.speed
    if speed > 1e-9:
        direction = state.velocity / speed
    else:
        direction = np.array([math.cos(state.heading), math.sin(state.heading)])
    out = np.empty((n_steps, 2))
    p = state.position.astype(float)
    for k in range(1, n_steps + 1):
        v = max(0.0, speed + accel * k * dt)
        p = p + direction * v * dt
        out[k - 1] = p
    return out


def _conflicts(
    positions: np.ndarray, track: np.ndarray, dt: float, r_conflict: float, t_conflict: float
) -> bool:
    """True when the agent passes within r_conflict of a point the tracked
    neighbor occupies at most t_conflict earlier (crossing behind it)."""
    max_lag = int(round(t_conflict / dt))
    for u in range(positions.shape[0]):
        s_lo = max(0, u - max_lag)
        for s in range(s_lo, min(u + 1, track.shape[0])):
            if float(np.linalg.norm(positions[u] - track[s])) < r_conflict:
                return True
    return False


def _step_covariance(n_steps: int, sigma0: float) -> np.ndarray:
    diag = np.repeat([(sigma0 * k) ** 2 for k in range(1, n_steps + 1)], 2)
    return np.diag(diag)


def _adapt_k(modes: list[GaussianMode], K: int) -> list[GaussianMode]:
    """Fit a natural mode list to exactly K modes: truncate by weight when
    K is smaller, duplicate top modes (splitting their weight) when larger."""
    order = sorted(range(len(modes)), key=lambda i: (-modes[i].weight, i))
    ranked = [modes[i] for i in order]
    if K <= len(ranked):
        kept = ranked[:K]
        total = sum(m.weight for m in kept)
        return [GaussianMode(m.weight / total, m.mean, m.cov) for m in kept]
    copies = [1] * len(ranked)
    extra = K - len(ranked)
    for i in range(extra):
        copies[i % len(ranked)] += 1
    out: list[GaussianMode] = []
    for m, n in zip(ranked, copies):
        out.extend(GaussianMode(m.weight / n, m.mean, m.cov) for _ in range(n))
    return out


@dataclass
class PredictionCache:
    """Externally computed predictions, keyed by (scenario, variant,
    condition, agent). Read-only after load."""

    entries: dict[tuple[str, str, str, str], GmmPrediction]
    warnings: list[str] = field(default_factory=list)

    def joint(self, scenario_id: str, variant_id: str, cond_key: str) -> JointPrediction:
        out: JointPrediction = {}
        for (sid, vid, ck, agent_id), pred in self.entries.items():
            if (sid, vid, ck) == (scenario_id, variant_id, cond_key):
                out[agent_id] = pred
        if not out:
            raise DataError(
                f"prediction cache has no entries for scenario={scenario_id!r} "
                f"variant={variant_id!r} cond={cond_key!r}"
            )
        return out


def load_external(path: str | os.PathLike) -> PredictionCache:
    """Load a prediction-cache file (one JSON record per line).

    Mode weights off by more than 1e-9 are renormalized with a warning
    record; exact duplicates of a key are errors.
    """
    entries: dict[tuple[str, str, str, str], GmmPrediction] = {}
    warnings: list[str] = []
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read prediction cache {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                key = (
                    str(obj["scenario_id"]),
                    str(obj["variant_id"]),
                    str(obj["cond_key"]),
                    str(obj["agent_id"]),
                )
                modes = []
                total = 0.0
                for m in obj["modes"]:
                    total += float(m["pi"])
                for m in obj["modes"]:
                    weight = float(m["pi"])
                    if abs(total - 1.0) > _WEIGHT_TOL:
                        weight /= total
                    mean = np.asarray(m["mean"], dtype=float)
                    cov = (
                        np.diag(np.asarray(m["cov_diag"], dtype=float))
                        if "cov_diag" in m
                        else np.asarray(m["cov"], dtype=float)
                    )
                    modes.append(GaussianMode(weight=weight, mean=mean, cov=cov))
                if abs(total - 1.0) > _WEIGHT_TOL:
                    warnings.append(
                        f"{path}:{lineno}: weights summed to {total:.6g}; renormalized"
                    )
            except (ValueError, KeyError, TypeError) as exc:
                raise DataError(f"{path}:{lineno}: malformed prediction record: {exc}") from exc
            if key in entries:
                raise DataError(f"{path}:{lineno}: duplicate prediction key {key}")
            entries[key] = GmmPrediction(key[3], modes)
    return PredictionCache(entries, warnings)


def save_external(cache_rows: list[dict], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in cache_rows:
            fh.write(json.dumps(row) + "\n")


class CachedPredictor:
    """Predictor façade over a PredictionCache. Lookups must hit; there is
    no fallback to computed predictions."""

    def __init__(self, cache: PredictionCache):
        self.cache = cache

    def predict_for(
        self,
        scenario_id: str,
        variant_id: str,
        seg: Segment,
        cond: Condition | None,
        K: int | None,
        seed: int,
    ) -> JointPrediction:
        joint = self.cache.joint(scenario_id, variant_id, condition_key(cond))
        expected = 2 * seg.n_future
        for agent_id, pred in joint.items():
            if pred.dim != expected:
                raise DataError(
                    f"cached prediction for {agent_id!r} has dimension {pred.dim}, "
                    f"scenario horizon needs {expected}"
                )
        return joint
