"""System under test: a deterministic UAV waypoint simulator plus safety monitor.

The vehicle is a kinematic point mass flying at a fixed cruise altitude.
It steers toward the next waypoint and blends in a potential-field
repulsion away from the closest obstacle surface. The avoidance is
deliberately imperfect: well-placed obstacles can and should force
minimum-separation breaches or collisions, which is what the fuzzer
hunts for. A scripted stub executor stands in for command-style cases.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .core import (
    CommandBody,
    InterestingnessDefinition,
    Mission,
    SafliteError,
    ScenarioBody,
    SystemState,
    TestCase,
    Vec3,
    Verdict,
)


class UnsupportedCase(SafliteError):
    """The executor cannot run this body type."""


DEFAULT_MIN_SEPARATION_M = 1.5


@dataclass(frozen=True)
class SafetyPolicy:
    """Violation thresholds applied to a flown trajectory."""

    min_separation_m: float = DEFAULT_MIN_SEPARATION_M


@dataclass(frozen=True)
class SimParams:
    """Fixed-step kinematics and avoidance tuning."""

    dt: float = 0.1
    speed: float = 2.0
    avoid_radius: float = 3.0
    repulse_gain: float = 4.0
    capture_radius: float = 1.0
    max_steps: int = 3000
    cruise_altitude: float = 2.5

    def __post_init__(self):
        if self.avoid_radius <= DEFAULT_MIN_SEPARATION_M:
            raise ValueError("avoid_radius must exceed the safety separation threshold")


@dataclass
class Trajectory:
    """Ordered (t, position) samples; the first sample is the mission start."""

    times: list[float] = field(default_factory=list)
    positions: list[Vec3] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.times)

    def append(self, t: float, position: Vec3) -> None:
        self.times.append(t)
        self.positions.append(position)

    def to_csv(self, path) -> None:
        lines = ["t,x,y,z"]
        for t, (x, y, z) in zip(self.times, self.positions):
            lines.append(f"{t},{x},{y},{z}")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def from_csv(cls, path) -> "Trajectory":
        traj = cls()
        rows = Path(path).read_text(encoding="utf-8").strip().splitlines()[1:]
        for row in rows:
            t, x, y, z = (float(v) for v in row.split(","))
            traj.append(t, (x, y, z))
        return traj


@dataclass
class SimResult:
    trajectory: Trajectory
    states: list[SystemState]
    completed: bool


def run(mission: Mission, case: TestCase, params: SimParams = SimParams()) -> SimResult:
    """Fly the mission through the case's obstacle field. Fully deterministic."""
    if not isinstance(case.body, ScenarioBody):
        raise UnsupportedCase("the simulator only runs obstacle scenarios")
    obstacles = case.body.obstacles
    # Precompute box frames as flat tuples; the inner loop stays pure float math.
    frames = []
    for ob in obstacles:
        yaw = math.radians(ob.yaw_deg)
        frames.append((*ob.center, *(s / 2.0 for s in ob.size), math.cos(yaw), math.sin(yaw)))

    wps = mission.waypoints
    alt = params.cruise_altitude
    x, y = wps[0][0], wps[0][1]
    t = 0.0
    traj = Trajectory()
    traj.append(t, (x, y, alt))
    states = [snapshot_state(mission, case, position=(x, y, alt), waypoint_index=0)]

    speed, dt = params.speed, params.dt
    capture = params.capture_radius
    avoid_r, gain = params.avoid_radius, params.repulse_gain
    target = 1
    n_wp = len(wps)
    completed = False

    for _ in range(params.max_steps):
        while target < n_wp and math.hypot(wps[target][0] - x, wps[target][1] - y) <= capture:
            states.append(snapshot_state(mission, case, position=(x, y, alt), waypoint_index=target))
            target += 1
        if target >= n_wp:
            completed = True
            break

        gx, gy = wps[target][0] - x, wps[target][1] - y
        gd = math.hypot(gx, gy)
        vx, vy = speed * gx / gd, speed * gy / gd

        # Repulsion from the closest obstacle surface point inside the avoid radius.
        best_d = math.inf
        best_q = None
        best_center = None
        for cx, cy, cz, hx, hy, hz, c, s in frames:
            dx, dy, dz = x - cx, y - cy, alt - cz
            lx = c * dx + s * dy
            ly = -s * dx + c * dy
            qx, qy, qz = abs(lx) - hx, abs(ly) - hy, abs(dz) - hz
            ox, oy, oz = max(qx, 0.0), max(qy, 0.0), max(qz, 0.0)
            d = math.sqrt(ox * ox + oy * oy + oz * oz) + min(max(qx, qy, qz), 0.0)
            if d < best_d:
                best_d = d
                # Clamp into the box to get the closest surface point (world frame).
                px = min(max(lx, -hx), hx)
                py = min(max(ly, -hy), hy)
                best_q = (c * px - s * py + cx, s * px + c * py + cy)
                best_center = (cx, cy)
        if best_d < avoid_r and best_q is not None:
            ax, ay = x - best_q[0], y - best_q[1]
            an = math.hypot(ax, ay)
            if an < 1e-9:
                # Inside the box the clamp is the identity; push away from its center instead.
                ax, ay = x - best_center[0], y - best_center[1]
                an = math.hypot(ax, ay)
            if an >= 1e-9:
                mag = gain * (1.0 - max(best_d, 0.0) / avoid_r)
                vx += mag * ax / an
                vy += mag * ay / an

        vn = math.hypot(vx, vy)
        if vn < 1e-9:
            # Goal pull and repulsion cancel head-on; sidestep to the left.
            vx, vy = -gy / gd * speed, gx / gd * speed
        else:
            vx, vy = vx / vn * speed, vy / vn * speed
        x += vx * dt
        y += vy * dt
        t += dt
        traj.append(t, (x, y, alt))

    states.append(snapshot_state(mission, case, position=(x, y, alt), waypoint_index=target - 1))
    return SimResult(trajectory=traj, states=states, completed=completed)


def check(trajectory: Trajectory, case: TestCase,
          policy: SafetyPolicy = SafetyPolicy()) -> Verdict:
    """Safety monitor: minimum signed distance over all samples and obstacles."""
    if not isinstance(case.body, ScenarioBody):
        raise UnsupportedCase("the safety monitor checks obstacle scenarios")
    obstacles = case.body.obstacles
    if not obstacles or len(trajectory) == 0:
        return Verdict.passed()

    points = np.asarray(trajectory.positions, dtype=float)
    d_min = math.inf
    idx_min = 0
    for ob in obstacles:
        yaw = math.radians(ob.yaw_deg)
        c, s = math.cos(yaw), math.sin(yaw)
        rel = points - np.asarray(ob.center)
        lx = c * rel[:, 0] + s * rel[:, 1]
        ly = -s * rel[:, 0] + c * rel[:, 1]
        lz = rel[:, 2]
        hx, hy, hz = ob.half_extents()
        q = np.stack([np.abs(lx) - hx, np.abs(ly) - hy, np.abs(lz) - hz], axis=1)
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
        inside = np.minimum(q.max(axis=1), 0.0)
        d = outside + inside
        i = int(np.argmin(d))
        if d[i] < d_min:
            d_min = float(d[i])
            idx_min = i

    at = trajectory.times[idx_min]
    if d_min <= 0.0:
        return Verdict.collision(d_min, at)
    if d_min < policy.min_separation_m:
        return Verdict.min_separation(d_min, at)
    return Verdict.passed()


def execute_scenario(mission: Mission, case: TestCase,
                     params: SimParams = SimParams(),
                     policy: SafetyPolicy = SafetyPolicy()) -> tuple[Verdict, SimResult]:
    """Convenience wrapper: fly the case, then grade the trajectory."""
    result = run(mission, case, params)
    return check(result.trajectory, case, policy), result


# ---------------------------------------------------------------------------
# Scripted execution for command-style cases.

@dataclass(frozen=True)
class ScriptRule:
    """Maps a command name (plus an optional value predicate) to a verdict."""

    command: str
    verdict: Verdict
    equals: Optional[float] = None
    value_min: Optional[float] = None
    value_max: Optional[float] = None

    def matches(self, body: CommandBody) -> bool:
        if body.name != self.command:
            return False
        if self.equals is not None:
            return body.value is not None and body.value == self.equals
        if self.value_min is not None and (body.value is None or body.value < self.value_min):
            return False
        if self.value_max is not None and (body.value is None or body.value > self.value_max):
            return False
        return True


@dataclass(frozen=True)
class ScriptedOutcome:
    """Declarative stand-in for a real autopilot when fuzzing commands."""

    rules: tuple[ScriptRule, ...] = ()
    context: Mapping[str, object] = field(default_factory=dict)

    @classmethod
    def from_json(cls, obj: Mapping) -> "ScriptedOutcome":
        rules = []
        for entry in obj.get("rules", []):
            kind = entry.get("verdict", "pass")
            if kind in ("violation", "collision"):
                verdict = Verdict.collision(
                    min_distance=float(entry.get("min_distance", 0.0)),
                    at_time=float(entry.get("at_time", 0.0)),
                )
            elif kind == "min_separation":
                verdict = Verdict.min_separation(
                    min_distance=float(entry["min_distance"]),
                    at_time=float(entry.get("at_time", 0.0)),
                )
            elif kind == "exec_error":
                verdict = Verdict.exec_error(entry.get("message", "scripted error"))
            elif kind == "pass":
                verdict = Verdict.passed()
            else:
                raise ValueError(f"unknown scripted verdict {kind!r}")
            rules.append(ScriptRule(
                command=entry["command"],
                verdict=verdict,
                equals=entry.get("equals"),
                value_min=entry.get("min"),
                value_max=entry.get("max"),
            ))
        return cls(rules=tuple(rules), context=dict(obj.get("context", {})))

    def to_json(self) -> dict:
        entries = []
        for rule in self.rules:
            entry: dict = {"command": rule.command}
            v = rule.verdict
            if v.is_violation:
                entry["verdict"] = v.kind.value
                entry["min_distance"] = v.min_distance
                entry["at_time"] = v.at_time
            elif v.kind.value == "exec_error":
                entry["verdict"] = "exec_error"
                entry["message"] = v.message
            else:
                entry["verdict"] = "pass"
            if rule.equals is not None:
                entry["equals"] = rule.equals
            if rule.value_min is not None:
                entry["min"] = rule.value_min
            if rule.value_max is not None:
                entry["max"] = rule.value_max
            entries.append(entry)
        return {"rules": entries, "context": dict(self.context)}

    @classmethod
    def load(cls, path) -> "ScriptedOutcome":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def stub_execute(case: TestCase, script: ScriptedOutcome) -> Verdict:
    """Run a command case against a scripted outcome table. Unmapped commands pass.

    Scripted crashes report as collisions at distance zero so downstream
    verdict handling stays uniform with the simulator path.
    """
    if not isinstance(case.body, CommandBody):
        raise UnsupportedCase("the stub executor only runs command cases")
    for rule in script.rules:
        if rule.matches(case.body):
            return rule.verdict
    return Verdict.passed()


# ---------------------------------------------------------------------------
# System-state snapshots for prompt building.

def snapshot_state(mission: Mission, case: TestCase,
                   position: Optional[Vec3] = None,
                   waypoint_index: int = 0,
                   mode: str = "MISSION") -> SystemState:
    """Describe the vehicle's situation at a point in (or before) a flight."""
    if position is None:
        position = mission.waypoints[0]
    obstacles = case.body.obstacles if isinstance(case.body, ScenarioBody) else ()
    nearest = None
    if obstacles:
        nearest = min(ob.signed_distance(position) for ob in obstacles)
    facts = {
        "position": [round(v, 3) for v in position],
        "current_waypoint_index": waypoint_index,
        "distance_to_nearest_obstacle": None if nearest is None else round(nearest, 3),
        "mode": mode,
    }
    x, y, z = position
    if nearest is None:
        detail = "no obstacles are in the arena"
    else:
        detail = f"the nearest obstacle is {nearest:.1f} m away"
    narrative = (
        f"The UAV is at ({x:.1f}, {y:.1f}, {z:.1f}) on waypoint {waypoint_index + 1} "
        f"of {len(mission.waypoints)} in {mode} mode and {detail}."
    )
    return SystemState(narrative=narrative, facts=facts)


def scripted_snapshot(context: Mapping[str, object]) -> SystemState:
    """System state taken from a scripted context (command-style campaigns)."""
    facts = dict(context)
    mode = facts.get("mode", "UNKNOWN")
    extras = [f"{k} is {v}" for k, v in facts.items() if k != "mode"]
    tail = f" with {', '.join(extras)}" if extras else ""
    narrative = f"The vehicle is operating in {mode} mode{tail}."
    return SystemState(narrative=narrative, facts=facts)


def default_definition(policy: SafetyPolicy = SafetyPolicy()) -> InterestingnessDefinition:
    """Stock interestingness policy matching the safety monitor's thresholds."""
    sep = policy.min_separation_m
    text = (
        f"The vehicle must keep at least {sep} metres of separation from every obstacle "
        "while flying its mission. A test case is interesting when executing it is likely "
        f"to make the vehicle collide with an obstacle or pass within {sep} metres of one, "
        "or otherwise force the flight away from its planned route."
    )
    return InterestingnessDefinition(policy_text=text, tag=f"min-separation-{sep}m")


# ---------------------------------------------------------------------------
# Geometry ground truth handed to the proximity mock.

class SimOracle:
    """Distance from a mission's waypoint polyline to a case's obstacles.

    Brute force by construction: the polyline is sampled densely and the
    minimum point-to-box distance over all samples is reported. Serves as
    the geometric ground truth behind the proximity scoring mock.
    """

    def __init__(self, mission: Mission, sample_step: float = 0.05):
        self.mission = mission
        points = []
        wps = [np.asarray(w, dtype=float) for w in mission.waypoints]
        for a, b in zip(wps, wps[1:]):
            length = float(np.linalg.norm(b - a))
            n = max(int(math.ceil(length / sample_step)), 1)
            for i in range(n):
                points.append(a + (b - a) * (i / n))
        points.append(wps[-1])
        self._samples = np.asarray(points)

    def min_path_distance(self, case: TestCase) -> float:
        """Smallest distance from the route to any obstacle; 0 when the route enters one."""
        if not isinstance(case.body, ScenarioBody) or not case.body.obstacles:
            return math.inf
        best = math.inf
        for ob in case.body.obstacles:
            yaw = math.radians(ob.yaw_deg)
            c, s = math.cos(yaw), math.sin(yaw)
            rel = self._samples - np.asarray(ob.center)
            lx = c * rel[:, 0] + s * rel[:, 1]
            ly = -s * rel[:, 0] + c * rel[:, 1]
            hx, hy, hz = ob.half_extents()
            q = np.stack([np.abs(lx) - hx, np.abs(ly) - hy, np.abs(rel[:, 2]) - hz], axis=1)
            d = np.linalg.norm(np.maximum(q, 0.0), axis=1) + np.minimum(q.max(axis=1), 0.0)
            best = min(best, float(d.min()))
        return max(best, 0.0)
