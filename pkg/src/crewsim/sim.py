"""Deterministic discrete-time engine for the simulated robot team.

The engine is single-threaded per session: one owner calls step() at a fixed
tick, external commands are applied between ticks, and everything observable
is derived from the append-only event log. Two runs with the same map, seed,
and command script produce identical logs.
"""

from __future__ import annotations

import copy
import math
import random
from dataclasses import dataclass, field
from typing import Protocol

from .errors import ConfigError, NotAirborne
from .geometry import XY, dist, heading_of, point_along
from .world import ObjectOfInterest, Path, WorldMap

GROUND = "ground"
AERIAL = "aerial"

GROUND_CAPABILITIES = frozenset({"GOTO", "FOLLOW", "SCOUT", "SEARCH", "PATROL", "HALT"})
AERIAL_CAPABILITIES = GROUND_CAPABILITIES | {"TAKEOFF", "LAND"}

EVENT_KINDS = (
    "arrived", "detected", "took_off", "landed", "perched",
    "behavior_outcome", "status_emitted",
)


@dataclass(frozen=True)
class Detection:
    object_id: str
    kind: str
    position: XY
    confidence: float
    time: float
    robot_id: str


@dataclass(frozen=True)
class SimEvent:
    time: float
    robot_id: str
    kind: str
    payload: dict


@dataclass
class MotionPlan:
    points: list[XY]
    index: int
    urgency: str


class ActiveTaskHandle(Protocol):
    """What the engine needs from a running task (owned by the behavior layer)."""

    msg_id: str
    seen_objects: set[str]

    def tick(self, state: "SimState") -> object | None: ...


@dataclass
class RobotState:
    id: str
    display_name: str
    kind: str
    position: XY = (0.0, 0.0)
    heading: float = 0.0
    altitude: float = 0.0
    airborne: bool = False
    speed_normal: float = 1.0
    speed_urgent: float = 2.0
    sensor_range: float = 15.0
    half_angle_deg: float = 30.0
    cruise_altitude: float = 20.0
    capabilities: frozenset[str] = GROUND_CAPABILITIES
    active_task: ActiveTaskHandle | None = None
    motion: MotionPlan | None = None
    vertical_target: float | None = None
    active_urgency: str = "normal"

    def active_speed(self) -> float:
        return self.speed_urgent if self.active_urgency == "urgent" else self.speed_normal

    @property
    def busy(self) -> bool:
        return self.active_task is not None


@dataclass
class SimConfig:
    seed: int = 0
    tick: float = 0.1
    arrival_tolerance: float = 0.5
    snap_distance: float = 5.0
    perch_radius: float = 15.0
    observe_duration: float = 10.0
    hover_standoff: float = 10.0
    follow_distance: float = 5.0
    lane_spacing_factor: float = 1.5
    miss_noise: float = 0.0
    timeout: float = 600.0


@dataclass
class SimState:
    map: WorldMap
    robots: list[RobotState]
    config: SimConfig
    clock: float = 0.0
    rng: random.Random = field(default_factory=random.Random)
    event_log: list[SimEvent] = field(default_factory=list)
    objects: dict[str, ObjectOfInterest] = field(default_factory=dict)

    def __post_init__(self):
        ids = [r.id for r in self.robots]
        if len(set(ids)) != len(ids):
            raise ConfigError("robot ids must be unique")
        if not self.objects:
            # Sim-owned copies so the shared WorldMap stays pristine.
            self.objects = {oid: copy.copy(o) for oid, o in self.map.objects.items()}

    def robot(self, robot_id: str) -> RobotState:
        for r in self.robots:
            if r.id == robot_id:
                return r
        raise KeyError(robot_id)

    def emit(self, kind: str, robot_id: str, **payload) -> SimEvent:
        event = SimEvent(self.clock, robot_id, kind, payload)
        self.event_log.append(event)
        return event


def robot_from_config(entry: dict) -> RobotState:
    try:
        kind = entry["kind"]
        if kind not in (GROUND, AERIAL):
            raise ConfigError(f"robot kind {kind!r} must be ground or aerial")
        robot = RobotState(
            id=entry["id"],
            display_name=entry["display_name"],
            kind=kind,
            position=tuple(entry.get("position", (0.0, 0.0))),
            speed_normal=float(entry.get("speed_normal", 1.0 if kind == GROUND else 3.0)),
            speed_urgent=float(entry.get("speed_urgent", 2.0 if kind == GROUND else 6.0)),
            sensor_range=float(entry.get("sensor_range", 15.0)),
            half_angle_deg=float(entry.get("half_angle_deg", 30.0)),
            cruise_altitude=float(entry.get("cruise_altitude", 20.0)),
            capabilities=AERIAL_CAPABILITIES if kind == AERIAL else GROUND_CAPABILITIES,
        )
    except KeyError as exc:
        raise ConfigError(f"robot entry missing key {exc}") from exc
    if not 0 < robot.speed_normal <= robot.speed_urgent:
        raise ConfigError(f"robot {robot.id}: need 0 < speed_normal <= speed_urgent")
    return robot


def build_state(world: WorldMap, scenario: dict) -> SimState:
    """Build a fresh SimState from a parsed scenario config document."""
    config = SimConfig(
        seed=int(scenario.get("seed", 0)),
        tick=float(scenario.get("tick", 0.1)),
        arrival_tolerance=float(scenario.get("arrival_tolerance", 0.5)),
        snap_distance=float(scenario.get("snap_distance", 5.0)),
        perch_radius=float(scenario.get("perch_radius", 15.0)),
        observe_duration=float(scenario.get("observe_duration", 10.0)),
        hover_standoff=float(scenario.get("hover_standoff", 10.0)),
        follow_distance=float(scenario.get("follow_distance", 5.0)),
        lane_spacing_factor=float(scenario.get("lane_spacing_factor", 1.5)),
        miss_noise=float(scenario.get("miss_noise", 0.0)),
        timeout=float(scenario.get("timeout", 600.0)),
    )
    if config.tick <= 0:
        raise ConfigError("tick must be > 0")
    robots = [robot_from_config(e) for e in scenario.get("robots", [])]
    if not robots:
        raise ConfigError("scenario declares no robots")
    return SimState(
        map=world, robots=robots, config=config, rng=random.Random(config.seed)
    )


def set_motion(robot: RobotState, path: Path, urgency: str = "normal") -> RobotState:
    """Send the robot along the path's waypoints at the urgency's speed."""
    if not path.points:
        raise ValueError("empty path")
    if robot.kind == AERIAL and not robot.airborne and path.length > 0.0:
        raise NotAirborne(f"{robot.id} must take off before moving")
    points = list(path.points)
    index = 1 if len(points) > 1 and points[0] == robot.position else 0
    robot.motion = MotionPlan(points=points, index=min(index, len(points) - 1), urgency=urgency)
    robot.active_urgency = urgency
    target = points[robot.motion.index]
    if target != robot.position:
        robot.heading = heading_of(robot.position, target)
    return robot


def cancel_motion(robot: RobotState) -> None:
    robot.motion = None


def start_climb(robot: RobotState, target_altitude: float, urgency: str = "normal") -> None:
    robot.vertical_target = target_altitude
    robot.active_urgency = urgency
    if target_altitude > robot.altitude:
        robot.airborne = True


def _advance_vertical(robot: RobotState, state: SimState, dt: float) -> None:
    target = robot.vertical_target
    if target is None:
        return
    budget = robot.active_speed() * dt
    delta = target - robot.altitude
    if abs(delta) <= budget:
        robot.altitude = target
        robot.vertical_target = None
        if target > 0.0:
            state.emit("took_off", robot.id, altitude=target)
        else:
            robot.airborne = False
            state.emit("landed", robot.id, position=list(robot.position))
    else:
        robot.altitude += math.copysign(budget, delta)


def _advance_horizontal(robot: RobotState, state: SimState, dt: float) -> None:
    plan = robot.motion
    if plan is None:
        return
    goal = plan.points[-1]
    if dist(robot.position, goal) <= state.config.arrival_tolerance:
        robot.motion = None
        state.emit("arrived", robot.id, goal=list(goal), position=list(robot.position))
        return
    budget = robot.active_speed() * dt
    while budget > 1e-12 and plan.index < len(plan.points):
        target = plan.points[plan.index]
        gap = dist(robot.position, target)
        if gap <= 1e-12:
            plan.index += 1
            continue
        robot.heading = heading_of(robot.position, target)
        if gap <= budget:
            robot.position = target
            budget -= gap
            plan.index += 1
        else:
            robot.position = point_along(robot.position, target, budget)
            budget = 0.0


def step(state: SimState, dt: float | None = None) -> list[SimEvent]:
    """Advance the world by one tick and return the events it produced.

    Robots are processed in roster order: vertical motion, then horizontal
    motion, then one tick of the active behavior machine. A robot never moves
    horizontally while a climb or descent is in progress, so per-tick
    displacement stays within speed * dt.
    """
    if dt is None:
        dt = state.config.tick
    if dt <= 0:
        raise ValueError("dt must be > 0")
    mark = len(state.event_log)
    state.clock += dt
    for robot in state.robots:
        if robot.vertical_target is not None:
            _advance_vertical(robot, state, dt)
        else:
            _advance_horizontal(robot, state, dt)
        task = robot.active_task
        if task is not None:
            outcome = task.tick(state)
            if outcome is not None:
                state.emit(
                    "behavior_outcome", robot.id,
                    task=task.msg_id, outcome=str(outcome),
                )
                robot.active_task = None
    return state.event_log[mark:]


def aerial_footprint_radius(robot: RobotState) -> float:
    return robot.altitude * math.tan(math.radians(robot.half_angle_deg))


def sensing_radius(robot: RobotState) -> float:
    """Radius the robot can sweep from its current state."""
    if robot.kind == AERIAL:
        alt = robot.altitude if robot.airborne else robot.cruise_altitude
        return alt * math.tan(math.radians(robot.half_angle_deg))
    return robot.sensor_range


def sense(robot: RobotState, state: SimState) -> list[Detection]:
    """Evaluate the robot's sensor against every undetected object.

    Ground robots see objects within their sensor range given a clear line of
    sight; an airborne aerial robot sees objects inside its camera footprint
    (ground distance <= altitude * tan(half angle)), also sight-checked. Each
    (robot, object) pair is reported at most once per task; detections mark
    the object as discovered.
    """
    from .world import line_of_sight

    detections: list[Detection] = []
    seen = robot.active_task.seen_objects if robot.active_task is not None else None
    for oid in sorted(state.objects):
        obj = state.objects[oid]
        if seen is not None and oid in seen:
            continue
        ground_distance = dist(robot.position, obj.position)
        if robot.kind == GROUND:
            if ground_distance > robot.sensor_range:
                continue
            eye = (robot.position[0], robot.position[1], 0.0)
        else:
            if not robot.airborne:
                continue
            if ground_distance > aerial_footprint_radius(robot):
                continue
            eye = (robot.position[0], robot.position[1], robot.altitude)
        if not line_of_sight(eye, (obj.position[0], obj.position[1], 0.0), state.map):
            continue
        noise = state.config.miss_noise
        if noise > 0.0 and state.rng.random() < noise:
            continue
        detection = Detection(
            object_id=oid,
            kind=obj.kind,
            position=obj.position,
            confidence=1.0 - noise,
            time=state.clock,
            robot_id=robot.id,
        )
        obj.discovered = True
        if seen is not None:
            seen.add(oid)
        state.emit(
            "detected", robot.id,
            object=oid, object_class=obj.kind,
            position=list(obj.position), confidence=detection.confidence,
        )
        detections.append(detection)
    return detections


def snapshot(state: SimState) -> dict:
    """Immutable view of the world for observers (streaming, console)."""
    return {
        "t": round(state.clock, 6),
        "robots": [
            {
                "id": r.id,
                "name": r.display_name,
                "kind": r.kind,
                "x": r.position[0],
                "y": r.position[1],
                "altitude": r.altitude,
                "heading": r.heading,
                "airborne": r.airborne,
                "busy": r.busy,
                "task": r.active_task.msg_id if r.active_task else None,
                "footprint": aerial_footprint_radius(r) if r.kind == AERIAL and r.airborne else None,
            }
            for r in state.robots
        ],
        "objects": [
            {
                "id": o.id,
                "class": o.kind,
                "x": o.position[0],
                "y": o.position[1],
                "discovered": o.discovered,
            }
            for _, o in sorted(state.objects.items())
        ],
    }
