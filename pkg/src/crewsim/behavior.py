"""Outcome-typed state machines that execute tactical commands.

A command compiles to a small machine of primitive steps (plan, traverse,
climb, observe, ...). Each tick runs the current node once and follows its
transition table; every execution path ends in exactly one of the terminal
outcomes: succeeded, failed, or interrupted.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

from .errors import AlreadyTerminal, NoPath, OffNetwork, UnknownEntity, UnsupportedCapability
from .geometry import XY, dist, path_length, point_along, polygon_bounds, clip_line_to_polygon
from .sim import (
    AERIAL,
    RobotState,
    SimState,
    cancel_motion,
    sense,
    sensing_radius,
    set_motion,
    start_climb,
)
from .tbs import TaskTracker, TbsMessage, TbsStatus
from .world import Path, WorldMap, location_point, plan_path

RUNNING = "running"

_ALT_EPS = 1e-9


class Outcome(enum.Enum):
    SUCCEEDED = "succeeded"
    FAILED = "failed"
    INTERRUPTED = "interrupted"

    def __str__(self) -> str:
        return self.value


StepFn = Callable[["ActiveTask", SimState], str]


@dataclass
class StateNode:
    name: str
    step: StepFn
    transitions: dict[str, "str | Outcome"]

    @property
    def results(self) -> tuple[str, ...]:
        return tuple(self.transitions)


@dataclass
class StateMachine:
    states: dict[str, StateNode]
    initial: str
    task_ref: str
    current: "str | Outcome" = ""
    visited: set[str] = field(default_factory=set)
    preempt_requested: bool = False

    def __post_init__(self):
        if not self.current:
            self.current = self.initial
        self.visited.add(self.initial)
        _check_wiring(self)

    @property
    def terminal(self) -> bool:
        return isinstance(self.current, Outcome)


def _check_wiring(machine: StateMachine) -> None:
    """Every transition target must exist and every state must be reachable."""
    if machine.initial not in machine.states:
        raise ValueError(f"initial state {machine.initial!r} undefined")
    for node in machine.states.values():
        for result, target in node.transitions.items():
            if isinstance(target, Outcome):
                continue
            if target not in machine.states:
                raise ValueError(
                    f"state {node.name!r} result {result!r} targets unknown state {target!r}"
                )
    reached = {machine.initial}
    frontier = [machine.initial]
    while frontier:
        node = machine.states[frontier.pop()]
        for target in node.transitions.values():
            if not isinstance(target, Outcome) and target not in reached:
                reached.add(target)
                frontier.append(target)
    unreachable = set(machine.states) - reached
    if unreachable:
        raise ValueError(f"unreachable states: {sorted(unreachable)}")


@dataclass
class ActiveTask:
    """A compiled command bound to its robot, tracker, and status sink."""

    msg: TbsMessage
    machine: StateMachine
    tracker: TaskTracker
    robot: RobotState
    sink: Callable[[TbsStatus], None]
    scratch: dict = field(default_factory=dict)
    seen_objects: set[str] = field(default_factory=set)

    @property
    def msg_id(self) -> str:
        return self.msg.msg_id

    @property
    def urgency(self) -> str:
        return self.msg.modifiers.urgency

    def object_filter(self) -> str:
        return self.msg.object_info or "injured_person"

    def emit_status(self, phase: str, state: SimState, detail: str = "") -> TbsStatus:
        status = self.tracker.make_status(phase, self.robot, state.clock, detail)
        state.emit(
            "status_emitted", self.robot.id,
            ref=self.msg.msg_id, phase=phase, detail=detail,
        )
        self.sink(status)
        return status

    def tick(self, state: SimState) -> Outcome | None:
        outcome = tick(self.machine, self, state)
        return outcome if isinstance(outcome, Outcome) else None


def tick(machine: StateMachine, task: ActiveTask, state: SimState) -> "str | Outcome":
    """Run one step of the machine; returns RUNNING or the terminal outcome."""
    if machine.terminal:
        raise AlreadyTerminal(f"task {machine.task_ref} already {machine.current}")
    if machine.preempt_requested:
        cancel_motion(task.robot)
        task.robot.vertical_target = None
        machine.current = Outcome.INTERRUPTED
        task.emit_status("interrupted", state, detail="preempted")
        return Outcome.INTERRUPTED
    if task.tracker.last_phase == "accepted":
        task.emit_status("started", state, detail=f"{task.msg.action} underway")
    node = machine.states[machine.current]
    result = node.step(task, state)
    target = node.transitions[result]
    if isinstance(target, Outcome):
        machine.current = target
        if target is Outcome.SUCCEEDED:
            task.emit_status("completed", state, detail=f"{task.msg.action} complete")
        elif target is Outcome.FAILED:
            task.emit_status(
                "failed", state, detail=task.scratch.get("fail_reason", "failed")
            )
        else:
            task.emit_status("interrupted", state, detail="preempted")
        return target
    if target != machine.current:
        machine.current = target
        machine.visited.add(target)
    return RUNNING


def preempt(machine: StateMachine) -> StateMachine:
    """Request interruption; the machine resolves on its next tick."""
    if machine.terminal:
        raise AlreadyTerminal(f"task {machine.task_ref} already {machine.current}")
    machine.preempt_requested = True
    return machine


# --- primitive steps -------------------------------------------------------


def _target_point(task: ActiveTask, world: WorldMap) -> XY:
    return location_point(task.msg.location, world)


def _travel_mode(robot: RobotState) -> str:
    return "air" if robot.kind == AERIAL else "ground"


def _step_ensure_airborne(task: ActiveTask, state: SimState) -> str:
    robot = task.robot
    if robot.airborne and robot.vertical_target is None and (
        robot.altitude >= robot.cruise_altitude - _ALT_EPS
    ):
        return "airborne"
    if robot.vertical_target is None:
        start_climb(robot, robot.cruise_altitude, task.urgency)
    return "climbing"


def _plan_leg_points(
    task: ActiveTask, state: SimState, stops: list[XY]
) -> list[XY] | None:
    """Chained path through the stops; None (with a reason) when unplannable."""
    robot = task.robot
    points: list[XY] = [robot.position]
    try:
        for stop in stops:
            leg = plan_path(
                points[-1], stop, _travel_mode(robot), state.map,
                snap_distance=state.config.snap_distance,
            )
            for p in leg.points:
                if p != points[-1]:
                    points.append(p)
    except (NoPath, OffNetwork) as exc:
        task.scratch["fail_reason"] = str(exc)
        return None
    return points


def _step_plan_goto(task: ActiveTask, state: SimState) -> str:
    goal = _target_point(task, state.map)
    points = _plan_leg_points(task, state, [goal])
    if points is None:
        return "no_path"
    path = Path(tuple(points), path_length(points))
    set_motion(task.robot, path, task.urgency)
    task.scratch["goal"] = goal
    task.scratch["planned_length"] = path.length
    return "planned"


def _step_traverse(task: ActiveTask, state: SimState) -> str:
    robot = task.robot
    if robot.motion is not None:
        return "moving"
    goal = task.scratch.get("goal", robot.position)
    if dist(robot.position, goal) <= state.config.arrival_tolerance:
        return "arrived"
    task.scratch["fail_reason"] = "motion cancelled before reaching the goal"
    return "stalled"


def _step_acquire_leader(task: ActiveTask, state: SimState) -> str:
    try:
        state.robot(task.msg.leader_id)
    except KeyError:
        task.scratch["fail_reason"] = f"leader {task.msg.leader_id!r} not found"
        return "lost"
    return "acquired"


def follow_step(follower: RobotState, leader: RobotState, state: SimState) -> None:
    """Re-target the follower at the trail point behind the leader.

    The trail point sits follow_distance behind the leader along its heading
    and is refreshed every tick; the follower holds position once inside the
    arrival tolerance of that point.
    """
    d_f = state.config.follow_distance
    trail = (
        leader.position[0] - d_f * math.cos(leader.heading),
        leader.position[1] - d_f * math.sin(leader.heading),
    )
    if dist(follower.position, trail) <= state.config.arrival_tolerance:
        cancel_motion(follower)
        return
    set_motion(
        follower,
        Path((follower.position, trail), dist(follower.position, trail)),
        follower.active_urgency,
    )


def _step_track(task: ActiveTask, state: SimState) -> str:
    try:
        leader = state.robot(task.msg.leader_id)
    except KeyError:
        task.scratch["fail_reason"] = f"leader {task.msg.leader_id!r} lost"
        return "lost"
    task.robot.active_urgency = task.urgency
    follow_step(task.robot, leader, state)
    return "tracking"


def _route_stops(task: ActiveTask, world: WorldMap) -> list[XY]:
    route = world.routes[task.msg.location.name.casefold()]
    return [world.waypoint(w).position for w in route.waypoints]


def _step_plan_route(task: ActiveTask, state: SimState) -> str:
    points = _plan_leg_points(task, state, _route_stops(task, state.map))
    if points is None:
        return "no_path"
    set_motion(task.robot, Path(tuple(points), path_length(points)), task.urgency)
    task.scratch["goal"] = points[-1]
    return "planned"


def _sense_matching(task: ActiveTask, state: SimState):
    detections = sense(task.robot, state)
    wanted = task.object_filter()
    return [d for d in detections if d.kind == wanted]


def _step_traverse_detect(task: ActiveTask, state: SimState) -> str:
    robot = task.robot
    found = _sense_matching(task, state)
    if found:
        for d in found:
            task.tracker.add_detection(d)
        task.scratch["detection"] = found[0]
        if robot.motion is not None:
            task.scratch["pending_path"] = robot.motion.points[robot.motion.index:]
            cancel_motion(robot)
        else:
            task.scratch["pending_path"] = []
        return "spotted"
    if robot.motion is None:
        return "arrived"
    return "moving"


def _nearest_landing_site(state: SimState, point: XY) -> tuple[XY | None, float]:
    best, best_d = None, math.inf
    for site in state.map.landing_sites:
        d = dist(site, point)
        if d < best_d:
            best, best_d = site, d
    return best, best_d


def _step_branch_decide(task: ActiveTask, state: SimState) -> str:
    detection = task.scratch["detection"]
    site, d = _nearest_landing_site(state, detection.position)
    if task.robot.kind == AERIAL and site is not None and d <= state.config.perch_radius:
        task.scratch["site"] = site
        return "perch"
    return "hover"


def _step_goto_site(task: ActiveTask, state: SimState) -> str:
    robot = task.robot
    site = task.scratch["site"]
    if dist(robot.position, site) <= state.config.arrival_tolerance:
        cancel_motion(robot)
        return "at_site"
    if robot.motion is None:
        set_motion(robot, Path((robot.position, site), dist(robot.position, site)), task.urgency)
    return "moving"


def _step_land_at_site(task: ActiveTask, state: SimState) -> str:
    robot = task.robot
    if robot.altitude <= _ALT_EPS and robot.vertical_target is None:
        robot.airborne = False
        state.emit("perched", robot.id, position=list(robot.position))
        return "perched"
    if robot.vertical_target is None:
        start_climb(robot, 0.0, task.urgency)
    return "descending"


def _step_hover_observe(task: ActiveTask, state: SimState) -> str:
    robot = task.robot
    if robot.kind != AERIAL:
        cancel_motion(robot)
        return "in_position"
    detection = task.scratch["detection"]
    gap = dist(robot.position, detection.position)
    standoff = state.config.hover_standoff
    if gap <= standoff + state.config.arrival_tolerance:
        cancel_motion(robot)
        return "in_position"
    target = point_along(detection.position, robot.position, standoff)
    if robot.motion is None:
        set_motion(robot, Path((robot.position, target), dist(robot.position, target)), task.urgency)
    return "approaching"


def _step_observe(task: ActiveTask, state: SimState) -> str:
    deadline = task.scratch.get("observe_until")
    if deadline is None:
        task.scratch["observe_until"] = state.clock + state.config.observe_duration
        return "observing"
    if state.clock >= deadline - 1e-9:
        task.scratch.pop("observe_until", None)
        return "observed"
    return "observing"


def _step_report(task: ActiveTask, state: SimState) -> str:
    detection = task.scratch.get("detection")
    detail = (
        f"observed {detection.object_id} at "
        f"({detection.position[0]:.1f}, {detection.position[1]:.1f})"
        if detection is not None else "observation complete"
    )
    task.emit_status("progress", state, detail=detail)
    return "reported"


def _step_resume(task: ActiveTask, state: SimState) -> str:
    robot = task.robot
    if robot.kind == AERIAL and robot.altitude < robot.cruise_altitude - _ALT_EPS:
        if robot.vertical_target is None:
            start_climb(robot, robot.cruise_altitude, task.urgency)
        return "climbing"
    pending = task.scratch.get("pending_path") or []
    task.scratch.pop("detection", None)
    task.scratch.pop("site", None)
    if not pending:
        return "route_done"
    points = [robot.position] + [p for p in pending if p != robot.position]
    if len(points) < 2:
        return "route_done"
    set_motion(robot, Path(tuple(points), path_length(points)), task.urgency)
    task.scratch["pending_path"] = []
    task.scratch["goal"] = points[-1]
    return "resumed"


def coverage_lanes(polygon: list[XY], spacing: float) -> list[XY]:
    """Serpentine lane sweep over the polygon, one lane every `spacing` meters.

    The first and last lanes keep a half-spacing margin to the bounding box
    edges, so no interior point is farther than spacing/2 from a lane.
    """
    xmin, ymin, xmax, ymax = polygon_bounds(polygon)
    if ymax - ymin <= spacing:
        ys = [(ymin + ymax) / 2.0]
    else:
        ys = [ymin + spacing / 2.0]
        while ys[-1] + spacing < ymax - spacing / 2.0:
            ys.append(ys[-1] + spacing)
        ys.append(ymax - spacing / 2.0)
    points: list[XY] = []
    for i, lane_y in enumerate(ys):
        pieces = clip_line_to_polygon((xmin - 1.0, lane_y), (xmax + 1.0, lane_y), polygon)
        if not pieces:
            continue
        if i % 2 == 1:
            pieces = [(b, a) for a, b in reversed(pieces)]
        for a, b in pieces:
            points.append(a)
            points.append(b)
    return points


def _step_plan_coverage(task: ActiveTask, state: SimState) -> str:
    area = state.map.areas[task.msg.location.name.casefold()]
    spacing = state.config.lane_spacing_factor * sensing_radius(task.robot)
    lane_points = coverage_lanes(list(area.polygon), spacing)
    if not lane_points:
        task.scratch["fail_reason"] = f"area {area.name} has no sweepable interior"
        return "no_area"
    robot = task.robot
    points = [robot.position] + [p for p in lane_points if p != robot.position]
    set_motion(robot, Path(tuple(points), path_length(points)), task.urgency)
    task.scratch["goal"] = points[-1]
    return "planned"


def _step_sweep_detect(task: ActiveTask, state: SimState) -> str:
    found = _sense_matching(task, state)
    if found:
        for d in found:
            task.tracker.add_detection(d)
        ids = ", ".join(d.object_id for d in found)
        task.emit_status("progress", state, detail=f"spotted {ids}")
    if task.robot.motion is None:
        return "arrived"
    return "moving"


def _step_plan_perimeter(task: ActiveTask, state: SimState) -> str:
    area = state.map.areas[task.msg.location.name.casefold()]
    verts = list(area.polygon)
    robot = task.robot
    start = min(range(len(verts)), key=lambda i: (dist(robot.position, verts[i]), i))
    ring = verts[start:] + verts[:start] + [verts[start]]
    points = [robot.position] + [p for p in ring if p != robot.position]
    set_motion(robot, Path(tuple(points), path_length(points)), task.urgency)
    return "planned"


def _step_patrol_detect(task: ActiveTask, state: SimState) -> str:
    found = _sense_matching(task, state)
    if found:
        for d in found:
            task.tracker.add_detection(d)
        ids = ", ".join(d.object_id for d in found)
        task.emit_status("progress", state, detail=f"spotted {ids}")
    if task.robot.motion is None:
        return "lap_done"
    return "moving"


def _step_rise(task: ActiveTask, state: SimState) -> str:
    robot = task.robot
    if robot.airborne and robot.vertical_target is None and (
        robot.altitude >= robot.cruise_altitude - _ALT_EPS
    ):
        return "airborne"
    if robot.vertical_target is None:
        start_climb(robot, robot.cruise_altitude, task.urgency)
    return "climbing"


def _step_choose_site(task: ActiveTask, state: SimState) -> str:
    robot = task.robot
    if not robot.airborne and robot.altitude <= _ALT_EPS:
        return "landed"
    site, d = _nearest_landing_site(state, robot.position)
    if site is not None and d <= state.config.perch_radius:
        task.scratch["site"] = site
        return "site_found"
    task.emit_status(
        "progress", state,
        detail=f"no landing site within {state.config.perch_radius:.0f} m, landing in place",
    )
    return "no_site"


def _step_descend(task: ActiveTask, state: SimState) -> str:
    robot = task.robot
    if robot.altitude <= _ALT_EPS and robot.vertical_target is None:
        robot.airborne = False
        return "landed"
    if robot.vertical_target is None:
        start_climb(robot, 0.0, task.urgency)
    return "descending"


def _step_halt(task: ActiveTask, state: SimState) -> str:
    cancel_motion(task.robot)
    task.robot.vertical_target = None
    return "halted"


# --- machine assembly ------------------------------------------------------


def _node(name: str, step: StepFn, **transitions) -> StateNode:
    return StateNode(name, step, transitions)


def compile_task(
    msg: TbsMessage, world: WorldMap, robot: RobotState,
    roster: dict[str, RobotState] | None = None,
) -> StateMachine:
    """Build the state machine for a validated command.

    Raises UnsupportedCapability when the robot cannot perform the action and
    UnknownEntity when a referenced location or leader does not exist.
    """
    if msg.action not in robot.capabilities:
        raise UnsupportedCapability(f"robot {robot.id} cannot perform {msg.action}")
    if msg.location is not None and msg.location.kind != "coordinates":
        key = (msg.location.name or "").casefold()
        pools = {"waypoint": world.waypoints, "route": world.routes, "area": world.areas}
        pool = pools.get(msg.location.kind, {})
        if key not in pool:
            raise UnknownEntity(f"{msg.location.kind} {msg.location.name!r} not in map")
    if msg.action == "FOLLOW":
        if roster is not None and msg.leader_id not in roster:
            raise UnknownEntity(f"leader {msg.leader_id!r} not in roster")
        if msg.leader_id == robot.id:
            raise UnknownEntity("robot cannot follow itself")

    aerial = robot.kind == AERIAL
    nodes: list[StateNode] = []
    if msg.action == "GOTO":
        first = "plan"
        nodes += [
            _node("plan", _step_plan_goto, planned="traverse", no_path=Outcome.FAILED),
            _node(
                "traverse", _step_traverse,
                moving="traverse", arrived=Outcome.SUCCEEDED, stalled=Outcome.FAILED,
            ),
        ]
    elif msg.action == "FOLLOW":
        first = "acquire"
        nodes += [
            _node("acquire", _step_acquire_leader, acquired="track", lost=Outcome.FAILED),
            _node("track", _step_track, tracking="track", lost=Outcome.FAILED),
        ]
    elif msg.action == "SCOUT":
        first = "plan_route"
        nodes += [
            _node("plan_route", _step_plan_route, planned="traverse_detect", no_path=Outcome.FAILED),
            _node(
                "traverse_detect", _step_traverse_detect,
                moving="traverse_detect", spotted="branch_decide", arrived=Outcome.SUCCEEDED,
            ),
            _node("branch_decide", _step_branch_decide, perch="goto_site", hover="hover_observe"),
            _node("goto_site", _step_goto_site, moving="goto_site", at_site="land_at_site"),
            _node("land_at_site", _step_land_at_site, descending="land_at_site", perched="observe"),
            _node(
                "hover_observe", _step_hover_observe,
                approaching="hover_observe", in_position="observe",
            ),
            _node("observe", _step_observe, observing="observe", observed="report"),
            _node("report", _step_report, reported="resume"),
            _node(
                "resume", _step_resume,
                climbing="resume", resumed="traverse_detect", route_done=Outcome.SUCCEEDED,
            ),
        ]
    elif msg.action == "SEARCH":
        first = "plan_coverage"
        nodes += [
            _node("plan_coverage", _step_plan_coverage, planned="sweep_detect", no_area=Outcome.FAILED),
            _node("sweep_detect", _step_sweep_detect, moving="sweep_detect", arrived=Outcome.SUCCEEDED),
        ]
    elif msg.action == "PATROL":
        first = "plan_perimeter"
        nodes += [
            _node("plan_perimeter", _step_plan_perimeter, planned="patrol_detect"),
            _node("patrol_detect", _step_patrol_detect, moving="patrol_detect", lap_done="plan_perimeter"),
        ]
    elif msg.action == "TAKEOFF":
        first = "rise"
        nodes += [_node("rise", _step_rise, climbing="rise", airborne=Outcome.SUCCEEDED)]
    elif msg.action == "LAND":
        first = "choose_site"
        nodes += [
            _node(
                "choose_site", _step_choose_site,
                landed=Outcome.SUCCEEDED, site_found="goto_site", no_site="descend",
            ),
            _node("goto_site", _step_goto_site, moving="goto_site", at_site="descend"),
            _node("descend", _step_descend, descending="descend", landed=Outcome.SUCCEEDED),
        ]
    elif msg.action == "HALT":
        first = "halt"
        nodes += [_node("halt", _step_halt, halted=Outcome.SUCCEEDED)]
    else:
        raise UnsupportedCapability(f"no machine for action {msg.action!r}")

    if aerial and msg.action in ("GOTO", "FOLLOW", "SCOUT", "SEARCH", "PATROL"):
        nodes.insert(
            0,
            _node("ensure_airborne", _step_ensure_airborne, climbing="ensure_airborne", airborne=first),
        )
        first = "ensure_airborne"

    return StateMachine(
        states={n.name: n for n in nodes}, initial=first, task_ref=msg.msg_id
    )


def assign(
    state: SimState,
    msg: TbsMessage,
    sink: Callable[[TbsStatus], None],
) -> ActiveTask:
    """Install a command on its robot, preempting any task already running.

    The displaced task resolves to interrupted (emitting its status) before
    the new task's accepted status goes out.
    """
    robot = state.robot(msg.robot_id)
    roster = {r.id: r for r in state.robots}
    old = robot.active_task
    if old is not None:
        interrupt_now(old, state)
    machine = compile_task(msg, state.map, robot, roster)
    tracker = TaskTracker(msg)
    task = ActiveTask(msg=msg, machine=machine, tracker=tracker, robot=robot, sink=sink)
    robot.active_task = task
    robot.active_urgency = msg.modifiers.urgency
    task.emit_status("accepted", state, detail=f"{msg.action} accepted")
    return task


def interrupt_now(task: ActiveTask, state: SimState) -> None:
    """Preempt and resolve a task immediately (used when a new command lands)."""
    if task.machine.terminal:
        return
    preempt(task.machine)
    outcome = task.tick(state)
    if outcome is not None:
        state.emit(
            "behavior_outcome", task.robot.id,
            task=task.msg_id, outcome=str(outcome),
        )
    task.robot.active_task = None
