"""Tactical behavior command protocol: messages, statuses, and the line codec.

The wire format is line-delimited JSON with a fixed key order so logs stay
greppable and encoding is byte-stable across runs. Command lines carry keys
v,id,t,robot,action,loc,leader,obj,mods; status lines carry
v,ref,robot,phase,detail,pose,detections,t.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .errors import DecodeError, IllegalPhaseTransition, TbsValidationError
from .sim import Detection, RobotState
from .world import LocationRef, WorldMap, resolve_location

PROTOCOL_VERSION = 1

ACTIONS = ("GOTO", "FOLLOW", "SCOUT", "SEARCH", "PATROL", "TAKEOFF", "LAND", "HALT")

PHASES = ("accepted", "started", "progress", "completed", "failed", "interrupted")
TERMINAL_PHASES = ("completed", "failed", "interrupted")

_NEXT_PHASES = {
    None: {"accepted"},
    "accepted": {"started", "completed", "failed", "interrupted"},
    "started": {"progress", "completed", "failed", "interrupted"},
    "progress": {"progress", "completed", "failed", "interrupted"},
    "completed": set(),
    "failed": set(),
    "interrupted": set(),
}

# Which location kinds each action accepts (None entry = no location allowed).
_LOCATION_RULES = {
    "GOTO": ("waypoint", "coordinates"),
    "SCOUT": ("route",),
    "SEARCH": ("area",),
    "PATROL": ("area",),
    "FOLLOW": None,
    "TAKEOFF": None,
    "LAND": None,
    "HALT": None,
}


@dataclass(frozen=True)
class Modifiers:
    urgency: str = "normal"
    stealth: bool = False


@dataclass(frozen=True)
class TbsMessage:
    msg_id: str
    robot_id: str
    action: str
    issued_at: float = 0.0
    location: LocationRef | None = None
    object_info: str | None = None
    leader_id: str | None = None
    modifiers: Modifiers = Modifiers()
    version: int = PROTOCOL_VERSION


@dataclass(frozen=True)
class TbsStatus:
    ref_msg_id: str
    robot_id: str
    phase: str
    detail: str
    pose: tuple[float, float, float]
    detections: tuple[Detection, ...]
    time: float


def validate(msg: TbsMessage, world: WorldMap, roster: dict[str, RobotState]) -> None:
    """Check every protocol rule; raise TbsValidationError naming the first
    violated field."""
    if msg.version != PROTOCOL_VERSION:
        raise TbsValidationError("version", f"version must be {PROTOCOL_VERSION}")
    if not msg.msg_id:
        raise TbsValidationError("msg_id", "msg_id must be non-empty")
    if msg.robot_id not in roster:
        raise TbsValidationError("robot_id", f"unknown robot {msg.robot_id!r}")
    if msg.action not in ACTIONS:
        raise TbsValidationError("action", f"unknown action {msg.action!r}")
    robot = roster[msg.robot_id]
    if msg.action not in robot.capabilities:
        raise TbsValidationError(
            "action", f"robot {msg.robot_id} cannot perform {msg.action}"
        )
    if msg.modifiers.urgency not in ("normal", "urgent"):
        raise TbsValidationError("modifiers.urgency", f"bad urgency {msg.modifiers.urgency!r}")

    allowed_kinds = _LOCATION_RULES[msg.action]
    if allowed_kinds is None:
        if msg.location is not None:
            raise TbsValidationError("location", f"{msg.action} takes no location")
    else:
        if msg.location is None:
            raise TbsValidationError("location", f"{msg.action} requires a location")
        if msg.location.kind not in allowed_kinds:
            raise TbsValidationError(
                "location", f"{msg.action} requires {' or '.join(allowed_kinds)}"
            )
        if msg.location.kind == "coordinates":
            point = msg.location.point
            if point is None or not all(math.isfinite(c) for c in point):
                raise TbsValidationError("location", "coordinates need a finite point")
        else:
            if not msg.location.name:
                raise TbsValidationError("location", "named location needs a name")
            try:
                ref = resolve_location(msg.location.name, world)
            except Exception as exc:
                raise TbsValidationError("location", str(exc)) from exc
            if ref.kind != msg.location.kind:
                raise TbsValidationError(
                    "location",
                    f"{msg.location.name!r} is a {ref.kind}, not a {msg.location.kind}",
                )

    if msg.action == "FOLLOW":
        if not msg.leader_id:
            raise TbsValidationError("leader_id", "FOLLOW requires a leader")
        if msg.leader_id == msg.robot_id:
            raise TbsValidationError("leader_id", "self-follow")
        if msg.leader_id not in roster:
            raise TbsValidationError("leader_id", f"unknown leader {msg.leader_id!r}")
    elif msg.leader_id is not None:
        raise TbsValidationError("leader_id", f"{msg.action} takes no leader")


def _loc_to_wire(loc: LocationRef | None):
    if loc is None:
        return None
    if loc.kind == "coordinates":
        return {"kind": "coordinates", "point": [loc.point[0], loc.point[1]]}
    return {"kind": loc.kind, "name": loc.name}


def encode(msg: TbsMessage) -> str:
    """Canonical one-line serialization with fixed key order."""
    doc = {
        "v": msg.version,
        "id": msg.msg_id,
        "t": msg.issued_at,
        "robot": msg.robot_id,
        "action": msg.action,
        "loc": _loc_to_wire(msg.location),
        "leader": msg.leader_id,
        "obj": msg.object_info,
        "mods": {"urgency": msg.modifiers.urgency, "stealth": msg.modifiers.stealth},
    }
    return json.dumps(doc, separators=(",", ":"))


def _wire_str(doc: dict, key: str, optional: bool = False) -> str | None:
    value = doc[key]
    if value is None and optional:
        return None
    if not isinstance(value, str):
        raise DecodeError(f"field {key!r} must be a string")
    return value


def _wire_num(doc: dict, key: str) -> float:
    value = doc[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise DecodeError(f"field {key!r} must be a number")
    return float(value)


def _loc_from_wire(value) -> LocationRef | None:
    if value is None:
        return None
    if not isinstance(value, dict):
        raise DecodeError("field 'loc' must be an object")
    kind = value.get("kind")
    if kind == "coordinates":
        if set(value) != {"kind", "point"}:
            raise DecodeError("field 'loc' has unexpected keys")
        point = value["point"]
        if (
            not isinstance(point, list) or len(point) != 2
            or any(isinstance(c, bool) or not isinstance(c, (int, float)) for c in point)
        ):
            raise DecodeError("field 'loc.point' must be [x, y]")
        return LocationRef("coordinates", point=(float(point[0]), float(point[1])))
    if kind in ("waypoint", "route", "area", "building"):
        if set(value) != {"kind", "name"} or not isinstance(value["name"], str):
            raise DecodeError("field 'loc' needs a name")
        return LocationRef(kind, value["name"])
    raise DecodeError(f"field 'loc.kind' unknown: {kind!r}")


_MSG_KEYS = ("v", "id", "t", "robot", "action", "loc", "leader", "obj", "mods")


def decode(line: str) -> TbsMessage:
    """Inverse of encode; rejects unknown fields, actions, and versions."""
    try:
        doc = json.loads(line)
    except json.JSONDecodeError as exc:
        raise DecodeError(f"invalid JSON at column {exc.colno}") from exc
    if not isinstance(doc, dict):
        raise DecodeError("line is not an object")
    if set(doc) != set(_MSG_KEYS):
        extra = set(doc) - set(_MSG_KEYS)
        missing = set(_MSG_KEYS) - set(doc)
        bad = (sorted(extra) + sorted(missing))[0]
        raise DecodeError(f"field {bad!r} {'unexpected' if extra else 'missing'}")
    if doc["v"] != PROTOCOL_VERSION:
        raise DecodeError(f"field 'v' must be {PROTOCOL_VERSION}")
    action = _wire_str(doc, "action")
    if action not in ACTIONS:
        raise DecodeError(f"field 'action' unknown: {action!r}")
    mods = doc["mods"]
    if (
        not isinstance(mods, dict)
        or set(mods) != {"urgency", "stealth"}
        or mods["urgency"] not in ("normal", "urgent")
        or not isinstance(mods["stealth"], bool)
    ):
        raise DecodeError("field 'mods' must be {urgency, stealth}")
    return TbsMessage(
        msg_id=_wire_str(doc, "id"),
        robot_id=_wire_str(doc, "robot"),
        action=action,
        issued_at=_wire_num(doc, "t"),
        location=_loc_from_wire(doc["loc"]),
        leader_id=_wire_str(doc, "leader", optional=True),
        object_info=_wire_str(doc, "obj", optional=True),
        modifiers=Modifiers(urgency=mods["urgency"], stealth=bool(mods["stealth"])),
    )


def _detection_to_wire(d: Detection) -> dict:
    return {
        "id": d.object_id,
        "class": d.kind,
        "x": d.position[0],
        "y": d.position[1],
        "confidence": d.confidence,
        "time": d.time,
        "robot": d.robot_id,
    }


def _detection_from_wire(value) -> Detection:
    keys = {"id", "class", "x", "y", "confidence", "time", "robot"}
    if not isinstance(value, dict) or set(value) != keys:
        raise DecodeError("field 'detections' entries malformed")
    return Detection(
        object_id=value["id"],
        kind=value["class"],
        position=(float(value["x"]), float(value["y"])),
        confidence=float(value["confidence"]),
        time=float(value["time"]),
        robot_id=value["robot"],
    )


def encode_status(status: TbsStatus) -> str:
    doc = {
        "v": PROTOCOL_VERSION,
        "ref": status.ref_msg_id,
        "robot": status.robot_id,
        "phase": status.phase,
        "detail": status.detail,
        "pose": [status.pose[0], status.pose[1], status.pose[2]],
        "detections": [_detection_to_wire(d) for d in status.detections],
        "t": status.time,
    }
    return json.dumps(doc, separators=(",", ":"))


_STATUS_KEYS = ("v", "ref", "robot", "phase", "detail", "pose", "detections", "t")


def decode_status(line: str) -> TbsStatus:
    try:
        doc = json.loads(line)
    except json.JSONDecodeError as exc:
        raise DecodeError(f"invalid JSON at column {exc.colno}") from exc
    if not isinstance(doc, dict) or set(doc) != set(_STATUS_KEYS):
        raise DecodeError("status line has unexpected keys")
    if doc["v"] != PROTOCOL_VERSION:
        raise DecodeError(f"field 'v' must be {PROTOCOL_VERSION}")
    if doc["phase"] not in PHASES:
        raise DecodeError(f"field 'phase' unknown: {doc['phase']!r}")
    pose = doc["pose"]
    if not isinstance(pose, list) or len(pose) != 3:
        raise DecodeError("field 'pose' must be [x, y, altitude]")
    return TbsStatus(
        ref_msg_id=_wire_str(doc, "ref"),
        robot_id=_wire_str(doc, "robot"),
        phase=doc["phase"],
        detail=_wire_str(doc, "detail"),
        pose=(float(pose[0]), float(pose[1]), float(pose[2])),
        detections=tuple(_detection_from_wire(d) for d in doc["detections"]),
        time=_wire_num(doc, "t"),
    )


@dataclass
class TaskTracker:
    """Lifecycle bookkeeping for one issued command.

    Enforces the accepted -> started -> progress* -> terminal phase order and
    hands each new detection to exactly one status.
    """

    msg: TbsMessage
    last_phase: str | None = None
    pending_detections: list[Detection] = field(default_factory=list)

    @property
    def terminal(self) -> bool:
        return self.last_phase in TERMINAL_PHASES

    def add_detection(self, detection: Detection) -> None:
        self.pending_detections.append(detection)

    def make_status(
        self, phase: str, robot: RobotState, time: float, detail: str = ""
    ) -> TbsStatus:
        if phase not in PHASES:
            raise IllegalPhaseTransition(f"unknown phase {phase!r}")
        if phase not in _NEXT_PHASES[self.last_phase]:
            raise IllegalPhaseTransition(
                f"{phase!r} cannot follow {self.last_phase!r} for task {self.msg.msg_id}"
            )
        status = TbsStatus(
            ref_msg_id=self.msg.msg_id,
            robot_id=self.msg.robot_id,
            phase=phase,
            detail=detail,
            pose=(robot.position[0], robot.position[1], robot.altitude),
            detections=tuple(self.pending_detections),
            time=time,
        )
        self.pending_detections.clear()
        self.last_phase = phase
        return status
