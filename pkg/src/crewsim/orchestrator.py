"""Session service: owns the engine loop and wires dialogue, protocol, and
behaviors together.

Everything observable about a session lands in an append-only JSONL log whose
first record embeds the full effective configuration, so any run can be
replayed or measured after the fact. With a fixed seed, map, corpus, and
script, two headless runs produce identical logs modulo wall-clock stamps.
"""

from __future__ import annotations

import json
import os
import time as _time
from dataclasses import dataclass, field

from . import behavior, sim, tbs
from .dialogue import DialogueContext, DialogueManager, DialogueTurn, load_corpus
from .errors import (
    ConfigError,
    MalformedLog,
    NotInWizardMode,
    NoWizardConnected,
    VersionMismatch,
)
from .geometry import dist
from .world import WorldMap, load_map_file, location_point

LOG_VERSION = 1

LOG_KINDS = ("turn", "tbs", "status", "event", "config")


@dataclass
class SessionConfig:
    map_path: str
    corpus_path: str
    scenario_path: str
    seed: int | None = None
    dm_mode: str = "auto"  # auto | wizard
    addressing_mode: str = "explicit"  # explicit | implicit
    port: int = 8750

    def validated(self) -> "SessionConfig":
        for label, path in (
            ("map", self.map_path), ("corpus", self.corpus_path),
            ("scenario", self.scenario_path),
        ):
            if not os.path.exists(path):
                raise ConfigError(f"{label} file not found: {path}")
        if self.dm_mode not in ("auto", "wizard"):
            raise ConfigError(f"dm_mode must be auto or wizard, got {self.dm_mode!r}")
        if self.addressing_mode not in ("explicit", "implicit"):
            raise ConfigError(
                f"addressing_mode must be explicit or implicit, got {self.addressing_mode!r}"
            )
        return self


@dataclass
class LogRecord:
    wall_time: float
    sim_time: float
    kind: str
    payload: dict

    def to_line(self) -> str:
        doc = {
            "wall": self.wall_time,
            "t": self.sim_time,
            "kind": self.kind,
            "payload": self.payload,
        }
        return json.dumps(doc, separators=(",", ":"))


@dataclass
class TaskMetrics:
    msg_id: str
    robot_id: str
    action: str
    outcome: str | None
    completion_time: float | None
    distance_to_goal: float | None


@dataclass
class Metrics:
    operator_turns: int = 0
    matched_turns: int = 0
    coverage: float = 1.0
    clarifications: int = 0
    tasks: list[TaskMetrics] = field(default_factory=list)
    tasks_completed: int = 0
    tasks_failed: int = 0
    tasks_interrupted: int = 0
    timed_out: bool = False

    def to_dict(self) -> dict:
        return {
            "operator_turns": self.operator_turns,
            "matched_turns": self.matched_turns,
            "coverage": self.coverage,
            "clarifications": self.clarifications,
            "tasks_completed": self.tasks_completed,
            "tasks_failed": self.tasks_failed,
            "tasks_interrupted": self.tasks_interrupted,
            "timed_out": self.timed_out,
            "tasks": [
                {
                    "msg_id": t.msg_id,
                    "robot": t.robot_id,
                    "action": t.action,
                    "outcome": t.outcome,
                    "completion_time": t.completion_time,
                    "distance_to_goal": t.distance_to_goal,
                }
                for t in self.tasks
            ],
        }


def _load_scenario(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read scenario config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("scenario config must be a JSON object")
    return doc


class Session:
    """One live simulation session with its dialogue state and log."""

    def __init__(self, config: SessionConfig, session_id: str = "session-1"):
        config.validated()
        self.id = session_id
        self.config = config
        self.world: WorldMap = load_map_file(config.map_path)
        scenario = _load_scenario(config.scenario_path)
        if config.seed is not None:
            scenario = dict(scenario, seed=config.seed)
        self.scenario = scenario
        self.state = sim.build_state(self.world, scenario)
        roster = {r.id: r for r in self.state.robots}
        corpus = load_corpus(config.corpus_path, roster_ids=set(roster))
        self.dm = DialogueManager(corpus, self.world, roster)
        self.context = DialogueContext(mode=config.addressing_mode)
        self.dm_mode = config.dm_mode
        self.records: list[LogRecord] = []
        self.wizard_inbox: list[DialogueTurn] = []
        self.wizard_connected = False
        self.subscribers: list = []  # callables taking one frame dict
        self._log("config", self._effective_config())

    # -- logging and streaming ----------------------------------------------

    def _effective_config(self) -> dict:
        return {
            "version": LOG_VERSION,
            "session": self.id,
            "map": self.world.name,
            "map_path": self.config.map_path,
            "corpus_path": self.config.corpus_path,
            "scenario": self.scenario,
            "dm_mode": self.dm_mode,
            "addressing_mode": self.config.addressing_mode,
            "roster": [
                {"id": r.id, "display_name": r.display_name, "kind": r.kind}
                for r in self.state.robots
            ],
        }

    def _log(self, kind: str, payload: dict) -> LogRecord:
        record = LogRecord(_time.time(), self.state.clock, kind, payload)
        self.records.append(record)
        return record

    def _broadcast(self, frame: dict, wizard_only: bool = False) -> None:
        for subscriber in list(self.subscribers):
            subscriber(frame, wizard_only)

    def _turn_payload(self, turn: DialogueTurn, **extra) -> dict:
        doc = {
            "speaker": turn.speaker,
            "text": turn.text,
            "time": turn.time,
            "chat_only": turn.chat_only,
        }
        doc.update(extra)
        return doc

    def _log_turn(self, turn: DialogueTurn, **extra) -> None:
        payload = self._turn_payload(turn, **extra)
        self._log("turn", payload)
        self._broadcast({"type": "chat", "payload": payload})

    # -- command intake -------------------------------------------------------

    def submit_say(self, text: str) -> None:
        """Apply one operator utterance at the current sim time."""
        turn = DialogueTurn(speaker="operator", text=text, time=self.state.clock)
        if self.dm_mode == "wizard":
            self.context.transcript.append(turn)
            self._log_turn(turn)
            self.wizard_inbox.append(turn)
            self._broadcast(
                {"type": "wizard_inbox", "payload": self._turn_payload(turn)},
                wizard_only=True,
            )
            return
        output, _ = self.dm.interpret(turn, self.context)
        self._log_turn(turn)
        reply = self.context.transcript[-1]
        self._log_turn(
            reply,
            disposition=output.disposition,
            matched_pair=output.matched_pair,
            score=output.score,
        )
        for msg in output.tbs:
            self._execute_tbs(msg)

    def set_dm_mode(self, mode: str) -> None:
        if mode not in ("auto", "wizard"):
            raise ConfigError(f"unknown dm mode {mode!r}")
        if mode == "wizard" and not self.wizard_connected:
            raise NoWizardConnected("no wizard client connected")
        self.dm_mode = mode
        self._broadcast({"type": "control", "payload": {"event": "dm_mode", "mode": mode}})

    def wizard_submit(self, reply: str, message: tbs.TbsMessage | None = None) -> None:
        """Apply a wizard's reply and optional command.

        Validation errors raise to the caller (the wizard) without touching
        the session.
        """
        if self.dm_mode != "wizard":
            raise NotInWizardMode("session is running the automatic DM")
        if message is not None:
            roster = {r.id: r for r in self.state.robots}
            tbs.validate(message, self.world, roster)
        if reply:
            turn = DialogueTurn(speaker="wizard", text=reply, time=self.state.clock)
            self.context.transcript.append(turn)
            self._log_turn(turn)
        if message is not None:
            self.context.issued[message.msg_id] = message
            self.context.busy[message.robot_id] = True
            self._execute_tbs(message)

    def _execute_tbs(self, msg: tbs.TbsMessage) -> None:
        goal = None
        if msg.location is not None:
            point = location_point(msg.location, self.world)
            goal = [point[0], point[1]]
        line = tbs.encode(msg)
        self._log("tbs", {"line": line, "goal": goal})
        behavior.assign(self.state, msg, self._on_status)

    def _on_status(self, status: tbs.TbsStatus) -> None:
        line = tbs.encode_status(status)
        self._log("status", {"line": line})
        turn = self.dm.on_status(status, self.context)
        if turn is not None:
            self._log_turn(turn)

    # -- engine loop -----------------------------------------------------------

    def tick(self) -> list[sim.SimEvent]:
        events = sim.step(self.state)
        for event in events:
            self._log(
                "event",
                {"event": event.kind, "robot": event.robot_id, "data": event.payload},
            )
        return events

    def snapshot_frame(self) -> dict:
        payload = sim.snapshot(self.state)
        payload["dm_mode"] = self.dm_mode
        payload["addressing_mode"] = self.context.mode
        return {"type": "state", "payload": payload}

    def idle(self) -> bool:
        return all(r.active_task is None for r in self.state.robots)

    def hello_frame(self) -> dict:
        config = self._effective_config()
        with open(self.config.map_path, encoding="utf-8") as fh:
            map_doc = json.load(fh)
        quick_replies = sorted({p.response_template for p in self.dm.corpus.values()})
        return {
            "type": "control",
            "payload": {
                "event": "hello",
                "session": self.id,
                "map": map_doc,
                "config": config,
                "quick_replies": quick_replies,
                "transcript": [self._turn_payload(t) for t in self.context.transcript],
            },
        }


def _parse_script(script: list[dict]) -> list[dict]:
    last_t = 0.0
    parsed = []
    for i, item in enumerate(script):
        if not isinstance(item, dict) or "t" not in item:
            raise ConfigError(f"script item {i} needs a 't' field")
        t = float(item["t"])
        if t < last_t:
            raise ConfigError("script times must be non-decreasing")
        last_t = t
        if "say" in item:
            parsed.append({"t": t, "say": item["say"]})
        elif "wizard" in item:
            parsed.append({"t": t, "wizard": item["wizard"]})
        else:
            raise ConfigError(f"script item {i} needs 'say' or 'wizard'")
    return parsed


def run_headless(
    config: SessionConfig, script: list[dict]
) -> tuple[list[LogRecord], Metrics]:
    """Drive a session from a timed script until every task settles.

    Returns the full log and its metrics. A run that exceeds the scenario
    timeout reports timed_out in its metrics rather than raising.
    """
    items = _parse_script(script)
    session = Session(config)
    if config.dm_mode == "wizard":
        session.wizard_connected = True
    state = session.state
    timeout = state.config.timeout
    timed_out = False
    cursor = 0
    while True:
        while cursor < len(items) and items[cursor]["t"] <= state.clock + 1e-9:
            item = items[cursor]
            cursor += 1
            if "say" in item:
                session.submit_say(item["say"])
            else:
                wiz = item["wizard"]
                message = tbs.decode(wiz["tbs"]) if wiz.get("tbs") else None
                session.wizard_submit(wiz.get("reply", ""), message)
        if cursor >= len(items) and session.idle():
            break
        if state.clock >= timeout:
            timed_out = True
            break
        session.tick()
    metrics = compute_metrics(session.records)
    metrics.timed_out = timed_out
    return session.records, metrics


def write_log(records: list[LogRecord], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(record.to_line() + "\n")


def read_log(path: str) -> list[LogRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
                records.append(
                    LogRecord(doc["wall"], doc["t"], doc["kind"], doc["payload"])
                )
            except (json.JSONDecodeError, KeyError) as exc:
                raise MalformedLog(f"{path}:{lineno}: {exc}") from exc
    return records


def strip_wall_time(records: list[LogRecord]) -> list[str]:
    """Comparable serialization of a log with wall-clock stamps removed."""
    out = []
    for record in records:
        doc = {"t": record.sim_time, "kind": record.kind, "payload": record.payload}
        out.append(json.dumps(doc, separators=(",", ":"), sort_keys=True))
    return out


def compute_metrics(records: list[LogRecord]) -> Metrics:
    """Derive dialogue and task measures from a session log."""
    if not records or records[0].kind != "config":
        raise MalformedLog("log must start with a config record")
    metrics = Metrics()
    off_topic = 0
    goals: dict[str, tuple[float, float] | None] = {}
    msgs: dict[str, tbs.TbsMessage] = {}
    accepted_at: dict[str, float] = {}
    terminal: dict[str, tbs.TbsStatus] = {}
    for record in records:
        if record.kind == "turn":
            speaker = record.payload.get("speaker")
            if speaker == "operator":
                metrics.operator_turns += 1
            elif speaker == "dm":
                disposition = record.payload.get("disposition")
                if disposition == "clarification":
                    metrics.clarifications += 1
                elif disposition == "off_topic":
                    off_topic += 1
        elif record.kind == "tbs":
            msg = tbs.decode(record.payload["line"])
            msgs[msg.msg_id] = msg
            goal = record.payload.get("goal")
            goals[msg.msg_id] = tuple(goal) if goal else None
        elif record.kind == "status":
            status = tbs.decode_status(record.payload["line"])
            if status.phase == "accepted":
                accepted_at[status.ref_msg_id] = status.time
            elif status.phase in tbs.TERMINAL_PHASES:
                terminal[status.ref_msg_id] = status
    metrics.matched_turns = max(metrics.operator_turns - off_topic, 0)
    if metrics.operator_turns > 0:
        metrics.coverage = metrics.matched_turns / metrics.operator_turns
    else:
        metrics.coverage = 1.0
    for msg_id, msg in msgs.items():
        status = terminal.get(msg_id)
        outcome = status.phase if status else None
        completion = None
        if status and msg_id in accepted_at:
            completion = status.time - accepted_at[msg_id]
        distance = None
        goal = goals.get(msg_id)
        if status and goal:
            distance = dist((status.pose[0], status.pose[1]), goal)
        metrics.tasks.append(
            TaskMetrics(msg_id, msg.robot_id, msg.action, outcome, completion, distance)
        )
        if outcome == "completed":
            metrics.tasks_completed += 1
        elif outcome == "failed":
            metrics.tasks_failed += 1
        elif outcome == "interrupted":
            metrics.tasks_interrupted += 1
    return metrics


def replay(records: list[LogRecord]):
    """Re-emit a logged session as console frames without re-execution.

    Yields the config hello, chat frames for every turn, and pose updates
    reconstructed from status records.
    """
    if not records or records[0].kind != "config":
        raise MalformedLog("log must start with a config record")
    header = records[0].payload
    if header.get("version") != LOG_VERSION:
        raise VersionMismatch(
            f"log version {header.get('version')!r}, expected {LOG_VERSION}"
        )
    yield {"type": "control", "payload": {"event": "replay", "config": header}}
    for record in records[1:]:
        if record.kind == "turn":
            yield {"type": "chat", "payload": record.payload}
        elif record.kind == "status":
            status = tbs.decode_status(record.payload["line"])
            yield {
                "type": "state",
                "payload": {
                    "t": status.time,
                    "robots": [
                        {
                            "id": status.robot_id,
                            "x": status.pose[0],
                            "y": status.pose[1],
                            "altitude": status.pose[2],
                            "phase": status.phase,
                        }
                    ],
                    "replay": True,
                },
            }
