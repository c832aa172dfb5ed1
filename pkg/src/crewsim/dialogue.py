"""Turns operator text into validated commands and operator-facing replies.

The pipeline is: normalize -> retrieval scoring over a training corpus ->
addressee resolution (explicit wake or implicit capability binding) -> slot
extraction against the map gazetteer -> command emission or a clarification
question. Robot feedback comes back through on_status as templated chat turns.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Protocol

from .errors import UnknownRobotName, TbsValidationError
from .sim import RobotState
from .tbs import Modifiers, TbsMessage, TbsStatus, validate
from .world import LocationRef, WorldMap, resolve_location

DEFAULT_SCORE_THRESHOLD = 0.35

CATEGORIES = ("wake", "navigate", "follow", "inspect", "patrol")
SLOT_NAMES = ("robot", "destination", "route", "area", "leader")

URGENCY_WORDS = frozenset({"quickly", "fast", "urgent", "hurry", "asap"})
BROADCAST_WORDS = frozenset({"both", "everyone", "everybody"})

_SLOT_PROMPTS = {
    "robot": "Which robot should do that?",
    "destination": "Where to?",
    "route": "Which route?",
    "area": "Which area?",
    "leader": "Which robot should be followed?",
}

_CLASS_PHRASES = {"injured_person": "injured person", "other": "object"}


@dataclass
class TrainingPair:
    id: str
    utterance: str
    category: str
    robot_binding: str
    response_template: str
    tbs_template: dict | None
    required_slots: tuple[str, ...]
    tokens: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.tokens:
            self.tokens = tuple(normalize(self.utterance))


@dataclass
class PendingFrame:
    pair_id: str
    filled: dict
    missing: set[str]
    created: float


@dataclass
class DialogueTurn:
    speaker: str  # operator | robot:<id> | dm | wizard
    text: str
    time: float
    chat_only: bool = False


@dataclass
class DmOutput:
    reply_to_operator: str
    tbs: list[TbsMessage]
    matched_pair: str | None
    score: float
    disposition: str  # executed | clarification | wake_ack | off_topic


@dataclass
class DialogueContext:
    mode: str = "explicit"  # explicit | implicit
    attended_robot: str | None = None
    attended_since: float = 0.0
    pending: PendingFrame | None = None
    busy: dict[str, bool] = field(default_factory=dict)
    transcript: list[DialogueTurn] = field(default_factory=list)
    threshold: float = DEFAULT_SCORE_THRESHOLD
    issued: dict[str, TbsMessage] = field(default_factory=dict)
    _msg_counter: int = 0

    def next_msg_id(self) -> str:
        self._msg_counter += 1
        return f"tbs-{self._msg_counter:04d}"


def normalize(text: str) -> list[str]:
    """Lowercase, strip punctuation, split on whitespace."""
    cleaned = re.sub(r"[^a-z0-9\s]", " ", text.lower())
    return cleaned.split()


class RetrievalScorer(Protocol):
    """Pluggable relevance model; fit on the corpus, then rank utterances."""

    def fit(self, pairs: list[TrainingPair]) -> "RetrievalScorer": ...

    def rank(self, tokens: list[str]) -> list[tuple[str, float]]: ...


class TfidfScorer:
    """Cosine similarity between TF-IDF vectors, IDF over the corpus.

    tf is the raw term count; idf(t) = 1 + ln(N / df(t)). Tokens absent from
    the corpus contribute nothing. Ties rank by lowest pair id.
    """

    def __init__(self):
        self._idf: dict[str, float] = {}
        self._vectors: list[tuple[str, dict[str, float], float]] = []

    def fit(self, pairs: list[TrainingPair]) -> "TfidfScorer":
        n = len(pairs)
        if n == 0:
            raise ValueError("corpus is empty")
        df: Counter = Counter()
        for pair in pairs:
            df.update(set(pair.tokens))
        self._idf = {term: 1.0 + math.log(n / count) for term, count in df.items()}
        self._vectors = []
        for pair in sorted(pairs, key=lambda p: p.id):
            vec = self._vectorize(pair.tokens)
            norm = math.sqrt(sum(w * w for w in vec.values()))
            self._vectors.append((pair.id, vec, norm))
        return self

    def _vectorize(self, tokens) -> dict[str, float]:
        counts = Counter(t for t in tokens if t in self._idf)
        return {t: c * self._idf[t] for t, c in counts.items()}

    def rank(self, tokens: list[str]) -> list[tuple[str, float]]:
        query = self._vectorize(tokens)
        qnorm = math.sqrt(sum(w * w for w in query.values()))
        scored = []
        for pair_id, vec, norm in self._vectors:
            if qnorm == 0.0 or norm == 0.0:
                scored.append((pair_id, 0.0))
                continue
            dot = sum(w * vec.get(t, 0.0) for t, w in query.items())
            scored.append((pair_id, dot / (qnorm * norm)))
        scored.sort(key=lambda item: (-item[1], item[0]))
        return scored


def score(tokens: list[str], pairs: list[TrainingPair]) -> list[tuple[str, float]]:
    """One-shot ranking of an utterance against a corpus."""
    return TfidfScorer().fit(pairs).rank(tokens)


def load_corpus(path: str, roster_ids: set[str] | None = None) -> list[TrainingPair]:
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                pairs.append(parse_pair(json.loads(line), roster_ids))
            except (ValueError, json.JSONDecodeError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    if not pairs:
        raise ValueError(f"{path}: corpus is empty")
    return pairs


def parse_pair(doc: dict, roster_ids: set[str] | None = None) -> TrainingPair:
    required = {"id", "utterance", "category", "robot_binding", "response_template",
                "tbs_template", "required_slots"}
    if set(doc) != required:
        raise ValueError(f"pair fields must be exactly {sorted(required)}")
    if doc["category"] not in CATEGORIES:
        raise ValueError(f"unknown category {doc['category']!r}")
    binding = doc["robot_binding"]
    if binding.startswith("implicit:"):
        bound = binding.split(":", 1)[1]
        if roster_ids is not None and bound not in roster_ids:
            raise ValueError(f"implicit binding names unknown robot {bound!r}")
    elif binding not in ("explicit-name", "addressee-context", "broadcast"):
        raise ValueError(f"unknown robot_binding {binding!r}")
    template = doc["tbs_template"]
    if (template is None) != (doc["category"] == "wake"):
        raise ValueError("tbs_template must be absent exactly for wake pairs")
    slots = tuple(doc["required_slots"])
    for slot in slots:
        if slot not in SLOT_NAMES:
            raise ValueError(f"unknown slot {slot!r}")
    return TrainingPair(
        id=doc["id"],
        utterance=doc["utterance"],
        category=doc["category"],
        robot_binding=binding,
        response_template=doc["response_template"],
        tbs_template=template,
        required_slots=slots,
    )


def _gazetteer(world: WorldMap) -> list[tuple[tuple[str, ...], str, str]]:
    """(token sequence, slot name, canonical name) for every nameable entity."""
    entries = []
    for key, wp in world.waypoints.items():
        entries.append((tuple(normalize(wp.name)), "destination", wp.name))
    for key, route in world.routes.items():
        entries.append((tuple(normalize(route.name)), "route", route.name))
    for key, area in world.areas.items():
        entries.append((tuple(normalize(area.name)), "area", area.name))
    entries.sort(key=lambda e: (-len(e[0]), e[0]))
    return entries


def _roster_name_index(roster: dict[str, RobotState]) -> dict[str, str]:
    index = {}
    for robot_id, robot in roster.items():
        index[robot_id.casefold()] = robot_id
        index[robot.display_name.casefold()] = robot_id
    return index


def extract_slots(
    tokens: list[str], world: WorldMap, roster: dict[str, RobotState]
) -> dict:
    """Gazetteer match of map entities and robot names; longest match wins."""
    slots: dict = {}
    robots_mentioned: list[str] = []
    entries = _gazetteer(world)
    names = _roster_name_index(roster)
    i = 0
    while i < len(tokens):
        matched = False
        for seq, slot, canonical in entries:
            if seq and tuple(tokens[i:i + len(seq)]) == seq:
                slots.setdefault(slot, canonical)
                i += len(seq)
                matched = True
                break
        if matched:
            continue
        robot_id = names.get(tokens[i])
        if robot_id is not None and robot_id not in robots_mentioned:
            robots_mentioned.append(robot_id)
        i += 1
    if robots_mentioned:
        slots["robots"] = tuple(robots_mentioned)
    if any(t in URGENCY_WORDS for t in tokens):
        slots["urgency"] = "urgent"
    return slots


def resolve_addressee(
    tokens: list[str],
    pair: TrainingPair | None,
    context: DialogueContext,
    roster: dict[str, RobotState],
) -> tuple[str, object]:
    """Decide which robot(s) an utterance addresses.

    Returns one of:
      ("wake", (robot_id, remainder_tokens))  leading roster name
      ("robots", (robot_id, ...))             resolved target(s)
      ("broadcast", None)                     all capable robots
      ("clarify", None)                       addressee unknown
    """
    names = _roster_name_index(roster)
    if tokens and tokens[0] in names:
        return ("wake", (names[tokens[0]], tuple(tokens[1:])))
    if any(t in BROADCAST_WORDS for t in tokens) or _has_you_two(tokens):
        return ("broadcast", None)
    binding = pair.robot_binding if pair is not None else "addressee-context"
    if binding.startswith("implicit:") and context.mode == "implicit":
        return ("robots", (binding.split(":", 1)[1],))
    if context.attended_robot is not None:
        return ("robots", (context.attended_robot,))
    return ("clarify", None)


def _has_you_two(tokens: list[str]) -> bool:
    return any(a == "you" and b == "two" for a, b in zip(tokens, tokens[1:]))


def check_vocative(text: str, roster: dict[str, RobotState]) -> None:
    """Raise UnknownRobotName for a comma-vocative prefix not in the roster."""
    match = re.match(r"\s*([A-Za-z][\w'-]*)\s*,", text)
    if match is None:
        return
    word = match.group(1)
    if word.lower() not in _roster_name_index(roster):
        raise UnknownRobotName(word)


def _build_message(
    pair: TrainingPair,
    slots: dict,
    robot_id: str,
    context: DialogueContext,
    issued_at: float,
    world: WorldMap,
) -> TbsMessage:
    template = pair.tbs_template or {}
    location: LocationRef | None = None
    slot_name = template.get("location_slot")
    if slot_name is not None:
        location = resolve_location(slots[slot_name], world)
    leader = slots.get("leader") if template.get("leader_slot") else None
    urgency = slots.get("urgency", "normal")
    return TbsMessage(
        msg_id=context.next_msg_id(),
        robot_id=robot_id,
        action=template["action"],
        issued_at=issued_at,
        location=location,
        object_info=template.get("object_info"),
        leader_id=leader,
        modifiers=Modifiers(urgency=urgency),
    )


def _render_reply(pair: TrainingPair, slots: dict, robot_names: str) -> str:
    text = pair.response_template
    values = dict(slots)
    values["robot"] = robot_names
    for key, value in values.items():
        if isinstance(value, str):
            text = text.replace("{" + key + "}", value)
    return text


def _describe(msg: TbsMessage, roster: dict[str, RobotState]) -> str:
    loc = msg.location.name if msg.location and msg.location.name else None
    if msg.action == "GOTO":
        return f"moving to {loc}" if loc else "moving out"
    if msg.action == "SCOUT":
        return f"scouting route {loc}"
    if msg.action == "SEARCH":
        return f"searching the {loc}"
    if msg.action == "PATROL":
        return f"patrolling the {loc}"
    if msg.action == "FOLLOW":
        leader = roster.get(msg.leader_id)
        return f"following {leader.display_name if leader else msg.leader_id}"
    return f"{msg.action.lower()} in progress"


class DialogueManager:
    """Retrieval DM bound to one corpus, map, and roster."""

    def __init__(
        self,
        corpus: list[TrainingPair],
        world: WorldMap,
        roster: dict[str, RobotState],
        scorer: RetrievalScorer | None = None,
        threshold: float = DEFAULT_SCORE_THRESHOLD,
    ):
        self.corpus = {p.id: p for p in corpus}
        self.world = world
        self.roster = roster
        self.scorer = (scorer or TfidfScorer()).fit(corpus)
        self.threshold = threshold

    def interpret(
        self, turn: DialogueTurn, context: DialogueContext
    ) -> tuple[DmOutput, DialogueContext]:
        """Interpret one operator turn, mutating and returning the context."""
        context.transcript.append(turn)
        tokens = normalize(turn.text)
        if context.pending is not None:
            output = self._continue_frame(turn, tokens, context)
        else:
            output = self._fresh(turn, tokens, context, addressee=None)
        reply = DialogueTurn(speaker="dm", text=output.reply_to_operator, time=turn.time)
        context.transcript.append(reply)
        for msg in output.tbs:
            context.busy[msg.robot_id] = True
            context.issued[msg.msg_id] = msg
        return output, context

    # -- fresh interpretation ------------------------------------------------

    def _fresh(
        self,
        turn: DialogueTurn,
        tokens: list[str],
        context: DialogueContext,
        addressee: str | None,
        notice: str = "",
    ) -> DmOutput:
        if not tokens:
            return DmOutput(notice + "Say again?", [], None, 0.0, "off_topic")
        if addressee is None:
            try:
                check_vocative(turn.text, self.roster)
            except UnknownRobotName as exc:
                return DmOutput(
                    notice + f"There is no robot named {exc} on this team.",
                    [], None, 0.0, "off_topic",
                )
        ranked = self.scorer.rank(tokens)
        best_id, best_score = ranked[0]
        names = _roster_name_index(self.roster)
        # An exact corpus hit is handled by its own pair (wake pairs may lead
        # with a robot name); only novel name-prefixed text gets wake-stripped.
        exact_hit = best_score >= 1.0 - 1e-9
        if addressee is None and not exact_hit and tokens[0] in names:
            # Leading roster name wakes that robot; any remainder re-enters
            # interpretation addressed to it.
            robot_id = names[tokens[0]]
            context.attended_robot = robot_id
            context.attended_since = turn.time
            remainder = list(tokens[1:])
            if not remainder:
                name = self.roster[robot_id].display_name
                return DmOutput(
                    notice + f"{name} standing by.", [], best_id, best_score, "wake_ack"
                )
            return self._fresh(turn, remainder, context, addressee=robot_id, notice=notice)
        if best_score < self.threshold:
            return DmOutput(
                notice + "I didn't catch that. Try a task like 'go to', 'scout', "
                "'search', 'patrol', or 'follow'.",
                [], None, best_score, "off_topic",
            )
        pair = self.corpus[best_id]
        slots = extract_slots(tokens, self.world, self.roster)

        if pair.category == "wake":
            mentioned = slots.get("robots", ())
            target = addressee or (mentioned[0] if mentioned else None)
            if target is None:
                return DmOutput(
                    notice + "Which robot do you want?", [], best_id, best_score,
                    "clarification",
                )
            context.attended_robot = target
            context.attended_since = turn.time
            name = self.roster[target].display_name
            return DmOutput(notice + f"{name} standing by.", [], best_id, best_score, "wake_ack")

        robots = self._addressees(tokens, pair, context, addressee)
        filled = self._fill_from_slots(pair, slots, addressee, robots)
        missing = self._missing_slots(pair, filled, robots)
        if missing:
            context.pending = PendingFrame(
                pair_id=best_id, filled=filled, missing=missing, created=turn.time
            )
            prompt = _SLOT_PROMPTS[self._next_prompt(missing)]
            return DmOutput(notice + prompt, [], best_id, best_score, "clarification")
        return self._execute(pair, filled, robots, turn, context, best_score, notice)

    def _addressees(
        self,
        tokens: list[str],
        pair: TrainingPair,
        context: DialogueContext,
        addressee: str | None,
    ) -> tuple[str, ...] | None:
        if addressee is not None:
            return (addressee,)
        kind, value = resolve_addressee(tokens, pair, context, self.roster)
        if kind == "robots":
            return value
        if kind == "broadcast":
            action = (pair.tbs_template or {}).get("action")
            capable = tuple(
                r.id for r in self.roster.values()
                if action is None or action in r.capabilities
            )
            context.attended_robot = None
            return capable
        return None

    def _fill_from_slots(
        self,
        pair: TrainingPair,
        slots: dict,
        addressee: str | None,
        robots: tuple[str, ...] | None,
    ) -> dict:
        filled = {
            k: v for k, v in slots.items()
            if k in ("destination", "route", "area", "urgency")
        }
        if pair.category == "follow":
            mentioned = [r for r in slots.get("robots", ()) if r != addressee]
            exclude = set(robots or ()) if robots is not None else set()
            candidates = [r for r in mentioned if r not in exclude] or mentioned
            if candidates:
                filled["leader"] = candidates[0]
        if robots is not None:
            filled["robot"] = robots
        return filled

    def _missing_slots(
        self, pair: TrainingPair, filled: dict, robots: tuple[str, ...] | None
    ) -> set[str]:
        missing = {slot for slot in pair.required_slots if slot not in filled}
        if robots is None:
            missing.add("robot")
        return missing

    @staticmethod
    def _next_prompt(missing: set[str]) -> str:
        for slot in SLOT_NAMES:
            if slot in missing:
                return slot
        return sorted(missing)[0]

    # -- pending frame -------------------------------------------------------

    def _continue_frame(
        self, turn: DialogueTurn, tokens: list[str], context: DialogueContext
    ) -> DmOutput:
        frame = context.pending
        pair = self.corpus[frame.pair_id]
        slots = extract_slots(tokens, self.world, self.roster)
        fillable: dict = {}
        for slot in list(frame.missing):
            if slot in ("destination", "route", "area") and slot in slots:
                fillable[slot] = slots[slot]
            elif slot == "robot" and slots.get("robots"):
                fillable["robot"] = (slots["robots"][0],)
                context.attended_robot = slots["robots"][0]
                context.attended_since = turn.time
            elif slot == "leader" and slots.get("robots"):
                current = frame.filled.get("robot") or ()
                leaders = [r for r in slots["robots"] if r not in current]
                if leaders:
                    fillable["leader"] = leaders[0]
        if not fillable:
            fresh = self._fresh(turn, tokens, context, addressee=None)
            if fresh.disposition == "off_topic":
                prompt = _SLOT_PROMPTS[self._next_prompt(frame.missing)]
                return DmOutput(
                    f"{fresh.reply_to_operator} {prompt}",
                    [], frame.pair_id, fresh.score, "clarification",
                )
            # A new instruction (or wake) abandons the pending frame; _fresh
            # may have installed its own frame, which must survive.
            if context.pending is frame:
                context.pending = None
            fresh.reply_to_operator = (
                "Dropping the earlier request. " + fresh.reply_to_operator
            )
            return fresh
        frame.filled.update({k: v for k, v in fillable.items() if k != "robot"})
        if "robot" in fillable:
            frame.filled["robot"] = fillable["robot"]
        if "urgency" in slots:
            frame.filled.setdefault("urgency", slots["urgency"])
        frame.missing -= set(fillable)
        if frame.missing:
            prompt = _SLOT_PROMPTS[self._next_prompt(frame.missing)]
            return DmOutput(prompt, [], frame.pair_id, 1.0, "clarification")
        context.pending = None
        robots = tuple(frame.filled.get("robot") or ())
        if not robots and context.attended_robot:
            robots = (context.attended_robot,)
        return self._execute(pair, frame.filled, robots, turn, context, 1.0, "")

    # -- execution -----------------------------------------------------------

    def _execute(
        self,
        pair: TrainingPair,
        filled: dict,
        robots: tuple[str, ...] | None,
        turn: DialogueTurn,
        context: DialogueContext,
        match_score: float,
        notice: str,
    ) -> DmOutput:
        messages = []
        for robot_id in robots or ():
            msg = _build_message(pair, filled, robot_id, context, turn.time, self.world)
            try:
                validate(msg, self.world, self.roster)
            except TbsValidationError as exc:
                context.pending = None
                return DmOutput(
                    notice + f"Can't do that: {exc}.", [], pair.id, match_score,
                    "clarification",
                )
            messages.append(msg)
        if not messages:
            return DmOutput(
                notice + _SLOT_PROMPTS["robot"], [], pair.id, match_score, "clarification"
            )
        names = " and ".join(self.roster[m.robot_id].display_name for m in messages)
        reply = notice + _render_reply(pair, filled, names)
        return DmOutput(reply, messages, pair.id, match_score, "executed")

    # -- robot feedback ------------------------------------------------------

    def on_status(
        self, status: TbsStatus, context: DialogueContext
    ) -> DialogueTurn | None:
        """Phrase a robot status as an operator-facing chat turn."""
        robot = self.roster.get(status.robot_id)
        name = robot.display_name if robot else status.robot_id
        msg = context.issued.get(status.ref_msg_id)
        stealth = bool(msg and msg.modifiers.stealth)
        text: str | None = None
        if status.phase == "accepted":
            detail = _describe(msg, self.roster) if msg else "on it"
            text = f"{name}: roger, {detail}."
        elif status.phase == "progress":
            if status.detections:
                parts = [
                    f"found {_CLASS_PHRASES.get(d.kind, d.kind)} {d.object_id} "
                    f"at ({d.position[0]:.1f}, {d.position[1]:.1f})"
                    for d in status.detections
                ]
                text = f"{name}: " + "; ".join(parts) + "."
            elif status.detail:
                text = f"{name}: {status.detail}."
        elif status.phase == "completed":
            if msg and msg.action == "GOTO" and msg.location and msg.location.name:
                text = f"{name}: arrived at {msg.location.name}."
            elif status.detections:
                parts = [f"found {d.object_id}" for d in status.detections]
                text = f"{name}: task complete; " + "; ".join(parts) + "."
            else:
                text = f"{name}: task complete."
        elif status.phase == "failed":
            text = f"{name}: unable to comply, {status.detail}."
        elif status.phase == "interrupted":
            text = f"{name}: task interrupted."
        if status.phase in ("completed", "failed", "interrupted"):
            context.busy[status.robot_id] = False
        if text is None:
            return None
        turn = DialogueTurn(
            speaker=f"robot:{status.robot_id}", text=text, time=status.time,
            chat_only=stealth,
        )
        context.transcript.append(turn)
        return turn
