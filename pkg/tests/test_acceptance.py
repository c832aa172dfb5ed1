"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line with its stated tolerance."""

import functools
import hashlib
import json
import random
import subprocess
import sys

import pytest

from crewsim import tbs
from crewsim.behavior import Outcome, assign, preempt
from crewsim.dialogue import DialogueContext, DialogueManager, DialogueTurn, load_corpus
from crewsim.errors import AlreadyTerminal
from crewsim.geometry import dist
from crewsim.orchestrator import (
    LogRecord,
    SessionConfig,
    compute_metrics,
    run_headless,
    strip_wall_time,
)
from crewsim.sim import build_state, step
from crewsim.world import LocationRef, load_map

from conftest import bellman_ford_distance, random_road_map


def criterion(number, title):
    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"[FAIL] criterion {number}: {title}")
                raise
            print(f"[PASS] criterion {number}: {title}")

        return run

    return wrap


@pytest.fixture
def demo_config(demo_paths):
    return SessionConfig(
        map_path=demo_paths["map"],
        corpus_path=demo_paths["corpus"],
        scenario_path=demo_paths["scenario"],
    )


def tbs_lines(records):
    return [tbs.decode(r.payload["line"]) for r in records if r.kind == "tbs"]


def dm_turns(records, disposition=None):
    out = []
    for r in records:
        if r.kind == "turn" and r.payload.get("speaker") == "dm":
            if disposition is None or r.payload.get("disposition") == disposition:
                out.append(r)
    return out


@criterion(1, "implicit addressee binds scout to the aerial robot")
def test_c1_implicit_addressee(demo_config):
    demo_config.addressing_mode = "implicit"
    records, _ = run_headless(demo_config, [{"t": 0.0, "say": "Scout route bravo"}])
    messages = tbs_lines(records)
    assert len(messages) == 1
    msg = messages[0]
    assert msg.robot_id == "snapdragon"
    assert msg.action == "SCOUT"
    assert msg.location.kind == "route" and msg.location.name == "bravo"


@criterion(2, "explicit wake targets the woken robot; no wake means clarification")
def test_c2_explicit_wake(demo_config):
    script = [{"t": 0.0, "say": "Husky"}, {"t": 1.0, "say": "go to the gate"}]
    records, _ = run_headless(demo_config, script)
    messages = tbs_lines(records)
    assert len(messages) == 1
    assert messages[0].robot_id == "husky"
    assert messages[0].action == "GOTO"

    records, _ = run_headless(demo_config, [{"t": 0.0, "say": "go to the gate"}])
    assert tbs_lines(records) == []
    assert len(dm_turns(records, "clarification")) == 1


@criterion(3, "clarification loop: one prompt, then one valid command")
def test_c3_clarification_loop(demo_config):
    script = [{"t": 0.0, "say": "Husky, go to"}, {"t": 1.0, "say": "the gate"}]
    records, _ = run_headless(demo_config, script)
    assert len(dm_turns(records, "clarification")) == 1
    messages = tbs_lines(records)
    assert len(messages) == 1
    assert messages[0].robot_id == "husky"
    assert messages[0].location.name == "gate"


def _fuzz_task(rng):
    doc = random_road_map(rng, rng.randint(4, 10), extra_edges=rng.randint(0, 4))
    x0, y0 = rng.uniform(0, 150), rng.uniform(0, 150)
    doc["areas"] = [{
        "name": "zone",
        "polygon": [[x0, y0], [x0 + 40, y0], [x0 + 40, y0 + 30], [x0, y0 + 30]],
    }]
    names = [w["name"] for w in doc["waypoints"]]
    route_len = rng.randint(2, min(4, len(names)))
    doc["routes"] = [{"name": "run", "waypoints": rng.sample(names, route_len)}]
    doc["objects"] = [
        {
            "id": f"obj{i}",
            "class": rng.choice(["injured_person", "other"]),
            "x": rng.uniform(0, 200),
            "y": rng.uniform(0, 200),
        }
        for i in range(rng.randint(0, 3))
    ]
    doc["landing_sites"] = [
        [rng.uniform(0, 200), rng.uniform(0, 200)] for _ in range(rng.randint(0, 2))
    ]
    world = load_map(json.dumps(doc))

    start = rng.choice(names)
    pos = list(world.waypoint(start).position)
    robots = [
        {"id": "g1", "display_name": "G", "kind": "ground", "position": pos,
         "speed_normal": 15.0, "speed_urgent": 30.0},
        {"id": "a1", "display_name": "A", "kind": "aerial", "position": pos,
         "speed_normal": 15.0, "speed_urgent": 30.0, "cruise_altitude": 10.0},
    ]
    state = build_state(world, {"seed": rng.randrange(1 << 30), "tick": 0.1,
                                "robots": robots, "observe_duration": 2.0})
    robot_id = rng.choice(["g1", "a1"])
    robot = state.robot(robot_id)
    action = rng.choice(sorted(robot.capabilities))
    location = None
    leader = None
    if action == "GOTO":
        if rng.random() < 0.8:
            location = LocationRef("waypoint", rng.choice(names))
        else:
            location = LocationRef(
                "coordinates", point=(rng.uniform(0, 200), rng.uniform(0, 200))
            )
    elif action == "SCOUT":
        location = LocationRef("route", "run")
    elif action in ("SEARCH", "PATROL"):
        location = LocationRef("area", "zone")
    elif action == "FOLLOW":
        leader = "a1" if robot_id == "g1" else "g1"
    msg = tbs.TbsMessage(
        msg_id=f"fz-{rng.randrange(1 << 20)}",
        robot_id=robot_id,
        action=action,
        location=location,
        leader_id=leader,
        object_info=rng.choice([None, "injured_person"]),
        modifiers=tbs.Modifiers(urgency=rng.choice(["normal", "urgent"])),
    )
    tbs.validate(msg, world, {r.id: r for r in state.robots})
    return state, msg


@criterion(4, "outcome closure over 1000 fuzzed commands")
def test_c4_outcome_closure():
    rng = random.Random(2024)
    outcomes = {"succeeded": 0, "failed": 0, "interrupted": 0}
    for i in range(1000):
        state, msg = _fuzz_task(rng)
        statuses = []
        task = assign(state, msg, statuses.append)
        preempt_at = rng.randint(5, 120) if rng.random() < 0.4 else None
        ticks = 0
        while not task.machine.terminal:
            ticks += 1
            if ticks > 1500 or (preempt_at is not None and ticks == preempt_at):
                if not task.machine.preempt_requested:
                    preempt(task.machine)
            step(state)
            assert ticks < 1700, (msg.action, task.machine.current)
        assert isinstance(task.machine.current, Outcome)
        terminal_statuses = [s for s in statuses if s.phase in tbs.TERMINAL_PHASES]
        assert len(terminal_statuses) == 1
        expected_phase = (
            "completed" if task.machine.current is Outcome.SUCCEEDED
            else task.machine.current.value
        )
        assert terminal_statuses[0].phase == expected_phase
        outcomes[task.machine.current.value] += 1
        with pytest.raises(AlreadyTerminal):
            task.tick(state)
    assert sum(outcomes.values()) == 1000
    assert all(v > 0 for v in outcomes.values()), outcomes


@criterion(5, "executed GOTO matches the Dijkstra oracle within 1e-6; lands within 0.5 m")
def test_c5_path_optimality():
    rng = random.Random(77)
    for _ in range(200):
        doc = random_road_map(rng, rng.randint(2, 50))
        world = load_map(json.dumps(doc))
        names = [w["name"] for w in doc["waypoints"]]
        start, goal = rng.choice(names), rng.choice(names)
        start_pos = world.waypoint(start).position
        goal_pos = world.waypoint(goal).position
        state = build_state(world, {
            "seed": 1, "tick": 0.1,
            "robots": [{
                "id": "g1", "display_name": "G", "kind": "ground",
                "position": list(start_pos),
                "speed_normal": 10.0, "speed_urgent": 20.0,
            }],
        })
        robot = state.robot("g1")
        msg = tbs.TbsMessage(
            msg_id="m", robot_id="g1", action="GOTO",
            location=LocationRef("waypoint", goal),
        )
        task = assign(state, msg, lambda s: None)
        for _ in range(20000):
            step(state)
            if task.machine.terminal:
                break
        assert task.machine.current is Outcome.SUCCEEDED
        final_gap = dist(robot.position, goal_pos)
        assert final_gap <= 0.5
        # The robot walks the planned polyline waypoint-exactly, so the
        # executed path length is the plan's length.
        executed_length = task.scratch["planned_length"]
        oracle = bellman_ford_distance(doc, start, goal)
        assert executed_length == pytest.approx(oracle, rel=1e-6, abs=1e-9)


def _scout_fixture(with_site: bool):
    doc = {
        "name": "scoutland",
        "waypoints": [
            {"name": "p0", "x": 0, "y": 0},
            {"name": "p1", "x": 100, "y": 0},
        ],
        "edges": [{"from": "p0", "to": "p1"}],
        "routes": [{"name": "run", "waypoints": ["p0", "p1"]}],
        "objects": [{"id": "victim-7", "class": "injured_person", "x": 50, "y": 5}],
        "landing_sites": [[50, 15]] if with_site else [],
    }
    world = load_map(json.dumps(doc))
    state = build_state(world, {
        "seed": 3, "tick": 0.1, "observe_duration": 3.0,
        "robots": [{
            "id": "a1", "display_name": "A", "kind": "aerial", "position": [0, 0],
            "speed_normal": 5.0, "speed_urgent": 10.0, "cruise_altitude": 15.0,
        }],
    })
    msg = tbs.TbsMessage(
        msg_id="scout", robot_id="a1", action="SCOUT",
        location=LocationRef("route", "run"), object_info="injured_person",
    )
    statuses = []
    task = assign(state, msg, statuses.append)
    for _ in range(4000):
        if task.machine.terminal:
            break
        step(state)
    assert task.machine.current is Outcome.SUCCEEDED
    return state, task, statuses


@criterion(6, "scout perches by a nearby site, hovers without one, and reports the find")
def test_c6_scout_branching():
    state, task, statuses = _scout_fixture(with_site=True)
    assert any(e.kind == "perched" for e in state.event_log)
    assert "land_at_site" in task.machine.visited
    assert "hover_observe" not in task.machine.visited
    assert any(d.object_id == "victim-7" for s in statuses for d in s.detections)

    state, task, statuses = _scout_fixture(with_site=False)
    assert "hover_observe" in task.machine.visited
    assert not any(e.kind == "perched" for e in state.event_log)
    assert any(d.object_id == "victim-7" for s in statuses for d in s.detections)


@criterion(7, "follow holds 5 m +/- 1 m for 90% of ticks after warm-up")
def test_c7_follow_band():
    doc = {
        "name": "runway",
        "waypoints": [
            {"name": "p0", "x": 0, "y": 0},
            {"name": "p1", "x": 200, "y": 0},
        ],
        "edges": [{"from": "p0", "to": "p1"}],
    }
    world = load_map(json.dumps(doc))
    state = build_state(world, {
        "seed": 5, "tick": 0.1,
        "robots": [
            {"id": "lead", "display_name": "L", "kind": "ground", "position": [0, 0],
             "speed_normal": 1.0, "speed_urgent": 2.0},
            {"id": "tail", "display_name": "T", "kind": "aerial", "position": [-5, 0],
             "speed_normal": 2.0, "speed_urgent": 4.0, "cruise_altitude": 10.0},
        ],
    })
    goto = tbs.TbsMessage(
        msg_id="lead-go", robot_id="lead", action="GOTO",
        location=LocationRef("waypoint", "p1"),
    )
    follow = tbs.TbsMessage(
        msg_id="tail-follow", robot_id="tail", action="FOLLOW", leader_id="lead",
    )
    assign(state, goto, lambda s: None)
    assign(state, follow, lambda s: None)
    in_band = total = 0
    while state.clock < 90.0:
        step(state)
        if state.clock > 30.0:
            total += 1
            gap = dist(state.robot("lead").position, state.robot("tail").position)
            if abs(gap - 5.0) <= 1.0:
                in_band += 1
    assert total >= 590
    assert in_band / total >= 0.90


@criterion(8, "urgent task completes in time_normal * speed ratio within 10%")
def test_c8_urgency(demo_config):
    def completion(script_text):
        records, metrics = run_headless(demo_config, [{"t": 0.0, "say": script_text}])
        task = next(t for t in metrics.tasks if t.action == "GOTO")
        assert task.outcome == "completed"
        return task.completion_time

    time_normal = completion("Husky, go to the crossroads")
    time_urgent = completion("Husky, go to the crossroads quickly")
    expected = time_normal * (1.0 / 2.0)  # speed_normal / speed_urgent
    assert abs(time_urgent - expected) <= 0.10 * expected


_STABILITY_SCRIPT = r"""
import hashlib, random
from crewsim import tbs
from crewsim.world import LocationRef

rng = random.Random(7)
lines = []
for _ in range(200):
    action = rng.choice(tbs.ACTIONS)
    robot = rng.choice(["husky", "snapdragon"])
    loc = None
    leader = None
    if action == "GOTO":
        loc = LocationRef("coordinates", point=(round(rng.uniform(-500, 500), 3),
                                                round(rng.uniform(-500, 500), 3)))
    elif action == "SCOUT":
        loc = LocationRef("route", rng.choice(["alpha", "bravo"]))
    elif action in ("SEARCH", "PATROL"):
        loc = LocationRef("area", rng.choice(["courtyard", "market"]))
    elif action == "FOLLOW":
        leader = "snapdragon" if robot == "husky" else "husky"
    msg = tbs.TbsMessage(
        msg_id=f"tbs-{rng.randrange(10**4):04d}", robot_id=robot, action=action,
        issued_at=round(rng.uniform(0, 600), 3), location=loc, leader_id=leader,
        object_info=rng.choice([None, "injured_person"]),
        modifiers=tbs.Modifiers(urgency=rng.choice(["normal", "urgent"]),
                                stealth=rng.random() < 0.2),
    )
    lines.append(tbs.encode(msg))
print(hashlib.sha256("\n".join(lines).encode()).hexdigest())
"""


@criterion(9, "codec round-trips 10^4 fuzzed messages; encoding is byte-stable across runs")
def test_c9_protocol_round_trip():
    sys.path.insert(0, "tests")
    from test_tbs import fuzz_message

    rng = random.Random(1234)
    for _ in range(10_000):
        msg = fuzz_message(rng)
        line = tbs.encode(msg)
        assert tbs.decode(line) == msg
        assert tbs.encode(tbs.decode(line)) == line

    digests = [
        subprocess.run(
            [sys.executable, "-c", _STABILITY_SCRIPT],
            capture_output=True, text=True, check=True,
        ).stdout.strip()
        for _ in range(2)
    ]
    assert digests[0] == digests[1]
    assert len(digests[0]) == 64


@criterion(10, "headless runs with a fixed seed produce identical logs modulo wall time")
def test_c10_determinism(demo_config):
    demo_config.addressing_mode = "implicit"
    script = [
        {"t": 0.0, "say": "Husky, go to the crossroads"},
        {"t": 0.5, "say": "Scout route bravo"},
        {"t": 2.0, "say": "Husky, search the market"},
    ]
    runs = [run_headless(demo_config, script) for _ in range(2)]
    first = "\n".join(strip_wall_time(runs[0][0]))
    second = "\n".join(strip_wall_time(runs[1][0]))
    assert first == second
    assert runs[0][1].to_dict() == runs[1][1].to_dict()


OFF_TOPIC_SET = [
    "what is this weather like today",
    "how was lunch",
    "my favorite color is blue",
    "this simulation seems great",
    "when does this demo wrap",
    "tell headquarters we said hello",
    "what time is it",
    "that was impressive",
    "how old is this platform",
    "nice job team",
    "did anyone bring snacks",
    "music was too loud yesterday",
    "i think it might rain later",
    "who won last night's football game",
    "my computer wants more memory",
    "what day is it tomorrow",
    "these old maps belong elsewhere",
    "great flying back then",
    "happy birthday commander",
    "our coffee machine broke once more",
]


@criterion(11, "retrieval sanity: perfect self-retrieval, clean off-topic recovery, exact coverage")
def test_c11_retrieval_sanity(demo_paths, demo_world, demo_scenario):
    state = build_state(demo_world, demo_scenario)
    roster = {r.id: r for r in state.robots}
    corpus = load_corpus(demo_paths["corpus"], roster_ids=set(roster))
    dm = DialogueManager(corpus, demo_world, roster)

    hits = 0
    for pair in corpus:
        ctx = DialogueContext(mode="implicit")
        out, _ = dm.interpret(DialogueTurn("operator", pair.utterance, 0.0), ctx)
        if out.matched_pair == pair.id and abs(out.score - 1.0) <= 1e-9:
            hits += 1
    assert hits == len(corpus)

    assert len(OFF_TOPIC_SET) == 20
    replies = 0
    for text in OFF_TOPIC_SET:
        ctx = DialogueContext(mode="explicit")
        out, _ = dm.interpret(DialogueTurn("operator", text, 0.0), ctx)
        assert out.disposition == "off_topic", text
        assert out.tbs == []
        assert out.reply_to_operator
        replies += 1
    assert replies == 20

    records = [LogRecord(0.0, 0.0, "config", {"version": 1})]
    for i, disposition in enumerate(["executed", "executed", "off_topic", "executed"]):
        records.append(LogRecord(0.0, float(i), "turn", {
            "speaker": "operator", "text": f"u{i}", "time": float(i), "chat_only": False,
        }))
        records.append(LogRecord(0.0, float(i), "turn", {
            "speaker": "dm", "text": "r", "time": float(i), "chat_only": False,
            "disposition": disposition,
        }))
    assert compute_metrics(records).coverage == 0.75


@criterion(12, "wizard-injected command reproduces the auto-DM trajectory and statuses")
def test_c12_wizard_equivalence(demo_config, demo_paths):
    script = [{"t": 0.0, "say": "Husky"}, {"t": 1.0, "say": "go to the gate"}]
    auto_records, _ = run_headless(demo_config, script)
    auto_line = next(r.payload["line"] for r in auto_records if r.kind == "tbs")

    wizard_config = SessionConfig(
        map_path=demo_paths["map"],
        corpus_path=demo_paths["corpus"],
        scenario_path=demo_paths["scenario"],
        dm_mode="wizard",
    )
    wizard_script = [
        {"t": 0.0, "say": "Husky"},
        {"t": 1.0, "say": "go to the gate"},
        {"t": 1.0, "wizard": {"reply": "Roger, sending Husky.", "tbs": auto_line}},
    ]
    wizard_records, _ = run_headless(wizard_config, wizard_script)

    def engine_view(records):
        keep = []
        for r in records:
            if r.kind in ("tbs", "status", "event"):
                keep.append(json.dumps(
                    {"t": r.sim_time, "kind": r.kind, "payload": r.payload},
                    sort_keys=True,
                ))
        return keep

    assert engine_view(auto_records) == engine_view(wizard_records)
    auto_robot_turns = [
        r.payload for r in auto_records
        if r.kind == "turn" and r.payload["speaker"].startswith("robot:")
    ]
    wizard_robot_turns = [
        r.payload for r in wizard_records
        if r.kind == "turn" and r.payload["speaker"].startswith("robot:")
    ]
    assert auto_robot_turns == wizard_robot_turns
