"""Template-driven generator for the instruction training corpus.

Emits one JSONL line per training pair, expanded over the map's entity names
and the robot roster. Pairs are deduplicated by token multiset so that exact
self-retrieval stays unambiguous.
"""

from __future__ import annotations

import json
from collections import Counter

from .dialogue import normalize
from .world import WorldMap

WAKE_FORMS = [
    "{name}",
    "hey {name}",
    "{name} wake up",
    "{name} are you there",
    "{name} come in",
    "{name} do you copy",
    "{name} report in",
    "{name} check in",
    "{name} respond",
    "{name} you awake",
    "rise and shine {name}",
    "radio check {name}",
    "{name} sound off",
    "calling {name}",
    "{name} status check",
]

NAVIGATE_FORMS = [
    "go to {dest}",
    "go to the {dest}",
    "navigate to {dest}",
    "head to the {dest}",
    "move to {dest}",
    "drive to the {dest}",
    "proceed to {dest}",
    "roll out to the {dest}",
    "go to the {dest} quickly",
    "hurry to the {dest}",
]

NAVIGATE_BARE = [
    "go to",
    "navigate",
    "move out",
    "head over there",
    "get moving",
]

FOLLOW_FORMS = [
    "follow {leader}",
    "follow {leader} closely",
    "tail {leader}",
    "stay behind {leader}",
    "follow behind {leader}",
    "keep following {leader}",
    "stick with {leader}",
    "shadow {leader}",
    "fall in behind {leader}",
    "track {leader} and keep up",
    "maintain formation behind {leader}",
    "stay on {leader}",
    "do not lose {leader}",
    "keep pace with {leader}",
]

FOLLOW_BARE = ["follow", "start following"]

SCOUT_FORMS = [
    "scout route {route}",
    "scout {route}",
    "fly route {route}",
    "fly over route {route}",
    "survey route {route}",
    "inspect route {route}",
    "scout ahead on route {route}",
    "run route {route} and report",
    "take a look along route {route}",
    "recon route {route}",
]

SCOUT_BARE = ["scout route", "scout ahead", "fly a recon"]

SEARCH_FORMS = [
    "search the {area}",
    "search {area} for casualties",
    "sweep the {area}",
    "inspect the {area}",
    "look for survivors in the {area}",
    "comb the {area}",
    "check the {area} for injured people",
    "cover the {area}",
]

SEARCH_BARE = ["search the area", "start a search", "look for survivors"]

PATROL_FORMS = [
    "patrol the {area}",
    "patrol {area}",
    "keep watch over the {area}",
    "circle the {area}",
    "patrol the {area} perimeter",
    "walk the {area} perimeter",
    "keep eyes on the {area}",
    "guard the {area}",
    "hold a patrol around the {area}",
    "loop around the {area}",
]

PATROL_BARE = ["patrol", "start a patrol", "keep watch"]


def _pair(pid, utterance, category, binding, response, template, slots):
    return {
        "id": pid,
        "utterance": utterance,
        "category": category,
        "robot_binding": binding,
        "response_template": response,
        "tbs_template": template,
        "required_slots": slots,
    }


def generate_corpus(world: WorldMap, roster: list[dict]) -> list[dict]:
    """Build the synthetic instruction corpus for a map and robot roster.

    roster entries need id, display_name, and kind; flying-task pairs bind
    implicitly to the first aerial robot, walking patrols to the first ground
    robot.
    """
    aerial = next((r["id"] for r in roster if r["kind"] == "aerial"), None)
    ground = next((r["id"] for r in roster if r["kind"] == "ground"), None)
    waypoints = sorted(w.name for w in world.waypoints.values())
    routes = sorted(r.name for r in world.routes.values())
    areas = sorted(a.name for a in world.areas.values())

    pairs: list[dict] = []
    counters: Counter = Counter()
    seen_tokens: set[tuple[str, ...]] = set()

    def add(utterance, category, binding, response, template, slots):
        key = tuple(sorted(normalize(utterance)))
        if key in seen_tokens:
            return
        seen_tokens.add(key)
        counters[category] += 1
        pid = f"{category}-{counters[category]:04d}"
        pairs.append(_pair(pid, utterance, category, binding, response, template, slots))

    for robot in roster:
        for form in WAKE_FORMS:
            add(
                form.format(name=robot["display_name"].lower()),
                "wake", "explicit-name", "{robot} standing by.", None, ["robot"],
            )

    goto = {"action": "GOTO", "location_slot": "destination"}
    for dest in waypoints:
        for form in NAVIGATE_FORMS[:6]:
            add(
                form.format(dest=dest), "navigate", "addressee-context",
                "{robot}: moving to {destination}.", goto, ["destination"],
            )
    for dest in waypoints[:3]:
        for form in NAVIGATE_FORMS[6:]:
            add(
                form.format(dest=dest), "navigate", "addressee-context",
                "{robot}: moving to {destination}.", goto, ["destination"],
            )
    for form in NAVIGATE_BARE:
        add(
            form, "navigate", "addressee-context",
            "{robot}: moving to {destination}.", goto, ["destination"],
        )

    follow = {"action": "FOLLOW", "leader_slot": "leader"}
    for robot in roster:
        for form in FOLLOW_FORMS:
            add(
                form.format(leader=robot["display_name"].lower()),
                "follow", "addressee-context",
                "{robot}: following orders, falling in.", follow, ["leader"],
            )
    for form in FOLLOW_BARE:
        add(
            form, "follow", "addressee-context",
            "{robot}: following orders, falling in.", follow, ["leader"],
        )

    scout = {"action": "SCOUT", "location_slot": "route", "object_info": "injured_person"}
    scout_binding = f"implicit:{aerial}" if aerial else "addressee-context"
    for route in routes:
        for form in SCOUT_FORMS:
            add(
                form.format(route=route), "inspect", scout_binding,
                "{robot}: scouting route {route}.", scout, ["route"],
            )
    for form in SCOUT_BARE:
        add(
            form, "inspect", scout_binding,
            "{robot}: scouting route {route}.", scout, ["route"],
        )

    search = {"action": "SEARCH", "location_slot": "area", "object_info": "injured_person"}
    for area in areas:
        for form in SEARCH_FORMS:
            add(
                form.format(area=area), "inspect", "addressee-context",
                "{robot}: searching the {area}.", search, ["area"],
            )
    for form in SEARCH_BARE:
        add(
            form, "inspect", "addressee-context",
            "{robot}: searching the {area}.", search, ["area"],
        )

    patrol = {"action": "PATROL", "location_slot": "area"}
    for area in areas:
        for i, form in enumerate(PATROL_FORMS):
            binding = (
                f"implicit:{ground}"
                if ground and form.startswith("walk the")
                else "addressee-context"
            )
            add(
                form.format(area=area), "patrol", binding,
                "{robot}: patrolling the {area}.", patrol, ["area"],
            )
    for form in PATROL_BARE:
        add(
            form, "patrol", "addressee-context",
            "{robot}: patrolling the {area}.", patrol, ["area"],
        )

    return pairs


def write_corpus(pairs: list[dict], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for pair in pairs:
            fh.write(json.dumps(pair, separators=(",", ":")) + "\n")
