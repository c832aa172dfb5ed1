import json
import random

import pytest

from crewsim.cli import data_path
from crewsim.world import load_map, load_map_file


SQUARE_MAP = {
    "name": "square",
    "waypoints": [
        {"name": "A", "x": 0, "y": 0},
        {"name": "B", "x": 10, "y": 0},
        {"name": "C", "x": 10, "y": 10},
        {"name": "D", "x": 0, "y": 20},
    ],
    "edges": [
        {"from": "A", "to": "B"},
        {"from": "B", "to": "C"},
        {"from": "C", "to": "D"},
        {"from": "D", "to": "A"},
    ],
}


@pytest.fixture
def square_world():
    return load_map(json.dumps(SQUARE_MAP))


@pytest.fixture(scope="session")
def demo_world():
    return load_map_file(data_path("demo_map.json"))


@pytest.fixture(scope="session")
def demo_scenario():
    with open(data_path("demo_scenario.json"), encoding="utf-8") as fh:
        return json.load(fh)


@pytest.fixture(scope="session")
def demo_paths():
    return {
        "map": data_path("demo_map.json"),
        "corpus": data_path("demo_corpus.jsonl"),
        "scenario": data_path("demo_scenario.json"),
    }


def random_road_map(rng: random.Random, n_nodes: int, extra_edges: int = None) -> dict:
    """Random connected road graph document (spanning tree plus extras)."""
    names = [f"w{i}" for i in range(n_nodes)]
    waypoints = [
        {"name": name, "x": rng.uniform(0, 200), "y": rng.uniform(0, 200)}
        for name in names
    ]
    edges = []
    seen = set()
    for i in range(1, n_nodes):
        j = rng.randrange(i)
        edges.append({"from": names[i], "to": names[j]})
        seen.add((min(i, j), max(i, j)))
    if extra_edges is None:
        extra_edges = n_nodes // 2
    for _ in range(extra_edges):
        i, j = rng.randrange(n_nodes), rng.randrange(n_nodes)
        key = (min(i, j), max(i, j))
        if i == j or key in seen:
            continue
        seen.add(key)
        edges.append({"from": names[i], "to": names[j]})
    return {"name": "random", "waypoints": waypoints, "edges": edges}


def bellman_ford_distance(doc: dict, start: str, goal: str) -> float:
    """Independent shortest-path oracle over a map document."""
    import math

    pos = {w["name"]: (w["x"], w["y"]) for w in doc["waypoints"]}
    nodes = list(pos)
    dist = {n: math.inf for n in nodes}
    dist[start] = 0.0
    arcs = []
    for e in doc["edges"]:
        a, b = e["from"], e["to"]
        w = math.hypot(pos[a][0] - pos[b][0], pos[a][1] - pos[b][1])
        arcs.append((a, b, w))
        arcs.append((b, a, w))
    for _ in range(len(nodes) - 1):
        changed = False
        for a, b, w in arcs:
            if dist[a] + w < dist[b]:
                dist[b] = dist[a] + w
                changed = True
        if not changed:
            break
    return dist[goal]
