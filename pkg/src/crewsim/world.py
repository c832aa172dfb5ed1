"""Outdoor environment model: named entities, road graph, paths, sight lines.

A map is loaded once from a JSON document and never mutated afterwards, so a
single WorldMap instance is safe to share between the engine, the dialogue
manager, and any number of observers.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field

from .errors import MapSyntaxError, MapValidationError, NoPath, OffNetwork, UnknownLocation
from .geometry import (
    XY,
    dist,
    is_simple_polygon,
    path_length,
    segment_interior_intervals,
)

DEFAULT_SNAP_DISTANCE = 5.0

OBJECT_CLASSES = ("injured_person", "other")


@dataclass(frozen=True)
class Waypoint:
    name: str
    position: XY


@dataclass(frozen=True)
class RoadEdge:
    """Undirected road segment between two named waypoints."""

    from_wp: str
    to_wp: str


@dataclass(frozen=True)
class Building:
    name: str
    footprint: tuple[XY, ...]
    height: float


@dataclass(frozen=True)
class NamedArea:
    name: str
    polygon: tuple[XY, ...]


@dataclass(frozen=True)
class Route:
    name: str
    waypoints: tuple[str, ...]


@dataclass
class ObjectOfInterest:
    id: str
    kind: str
    position: XY
    discovered: bool = False


@dataclass(frozen=True)
class LocationRef:
    """Reference to a place: a named entity or a raw coordinate pair."""

    kind: str  # waypoint | route | area | building | coordinates
    name: str | None = None
    point: XY | None = None


@dataclass(frozen=True)
class Path:
    points: tuple[XY, ...]
    length: float


@dataclass(frozen=True)
class WorldMap:
    name: str
    waypoints: dict[str, Waypoint] = field(default_factory=dict)
    edges: tuple[RoadEdge, ...] = ()
    buildings: dict[str, Building] = field(default_factory=dict)
    areas: dict[str, NamedArea] = field(default_factory=dict)
    routes: dict[str, Route] = field(default_factory=dict)
    landing_sites: tuple[XY, ...] = ()
    objects: dict[str, ObjectOfInterest] = field(default_factory=dict)

    # Dict keys are casefolded names; the entities keep their declared names.

    def waypoint(self, name: str) -> Waypoint:
        return self.waypoints[name.casefold()]

    def entity_names(self) -> list[str]:
        """Declared names of all nameable entities (for dialogue grounding)."""
        out = [w.name for w in self.waypoints.values()]
        out += [r.name for r in self.routes.values()]
        out += [a.name for a in self.areas.values()]
        out += [b.name for b in self.buildings.values()]
        return out


def _require_keys(obj: dict, allowed: set[str], required: set[str], where: str) -> None:
    if not isinstance(obj, dict):
        raise MapSyntaxError(f"{where}: expected an object")
    unknown = set(obj) - allowed
    if unknown:
        raise MapSyntaxError(f"{where}: unknown key {sorted(unknown)[0]!r}")
    missing = required - set(obj)
    if missing:
        raise MapSyntaxError(f"{where}: missing key {sorted(missing)[0]!r}")


def _num(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise MapSyntaxError(f"{where}: expected a number")
    out = float(value)
    if not math.isfinite(out):
        raise MapSyntaxError(f"{where}: coordinate not finite")
    return out


def _name(value, where: str) -> str:
    if not isinstance(value, str) or not value.strip():
        raise MapSyntaxError(f"{where}: expected a non-empty string")
    return value


def _polygon(value, where: str) -> tuple[XY, ...]:
    if not isinstance(value, list):
        raise MapSyntaxError(f"{where}: polygon must be a list of [x, y] pairs")
    pts = []
    for i, pair in enumerate(value):
        if not isinstance(pair, list) or len(pair) != 2:
            raise MapSyntaxError(f"{where}: vertex {i} must be [x, y]")
        pts.append((_num(pair[0], where), _num(pair[1], where)))
    return tuple(pts)


def load_map(document: str) -> WorldMap:
    """Parse and validate a JSON map document.

    Raises MapSyntaxError for malformed documents (bad JSON, unknown keys,
    wrong types) and MapValidationError for semantic problems (duplicate or
    colliding names, dangling references, bad polygons); validation messages
    name the offending entity.
    """
    try:
        raw = json.loads(document)
    except json.JSONDecodeError as exc:
        raise MapSyntaxError(f"invalid JSON: {exc}") from exc

    top_allowed = {
        "name", "waypoints", "edges", "buildings", "areas",
        "routes", "landing_sites", "objects",
    }
    _require_keys(raw, top_allowed, {"name", "waypoints"}, "map")
    map_name = _name(raw["name"], "map.name")

    waypoints: dict[str, Waypoint] = {}
    for i, item in enumerate(raw.get("waypoints", [])):
        _require_keys(item, {"name", "x", "y"}, {"name", "x", "y"}, f"waypoints[{i}]")
        name = _name(item["name"], f"waypoints[{i}].name")
        key = name.casefold()
        if key in waypoints:
            raise MapValidationError(f"duplicate waypoint name {name!r}")
        waypoints[key] = Waypoint(name, (_num(item["x"], name), _num(item["y"], name)))

    edges: list[RoadEdge] = []
    for i, item in enumerate(raw.get("edges", [])):
        _require_keys(item, {"from", "to"}, {"from", "to"}, f"edges[{i}]")
        a = _name(item["from"], f"edges[{i}].from")
        b = _name(item["to"], f"edges[{i}].to")
        for endpoint in (a, b):
            if endpoint.casefold() not in waypoints:
                raise MapValidationError(f"edge endpoint {endpoint}")
        if a.casefold() == b.casefold():
            raise MapValidationError(f"edge {a}-{b} is a self-loop")
        edges.append(RoadEdge(a, b))

    buildings: dict[str, Building] = {}
    for i, item in enumerate(raw.get("buildings", [])):
        _require_keys(
            item, {"name", "polygon", "height"}, {"name", "polygon", "height"},
            f"buildings[{i}]",
        )
        name = _name(item["name"], f"buildings[{i}].name")
        poly = _polygon(item["polygon"], f"building {name}")
        if not is_simple_polygon(list(poly)):
            raise MapValidationError(f"building {name} polygon is not simple")
        height = _num(item["height"], f"building {name} height")
        if height <= 0:
            raise MapValidationError(f"building {name} height must be > 0")
        key = name.casefold()
        if key in buildings:
            raise MapValidationError(f"duplicate building name {name!r}")
        buildings[key] = Building(name, poly, height)

    areas: dict[str, NamedArea] = {}
    for i, item in enumerate(raw.get("areas", [])):
        _require_keys(item, {"name", "polygon"}, {"name", "polygon"}, f"areas[{i}]")
        name = _name(item["name"], f"areas[{i}].name")
        poly = _polygon(item["polygon"], f"area {name}")
        if not is_simple_polygon(list(poly)):
            raise MapValidationError(f"area {name} polygon is not simple")
        key = name.casefold()
        if key in areas:
            raise MapValidationError(f"duplicate area name {name!r}")
        areas[key] = NamedArea(name, poly)

    routes: dict[str, Route] = {}
    for i, item in enumerate(raw.get("routes", [])):
        _require_keys(item, {"name", "waypoints"}, {"name", "waypoints"}, f"routes[{i}]")
        name = _name(item["name"], f"routes[{i}].name")
        wps = item["waypoints"]
        if not isinstance(wps, list) or len(wps) < 2:
            raise MapValidationError(f"route {name} needs at least 2 waypoints")
        for wp in wps:
            if _name(wp, f"route {name}").casefold() not in waypoints:
                raise MapValidationError(f"route {name} waypoint {wp}")
        for prev, cur in zip(wps, wps[1:]):
            if prev.casefold() == cur.casefold():
                raise MapValidationError(f"route {name} repeats waypoint {cur}")
        key = name.casefold()
        if key in routes:
            raise MapValidationError(f"duplicate route name {name!r}")
        routes[key] = Route(name, tuple(wps))

    landing_sites: list[XY] = []
    for i, pair in enumerate(raw.get("landing_sites", [])):
        if not isinstance(pair, list) or len(pair) != 2:
            raise MapSyntaxError(f"landing_sites[{i}] must be [x, y]")
        landing_sites.append((_num(pair[0], "landing_site"), _num(pair[1], "landing_site")))

    objects: dict[str, ObjectOfInterest] = {}
    for i, item in enumerate(raw.get("objects", [])):
        _require_keys(item, {"id", "class", "x", "y"}, {"id", "class", "x", "y"}, f"objects[{i}]")
        oid = _name(item["id"], f"objects[{i}].id")
        cls = _name(item["class"], f"object {oid} class")
        if cls not in OBJECT_CLASSES:
            raise MapValidationError(f"object {oid} class {cls!r} unknown")
        if oid in objects:
            raise MapValidationError(f"duplicate object id {oid!r}")
        objects[oid] = ObjectOfInterest(oid, cls, (_num(item["x"], oid), _num(item["y"], oid)))

    # Cross-kind name collisions would make dialogue grounding ambiguous.
    seen: dict[str, str] = {}
    for kind, names in (
        ("waypoint", waypoints), ("route", routes),
        ("area", areas), ("building", buildings),
    ):
        for key, entity in names.items():
            if key in seen:
                raise MapValidationError(
                    f"name {entity.name!r} used by both a {seen[key]} and a {kind}"
                )
            seen[key] = kind

    return WorldMap(
        name=map_name,
        waypoints=waypoints,
        edges=tuple(edges),
        buildings=buildings,
        areas=areas,
        routes=routes,
        landing_sites=tuple(landing_sites),
        objects=objects,
    )


def load_map_file(path: str) -> WorldMap:
    with open(path, encoding="utf-8") as fh:
        return load_map(fh.read())


def resolve_location(name: str, world: WorldMap) -> LocationRef:
    """Look up a named entity, case-insensitively.

    On (disallowed) cross-kind collisions the preference order is
    waypoint > route > area > building.
    """
    key = name.casefold()
    if key in world.waypoints:
        wp = world.waypoints[key]
        return LocationRef("waypoint", wp.name, wp.position)
    if key in world.routes:
        return LocationRef("route", world.routes[key].name)
    if key in world.areas:
        return LocationRef("area", world.areas[key].name)
    if key in world.buildings:
        return LocationRef("building", world.buildings[key].name)
    raise UnknownLocation(f"no location named {name!r}")


def location_point(ref: LocationRef, world: WorldMap) -> XY:
    """Representative point of a resolved location."""
    if ref.kind == "coordinates":
        if ref.point is None:
            raise UnknownLocation("coordinate reference without a point")
        return ref.point
    if ref.kind == "waypoint":
        return world.waypoint(ref.name).position
    if ref.kind == "route":
        last = world.routes[ref.name.casefold()].waypoints[-1]
        return world.waypoint(last).position
    if ref.kind == "area":
        from .geometry import polygon_centroid

        return polygon_centroid(list(world.areas[ref.name.casefold()].polygon))
    if ref.kind == "building":
        from .geometry import polygon_centroid

        return polygon_centroid(list(world.buildings[ref.name.casefold()].footprint))
    raise UnknownLocation(f"unknown location kind {ref.kind!r}")


def _adjacency(world: WorldMap) -> dict[str, list[tuple[str, float]]]:
    adj: dict[str, list[tuple[str, float]]] = {k: [] for k in world.waypoints}
    for edge in world.edges:
        a, b = edge.from_wp.casefold(), edge.to_wp.casefold()
        w = dist(world.waypoints[a].position, world.waypoints[b].position)
        adj[a].append((b, w))
        adj[b].append((a, w))
    for neighbors in adj.values():
        neighbors.sort()
    return adj


def _dijkstra(world: WorldMap, start: str, goal: str) -> list[str]:
    adj = _adjacency(world)
    best: dict[str, float] = {start: 0.0}
    prev: dict[str, str] = {}
    heap: list[tuple[float, str]] = [(0.0, start)]
    done: set[str] = set()
    while heap:
        d, node = heapq.heappop(heap)
        if node in done:
            continue
        done.add(node)
        if node == goal:
            break
        for nxt, w in adj[node]:
            nd = d + w
            if nd < best.get(nxt, math.inf):
                best[nxt] = nd
                prev[nxt] = node
                heapq.heappush(heap, (nd, nxt))
    if goal not in done:
        raise NoPath(f"no road path from {start} to {goal}")
    chain = [goal]
    while chain[-1] != start:
        chain.append(prev[chain[-1]])
    chain.reverse()
    return chain


def _nearest_waypoint(world: WorldMap, p: XY) -> tuple[str, float]:
    best_key, best_d = "", math.inf
    for key in sorted(world.waypoints):
        d = dist(p, world.waypoints[key].position)
        if d < best_d:
            best_key, best_d = key, d
    return best_key, best_d


def plan_path(
    start: XY,
    target: XY,
    mode: str,
    world: WorldMap,
    snap_distance: float = DEFAULT_SNAP_DISTANCE,
) -> Path:
    """Shortest path from start to target.

    Ground mode snaps both endpoints to the nearest waypoint (within
    `snap_distance`), runs Dijkstra over the road graph with Euclidean edge
    weights, and joins the snap segments. Air mode is a straight flight.
    """
    if not all(math.isfinite(c) for c in (*start, *target)):
        raise OffNetwork("non-finite endpoint")
    if mode == "air":
        points = [start, target] if start != target else [start]
        return Path(tuple(points), path_length(points))
    if mode != "ground":
        raise ValueError(f"unknown travel mode {mode!r}")
    if not world.waypoints:
        raise OffNetwork("map has no waypoints")
    from_key, from_d = _nearest_waypoint(world, start)
    to_key, to_d = _nearest_waypoint(world, target)
    if from_d > snap_distance:
        raise OffNetwork(f"start is {from_d:.1f} m from the road network")
    if to_d > snap_distance:
        raise OffNetwork(f"goal is {to_d:.1f} m from the road network")
    chain = _dijkstra(world, from_key, to_key)
    points: list[XY] = [start]
    for key in chain:
        pos = world.waypoints[key].position
        if points[-1] != pos:
            points.append(pos)
    if points[-1] != target:
        points.append(target)
    return Path(tuple(points), path_length(points))


def line_of_sight(p: tuple[float, float, float], q: tuple[float, float, float], world: WorldMap) -> bool:
    """True iff the 3D segment p -> q clears every building volume.

    Buildings are footprints extruded from the ground to their height.
    Segments that merely graze a wall or rooftop do not count as blocked.
    """
    for coords in (p, q):
        if not all(math.isfinite(c) for c in coords):
            raise ValueError("non-finite endpoint")
    (px, py, pz), (qx, qy, qz) = p, q
    for building in world.buildings.values():
        intervals = segment_interior_intervals((px, py), (qx, qy), list(building.footprint))
        if not intervals:
            continue
        # Parameter window where the segment is below the rooftop.
        dz = qz - pz
        if dz == 0.0:
            window = (0.0, 1.0) if pz < building.height else None
        else:
            t_roof = (building.height - pz) / dz
            if dz > 0:
                window = (0.0, min(1.0, t_roof))
            else:
                window = (max(0.0, t_roof), 1.0)
            if window[0] >= window[1]:
                window = None
        if window is None:
            continue
        for t0, t1 in intervals:
            lo, hi = max(t0, window[0]), min(t1, window[1])
            if hi - lo > 1e-9:
                return False
    return True
