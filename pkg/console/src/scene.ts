// Pure scene construction: turn the view state into drawable primitives.
// The canvas painter is a thin loop over these, which keeps everything
// about what gets rendered unit-testable without a DOM.

import type { MapDoc } from "./types.js";
import type { ViewState } from "./view.js";

export interface Affine {
  scale: number;
  offsetX: number;
  offsetY: number;
  /** world meters -> canvas pixels (y axis flipped so north is up) */
  toPx(x: number, y: number): [number, number];
}

export type Primitive =
  | { kind: "road"; from: [number, number]; to: [number, number] }
  | { kind: "building"; name: string; polygon: [number, number][] }
  | { kind: "area"; name: string; polygon: [number, number][] }
  | { kind: "route"; name: string; points: [number, number][] }
  | { kind: "landing"; at: [number, number] }
  | {
      kind: "object";
      id: string;
      objectClass: string;
      at: [number, number];
      discovered: boolean;
    }
  | { kind: "waypoint"; name: string; at: [number, number] }
  | {
      kind: "robot";
      id: string;
      name: string;
      glyph: "ground" | "aerial";
      at: [number, number];
      headingRad: number;
      busy: boolean;
      airborne: boolean;
      altitudeBadge: string | null;
      footprintRadius: number | null;
    };

export interface Scene {
  affine: Affine;
  primitives: Primitive[];
}

export function fitMapToCanvas(
  map: MapDoc,
  widthPx: number,
  heightPx: number,
  marginPx = 24,
): Affine {
  const xs: number[] = [];
  const ys: number[] = [];
  const push = (x: number, y: number) => {
    xs.push(x);
    ys.push(y);
  };
  for (const w of map.waypoints) push(w.x, w.y);
  for (const b of map.buildings ?? []) for (const [x, y] of b.polygon) push(x, y);
  for (const a of map.areas ?? []) for (const [x, y] of a.polygon) push(x, y);
  for (const [x, y] of map.landing_sites ?? []) push(x, y);
  for (const o of map.objects ?? []) push(o.x, o.y);
  if (xs.length === 0) push(0, 0);
  const minX = Math.min(...xs);
  const maxX = Math.max(...xs);
  const minY = Math.min(...ys);
  const maxY = Math.max(...ys);
  const spanX = Math.max(maxX - minX, 1);
  const spanY = Math.max(maxY - minY, 1);
  const scale = Math.min(
    (widthPx - 2 * marginPx) / spanX,
    (heightPx - 2 * marginPx) / spanY,
  );
  const offsetX = marginPx - minX * scale + ((widthPx - 2 * marginPx) - spanX * scale) / 2;
  const offsetY = marginPx + maxY * scale + ((heightPx - 2 * marginPx) - spanY * scale) / 2;
  return {
    scale,
    offsetX,
    offsetY,
    toPx(x: number, y: number): [number, number] {
      return [x * scale + offsetX, offsetY - y * scale];
    },
  };
}

export function buildScene(view: ViewState, widthPx: number, heightPx: number): Scene {
  const primitives: Primitive[] = [];
  const map = view.map;
  if (!map) {
    return {
      affine: fitMapToCanvas({ name: "empty", waypoints: [] }, widthPx, heightPx),
      primitives,
    };
  }
  const affine = fitMapToCanvas(map, widthPx, heightPx);
  const wpByName = new Map(map.waypoints.map((w) => [w.name.toLowerCase(), w]));

  for (const area of map.areas ?? []) {
    primitives.push({ kind: "area", name: area.name, polygon: area.polygon });
  }
  for (const edge of map.edges ?? []) {
    const a = wpByName.get(edge.from.toLowerCase());
    const b = wpByName.get(edge.to.toLowerCase());
    if (a && b) {
      primitives.push({ kind: "road", from: [a.x, a.y], to: [b.x, b.y] });
    }
  }
  for (const route of map.routes ?? []) {
    const points: [number, number][] = [];
    for (const name of route.waypoints) {
      const w = wpByName.get(name.toLowerCase());
      if (w) points.push([w.x, w.y]);
    }
    primitives.push({ kind: "route", name: route.name, points });
  }
  for (const building of map.buildings ?? []) {
    primitives.push({ kind: "building", name: building.name, polygon: building.polygon });
  }
  for (const site of map.landing_sites ?? []) {
    primitives.push({ kind: "landing", at: site });
  }
  const liveObjects = view.state?.objects;
  if (liveObjects) {
    for (const o of liveObjects) {
      primitives.push({
        kind: "object",
        id: o.id,
        objectClass: o.class,
        at: [o.x, o.y],
        discovered: o.discovered,
      });
    }
  } else {
    for (const o of map.objects ?? []) {
      primitives.push({
        kind: "object",
        id: o.id,
        objectClass: o.class,
        at: [o.x, o.y],
        discovered: false,
      });
    }
  }
  for (const w of map.waypoints) {
    primitives.push({ kind: "waypoint", name: w.name, at: [w.x, w.y] });
  }
  for (const robot of view.state?.robots ?? []) {
    primitives.push({
      kind: "robot",
      id: robot.id,
      name: robot.name,
      glyph: robot.kind,
      at: [robot.x, robot.y],
      headingRad: robot.heading,
      busy: robot.busy,
      airborne: robot.airborne,
      altitudeBadge:
        robot.kind === "aerial" && robot.airborne
          ? `${robot.altitude.toFixed(0)} m`
          : null,
      footprintRadius: robot.footprint,
    });
  }
  return { affine, primitives };
}
