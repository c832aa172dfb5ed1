import { describe, expect, it } from "vitest";

import { buildScene, fitMapToCanvas } from "../src/scene.js";
import type { Frame, HelloPayload, MapDoc } from "../src/types.js";
import { applyFrame, initialView } from "../src/view.js";

const MAP: MapDoc = {
  name: "m",
  waypoints: [
    { name: "gate", x: 0, y: 0 },
    { name: "well", x: 100, y: 50 },
  ],
  edges: [{ from: "gate", to: "well" }],
  routes: [{ name: "bravo", waypoints: ["gate", "well"] }],
  buildings: [{ name: "hut", polygon: [[10, 10], [20, 10], [20, 20], [10, 20]], height: 5 }],
  areas: [{ name: "yard", polygon: [[40, 0], [60, 0], [60, 20], [40, 20]] }],
  landing_sites: [[55, 45]],
  objects: [{ id: "v1", class: "injured_person", x: 70, y: 40 }],
};

function helloWithMap(): Frame {
  const payload: HelloPayload = {
    event: "hello",
    session: "s",
    map: MAP,
    config: {
      dm_mode: "auto",
      addressing_mode: "explicit",
      roster: [
        { id: "husky", display_name: "Husky", kind: "ground" },
        { id: "snapdragon", display_name: "Snapdragon", kind: "aerial" },
      ],
    },
    transcript: [],
  };
  return { type: "control", payload };
}

const STATE: Frame = {
  type: "state",
  payload: {
    t: 4,
    robots: [
      {
        id: "husky", name: "Husky", kind: "ground", x: 5, y: 5, altitude: 0,
        heading: 0, airborne: false, busy: true, task: "tbs-0001", footprint: null,
      },
      {
        id: "snapdragon", name: "Snapdragon", kind: "aerial", x: 50, y: 25,
        altitude: 20, heading: 1.2, airborne: true, busy: false, task: null,
        footprint: 11.5,
      },
    ],
    objects: [{ id: "v1", class: "injured_person", x: 70, y: 40, discovered: true }],
    dm_mode: "auto",
    addressing_mode: "explicit",
  },
};

describe("fitMapToCanvas", () => {
  it("maps the bounding box inside the margin and flips y", () => {
    const affine = fitMapToCanvas(MAP, 800, 600, 24);
    const [x0, y0] = affine.toPx(0, 0);
    const [x1, y1] = affine.toPx(100, 50);
    expect(x0).toBeGreaterThanOrEqual(24);
    expect(x1).toBeLessThanOrEqual(800 - 24);
    expect(y1).toBeLessThan(y0); // larger world y renders higher on screen
    // uniform scale: 100 m spans (800-48) px at most
    expect(affine.scale).toBeCloseTo((800 - 48) / 100, 5);
  });
});

describe("buildScene", () => {
  it("renders both robots with distinct glyphs and an altitude badge", () => {
    let view = applyFrame(initialView(), helloWithMap());
    view = applyFrame(view, STATE);
    const scene = buildScene(view, 800, 600);
    const robots = scene.primitives.filter((p) => p.kind === "robot");
    expect(robots).toHaveLength(2);
    const ground = robots.find((r) => r.kind === "robot" && r.glyph === "ground");
    const aerial = robots.find((r) => r.kind === "robot" && r.glyph === "aerial");
    expect(ground && ground.kind === "robot" && ground.busy).toBe(true);
    expect(aerial && aerial.kind === "robot" && aerial.altitudeBadge).toBe("20 m");
    expect(aerial && aerial.kind === "robot" && aerial.footprintRadius).toBe(11.5);
  });

  it("includes the route polyline with resolved waypoint coordinates", () => {
    let view = applyFrame(initialView(), helloWithMap());
    const scene = buildScene(view, 800, 600);
    const route = scene.primitives.find((p) => p.kind === "route");
    expect(route && route.kind === "route" && route.name).toBe("bravo");
    expect(route && route.kind === "route" && route.points).toEqual([
      [0, 0],
      [100, 50],
    ]);
  });

  it("marks objects discovered from live state, hidden before any state", () => {
    let view = applyFrame(initialView(), helloWithMap());
    let scene = buildScene(view, 800, 600);
    let obj = scene.primitives.find((p) => p.kind === "object");
    expect(obj && obj.kind === "object" && obj.discovered).toBe(false);
    view = applyFrame(view, STATE);
    scene = buildScene(view, 800, 600);
    obj = scene.primitives.find((p) => p.kind === "object");
    expect(obj && obj.kind === "object" && obj.discovered).toBe(true);
  });

  it("renders roads, buildings, areas, waypoints, and landing sites", () => {
    const view = applyFrame(initialView(), helloWithMap());
    const kinds = new Set(buildScene(view, 800, 600).primitives.map((p) => p.kind));
    for (const kind of ["road", "building", "area", "waypoint", "landing"]) {
      expect(kinds.has(kind as never)).toBe(true);
    }
  });
});
