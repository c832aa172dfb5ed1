import { describe, expect, it } from "vitest";

import type { MapDoc, RosterEntry } from "../src/types.js";
import {
  actionsFor,
  buildWizardFrame,
  encodeCommand,
  locationChoices,
  validateForm,
  type WizardForm,
} from "../src/wizard.js";

const MAP: MapDoc = {
  name: "m",
  waypoints: [{ name: "gate", x: 0, y: 0 }],
  routes: [{ name: "bravo", waypoints: ["gate"] }],
  areas: [{ name: "yard", polygon: [[0, 0], [1, 0], [1, 1]] }],
};

const ROSTER: RosterEntry[] = [
  { id: "husky", display_name: "Husky", kind: "ground" },
  { id: "snapdragon", display_name: "Snapdragon", kind: "aerial" },
];

function form(overrides: Partial<WizardForm> = {}): WizardForm {
  return {
    robotId: "husky",
    action: "GOTO",
    locationName: "gate",
    leaderId: "",
    urgency: "normal",
    stealth: false,
    ...overrides,
  };
}

describe("wizard form", () => {
  it("offers locations that match the action's kind", () => {
    expect(locationChoices(MAP, "GOTO").map((c) => c.name)).toEqual(["gate"]);
    expect(locationChoices(MAP, "SCOUT").map((c) => c.kind)).toEqual(["route"]);
    expect(locationChoices(MAP, "SEARCH").map((c) => c.kind)).toEqual(["area"]);
    expect(locationChoices(MAP, "TAKEOFF")).toEqual([]);
  });

  it("hides takeoff/land from ground robots", () => {
    expect(actionsFor(ROSTER[0])).not.toContain("TAKEOFF");
    expect(actionsFor(ROSTER[1])).toContain("TAKEOFF");
  });

  it("rejects self-follow inline without sending", () => {
    const bad = form({ action: "FOLLOW", locationName: "", leaderId: "husky" });
    expect(validateForm(bad, MAP, ROSTER)).toMatch(/follow itself/);
    const result = buildWizardFrame("reply", bad, MAP, ROSTER, 0);
    expect(result.frame).toBeUndefined();
    expect(result.error).toMatch(/follow itself/);
  });

  it("rejects capability and location violations", () => {
    expect(validateForm(form({ action: "TAKEOFF", locationName: "" }), MAP, ROSTER))
      .toMatch(/cannot TAKEOFF/);
    expect(validateForm(form({ locationName: "" }), MAP, ROSTER)).toMatch(/location/);
  });

  it("encodes commands with the wire protocol's exact key order", () => {
    const line = encodeCommand(form({ urgency: "urgent" }), MAP, 3.5);
    const doc = JSON.parse(line);
    expect(Object.keys(doc)).toEqual([
      "v", "id", "t", "robot", "action", "loc", "leader", "obj", "mods",
    ]);
    expect(doc.v).toBe(1);
    expect(doc.robot).toBe("husky");
    expect(doc.loc).toEqual({ kind: "waypoint", name: "gate" });
    expect(doc.mods).toEqual({ urgency: "urgent", stealth: false });
    expect(line.includes("\n")).toBe(false);
  });

  it("builds reply-only frames without a command", () => {
    const result = buildWizardFrame("Standing by.", null, MAP, ROSTER, 0);
    expect(result.frame).toEqual({ type: "wizard", reply: "Standing by." });
    expect(buildWizardFrame("  ", null, MAP, ROSTER, 0).error).toBeDefined();
  });
});
