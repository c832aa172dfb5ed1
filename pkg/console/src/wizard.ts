// Wizard panel logic: build tactical command lines from form selections and
// validate them client-side before anything leaves the console.

import type { MapDoc, RosterEntry, WizardFrame } from "./types.js";

export const ACTIONS = [
  "GOTO",
  "FOLLOW",
  "SCOUT",
  "SEARCH",
  "PATROL",
  "TAKEOFF",
  "LAND",
  "HALT",
] as const;

export type Action = (typeof ACTIONS)[number];

export interface WizardForm {
  robotId: string;
  action: Action;
  locationName: string; // waypoint/route/area name, per action
  leaderId: string;
  urgency: "normal" | "urgent";
  stealth: boolean;
}

export interface LocationChoice {
  name: string;
  kind: "waypoint" | "route" | "area";
}

/** Which named locations the form should offer for an action. */
export function locationChoices(map: MapDoc, action: Action): LocationChoice[] {
  if (action === "GOTO") {
    return map.waypoints.map((w) => ({ name: w.name, kind: "waypoint" as const }));
  }
  if (action === "SCOUT") {
    return (map.routes ?? []).map((r) => ({ name: r.name, kind: "route" as const }));
  }
  if (action === "SEARCH" || action === "PATROL") {
    return (map.areas ?? []).map((a) => ({ name: a.name, kind: "area" as const }));
  }
  return [];
}

const CAPABILITIES: Record<string, readonly Action[]> = {
  ground: ["GOTO", "FOLLOW", "SCOUT", "SEARCH", "PATROL", "HALT"],
  aerial: ["GOTO", "FOLLOW", "SCOUT", "SEARCH", "PATROL", "TAKEOFF", "LAND", "HALT"],
};

export function actionsFor(robot: RosterEntry | undefined): readonly Action[] {
  if (!robot) return ACTIONS;
  return CAPABILITIES[robot.kind] ?? ACTIONS;
}

/** Validate the form; returns an error message or null when sendable. */
export function validateForm(
  form: WizardForm,
  map: MapDoc,
  roster: RosterEntry[],
): string | null {
  const robot = roster.find((r) => r.id === form.robotId);
  if (!robot) return "pick a robot";
  if (!actionsFor(robot).includes(form.action)) {
    return `${robot.display_name} cannot ${form.action}`;
  }
  const choices = locationChoices(map, form.action);
  if (choices.length > 0) {
    if (!form.locationName) return "pick a location";
    if (!choices.some((c) => c.name === form.locationName)) {
      return `unknown location ${form.locationName}`;
    }
  }
  if (form.action === "FOLLOW") {
    if (!form.leaderId) return "pick a leader";
    if (form.leaderId === form.robotId) return "a robot cannot follow itself";
    if (!roster.some((r) => r.id === form.leaderId)) {
      return `unknown leader ${form.leaderId}`;
    }
  }
  return null;
}

let wizardSerial = 0;

/** Encode the command exactly as the wire protocol expects (one JSON line,
 * fixed key order v,id,t,robot,action,loc,leader,obj,mods). */
export function encodeCommand(form: WizardForm, map: MapDoc, simTime: number): string {
  wizardSerial += 1;
  const choices = locationChoices(map, form.action);
  const choice = choices.find((c) => c.name === form.locationName) ?? null;
  const loc = choice ? { kind: choice.kind, name: choice.name } : null;
  const doc = {
    v: 1,
    id: `wiz-${String(wizardSerial).padStart(4, "0")}`,
    t: simTime,
    robot: form.robotId,
    action: form.action,
    loc,
    leader: form.action === "FOLLOW" ? form.leaderId : null,
    obj: form.action === "SCOUT" || form.action === "SEARCH" ? "injured_person" : null,
    mods: { urgency: form.urgency, stealth: form.stealth },
  };
  return JSON.stringify(doc);
}

export function buildWizardFrame(
  reply: string,
  form: WizardForm | null,
  map: MapDoc,
  roster: RosterEntry[],
  simTime: number,
): { frame?: WizardFrame; error?: string } {
  if (form === null) {
    if (!reply.trim()) return { error: "nothing to send" };
    return { frame: { type: "wizard", reply } };
  }
  const problem = validateForm(form, map, roster);
  if (problem) return { error: problem };
  return {
    frame: { type: "wizard", reply, tbs: encodeCommand(form, map, simTime) },
  };
}
