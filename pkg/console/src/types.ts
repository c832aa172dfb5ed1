// Frame and document types mirroring the crewsim stream protocol.

export interface MapWaypoint {
  name: string;
  x: number;
  y: number;
}

export interface MapEdge {
  from: string;
  to: string;
}

export interface MapBuilding {
  name: string;
  polygon: [number, number][];
  height: number;
}

export interface MapArea {
  name: string;
  polygon: [number, number][];
}

export interface MapRoute {
  name: string;
  waypoints: string[];
}

export interface MapObject {
  id: string;
  class: string;
  x: number;
  y: number;
}

export interface MapDoc {
  name: string;
  waypoints: MapWaypoint[];
  edges?: MapEdge[];
  buildings?: MapBuilding[];
  areas?: MapArea[];
  routes?: MapRoute[];
  landing_sites?: [number, number][];
  objects?: MapObject[];
}

export interface RosterEntry {
  id: string;
  display_name: string;
  kind: "ground" | "aerial";
}

export interface ChatPayload {
  speaker: string; // operator | dm | wizard | robot:<id>
  text: string;
  time: number;
  chat_only?: boolean;
  disposition?: string;
}

export interface RobotSnapshot {
  id: string;
  name: string;
  kind: "ground" | "aerial";
  x: number;
  y: number;
  altitude: number;
  heading: number;
  airborne: boolean;
  busy: boolean;
  task: string | null;
  footprint: number | null;
}

export interface ObjectSnapshot {
  id: string;
  class: string;
  x: number;
  y: number;
  discovered: boolean;
}

export interface StatePayload {
  t: number;
  robots: RobotSnapshot[];
  objects: ObjectSnapshot[];
  dm_mode: string;
  addressing_mode: string;
}

export interface HelloPayload {
  event: "hello";
  session: string;
  map: MapDoc;
  config: {
    dm_mode: string;
    addressing_mode: string;
    roster: RosterEntry[];
  };
  quick_replies?: string[];
  transcript: ChatPayload[];
}

export interface ControlPayload {
  event?: string;
  mode?: string;
  [key: string]: unknown;
}

export interface ErrorPayload {
  message: string;
}

export type Frame =
  | { type: "chat"; payload: ChatPayload }
  | { type: "state"; payload: StatePayload }
  | { type: "wizard_inbox"; payload: ChatPayload }
  | { type: "error"; payload: ErrorPayload }
  | { type: "control"; payload: ControlPayload | HelloPayload };

export type SayFrame = { type: "say"; text: string };
export type WizardFrame = { type: "wizard"; reply: string; tbs?: string };
export type ControlFrame = {
  type: "control";
  payload: { action: "claim_wizard" } | { action: "set_dm_mode"; mode: string };
};
export type OutboundFrame = SayFrame | WizardFrame | ControlFrame;
