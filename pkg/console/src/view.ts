// Client view state: a pure reducer over server frames. The console never
// simulates; everything rendered comes from the last frames received.

import type {
  ChatPayload,
  Frame,
  HelloPayload,
  MapDoc,
  RosterEntry,
  StatePayload,
} from "./types.js";

export interface TranscriptEntry extends ChatPayload {
  pending?: boolean;
}

export interface ViewState {
  connection: "connecting" | "open" | "closed";
  session: string | null;
  map: MapDoc | null;
  roster: RosterEntry[];
  dmMode: string;
  addressingMode: string;
  state: StatePayload | null;
  transcript: TranscriptEntry[];
  wizardInbox: ChatPayload[];
  wizardGranted: boolean;
  quickReplies: string[];
  lastError: string | null;
}

export function initialView(): ViewState {
  return {
    connection: "connecting",
    session: null,
    map: null,
    roster: [],
    dmMode: "auto",
    addressingMode: "explicit",
    state: null,
    transcript: [],
    wizardInbox: [],
    wizardGranted: false,
    quickReplies: [],
    lastError: null,
  };
}

function isHello(payload: HelloPayload | Record<string, unknown>): payload is HelloPayload {
  return (payload as HelloPayload).event === "hello";
}

function sameTurn(a: ChatPayload, b: ChatPayload): boolean {
  return a.speaker === b.speaker && a.text === b.text && a.time === b.time;
}

/** Apply one server frame, returning the next view state. */
export function applyFrame(view: ViewState, frame: Frame): ViewState {
  switch (frame.type) {
    case "chat": {
      const turn = frame.payload;
      const transcript = view.transcript.slice();
      // A locally echoed operator turn is confirmed by the server copy.
      const pendingIndex = transcript.findIndex(
        (t) => t.pending && t.speaker === turn.speaker && t.text === turn.text,
      );
      if (pendingIndex >= 0) {
        transcript[pendingIndex] = { ...turn };
      } else {
        transcript.push({ ...turn });
      }
      return { ...view, transcript };
    }
    case "state":
      return { ...view, state: frame.payload, dmMode: frame.payload.dm_mode ?? view.dmMode };
    case "wizard_inbox":
      return { ...view, wizardInbox: [...view.wizardInbox, frame.payload] };
    case "error":
      return { ...view, lastError: frame.payload.message };
    case "control": {
      const payload = frame.payload;
      if (isHello(payload)) {
        const restored = payload.transcript.map((t) => ({ ...t }));
        // Keep locally pending turns that the server has not echoed yet.
        const pending = view.transcript.filter(
          (t) => t.pending && !restored.some((r) => sameTurn(r, t)),
        );
        return {
          ...view,
          connection: "open",
          session: payload.session,
          map: payload.map,
          roster: payload.config.roster,
          dmMode: payload.config.dm_mode,
          addressingMode: payload.config.addressing_mode,
          quickReplies: payload.quick_replies ?? [],
          transcript: [...restored, ...pending],
          lastError: null,
        };
      }
      if (payload.event === "dm_mode" && typeof payload.mode === "string") {
        return { ...view, dmMode: payload.mode };
      }
      if (payload.event === "wizard_granted") {
        return { ...view, wizardGranted: true };
      }
      return view;
    }
    default:
      return view;
  }
}

/** Optimistically show an operator turn before the server echoes it. */
export function addPendingSay(view: ViewState, text: string): ViewState {
  const turn: TranscriptEntry = {
    speaker: "operator",
    text,
    time: view.state?.t ?? 0,
    pending: true,
  };
  return { ...view, transcript: [...view.transcript, turn] };
}

export function markDisconnected(view: ViewState): ViewState {
  return { ...view, connection: "closed" };
}

export function speakerLabel(turn: ChatPayload, roster: RosterEntry[]): string {
  if (turn.speaker.startsWith("robot:")) {
    const id = turn.speaker.slice("robot:".length);
    return roster.find((r) => r.id === id)?.display_name ?? id;
  }
  return turn.speaker;
}
