// Console bootstrap: wires the connection, view state, canvas, chat, and
// wizard panel together. Everything here is DOM plumbing; the logic lives in
// view.ts / scene.ts / wizard.ts.

import { ConsoleConnection } from "./connection.js";
import { buildScene } from "./scene.js";
import { paintScene } from "./render.js";
import type { Action, WizardForm } from "./wizard.js";
import {
  actionsFor,
  buildWizardFrame,
  locationChoices,
} from "./wizard.js";
import {
  addPendingSay,
  applyFrame,
  initialView,
  markDisconnected,
  speakerLabel,
  type ViewState,
} from "./view.js";

function el<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing element #${id}`);
  return found as T;
}

const canvas = el<HTMLCanvasElement>("map");
const maybeCtx = canvas.getContext("2d");
if (!maybeCtx) throw new Error("2D canvas unavailable");
const ctx: CanvasRenderingContext2D = maybeCtx;

const chatLog = el<HTMLDivElement>("chat-log");
const chatInput = el<HTMLInputElement>("chat-input");
const sendBtn = el<HTMLButtonElement>("send");
const banner = el<HTMLDivElement>("banner");
const statusBar = el<HTMLDivElement>("status-bar");
const wizardPanel = el<HTMLDivElement>("wizard-panel");
const wizardInboxId = el<HTMLDivElement>("wizard-inbox");
const wizardReply = el<HTMLInputElement>("wizard-reply");
const wizardRobot = el<HTMLSelectElement>("wizard-robot");
const wizardAction = el<HTMLSelectElement>("wizard-action");
const wizardLocation = el<HTMLSelectElement>("wizard-location");
const wizardLeader = el<HTMLSelectElement>("wizard-leader");
const wizardUrgent = el<HTMLInputElement>("wizard-urgent");
const wizardError = el<HTMLDivElement>("wizard-error");
const wizardSend = el<HTMLButtonElement>("wizard-send");
const wizardReplyOnly = el<HTMLButtonElement>("wizard-reply-only");
const claimWizardBtn = el<HTMLButtonElement>("claim-wizard");
const quickReplies = el<HTMLDivElement>("quick-replies");

const params = new URLSearchParams(location.search);
const wsUrl =
  params.get("ws") ?? `ws://${location.hostname || "127.0.0.1"}:8750/ws`;

let view: ViewState = initialView();
let renderedTurns = 0;

const connection = new ConsoleConnection(wsUrl, {
  onFrame(frame) {
    view = applyFrame(view, frame);
    if (frame.type === "control") {
      // hello resets the transcript panel
      renderedTurns = Math.min(renderedTurns, 0);
      chatLog.replaceChildren();
      renderedTurns = 0;
      refreshWizardForm();
      refreshQuickReplies();
    }
    syncDom();
  },
  onOpen() {
    banner.hidden = true;
  },
  onClose(willRetry) {
    view = markDisconnected(view);
    banner.textContent = willRetry
      ? "connection lost, retrying…"
      : "disconnected";
    banner.hidden = false;
    syncDom();
  },
  onSendFailure() {
    banner.textContent = "send failed: not connected";
    banner.hidden = false;
  },
});
connection.connect();

// --- chat -------------------------------------------------------------------

function appendTurnDiv(text: string, cls: string): void {
  const div = document.createElement("div");
  div.className = `turn ${cls}`;
  div.textContent = text;
  chatLog.appendChild(div);
  chatLog.scrollTop = chatLog.scrollHeight;
}

function syncTranscript(): void {
  // Transcript renders strictly in server order; only append what is new.
  if (renderedTurns > view.transcript.length) {
    chatLog.replaceChildren();
    renderedTurns = 0;
  }
  chatLog.querySelectorAll(".pending").forEach((node) => node.remove());
  for (let i = renderedTurns; i < view.transcript.length; i += 1) {
    const turn = view.transcript[i];
    if (turn.pending) continue;
    const label = speakerLabel(turn, view.roster);
    const badge = turn.chat_only ? " [chat-only]" : "";
    appendTurnDiv(`${label}: ${turn.text}${badge}`, cssFor(turn.speaker));
    renderedTurns = i + 1;
  }
  for (const turn of view.transcript.slice(renderedTurns)) {
    if (turn.pending) {
      appendTurnDiv(`operator: ${turn.text} (sending…)`, "operator pending");
    }
  }
}

function cssFor(speaker: string): string {
  if (speaker === "operator") return "operator";
  if (speaker === "dm" || speaker === "wizard") return "dm";
  return "robot";
}

function sendSay(): void {
  const text = chatInput.value.trim();
  if (!text) return;
  if (connection.send({ type: "say", text })) {
    view = addPendingSay(view, text);
    chatInput.value = "";
    syncDom();
  }
}

sendBtn.addEventListener("click", sendSay);
chatInput.addEventListener("keydown", (e) => {
  if (e.key === "Enter") sendSay();
});
chatInput.addEventListener("input", () => {
  sendBtn.disabled = chatInput.value.trim() === "";
});
sendBtn.disabled = true;

// --- wizard panel -------------------------------------------------------------

claimWizardBtn.addEventListener("click", () => {
  connection.send({ type: "control", payload: { action: "claim_wizard" } });
});

function option(value: string, label?: string): HTMLOptionElement {
  const opt = document.createElement("option");
  opt.value = value;
  opt.textContent = label ?? value;
  return opt;
}

function refreshWizardForm(): void {
  wizardRobot.replaceChildren(
    ...view.roster.map((r) => option(r.id, r.display_name)),
  );
  wizardLeader.replaceChildren(
    ...view.roster.map((r) => option(r.id, r.display_name)),
  );
  refreshActionChoices();
}

function refreshActionChoices(): void {
  const robot = view.roster.find((r) => r.id === wizardRobot.value);
  wizardAction.replaceChildren(...actionsFor(robot).map((a) => option(a)));
  refreshLocationChoices();
}

function refreshLocationChoices(): void {
  if (!view.map) return;
  const choices = locationChoices(view.map, wizardAction.value as Action);
  wizardLocation.replaceChildren(...choices.map((c) => option(c.name)));
  wizardLocation.disabled = choices.length === 0;
  wizardLeader.disabled = wizardAction.value !== "FOLLOW";
}

wizardRobot.addEventListener("change", refreshActionChoices);
wizardAction.addEventListener("change", refreshLocationChoices);

function currentForm(): WizardForm {
  return {
    robotId: wizardRobot.value,
    action: wizardAction.value as Action,
    locationName: wizardLocation.value,
    leaderId: wizardLeader.value,
    urgency: wizardUrgent.checked ? "urgent" : "normal",
    stealth: false,
  };
}

function submitWizard(withCommand: boolean): void {
  if (!view.map) return;
  const result = buildWizardFrame(
    wizardReply.value,
    withCommand ? currentForm() : null,
    view.map,
    view.roster,
    view.state?.t ?? 0,
  );
  if (result.error) {
    wizardError.textContent = result.error;
    wizardError.hidden = false;
    return;
  }
  wizardError.hidden = true;
  if (result.frame) {
    connection.send(result.frame);
    wizardReply.value = "";
  }
}

wizardSend.addEventListener("click", () => submitWizard(true));
wizardReplyOnly.addEventListener("click", () => submitWizard(false));

function refreshQuickReplies(): void {
  quickReplies.replaceChildren(
    ...view.quickReplies.slice(0, 8).map((template) => {
      const btn = document.createElement("button");
      btn.textContent = template;
      btn.addEventListener("click", () => {
        wizardReply.value = template;
      });
      return btn;
    }),
  );
}

function syncWizard(): void {
  wizardPanel.classList.toggle("granted", view.wizardGranted);
  claimWizardBtn.hidden = view.wizardGranted;
  const entries = view.wizardInbox.map((t) => `operator: ${t.text}`);
  wizardInboxId.replaceChildren(
    ...entries.map((text) => {
      const div = document.createElement("div");
      div.textContent = text;
      return div;
    }),
  );
}

// --- status + render loop -------------------------------------------------------

function syncStatus(): void {
  const mode = `dm: ${view.dmMode} · addressing: ${view.addressingMode}`;
  const robots = (view.state?.robots ?? [])
    .map((r) => {
      const alt = r.kind === "aerial" ? ` alt ${r.altitude.toFixed(0)}m` : "";
      return `${r.name}: (${r.x.toFixed(1)}, ${r.y.toFixed(1)})${alt}${r.busy ? " [busy]" : ""}`;
    })
    .join("  |  ");
  const t = view.state ? `t=${view.state.t.toFixed(1)}s` : "–";
  statusBar.textContent = `${view.connection} · ${t} · ${mode}   ${robots}`;
  if (view.lastError) {
    banner.textContent = view.lastError;
    banner.hidden = false;
  }
}

function syncDom(): void {
  syncTranscript();
  syncWizard();
  syncStatus();
}

function paint(): void {
  const rect = canvas.getBoundingClientRect();
  const dpr = window.devicePixelRatio || 1;
  canvas.width = Math.round(rect.width * dpr);
  canvas.height = Math.round(rect.height * dpr);
  ctx.setTransform(dpr, 0, 0, dpr, 0, 0);
  paintScene(ctx, buildScene(view, rect.width, rect.height), rect.width, rect.height);
  requestAnimationFrame(paint);
}
requestAnimationFrame(paint);
