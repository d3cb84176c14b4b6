/** Browser wiring: one reducer loop, one event-stream consumer, DOM I/O.
 * All logic lives in state.ts / builder.ts / view.ts; this file only
 * shuttles between them and the document.
 */

import { BridgeClient, EventStream } from "./client.js";
import {
  buildAction,
  clearBusbar,
  emptyBuilder,
  selectBusbar,
  setLineStatus,
  touchedSubstations,
  validateBuilder,
  type BuilderState,
} from "./builder.js";
import {
  budgetGauge,
  canSubmitStep,
  initialState,
  markStepSubmitted,
  reduce,
  type ConsoleState,
} from "./state.js";
import type { CasePayload, EventMessage, SuggestionPayload } from "./types.js";
import {
  renderBanners,
  renderBudgetGauge,
  renderGameOver,
  renderGrid,
  renderSuggestion,
  renderTimeline,
  zoneNameMap,
} from "./view.js";

const API_BASE = (window as any).GRIDWARD_API ?? "http://127.0.0.1:8321";
const WS_BASE = API_BASE.replace(/^http/, "ws");

const client = new BridgeClient(API_BASE);

let state: ConsoleState = initialState();
let builder: BuilderState = emptyBuilder();
let grid: CasePayload | null = null;
let sessionId: string | null = null;
let suggestion: SuggestionPayload | null = null;

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node;
}

function render(): void {
  if (!grid) return;
  const zones = zoneNameMap(grid);
  if (state.observation) {
    el("grid").innerHTML = renderGrid(grid, state.observation, state.highlightedZones);
    el("step-counter").textContent = `step ${state.observation.step}`;
    el("max-rho").textContent = `max rho ${state.observation.max_rho.toFixed(3)}`;
  }
  el("gauge").innerHTML = renderBudgetGauge(budgetGauge(state));
  el("banners").innerHTML = renderBanners(state, zones);
  el("timeline").innerHTML = renderTimeline(state.timeline, state.attacks);
  el("suggestion").innerHTML = renderSuggestion(suggestion);
  el("modal").innerHTML = renderGameOver(state, zones);
  const verdict = validateBuilder(builder, grid);
  el("builder-state").textContent = JSON.stringify(buildAction(builder));
  el("builder-verdict").textContent = verdict.ok ? "" : verdict.reasons.join("; ");
  (el("submit-action") as HTMLButtonElement).disabled =
    !verdict.ok || !canSubmitStep(state);
  (el("accept-assistant") as HTMLButtonElement).disabled = !canSubmitStep(state);
}

function onEvent(event: EventMessage): void {
  state = reduce(state, event);
  if (event.type === "step" && sessionId && !state.gameOver) {
    void refreshSuggestion();
  }
  render();
}

async function refreshSuggestion(): Promise<void> {
  if (!sessionId) return;
  try {
    suggestion = await client.suggestion(sessionId);
  } catch {
    suggestion = null;
  }
  render();
}

async function submitStep(source: "human" | "accept-assistant"): Promise<void> {
  if (!sessionId || !canSubmitStep(state)) return;
  const action = source === "human" ? buildAction(builder) : null;
  state = markStepSubmitted(state, action);
  render();
  try {
    await client.step(sessionId, source === "human"
      ? { source, action: action ?? {} }
      : { source });
    builder = emptyBuilder();
  } catch (error) {
    state = { ...state, pendingStep: false, pendingAction: null };
    el("builder-verdict").textContent = `step failed, retry: ${error}`;
  }
  render();
}

function wireGridClicks(): void {
  el("grid").addEventListener("click", (event) => {
    if (!grid) return;
    const target = event.target as Element;
    const lineId = target.getAttribute("data-line");
    if (lineId && state.observation) {
      const current = state.observation.line_status[lineId];
      builder = setLineStatus(builder, lineId,
        current === "connected" ? "disconnected" : "connected");
      render();
      return;
    }
    const sub = target.getAttribute("data-sub");
    if (sub && state.observation) {
      // cycle each element of the substation: untouched -> busbar 2 -> clear
      for (const key of grid.elements_of_sub[sub] ?? []) {
        const chosen = builder.busbars[key];
        if (chosen === undefined) {
          const next = selectBusbar(builder, grid, key, 2);
          if (next === null) {
            el("builder-verdict").textContent =
              `blocked: action already touches substation ` +
              `${touchedSubstations(builder, grid).join(", ")} (max 1)`;
            return;
          }
          builder = next;
        } else {
          builder = clearBusbar(builder, key);
        }
      }
      render();
    }
  });
}

async function start(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const created = await client.createSession({
    case: params.get("case") ?? "toy5",
    scenario: params.get("scenario") ?? "week_flat",
    seed: Number(params.get("seed") ?? 0),
    assistant: params.get("assistant") ?? "sie+rba2",
    mode: "human-drives",
    opponent: params.get("opponent") !== "0",
  });
  sessionId = created.session_id;
  grid = created.case;
  el("session-label").textContent =
    `${created.case.name} / session ${created.session_id}`;

  const stream = new EventStream(WS_BASE, created.session_id, {
    socketFactory: (url) => new WebSocket(url) as unknown as
      import("./client.js").SocketLike,
    onEvent,
    onStatus: (connected) => {
      el("conn-dot").className = connected ? "dot live" : "dot dead";
    },
  });
  stream.connect();
  void refreshSuggestion();
  wireGridClicks();

  el("submit-action").addEventListener("click", () => void submitStep("human"));
  el("accept-assistant").addEventListener("click",
    () => void submitStep("accept-assistant"));
  el("raise-alarm").addEventListener("click", () => {
    if (!sessionId || !canSubmitStep(state)) return;
    const zonesRaw = prompt("alarm zones (comma-separated indices 0..2)", "0");
    if (zonesRaw === null) return;
    const zones = zonesRaw.split(",").map((z) => Number(z.trim()))
      .filter((z) => [0, 1, 2].includes(z));
    if (!zones.length) return;
    state = markStepSubmitted(state, null);
    render();
    void client.step(sessionId, { source: "human", action: {}, alarm: { zones } })
      .catch(() => { state = { ...state, pendingStep: false }; render(); });
  });
  render();
}

void start();
