/** Single reducer turning service events into the console's view state.
 *
 * The budget gauge and every rho color derive only from the latest step
 * event; the client never simulates budget or flows on its own. Alarm
 * banners accumulate from alarm events and stay visible for the session.
 */

import type {
  ActionJson,
  AlarmEventPayload,
  EventMessage,
  GameOverEventPayload,
  ObservationPayload,
  StepInfoPayload,
} from "./types.js";

export interface AlarmBanner {
  zones: number[];
  step: number;
  alpha: number;
  seq: number;
}

export interface AttackWindow {
  line: string;
  start: number;
  end: number; // exclusive
}

export interface TimelinePoint {
  step: number;
  alpha: number;
  topoDistance: number;
  actionApplied: boolean;
  alarm: boolean;
}

export interface ConsoleState {
  lastSeq: number;
  observation: ObservationPayload | null;
  lastInfo: StepInfoPayload | null;
  banners: AlarmBanner[];
  highlightedZones: number[];
  attacks: AttackWindow[];
  timeline: TimelinePoint[];
  gameOver: GameOverEventPayload | null;
  /** true while a step request is in flight; cleared by its step event */
  pendingStep: boolean;
  /** the action submitted with the in-flight step, for timeline marking */
  pendingAction: ActionJson | null;
  connected: boolean;
  error: string | null;
}

export function initialState(): ConsoleState {
  return {
    lastSeq: 0,
    observation: null,
    lastInfo: null,
    banners: [],
    highlightedZones: [],
    attacks: [],
    timeline: [],
    gameOver: null,
    pendingStep: false,
    pendingAction: null,
    connected: false,
    error: null,
  };
}

export function reduce(state: ConsoleState, event: EventMessage): ConsoleState {
  if (event.seq <= state.lastSeq) {
    return state; // replayed or out-of-order; already applied
  }
  const next: ConsoleState = { ...state, lastSeq: event.seq };
  switch (event.type) {
    case "step": {
      const obs = event.payload.observation;
      const info = event.payload.info;
      const previous = state.timeline[state.timeline.length - 1];
      const topoChanged = previous !== undefined &&
        obs.topo_distance !== previous.topoDistance;
      const submitted = state.pendingAction !== null &&
        !isEmptyAction(state.pendingAction) && info.legal;
      next.observation = obs;
      next.lastInfo = info;
      next.pendingStep = false;
      next.pendingAction = null;
      next.timeline = [
        ...state.timeline,
        {
          step: obs.step,
          alpha: obs.alpha,
          topoDistance: obs.topo_distance,
          actionApplied: !info.initial && (topoChanged || submitted),
          alarm: false,
        },
      ];
      break;
    }
    case "alarm": {
      const banner: AlarmBanner = { ...event.payload, seq: event.seq };
      next.banners = [...state.banners, banner];
      next.highlightedZones = [...event.payload.zones];
      next.timeline = markAlarm(state.timeline, event.payload);
      break;
    }
    case "attack": {
      next.attacks = [
        ...state.attacks,
        {
          line: event.payload.line,
          start: event.payload.start_step,
          end: event.payload.start_step + event.payload.duration_steps,
        },
      ];
      break;
    }
    case "gameover": {
      next.gameOver = event.payload;
      next.pendingStep = false;
      break;
    }
    case "error": {
      next.error = event.payload.detail;
      break;
    }
  }
  return next;
}

export function isEmptyAction(action: ActionJson): boolean {
  return !action.set_busbars && !action.set_line_status &&
    !action.redispatch && !action.curtail;
}

function markAlarm(timeline: TimelinePoint[], alarm: AlarmEventPayload): TimelinePoint[] {
  const out = timeline.slice();
  for (let i = out.length - 1; i >= 0; i--) {
    if (out[i].step === alarm.step) {
      out[i] = { ...out[i], alarm: true };
      break;
    }
  }
  return out;
}

/** The gauge value: always the alpha streamed by the latest event. */
export function budgetGauge(state: ConsoleState): number | null {
  return state.observation ? state.observation.alpha : null;
}

/** Banner visibility rule: any alarm event of this session so far. */
export function visibleBanners(state: ConsoleState): AlarmBanner[] {
  return state.banners;
}

export function canSubmitStep(state: ConsoleState): boolean {
  return !state.pendingStep && state.gameOver === null && state.observation !== null;
}

export function markStepSubmitted(state: ConsoleState,
                                  action: ActionJson | null): ConsoleState {
  return { ...state, pendingStep: true, pendingAction: action };
}
