/** Wire types mirroring the bridge service API. */

export type LineStatus = "connected" | "disconnected";

export interface ObservationPayload {
  step: number;
  alpha: number;
  max_rho: number;
  rho: Record<string, number>;
  p_flow: Record<string, number>;
  line_status: Record<string, LineStatus>;
  attacked: string[];
  maintenance: string[];
  sub_cooldown: Record<string, number>;
  line_cooldown: Record<string, number>;
  gen_p: Record<string, number>;
  gen_target: Record<string, number>;
  load_p: Record<string, number>;
  busbars: Record<string, Record<string, number>>;
  zones: Record<string, number>;
  topo_distance: number;
  unserved: number[];
  is_prediction: boolean;
}

export interface CasePayload {
  name: string;
  zones: { index: number; name: string }[];
  substations: { id: number; name: string; zone: number }[];
  lines: { id: string; from_sub: number; to_sub: number; thermal_limit: number }[];
  generators: { id: string; substation: number; kind: string; p_min: number; p_max: number; ramp: number }[];
  loads: { id: string; substation: number }[];
  attackable_lines: string[];
  elements_of_sub: Record<string, string[]>;
  coords: { substations?: Record<string, [number, number]> };
}

export interface StepInfoPayload {
  legal: boolean;
  illegal_reasons: string[];
  alarm_rejected: boolean;
  tripped: string[];
  done: boolean;
  initial?: boolean;
}

export interface StepEventPayload {
  observation: ObservationPayload;
  info: StepInfoPayload;
}

export interface AlarmEventPayload {
  zones: number[];
  step: number;
  alpha: number;
}

export interface AttackEventPayload {
  line: string;
  start_step: number;
  duration_steps: number;
}

export interface GameOverEventPayload {
  outcome: "survived" | "failed";
  t_bar: number | null;
  failure_zone: number | null;
  cause: string | null;
}

export type EventMessage =
  | { seq: number; type: "step"; payload: StepEventPayload }
  | { seq: number; type: "alarm"; payload: AlarmEventPayload }
  | { seq: number; type: "attack"; payload: AttackEventPayload }
  | { seq: number; type: "gameover"; payload: GameOverEventPayload }
  | { seq: number; type: "error"; payload: { detail: string } };

export interface ActionJson {
  set_busbars?: Record<string, number>;
  set_line_status?: Record<string, LineStatus>;
  redispatch?: Record<string, number>;
  curtail?: Record<string, number>;
}

export interface SuggestionPayload {
  action: ActionJson;
  alarm: number[] | null;
  predicted_max_rho: number;
  predicted_unserved: number[];
  current_max_rho: number;
}

export interface CreateSessionResponse {
  session_id: string;
  mode: string;
  observation: ObservationPayload;
  case: CasePayload;
}

export interface StepRequestBody {
  source: "human" | "accept-assistant";
  action?: ActionJson;
  alarm?: { zones: number[] };
  idempotency_key?: string;
}

export interface StepResponse {
  event: { seq: number; type: "step"; payload: StepEventPayload };
  seq: number;
}
