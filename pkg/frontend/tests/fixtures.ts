/** Shared scripted-session fixtures: a small two-zone grid and event
 * builders shaped exactly like the bridge service payloads. */

import type {
  CasePayload,
  EventMessage,
  ObservationPayload,
  StepInfoPayload,
} from "../src/types.js";

export function makeCase(): CasePayload {
  return {
    name: "toy5",
    zones: [
      { index: 0, name: "north" },
      { index: 1, name: "center" },
      { index: 2, name: "south" },
    ],
    substations: [
      { id: 1, name: "sub1", zone: 0 },
      { id: 2, name: "sub2", zone: 0 },
      { id: 3, name: "sub3", zone: 1 },
      { id: 4, name: "sub4", zone: 1 },
      { id: 5, name: "sub5", zone: 2 },
    ],
    lines: [
      { id: "L1", from_sub: 1, to_sub: 2, thermal_limit: 120 },
      { id: "L2", from_sub: 1, to_sub: 3, thermal_limit: 110 },
      { id: "L3", from_sub: 2, to_sub: 3, thermal_limit: 65 },
      { id: "L4", from_sub: 2, to_sub: 4, thermal_limit: 85 },
      { id: "L5", from_sub: 3, to_sub: 5, thermal_limit: 70 },
      { id: "L6", from_sub: 4, to_sub: 5, thermal_limit: 55 },
    ],
    generators: [
      { id: "G1", substation: 1, kind: "dispatchable", p_min: 0, p_max: 300, ramp: 15 },
      { id: "G2", substation: 2, kind: "wind", p_min: 0, p_max: 80, ramp: 80 },
    ],
    loads: [
      { id: "D1", substation: 3 },
      { id: "D2", substation: 5 },
    ],
    attackable_lines: ["L2", "L5", "L6"],
    elements_of_sub: {
      "1": ["line:L1:1", "line:L2:1", "gen:G1"],
      "2": ["line:L1:2", "line:L3:2", "line:L4:2", "gen:G2"],
      "3": ["line:L2:3", "line:L3:3", "line:L5:3", "load:D1"],
      "4": ["line:L4:4", "line:L6:4"],
      "5": ["line:L5:5", "line:L6:5", "load:D2"],
    },
    coords: {
      substations: {
        "1": [80, 60], "2": [280, 60], "3": [120, 200],
        "4": [330, 200], "5": [220, 320],
      },
    },
  };
}

export function makeObservation(overrides: Partial<ObservationPayload> = {}): ObservationPayload {
  return {
    step: 0,
    alpha: 3.0,
    max_rho: 0.6,
    rho: { L1: 0.58, L2: 0.6, L3: 0.48, L4: 0.45, L5: 0.53, L6: 0.14 },
    p_flow: {},
    line_status: {
      L1: "connected", L2: "connected", L3: "connected",
      L4: "connected", L5: "connected", L6: "connected",
    },
    attacked: [],
    maintenance: [],
    sub_cooldown: {},
    line_cooldown: {},
    gen_p: { G1: 135, G2: 0 },
    gen_target: { G1: 135, G2: 0 },
    load_p: { D1: 60, D2: 45 },
    busbars: {},
    zones: { "1": 0, "2": 0, "3": 1, "4": 1, "5": 2 },
    topo_distance: 0,
    unserved: [],
    is_prediction: false,
    ...overrides,
  };
}

export function stepEvent(seq: number, obs: ObservationPayload,
                          info: Partial<StepInfoPayload> = {}): EventMessage {
  return {
    seq,
    type: "step",
    payload: {
      observation: obs,
      info: {
        legal: true, illegal_reasons: [], alarm_rejected: false,
        tripped: [], done: false, ...info,
      },
    },
  };
}

export function alarmEvent(seq: number, zones: number[], step: number,
                           alpha: number): EventMessage {
  return { seq, type: "alarm", payload: { zones, step, alpha } };
}

export function attackEvent(seq: number, line: string, start: number,
                            duration: number): EventMessage {
  return {
    seq, type: "attack",
    payload: { line, start_step: start, duration_steps: duration },
  };
}

export function gameOverEvent(seq: number, tBar: number, zone: number): EventMessage {
  return {
    seq, type: "gameover",
    payload: { outcome: "failed", t_bar: tBar, failure_zone: zone, cause: "cascade" },
  };
}
