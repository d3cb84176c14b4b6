/** Action builder: accumulates busbar moves, line switching, redispatch
 * and curtailment into one action, enforcing the one-substation rule
 * client-side so an invalid submission never reaches the service.
 */

import type { ActionJson, CasePayload, LineStatus } from "./types.js";

export interface BuilderState {
  busbars: Record<string, number>;        // element key -> target busbar
  lineStatus: Record<string, LineStatus>;
  redispatch: Record<string, number>;
  curtail: Record<string, number>;
}

export function emptyBuilder(): BuilderState {
  return { busbars: {}, lineStatus: {}, redispatch: {}, curtail: {} };
}

export function substationOfElement(key: string, grid: CasePayload): number {
  for (const [sub, elements] of Object.entries(grid.elements_of_sub)) {
    if (elements.includes(key)) return Number(sub);
  }
  throw new Error(`unknown element key '${key}'`);
}

export function touchedSubstations(builder: BuilderState, grid: CasePayload): number[] {
  const subs = new Set<number>();
  for (const key of Object.keys(builder.busbars)) {
    subs.add(substationOfElement(key, grid));
  }
  return [...subs].sort((a, b) => a - b);
}

/** A busbar selection is allowed only while it keeps the action on a
 * single substation; returns null when the selection must be blocked. */
export function selectBusbar(builder: BuilderState, grid: CasePayload,
                             key: string, busbar: number): BuilderState | null {
  const sub = substationOfElement(key, grid);
  const touched = touchedSubstations(builder, grid);
  if (touched.length >= 1 && !touched.includes(sub)) {
    return null;
  }
  return { ...builder, busbars: { ...builder.busbars, [key]: busbar } };
}

export function clearBusbar(builder: BuilderState, key: string): BuilderState {
  const busbars = { ...builder.busbars };
  delete busbars[key];
  return { ...builder, busbars };
}

export function setLineStatus(builder: BuilderState, lineId: string,
                              status: LineStatus): BuilderState {
  return { ...builder, lineStatus: { ...builder.lineStatus, [lineId]: status } };
}

export function setRedispatch(builder: BuilderState, genId: string,
                              deltaMw: number): BuilderState {
  return { ...builder, redispatch: { ...builder.redispatch, [genId]: deltaMw } };
}

export function setCurtail(builder: BuilderState, genId: string,
                           capMw: number): BuilderState {
  return { ...builder, curtail: { ...builder.curtail, [genId]: capMw } };
}

export interface BuilderVerdict {
  ok: boolean;
  reasons: string[];
}

export function validateBuilder(builder: BuilderState, grid: CasePayload): BuilderVerdict {
  const reasons: string[] = [];
  const touched = touchedSubstations(builder, grid);
  if (touched.length > 1) {
    reasons.push(`touches ${touched.length} substations (max 1 per step)`);
  }
  for (const [gen, delta] of Object.entries(builder.redispatch)) {
    const meta = grid.generators.find((g) => g.id === gen);
    if (meta && Math.abs(delta) > meta.ramp) {
      reasons.push(`redispatch ${delta} MW on ${gen} exceeds ramp ${meta.ramp}`);
    }
  }
  for (const [gen, cap] of Object.entries(builder.curtail)) {
    if (cap < 0) reasons.push(`curtail cap for ${gen} must be >= 0`);
  }
  return { ok: reasons.length === 0, reasons };
}

export function buildAction(builder: BuilderState): ActionJson {
  const action: ActionJson = {};
  if (Object.keys(builder.busbars).length) action.set_busbars = { ...builder.busbars };
  if (Object.keys(builder.lineStatus).length) action.set_line_status = { ...builder.lineStatus };
  if (Object.keys(builder.redispatch).length) action.redispatch = { ...builder.redispatch };
  if (Object.keys(builder.curtail).length) action.curtail = { ...builder.curtail };
  return action;
}
