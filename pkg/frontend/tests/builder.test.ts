import { describe, expect, it } from "vitest";

import {
  buildAction,
  clearBusbar,
  emptyBuilder,
  selectBusbar,
  setLineStatus,
  setRedispatch,
  touchedSubstations,
  validateBuilder,
} from "../src/builder.js";
import { makeCase } from "./fixtures.js";

const grid = makeCase();

describe("action builder", () => {
  it("assembles a single-substation busbar action", () => {
    let builder = emptyBuilder();
    builder = selectBusbar(builder, grid, "line:L1:2", 2)!;
    builder = selectBusbar(builder, grid, "gen:G2", 2)!;
    expect(touchedSubstations(builder, grid)).toEqual([2]);
    expect(buildAction(builder)).toEqual({
      set_busbars: { "line:L1:2": 2, "gen:G2": 2 },
    });
    expect(validateBuilder(builder, grid).ok).toBe(true);
  });

  it("blocks selecting an element of a second substation", () => {
    let builder = emptyBuilder();
    builder = selectBusbar(builder, grid, "line:L1:2", 2)!;
    const blocked = selectBusbar(builder, grid, "line:L2:3", 2);
    expect(blocked).toBeNull();
    // the original builder is untouched and still valid
    expect(touchedSubstations(builder, grid)).toEqual([2]);
    expect(validateBuilder(builder, grid).ok).toBe(true);
  });

  it("allows the second substation after clearing the first", () => {
    let builder = emptyBuilder();
    builder = selectBusbar(builder, grid, "line:L1:2", 2)!;
    builder = clearBusbar(builder, "line:L1:2");
    const next = selectBusbar(builder, grid, "line:L2:3", 2);
    expect(next).not.toBeNull();
    expect(touchedSubstations(next!, grid)).toEqual([3]);
  });

  it("line switching and redispatch ride along without substation limits", () => {
    let builder = emptyBuilder();
    builder = selectBusbar(builder, grid, "line:L5:5", 2)!;
    builder = setLineStatus(builder, "L3", "disconnected");
    builder = setRedispatch(builder, "G1", 10);
    const action = buildAction(builder);
    expect(action.set_line_status).toEqual({ L3: "disconnected" });
    expect(action.redispatch).toEqual({ G1: 10 });
    expect(validateBuilder(builder, grid).ok).toBe(true);
  });

  it("flags a redispatch beyond the ramp", () => {
    let builder = emptyBuilder();
    builder = setRedispatch(builder, "G1", 50); // ramp is 15
    const verdict = validateBuilder(builder, grid);
    expect(verdict.ok).toBe(false);
    expect(verdict.reasons[0]).toMatch(/ramp/);
  });

  it("unknown element keys throw", () => {
    expect(() => selectBusbar(emptyBuilder(), grid, "gen:nope", 2)).toThrow();
  });

  it("empty builder produces a do-nothing action", () => {
    expect(buildAction(emptyBuilder())).toEqual({});
  });
});
