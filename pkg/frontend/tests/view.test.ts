import { describe, expect, it } from "vitest";

import { initialState, reduce } from "../src/state.js";
import {
  renderBanners,
  renderBudgetGauge,
  renderGameOver,
  renderGrid,
  renderTimeline,
  rhoColor,
  zoneNameMap,
} from "../src/view.js";
import { alarmEvent, gameOverEvent, makeCase, makeObservation, stepEvent } from "./fixtures.js";

const grid = makeCase();
const zones = zoneNameMap(grid);

describe("color scale", () => {
  it("green below 0.9, amber to 1.0, red from 1.0", () => {
    expect(rhoColor(0.0)).toBe("#2bbf6a");
    expect(rhoColor(0.899)).toBe("#2bbf6a");
    expect(rhoColor(0.9)).toBe("#eec643");
    expect(rhoColor(0.999)).toBe("#eec643");
    expect(rhoColor(1.0)).toBe("#ff4d4f");
    expect(rhoColor(2.5)).toBe("#ff4d4f");
  });
});

describe("grid rendering", () => {
  it("draws every line and substation with loading colors", () => {
    const svg = renderGrid(grid, makeObservation(), []);
    for (const line of grid.lines) expect(svg).toContain(`data-line="${line.id}"`);
    for (const sub of grid.substations) expect(svg).toContain(`data-sub="${sub.id}"`);
    expect(svg).toContain('stroke="#2bbf6a"'); // all quiet: green lines
  });

  it("attacked lines render dashed", () => {
    const svg = renderGrid(grid, makeObservation({ attacked: ["L5"] }), []);
    const l5 = svg.split("<line").find((part) => part.includes('data-line="L5"'))!;
    expect(l5).toContain("stroke-dasharray");
    expect(l5).toContain("attacked");
  });

  it("overloaded lines render red", () => {
    const obs = makeObservation({ rho: { ...makeObservation().rho, L1: 1.13 } });
    const svg = renderGrid(grid, obs, []);
    const l1 = svg.split("<line").find((part) => part.includes('data-line="L1"'))!;
    expect(l1).toContain('stroke="#ff4d4f"');
  });

  it("highlighted zones mark their substations", () => {
    const svg = renderGrid(grid, makeObservation(), [2]);
    const sub5 = svg.split("<circle").find((part) => part.includes('data-sub="5"'))!;
    expect(sub5).toContain("highlighted");
    const sub1 = svg.split("<circle").find((part) => part.includes('data-sub="1"'))!;
    expect(sub1).not.toContain("highlighted");
  });
});

describe("budget gauge", () => {
  it("renders the streamed value verbatim", () => {
    const alpha = 2.0 + 1.5 / 288; // one regeneration step above 2
    const html = renderBudgetGauge(alpha);
    expect(html).toContain(`data-alpha="${alpha}"`);
    expect(html).toContain("2.01 / 3");
  });

  it("tone classes follow the level", () => {
    expect(renderBudgetGauge(0.4)).toContain('gauge low');
    expect(renderBudgetGauge(1.5)).toContain('gauge mid');
    expect(renderBudgetGauge(3.0)).toContain('gauge high');
  });
});

describe("banners and modal", () => {
  it("alarm banner shows zone tags from the event", () => {
    let state = initialState();
    state = reduce(state, stepEvent(1, makeObservation(), { initial: true }));
    state = reduce(state, alarmEvent(2, [2], 0, 2.0));
    const html = renderBanners(state, zones);
    expect(html).toContain("ALARM at step 0");
    expect(html).toContain("zone-tag zone-2");
    expect(html).toContain("south");
  });

  it("gameover modal shows t_bar, zone and cause", () => {
    let state = initialState();
    state = reduce(state, stepEvent(1, makeObservation(), { initial: true }));
    state = reduce(state, gameOverEvent(2, 66, 1));
    const html = renderGameOver(state, zones);
    expect(html).toContain('data-tbar="66"');
    expect(html).toContain("center");
    expect(html).toContain("cascade");
  });
});

describe("timeline", () => {
  it("marks actions and alarms, shades attacks", () => {
    let state = initialState();
    state = reduce(state, stepEvent(1, makeObservation(), { initial: true }));
    state = reduce(state, { seq: 2, type: "attack",
      payload: { line: "L5", start_step: 1, duration_steps: 24 } });
    state = reduce(state, stepEvent(3, makeObservation({ step: 1, topo_distance: 1 })));
    state = reduce(state, alarmEvent(4, [0], 1, 2.0));
    const svg = renderTimeline(state.timeline, state.attacks);
    expect(svg).toContain("action-marker");
    expect(svg).toContain("alarm-marker");
    expect(svg).toContain("attack-window");
    expect(svg).toContain("alpha-line");
  });
});
