/** Pure rendering: view state in, SVG/HTML strings out.
 *
 * Color scale for line loading: green below 0.9, amber from 0.9 to 1.0,
 * red at 1.0 and above; attacked lines render dashed. Zone highlighting
 * follows the latest alarm's zones.
 */

import type { ConsoleState, TimelinePoint, AttackWindow } from "./state.js";
import type { CasePayload, ObservationPayload, SuggestionPayload } from "./types.js";

export const ZONE_COLORS = ["#4f8edd", "#d4a017", "#9a62c9"];

export function rhoColor(rho: number): string {
  if (rho < 0.9) return "#2bbf6a"; // green
  if (rho < 1.0) return "#eec643"; // amber
  return "#ff4d4f"; // red
}

function escapeHtml(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function renderGrid(grid: CasePayload, obs: ObservationPayload,
                           highlightedZones: number[]): string {
  const coords = grid.coords.substations ?? {};
  const parts: string[] = [];
  for (const line of grid.lines) {
    const a = coords[String(line.from_sub)];
    const b = coords[String(line.to_sub)];
    if (!a || !b) continue;
    const rho = obs.rho[line.id] ?? 0;
    const attacked = obs.attacked.includes(line.id);
    const open = obs.line_status[line.id] !== "connected";
    const color = open ? "#666" : rhoColor(rho);
    const dash = attacked ? ' stroke-dasharray="7 5"' : open ? ' stroke-dasharray="2 4"' : "";
    parts.push(
      `<line class="line${attacked ? " attacked" : ""}" data-line="${line.id}" ` +
      `x1="${a[0]}" y1="${a[1]}" x2="${b[0]}" y2="${b[1]}" ` +
      `stroke="${color}" stroke-width="4"${dash}>` +
      `<title>${line.id}: rho ${(rho).toFixed(2)}</title></line>`);
  }
  for (const sub of grid.substations) {
    const at = coords[String(sub.id)];
    if (!at) continue;
    const highlighted = highlightedZones.includes(sub.zone);
    const unserved = obs.unserved.includes(sub.id);
    parts.push(
      `<circle class="sub zone-${sub.zone}${highlighted ? " highlighted" : ""}` +
      `${unserved ? " unserved" : ""}" data-sub="${sub.id}" cx="${at[0]}" ` +
      `cy="${at[1]}" r="13" fill="${unserved ? "#222" : ZONE_COLORS[sub.zone]}" ` +
      `stroke="${highlighted ? "#ff4d4f" : "#20262d"}" ` +
      `stroke-width="${highlighted ? 4 : 1.5}">` +
      `<title>${escapeHtml(sub.name)} (zone ${sub.zone})</title></circle>`);
    parts.push(`<text x="${at[0]}" y="${at[1] + 4}" class="sub-label" ` +
      `text-anchor="middle">${sub.id}</text>`);
  }
  return `<svg viewBox="0 0 520 480" class="grid-svg">${parts.join("")}</svg>`;
}

export function renderBudgetGauge(alpha: number | null, cap = 3.0): string {
  if (alpha === null) return `<div class="gauge empty">–</div>`;
  const frac = Math.max(0, Math.min(1, alpha / cap));
  const tone = alpha < 1.0 ? "low" : alpha < 2.0 ? "mid" : "high";
  return (
    `<div class="gauge ${tone}" data-alpha="${alpha}">` +
    `<div class="gauge-fill" style="width:${(frac * 100).toFixed(1)}%"></div>` +
    `<span class="gauge-text">${alpha.toFixed(2)} / ${cap.toFixed(0)}</span></div>`
  );
}

export function renderBanners(state: ConsoleState,
                              zoneNames: Record<number, string>): string {
  if (!state.banners.length) return "";
  const items = state.banners.slice(-4).reverse().map((banner) => {
    const tags = banner.zones
      .map((z) => `<span class="zone-tag zone-${z}">${escapeHtml(zoneNames[z] ?? `zone ${z}`)}</span>`)
      .join(" ");
    return (
      `<div class="banner" data-step="${banner.step}">` +
      `ALARM at step ${banner.step} ${tags} ` +
      `<span class="banner-alpha">budget ${banner.alpha.toFixed(2)}</span></div>`
    );
  });
  return `<div class="banners">${items.join("")}</div>`;
}

export function renderSuggestion(suggestion: SuggestionPayload | null): string {
  if (!suggestion) return `<div class="suggestion empty">no suggestion yet</div>`;
  const action = JSON.stringify(suggestion.action);
  const alarm = suggestion.alarm
    ? `alarm zones ${suggestion.alarm.join(", ")}`
    : "no alarm";
  return (
    `<div class="suggestion">` +
    `<code class="suggested-action">${escapeHtml(action)}</code>` +
    `<div>${alarm}</div>` +
    `<div>predicted max rho ${suggestion.predicted_max_rho.toFixed(3)} ` +
    `(now ${suggestion.current_max_rho.toFixed(3)})</div></div>`
  );
}

export function renderTimeline(timeline: TimelinePoint[], attacks: AttackWindow[],
                               width = 600, height = 90): string {
  if (!timeline.length) return `<svg class="timeline" viewBox="0 0 ${width} ${height}"></svg>`;
  const maxStep = Math.max(timeline[timeline.length - 1].step, 1);
  const x = (step: number) => (step / maxStep) * (width - 10) + 5;
  const yAlpha = (alpha: number) => height - 12 - (alpha / 3.0) * (height - 30);
  const parts: string[] = [];
  for (const window of attacks) {
    parts.push(`<rect class="attack-window" x="${x(window.start).toFixed(1)}" y="4" ` +
      `width="${Math.max(1, x(Math.min(window.end, maxStep)) - x(window.start)).toFixed(1)}" ` +
      `height="${height - 16}" fill="#ff4d4f" opacity="0.15"><title>attack ${window.line}</title></rect>`);
  }
  const path = timeline
    .map((p, i) => `${i === 0 ? "M" : "L"}${x(p.step).toFixed(1)},${yAlpha(p.alpha).toFixed(1)}`)
    .join(" ");
  parts.push(`<path class="alpha-line" d="${path}" fill="none" stroke="#5aa7ff" stroke-width="1.5"/>`);
  for (const point of timeline) {
    if (point.actionApplied) {
      parts.push(`<circle class="action-marker" cx="${x(point.step).toFixed(1)}" ` +
        `cy="${height - 8}" r="3" fill="#2bbf6a"><title>action at ${point.step} ` +
        `(distance ${point.topoDistance})</title></circle>`);
    }
    if (point.alarm) {
      parts.push(`<line class="alarm-marker" x1="${x(point.step).toFixed(1)}" y1="6" ` +
        `x2="${x(point.step).toFixed(1)}" y2="${height - 14}" stroke="#eec643" stroke-width="2"/>`);
    }
  }
  return `<svg class="timeline" viewBox="0 0 ${width} ${height}">${parts.join("")}</svg>`;
}

export function renderGameOver(state: ConsoleState,
                               zoneNames: Record<number, string>): string {
  const over = state.gameOver;
  if (!over) return "";
  if (over.outcome === "survived") {
    return `<div class="modal gameover survived"><h2>Scenario survived</h2></div>`;
  }
  const zone = over.failure_zone !== null
    ? (zoneNames[over.failure_zone] ?? `zone ${over.failure_zone}`)
    : "unknown";
  return (
    `<div class="modal gameover failed"><h2>Game over</h2>` +
    `<p>failure at step <b data-tbar="${over.t_bar}">${over.t_bar}</b>, ` +
    `zone <b>${escapeHtml(zone)}</b>, cause <b>${escapeHtml(over.cause ?? "?")}</b></p></div>`
  );
}

export function zoneNameMap(grid: CasePayload): Record<number, string> {
  const names: Record<number, string> = {};
  for (const zone of grid.zones) names[zone.index] = zone.name;
  return names;
}
