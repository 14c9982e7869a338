/**
 * HTML rendering of a SnapshotView.  Pure string generation so the view
 * logic stays testable without a browser; main.ts assigns the result to
 * the dashboard root.
 */

import type { Gauge, SnapshotView } from "./view.js";

function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function gaugeBlock(title: string, gauge: Gauge, unit: string, targetLabel: string): string {
  const percent = (gauge.fraction * 100).toFixed(0);
  return `
  <section class="gauge gauge-${gauge.status}">
    <h2>${esc(title)}</h2>
    <div class="bar"><div class="bar-fill" style="width:${percent}%"></div></div>
    <p class="reading">${gauge.value.toFixed(1)} ${unit} <span class="target">${esc(
      targetLabel
    )}</span></p>
    <p class="status">${esc(gauge.status)}</p>
  </section>`;
}

export function renderIncompatible(detail: string): string {
  return `<section class="error"><h2>Incompatible monitor</h2><p>${esc(detail)}</p></section>`;
}

export function renderBanner(state: string, detail: string, lastUpdate: string | null): string {
  if (state === "live") return "";
  const age = lastUpdate ? ` (last update ${esc(lastUpdate)})` : "";
  return `<div class="banner banner-${esc(state)}">${esc(state)} ${esc(detail)}${age}</div>`;
}

export function render(view: SnapshotView): string {
  const steps = view.steps
    .map((step) => {
      const cls = step.current ? "step current" : step.done ? "step done" : "step";
      return `<li class="${cls}">${esc(step.name)}</li>`;
    })
    .join("\n      ");
  const rows = view.history
    .map(
      (row) => `
      <tr class="${row.flagged ? "flagged" : ""}">
        <td>${esc(row.start)}</td>
        <td>${row.durationS.toFixed(1)} s</td>
        <td>${row.amountMl.toFixed(2)} ml</td>
        <td>${esc(row.flags.join(", ") || "-")}</td>
      </tr>`
    )
    .join("");
  const fillPercent = (view.fillLevelFraction * 100).toFixed(0);
  return `
<header>
  <h1>Hygiene session ${esc(view.sessionId)}</h1>
  <p class="meta">snapshot ${view.seq}${view.lastUpdate ? ` at ${esc(view.lastUpdate)}` : ""}</p>
</header>
<main>
  ${gaugeBlock(
    "Hygiene duration",
    view.durationGauge,
    "s",
    `target >= ${view.durationGauge.target} s`
  )}
  ${gaugeBlock("Sanitizer amount", view.amountGauge, "ml", "target 3-5 ml")}
  <section class="fill">
    <h2>Bottle fill level</h2>
    <div class="bar"><div class="bar-fill" style="width:${fillPercent}%"></div></div>
    <p class="reading">${fillPercent}%${view.refillCount ? ` (refills: ${view.refillCount})` : ""}</p>
  </section>
  <section class="steps">
    <h2>Procedure</h2>
    <ol>
      ${steps}
    </ol>
  </section>
  <section class="history">
    <h2>Completed hygiene episodes (session total ${view.sessionTotalMl.toFixed(2)} ml)</h2>
    <table>
      <thead><tr><th>start</th><th>duration</th><th>amount</th><th>flags</th></tr></thead>
      <tbody>${rows}</tbody>
    </table>
  </section>
</main>`;
}
