// DOM rendering: a tile grid, a per-patient detail pane, the alert
// feed, and the threshold form. All state comes from DashboardState;
// handlers call back into the controllers wired up in main.ts.

import type { AlertFeedItem, PatientTile, TileParameter } from "./state.js";
import type { FieldError } from "./thresholds.js";
import type { Alert, StreamEvent } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function formatValue(p: TileParameter): string {
  if (p.value === null) return "--";
  const digits = p.key === "heart_rate" ? 0 : 2;
  return `${p.value.toFixed(digits)} ${p.unit}`;
}

export function formatUpdated(ms: number | null): string {
  if (ms === null) return "last updated: never";
  return `last updated: ${new Date(ms).toISOString().replace("T", " ").slice(0, 19)} UTC`;
}

export function renderTile(
  tile: PatientTile,
  onOpen: (nodeId: number) => void,
): HTMLElement {
  const card = el("div", `tile banner-${tile.overallColor ?? "none"}`);
  card.dataset.nodeId = String(tile.nodeId);
  const head = el("div", "tile-head");
  const title = tile.participant
    ? `Person ${tile.participant.participant_id} (${tile.participant.health_status})`
    : `Node ${tile.nodeId}`;
  head.append(el("span", "tile-title", title));
  if (tile.stale) {
    head.append(el("span", "badge badge-stale", "STALE"));
  }
  card.append(head);
  const list = el("div", "readouts");
  for (const parameter of tile.parameters) {
    const row = el("div", `readout value-${parameter.color ?? "none"}`);
    row.dataset.parameter = parameter.key;
    row.append(el("span", "readout-label", parameter.label));
    row.append(
      el("span", "readout-value", formatValue(parameter) + (parameter.fault ? " !" : "")),
    );
    list.append(row);
  }
  card.append(list);
  card.append(el("div", "updated", formatUpdated(tile.lastUpdatedMs)));
  card.addEventListener("click", () => onOpen(tile.nodeId));
  return card;
}

export function renderGrid(
  container: HTMLElement,
  tiles: PatientTile[],
  onOpen: (nodeId: number) => void,
): void {
  container.replaceChildren(...tiles.map((tile) => renderTile(tile, onOpen)));
}

export function renderAlertFeed(
  container: HTMLElement,
  items: AlertFeedItem[],
  onAck: (alert: Alert) => void,
): void {
  container.replaceChildren(
    ...items.map((item) => {
      const row = el("div", `alert alert-${item.alert.state}`);
      row.dataset.alertId = item.alert.alert_id;
      const what = `node ${item.alert.node_id} ${item.alert.parameter} = ${item.alert.value}` +
        (item.alert.fault ? " (sensor fault)" : "");
      row.append(el("span", "alert-text", what));
      row.append(el("span", "alert-state", item.acked
        ? `acked by ${item.alert.acknowledged_by}`
        : item.open ? "OPEN" : "cleared"));
      if (!item.acked) {
        const button = el("button", "ack-button", "Ack");
        button.addEventListener("click", (ev) => {
          ev.stopPropagation();
          onAck(item.alert);
        });
        row.append(button);
      }
      return row;
    }),
  );
}

export function renderFieldErrors(container: HTMLElement, errors: FieldError[]): void {
  container.replaceChildren(
    ...errors.map((e) => el("div", "field-error", `${e.field}: ${e.reason}`)),
  );
}

export function renderStreamStatus(element: HTMLElement, status: string): void {
  element.textContent = status;
  element.className = `stream-status stream-${status}`;
}

export function describeEvent(event: StreamEvent): string {
  switch (event.type) {
    case "sample":
      return `sample node ${event.node_id} seq ${event.record.seq}`;
    case "alert_raised":
      return `ALERT node ${event.node_id} ${event.alert.parameter}`;
    case "alert_cleared":
      return `cleared node ${event.node_id} ${event.alert.parameter}`;
    case "profile_changed":
      return `profile v${event.profile_version} node ${event.node_id}`;
  }
}
