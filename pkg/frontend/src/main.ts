// Entry point: wire state, stream, API client, and rendering together.

import { AckController } from "./ack.js";
import { GatewayClient } from "./api.js";
import { renderAlertFeed, renderFieldErrors, renderGrid, renderStreamStatus } from "./render.js";
import { sparklinePoints } from "./sparkline.js";
import { DashboardState } from "./state.js";
import { ThresholdForm, validateProfile } from "./thresholds.js";
import { NdjsonStreamClient } from "./stream.js";
import type { ParameterKey, ThresholdProfile } from "./types.js";
import { PARAMETERS } from "./types.js";

const TRANSMIT_PERIOD_MS = 2000;

const client = new GatewayClient("");
const state = new DashboardState(TRANSMIT_PERIOD_MS);
const ack = new AckController(client, state, "dashboard-operator");

const grid = document.getElementById("grid")!;
const feed = document.getElementById("alert-feed")!;
const status = document.getElementById("stream-status")!;
const detail = document.getElementById("detail")!;

let openNode: number | null = null;
let form: ThresholdForm | null = null;

function redraw(): void {
  const now = Date.now();
  renderGrid(grid, state.tiles(now), openDetail);
  renderAlertFeed(feed, state.alertFeed(), (alert) => void ack.acknowledge(alert).then(redraw));
  if (openNode !== null) void drawDetail(openNode);
}

async function drawDetail(nodeId: number): Promise<void> {
  const tile = state.tile(nodeId, Date.now());
  if (!tile) return;
  detail.classList.remove("hidden");
  const head = detail.querySelector("#detail-title")!;
  head.textContent = tile.participant
    ? `Person ${tile.participant.participant_id} — ${tile.participant.health_status}, ` +
      `${tile.participant.age_range}, ${tile.participant.gender}`
    : `Node ${nodeId}`;
  try {
    const now = Date.now();
    const history = await client.history(nodeId, now - 30 * 60_000, now, 60_000);
    for (const parameter of PARAMETERS) {
      const poly = detail.querySelector(`#spark-${parameter} polyline`);
      if (poly) poly.setAttribute("points", sparklinePoints(history.buckets, parameter));
    }
  } catch {
    // sparklines are presentational; ignore history errors
  }
}

function openDetail(nodeId: number): void {
  openNode = nodeId;
  void loadForm(nodeId);
  redraw();
}

async function loadForm(nodeId: number): Promise<void> {
  const profile = await client.thresholds(nodeId);
  form = new ThresholdForm(nodeId, client, profile);
  drawForm(profile);
}

function drawForm(profile: ThresholdProfile): void {
  const table = detail.querySelector("#threshold-rows")!;
  table.replaceChildren();
  for (const key of PARAMETERS) {
    const entry = profile.parameters[key];
    const row = document.createElement("tr");
    row.innerHTML =
      `<td>${key}</td>` +
      boundaryCell(key, "low", "emergency", entry.low?.emergency) +
      boundaryCell(key, "low", "moderate", entry.low?.moderate) +
      boundaryCell(key, "high", "moderate", entry.high?.moderate) +
      boundaryCell(key, "high", "emergency", entry.high?.emergency);
    table.append(row);
  }
}

function boundaryCell(
  parameter: ParameterKey, side: string, kind: string, value: number | null | undefined,
): string {
  const id = `thr-${parameter}-${side}-${kind}`;
  return `<td><input id="${id}" data-parameter="${parameter}" data-side="${side}"` +
    ` data-kind="${kind}" value="${value ?? ""}" size="6"></td>`;
}

function collectDraft(): void {
  if (!form) return;
  for (const input of detail.querySelectorAll<HTMLInputElement>("input[data-parameter]")) {
    const parameter = input.dataset.parameter as ParameterKey;
    const side = input.dataset.side as "low" | "high";
    const kind = input.dataset.kind as "moderate" | "emergency";
    const raw = input.value.trim();
    const entry = form.draft.parameters[parameter];
    const band = entry[side] ?? { moderate: null, emergency: null };
    band[kind] = raw === "" ? null : Number(raw);
    entry[side] = band.moderate === null && band.emergency === null ? null : band;
  }
}

async function submitForm(): Promise<void> {
  if (!form || openNode === null) return;
  collectDraft();
  const errors = validateProfile(form.draft);
  const errorBox = detail.querySelector<HTMLElement>("#threshold-errors")!;
  if (errors.length > 0) {
    renderFieldErrors(errorBox, errors); // inline errors, no request sent
    return;
  }
  const result = await form.submit(state.profileVersion(openNode));
  switch (result.outcome) {
    case "saved":
      renderFieldErrors(errorBox, []);
      drawForm(result.profile);
      break;
    case "invalid":
    case "rejected":
      renderFieldErrors(errorBox, result.errors);
      if (result.outcome === "rejected") drawForm(form.current);
      break;
    case "conflict": {
      const retry = confirm(
        `Thresholds changed elsewhere (now v${result.serverVersion}). Reload and retry?`,
      );
      if (retry) {
        await form.reload();
        drawForm(form.current);
      }
      break;
    }
    case "error":
      renderFieldErrors(errorBox, [{ field: "submit", reason: result.message }]);
  }
}

async function bootstrap(): Promise<void> {
  try {
    const nodes = await client.nodes();
    state.seedNodes(nodes);
    state.seedAlerts(await client.alerts());
    const now = Date.now();
    for (const node of nodes) {
      try {
        state.seedLatest(node.node_id, await client.latest(node.node_id), now);
      } catch {
        // no samples yet is fine
      }
    }
  } catch {
    renderStreamStatus(status, "disconnected");
  }
  redraw();

  const stream = new NdjsonStreamClient("/api/v1/stream", {
    onEvent: (event) => {
      state.applyEvent(event, Date.now());
      redraw();
    },
    onStatus: (s) => renderStreamStatus(status, s),
  });
  stream.start();

  // staleness is time-based: refresh badges even without events
  setInterval(redraw, 1000);

  detail.querySelector("#threshold-save")!.addEventListener("click", () => void submitForm());
  detail.querySelector("#detail-close")!.addEventListener("click", () => {
    openNode = null;
    detail.classList.add("hidden");
  });
}

void bootstrap();
