// Dashboard state: one ordered event queue in, view models out.
//
// Every stream event funnels through DashboardState.applyEvent; the
// renderer reads tiles() and alertFeed() and never mutates state
// directly. Staleness is time-based (no events for a configurable
// number of transmit periods) and rendered as a badge on the tile.

import { severityColor } from "./severity.js";
import type {
  Alert,
  NodeOverview,
  ParameterKey,
  SampleRecord,
  SeverityColor,
  SeverityLabel,
  StreamEvent,
} from "./types.js";
import { PARAMETERS, PARAMETER_LABELS, PARAMETER_UNITS } from "./types.js";

export const STALE_AFTER_PERIODS = 3;

export interface TileParameter {
  key: ParameterKey;
  label: string;
  unit: string;
  value: number | null;
  severity: SeverityLabel | null;
  color: SeverityColor | null;
  fault: boolean;
}

export interface PatientTile {
  nodeId: number;
  participant: NodeOverview["participant"];
  parameters: TileParameter[];
  overall: SeverityLabel | null;
  overallColor: SeverityColor | null;
  lastUpdatedMs: number | null;
  stale: boolean;
  profileVersion: number | null;
}

export interface AlertFeedItem {
  alert: Alert;
  acked: boolean;
  open: boolean;
}

interface NodeState {
  nodeId: number;
  participant: NodeOverview["participant"];
  lastRecord: SampleRecord | null;
  lastEventWallMs: number | null;
  profileVersion: number | null;
}

export class DashboardState {
  private nodes = new Map<number, NodeState>();
  private alerts = new Map<string, Alert>();
  transmitPeriodMs: number;

  constructor(transmitPeriodMs = 2000) {
    this.transmitPeriodMs = transmitPeriodMs;
  }

  private node(nodeId: number): NodeState {
    let state = this.nodes.get(nodeId);
    if (!state) {
      state = {
        nodeId,
        participant: null,
        lastRecord: null,
        lastEventWallMs: null,
        profileVersion: null,
      };
      this.nodes.set(nodeId, state);
    }
    return state;
  }

  /** Seed tiles and versions from the REST listing (on load/reconnect). */
  seedNodes(overview: NodeOverview[]): void {
    for (const entry of overview) {
      const state = this.node(entry.node_id);
      state.participant = entry.participant;
      state.profileVersion = entry.profile_version;
    }
  }

  seedLatest(nodeId: number, record: SampleRecord, nowWallMs: number): void {
    const state = this.node(nodeId);
    state.lastRecord = record;
    state.lastEventWallMs = nowWallMs;
  }

  seedAlerts(alerts: Alert[]): void {
    for (const alert of alerts) {
      this.alerts.set(alert.alert_id, alert);
    }
  }

  /** The single entry point for stream events, in arrival order. */
  applyEvent(event: StreamEvent, nowWallMs: number): void {
    const state = this.node(event.node_id);
    switch (event.type) {
      case "sample":
        state.lastRecord = event.record;
        state.lastEventWallMs = nowWallMs;
        break;
      case "alert_raised":
      case "alert_cleared":
        this.alerts.set(event.alert.alert_id, event.alert);
        state.lastEventWallMs = nowWallMs;
        break;
      case "profile_changed":
        state.profileVersion = event.profile_version;
        break;
    }
  }

  applyAckResponse(alert: Alert): void {
    this.alerts.set(alert.alert_id, alert);
  }

  profileVersion(nodeId: number): number | null {
    return this.nodes.get(nodeId)?.profileVersion ?? null;
  }

  isStale(state: NodeState, nowWallMs: number): boolean {
    if (state.lastEventWallMs === null) return true;
    return nowWallMs - state.lastEventWallMs > STALE_AFTER_PERIODS * this.transmitPeriodMs;
  }

  tiles(nowWallMs: number): PatientTile[] {
    return [...this.nodes.values()]
      .sort((a, b) => a.nodeId - b.nodeId)
      .map((state) => this.tileFor(state, nowWallMs));
  }

  tile(nodeId: number, nowWallMs: number): PatientTile | null {
    const state = this.nodes.get(nodeId);
    return state ? this.tileFor(state, nowWallMs) : null;
  }

  private tileFor(state: NodeState, nowWallMs: number): PatientTile {
    const record = state.lastRecord;
    const parameters: TileParameter[] = PARAMETERS.map((key) => {
      const severity = record ? record.severities[key] : null;
      return {
        key,
        label: PARAMETER_LABELS[key],
        unit: PARAMETER_UNITS[key],
        value: record ? record[key] : null,
        severity,
        color: severity ? severityColor(severity) : null,
        fault: record ? record.fault_parameters.includes(key) : false,
      };
    });
    return {
      nodeId: state.nodeId,
      participant: state.participant,
      parameters,
      overall: record ? record.overall : null,
      overallColor: record ? severityColor(record.overall) : null,
      lastUpdatedMs: record ? record.received_at : null,
      stale: this.isStale(state, nowWallMs),
      profileVersion: state.profileVersion,
    };
  }

  /** Open alerts first (newest leading), then cleared; acked marked. */
  alertFeed(): AlertFeedItem[] {
    const items = [...this.alerts.values()].map((alert) => ({
      alert,
      acked: alert.acknowledged_by !== null,
      open: alert.cleared_at === null,
    }));
    items.sort((a, b) => {
      if (a.open !== b.open) return a.open ? -1 : 1;
      return b.alert.raised_at - a.alert.raised_at;
    });
    return items;
  }
}
