// Thin typed client for the gateway HTTP API. Every write the
// dashboard makes goes through here and nowhere else.

import type {
  Alert,
  HistoryBucket,
  NodeOverview,
  SampleRecord,
  ThresholdProfile,
} from "./types.js";

export class ApiError extends Error {
  status: number;
  body: unknown;

  constructor(status: number, body: unknown) {
    super(`gateway returned ${status}`);
    this.status = status;
    this.body = body;
  }
}

export class GatewayClient {
  private readonly base: string;
  private readonly fetchImpl: typeof fetch;

  constructor(base = "", fetchImpl?: typeof fetch) {
    this.base = base.replace(/\/$/, "");
    this.fetchImpl = fetchImpl ?? fetch.bind(globalThis);
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.base}${path}`, init);
    const body = await response.json().catch(() => null);
    if (!response.ok) {
      throw new ApiError(response.status, body);
    }
    return body as T;
  }

  nodes(): Promise<NodeOverview[]> {
    return this.request("/api/v1/nodes");
  }

  latest(nodeId: number): Promise<SampleRecord> {
    return this.request(`/api/v1/nodes/${nodeId}/latest`);
  }

  history(nodeId: number, fromMs: number, toMs: number, stepMs: number) {
    return this.request<{ buckets: HistoryBucket[] }>(
      `/api/v1/nodes/${nodeId}/history?from=${fromMs}&to=${toMs}&step=${stepMs}`,
    );
  }

  alerts(): Promise<Alert[]> {
    return this.request("/api/v1/alerts");
  }

  thresholds(nodeId: number): Promise<ThresholdProfile> {
    return this.request(`/api/v1/nodes/${nodeId}/thresholds`);
  }

  putThresholds(nodeId: number, profile: ThresholdProfile): Promise<ThresholdProfile> {
    return this.request(`/api/v1/nodes/${nodeId}/thresholds`, {
      method: "PUT",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(profile),
    });
  }

  ackAlert(alertId: string, actor: string): Promise<Alert> {
    return this.request(`/api/v1/alerts/${encodeURIComponent(alertId)}/ack`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ actor }),
    });
  }
}
