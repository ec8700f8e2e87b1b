// Alert acknowledgement, safe against double-clicks: while a POST for
// an alert is in flight (or it is already acked) further clicks are
// no-ops. The gateway is idempotent too; this just avoids the noise.

import type { GatewayClient } from "./api.js";
import type { Alert } from "./types.js";
import type { DashboardState } from "./state.js";

export class AckController {
  private inFlight = new Set<string>();

  constructor(
    private client: GatewayClient,
    private state: DashboardState,
    private actor: string,
  ) {}

  async acknowledge(alert: Alert): Promise<Alert | null> {
    if (alert.acknowledged_by !== null || this.inFlight.has(alert.alert_id)) {
      return null;
    }
    this.inFlight.add(alert.alert_id);
    try {
      const updated = await this.client.ackAlert(alert.alert_id, this.actor);
      this.state.applyAckResponse(updated);
      return updated;
    } finally {
      this.inFlight.delete(alert.alert_id);
    }
  }
}
