// Threshold editing: client-side checks mirroring the gateway's
// profile invariants, optimistic submit with rollback on rejection,
// and a reload prompt when the profile version moved underneath us.

import { ApiError, GatewayClient } from "./api.js";
import type { BandSide, ParameterThresholds, ThresholdProfile } from "./types.js";
import { PARAMETERS } from "./types.js";

export interface FieldError {
  field: string;
  reason: string;
}

function sideErrors(path: string, side: BandSide | null, high: boolean): FieldError[] {
  if (side === null) return [];
  const errors: FieldError[] = [];
  const { moderate, emergency } = side;
  if (moderate === null && emergency === null) {
    errors.push({ field: path, reason: "enabled side needs a moderate or emergency boundary" });
  }
  for (const [key, value] of [["moderate", moderate], ["emergency", emergency]] as const) {
    if (value !== null && !Number.isFinite(value)) {
      errors.push({ field: `${path}.${key}`, reason: "must be a number" });
    }
  }
  if (moderate !== null && emergency !== null) {
    if (high && !(moderate < emergency)) {
      errors.push({ field: path, reason: "moderate boundary must lie below the emergency boundary" });
    }
    if (!high && !(moderate > emergency)) {
      errors.push({ field: path, reason: "moderate boundary must lie above the emergency boundary" });
    }
  }
  return errors;
}

/** Mirror of the gateway's profile invariants; [] means submittable. */
export function validateProfile(profile: ThresholdProfile): FieldError[] {
  const errors: FieldError[] = [];
  for (const key of PARAMETERS) {
    const entry: ParameterThresholds | undefined = profile.parameters[key];
    if (!entry) {
      errors.push({ field: `parameters.${key}`, reason: "missing parameter" });
      continue;
    }
    errors.push(...sideErrors(`parameters.${key}.low`, entry.low, false));
    errors.push(...sideErrors(`parameters.${key}.high`, entry.high, true));
  }
  return errors;
}

export type SubmitResult =
  | { outcome: "saved"; profile: ThresholdProfile }
  | { outcome: "invalid"; errors: FieldError[] }
  | { outcome: "rejected"; errors: FieldError[]; restored: ThresholdProfile }
  | { outcome: "conflict"; serverVersion: number }
  | { outcome: "error"; message: string };

export class ThresholdForm {
  readonly nodeId: number;
  private client: GatewayClient;
  private saved: ThresholdProfile;
  baseVersion: number;
  draft: ThresholdProfile;

  constructor(nodeId: number, client: GatewayClient, current: ThresholdProfile) {
    this.nodeId = nodeId;
    this.client = client;
    this.saved = structuredClone(current);
    this.draft = structuredClone(current);
    this.baseVersion = current.profile_version ?? 1;
  }

  get current(): ThresholdProfile {
    return this.saved;
  }

  /**
   * Validate locally, then PUT. An invalid draft sends no request. A
   * server rejection restores the last saved values and surfaces the
   * field reasons. A version that moved since the form was opened asks
   * for a reload-and-retry instead of writing blind.
   */
  async submit(knownServerVersion: number | null): Promise<SubmitResult> {
    const errors = validateProfile(this.draft);
    if (errors.length > 0) {
      return { outcome: "invalid", errors };
    }
    if (knownServerVersion !== null && knownServerVersion !== this.baseVersion) {
      return { outcome: "conflict", serverVersion: knownServerVersion };
    }
    const optimistic = structuredClone(this.draft);
    try {
      const saved = await this.client.putThresholds(this.nodeId, optimistic);
      this.saved = structuredClone(saved);
      this.draft = structuredClone(saved);
      this.baseVersion = saved.profile_version ?? this.baseVersion + 1;
      return { outcome: "saved", profile: saved };
    } catch (error) {
      if (error instanceof ApiError && error.status === 422) {
        this.draft = structuredClone(this.saved); // rollback
        const body = error.body as { errors?: FieldError[] } | null;
        return { outcome: "rejected", errors: body?.errors ?? [], restored: this.saved };
      }
      return { outcome: "error", message: String(error) };
    }
  }

  /** Reload the server's current profile (the conflict recovery path). */
  async reload(): Promise<void> {
    const fresh = await this.client.thresholds(this.nodeId);
    this.saved = structuredClone(fresh);
    this.draft = structuredClone(fresh);
    this.baseVersion = fresh.profile_version ?? this.baseVersion;
  }
}
