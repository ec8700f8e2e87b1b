// Wire types exchanged with the gateway API (JSON bodies).

export type SeverityLabel = "normal" | "moderate" | "emergency";
export type SeverityColor = "green" | "yellow" | "red";

export const PARAMETERS = [
  "body_temp",
  "ambient_temp",
  "humidity",
  "air_quality",
  "heart_rate",
] as const;
export type ParameterKey = (typeof PARAMETERS)[number];

export const PARAMETER_LABELS: Record<ParameterKey, string> = {
  body_temp: "Body temp",
  ambient_temp: "Ambient temp",
  humidity: "Humidity",
  air_quality: "Air quality",
  heart_rate: "Heart rate",
};

export const PARAMETER_UNITS: Record<ParameterKey, string> = {
  body_temp: "°C",
  ambient_temp: "°C",
  humidity: "%RH",
  air_quality: "ppm",
  heart_rate: "bpm",
};

export interface SampleRecord {
  received_at: number;
  node_id: number;
  seq: number;
  body_temp: number;
  ambient_temp: number;
  humidity: number;
  air_quality: number;
  heart_rate: number;
  flags: string[];
  severities: Record<ParameterKey, SeverityLabel>;
  overall: SeverityLabel;
  fault_parameters: string[];
  profile_version: number;
}

export interface Alert {
  alert_id: string;
  node_id: number;
  parameter: ParameterKey;
  severity: SeverityLabel;
  value: number;
  fault: boolean;
  profile_version: number;
  raised_at: number;
  cleared_at: number | null;
  acknowledged_by: string | null;
  acknowledged_at: number | null;
  state: "open" | "cleared" | "acked";
}

export interface Participant {
  participant_id: number;
  health_status: string;
  age_range: string;
  gender: string;
}

export interface NodeOverview {
  node_id: number;
  connected: boolean;
  liveness: string;
  last_received_at: number | null;
  last_seq: number | null;
  records: number;
  gap_count: number;
  profile_version: number;
  participant: Participant | null;
}

export interface BandSide {
  moderate: number | null;
  emergency: number | null;
  inclusive?: boolean;
}

export interface ParameterThresholds {
  low: BandSide | null;
  high: BandSide | null;
}

export interface ThresholdProfile {
  profile_version?: number;
  parameters: Record<ParameterKey, ParameterThresholds>;
}

export type StreamEvent =
  | { type: "sample"; node_id: number; record: SampleRecord }
  | { type: "alert_raised"; node_id: number; alert: Alert }
  | { type: "alert_cleared"; node_id: number; alert: Alert }
  | { type: "profile_changed"; node_id: number; profile_version: number };

export interface HistoryBucket {
  start: number;
  count: number;
  means: Record<ParameterKey, number>;
}
