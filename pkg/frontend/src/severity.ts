import type { SeverityColor, SeverityLabel } from "./types.js";

// Exactly three value colors; staleness is a badge, never a color.
export const SEVERITY_COLORS: Record<SeverityLabel, SeverityColor> = {
  normal: "green",
  moderate: "yellow",
  emergency: "red",
};

export function severityColor(label: SeverityLabel): SeverityColor {
  return SEVERITY_COLORS[label];
}
