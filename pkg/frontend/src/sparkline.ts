// Minute-bucketed history rendered as an inline SVG polyline.

import type { HistoryBucket, ParameterKey } from "./types.js";

export function sparklinePoints(
  buckets: HistoryBucket[],
  parameter: ParameterKey,
  width = 160,
  height = 36,
): string {
  if (buckets.length === 0) return "";
  const values = buckets.map((b) => b.means[parameter]);
  const min = Math.min(...values);
  const max = Math.max(...values);
  const span = max - min || 1;
  const step = buckets.length > 1 ? width / (buckets.length - 1) : 0;
  return values
    .map((v, i) => {
      const x = (i * step).toFixed(1);
      const y = (height - ((v - min) / span) * (height - 4) - 2).toFixed(1);
      return `${x},${y}`;
    })
    .join(" ");
}
