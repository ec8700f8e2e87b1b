"""Remote vitals monitoring pipeline.

Simulated sensor nodes stream framed telemetry over a byte link to a
gateway that classifies severity against editable thresholds, raises
and clears alerts, persists per-node time series, and serves query,
admin, and live-push HTTP APIs. An analytics layer regenerates the
hourly report tables from the bundled measurement corpus.
"""

__version__ = "0.1.0"
