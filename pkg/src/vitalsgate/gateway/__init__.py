"""Gateway: ingestion, classification, persistence, query and live APIs."""
