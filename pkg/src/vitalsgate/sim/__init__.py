"""Deterministic virtual sensor node: sensor models, firmware loop, scenarios."""
