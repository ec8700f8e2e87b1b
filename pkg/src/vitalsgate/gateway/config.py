"""Gateway configuration: one TOML file, a few environment overrides."""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass
class GatewayConfig:
    listen_port: int = 7070      # frame ingestion, stream socket
    http_port: int = 8080        # API + dashboard
    store_dir: str = "./store"
    log_level: str = "INFO"
    time_mode: str = "wall"      # wall | frame-paced
    frame_period_ms: int = 2000  # expected transmit cadence
    raise_after: int = 3         # hysteresis: emergencies before raise
    clear_after: int = 5         # hysteresis: normals before clear
    default_age_years: int = 30  # auto-registered nodes get adult bands
    ui_dir: str | None = None    # static dashboard assets, served at /ui


# environment variable -> config field
ENV_OVERRIDES = {
    "PORT": ("http_port", int),
    "STORE_DIR": ("store_dir", str),
    "LOG_LEVEL": ("log_level", str),
}


def load_config(
    path: str | Path | None = None, env: Mapping[str, str] = os.environ
) -> GatewayConfig:
    """Defaults, then the [gateway] table of the TOML file, then env."""
    config = GatewayConfig()
    if path is not None:
        doc = tomllib.loads(Path(path).read_text(encoding="utf-8"))
        table = doc.get("gateway", {})
        known = {f.name: f.type for f in fields(GatewayConfig)}
        for key, value in table.items():
            if key not in known:
                raise ValueError(f"unknown gateway config key: {key}")
            setattr(config, key, value)
    for var, (field_name, cast) in ENV_OVERRIDES.items():
        if var in env:
            setattr(config, field_name, cast(env[var]))
    return config
