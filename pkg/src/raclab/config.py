"""Run configuration shared by the gateway, pipeline and harness."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

log = logging.getLogger(__name__)

MODES = ("live", "record", "replay", "mock")
PIPELINE_MODES = ("structured", "nl")


@dataclass(frozen=True)
class Config:
    base_url: str = "https://api.openai.com/v1"
    model: str = "gpt-4o"
    temperature: float = 0.0
    sc_temperature: float = 0.7
    sc_samples: int = 5
    max_tokens: int = 2048
    parallelism: int = 4
    retry_max: int = 5
    backoff_base: float = 0.5
    rate_limit: float | None = None  # requests per second, None disables
    timeout: float = 120.0
    mode: str = "mock"
    cache_dir: str | None = None
    api_key_env: str = "RACLAB_API_KEY"
    pipeline_mode: str = "structured"
    record_backend: str = "live"  # what record mode forwards cache misses to

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.record_backend not in ("live", "mock"):
            raise ValueError("record_backend must be 'live' or 'mock'")
        if self.pipeline_mode not in PIPELINE_MODES:
            raise ValueError(f"pipeline_mode must be one of {PIPELINE_MODES}")
        if self.temperature < 0 or self.sc_temperature < 0:
            raise ValueError("temperatures must be >= 0")
        if self.parallelism < 1 or self.retry_max < 1 or self.sc_samples < 1:
            raise ValueError("parallelism, retry_max and sc_samples must be >= 1")

    def api_key(self) -> str | None:
        return os.environ.get(self.api_key_env)

    def with_overrides(self, **overrides) -> "Config":
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def to_json(self) -> dict:
        return asdict(self)


def load_config(path: str | Path | None = None, **overrides) -> Config:
    cfg = Config()
    if path is not None:
        doc = json.loads(Path(path).read_text())
        cfg = cfg.with_overrides(**doc)
    cfg = cfg.with_overrides(**overrides)
    log.debug("config: %s", cfg)
    return cfg
