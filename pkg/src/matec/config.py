"""Service configuration: one JSON document validated at startup."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional

from pydantic import field_validator, model_validator

from .domain import DomainError, FrozenModel


class ConfigError(DomainError):
    pass


class ServiceConfig(FrozenModel):
    listen_host: str = "127.0.0.1"
    listen_port: int = 8000
    backend: Literal["mock", "live"] = "mock"
    live_base_url: str = ""
    live_model: str = ""
    mock_seed: int = 0
    mock_fault: str = ""  # e.g. "fabricate:infectious_disease:heart_rate:40"
    roster_path: Optional[str] = None  # None = packaged default roster
    store_dir: str = "matec-store"
    parallelism: int = 5
    agent_timeout_ms: int = 30_000
    retrieval_k: int = 4
    max_tokens: int = 1024
    monitor_interval_s: float = 30.0
    synthesis_sees_all: bool = False

    @field_validator("parallelism", "agent_timeout_ms", "retrieval_k", "max_tokens", "listen_port")
    @classmethod
    def _positive_int(cls, value: int) -> int:
        if value <= 0:
            raise ValueError("must be positive")
        return value

    @field_validator("monitor_interval_s")
    @classmethod
    def _positive_interval(cls, value: float) -> float:
        if value <= 0:
            raise ValueError("monitor interval must be positive")
        return value

    @field_validator("mock_fault")
    @classmethod
    def _fault_parses(cls, value: str) -> str:
        if value:
            from .gateway import parse_fault_spec

            parse_fault_spec(value)  # reject bad specs at startup, not mid-run
        return value

    @model_validator(mode="after")
    def _backend_complete(self) -> "ServiceConfig":
        if self.backend == "live" and not (self.live_base_url and self.live_model):
            raise ValueError("live backend needs live_base_url and live_model")
        return self


def load_config(path: Path | str) -> ServiceConfig:
    """Read and validate a config file; roster path must exist if given."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        config = ServiceConfig.model_validate(raw)
    except Exception as exc:
        raise ConfigError(f"bad config {path}: {exc}") from exc
    if config.roster_path is not None and not Path(config.roster_path).exists():
        raise ConfigError(f"roster file does not exist: {config.roster_path}")
    return config
