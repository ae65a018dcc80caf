import os
from pathlib import Path

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from errors import ConfigError


class BackendConfig(BaseModel):
    """Connection and retry policy for a JSON-over-HTTP chat-completion backend."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    url: str = "http://localhost:8000/v1/chat/completions"
    model: str = "default"
    auth_header: str = "Authorization"
    auth_env: str | None = None
    auth_prefix: str = "Bearer "
    timeout_s: float = Field(default=120.0, gt=0.0)
    max_retries: int = Field(default=3, ge=0)
    backoff_s: float = Field(default=1.0, ge=0.0)
    max_tokens: int = Field(default=1024, ge=1)
    max_in_flight: int = Field(default=4, ge=1)

    def auth_headers(self) -> dict[str, str]:
        if not self.auth_env:
            return {}
        token = os.environ.get(self.auth_env)
        if not token:
            raise ConfigError(f"Environment variable {self.auth_env} is not set")
        return {self.auth_header: f"{self.auth_prefix}{token}"}

    @staticmethod
    def from_file(path: str | Path | None) -> "BackendConfig":
        if path is None:
            return BackendConfig()
        with open(path, "r") as file:
            raw = yaml.safe_load(file) or {}
        try:
            return BackendConfig.model_validate(raw)
        except ValidationError as e:
            raise ConfigError(f"Invalid backend config: {e}") from e
