"""Runtime configuration: JSON file, then MUDOC_* environment overrides,
then command-line flags (applied by the CLI last, so flags always win)."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ValidationError
from .gateway import MockGateway, OpenAIGateway, ProviderConfig


@dataclass
class AppConfig:
    provider: str = "mock"
    index_dir: str = "index"
    data_dir: str | None = None
    host: str = "127.0.0.1"
    port: int = 8000
    min_minutes: float = 15.0
    max_minutes: float = 25.0
    base_url: str = "http://localhost:8080/v1"
    api_key_env: str = "MUDOC_API_KEY"
    chat_model: str = "gpt-4o"
    text_embedding_model: str = "text-embedding-3-small"
    image_embedding_model: str = "siglip-base"
    timeout: float = 60.0
    retries: int = 2
    temperature: float = 0.2
    mock_seed: int = 0
    mock_dim: int = 32

    def provider_config(self) -> ProviderConfig:
        return ProviderConfig(
            base_url=self.base_url,
            api_key_env=self.api_key_env,
            chat_model=self.chat_model,
            text_embedding_model=self.text_embedding_model,
            image_embedding_model=self.image_embedding_model,
            timeout=self.timeout,
            retries=self.retries,
            temperature=self.temperature,
        )

    def build_gateway(self):
        if self.provider == "mock":
            return MockGateway(seed=self.mock_seed, dim=self.mock_dim)
        if self.provider == "openai":
            return OpenAIGateway(self.provider_config())
        raise ValidationError(f"unknown provider {self.provider!r} (expected 'mock' or 'openai')")


_ENV_PREFIX = "MUDOC_"


def load_config(path: str | None = None) -> AppConfig:
    config = AppConfig()
    known = {f.name: f.type for f in fields(AppConfig)}

    if path is not None:
        file_path = Path(path)
        if not file_path.is_file():
            raise ValidationError(f"config file {path} does not exist")
        try:
            data = json.loads(file_path.read_text(encoding="utf-8"))
        except ValueError as exc:
            raise ValidationError(f"config file {path} is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ValidationError(f"config file {path} must contain a JSON object")
        for key, value in data.items():
            if key not in known:
                raise ValidationError(f"unknown config key {key!r}")
            setattr(config, key, value)

    for field in fields(AppConfig):
        env_name = _ENV_PREFIX + field.name.upper()
        raw = os.environ.get(env_name)
        if raw is None:
            continue
        setattr(config, field.name, _coerce(field.name, raw, getattr(config, field.name)))
    return config


def _coerce(name: str, raw: str, current):
    if isinstance(current, bool):
        return raw.lower() in ("1", "true", "yes")
    if isinstance(current, int):
        try:
            return int(raw)
        except ValueError:
            raise ValidationError(f"environment override for {name} must be an integer") from None
    if isinstance(current, float):
        try:
            return float(raw)
        except ValueError:
            raise ValidationError(f"environment override for {name} must be a number") from None
    return raw
