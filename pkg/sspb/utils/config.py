"""
Configuration management utilities.

Every configuration object is a frozen pydantic model that rejects unknown
keys. `ConfigManager` loads a UTF-8 JSON file into such a model and
computes the canonical hash recorded in reports.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Generic, Optional, Type, TypeVar

from pydantic import BaseModel, ConfigDict, ValidationError

from .error_handler import ConfigError
from .helpers import PathLike, canonical_json, sha256_hex


class StrictModel(BaseModel):
    """Base for configuration models: immutable, unknown keys are errors."""
    model_config = ConfigDict(extra='forbid', frozen=True)

    def canonical_json(self) -> str:
        return canonical_json(self.model_dump(mode='json'))

    def config_hash(self) -> str:
        return sha256_hex(self.canonical_json())


ModelT = TypeVar('ModelT', bound=StrictModel)


def parse_config(schema: Type[ModelT], data: Dict[str, Any]) -> ModelT:
    """Validate a mapping, turning pydantic errors into ConfigError."""
    try:
        return schema.model_validate(data)
    except ValidationError as e:
        problems = '; '.join(
            f"{'.'.join(str(part) for part in err['loc']) or '<root>'}: {err['msg']}"
            for err in e.errors()
        )
        raise ConfigError(f"invalid {schema.__name__}: {problems}") from e


class ConfigManager(Generic[ModelT]):
    """Loads and validates a JSON configuration file."""

    def __init__(self, config_path: PathLike, schema: Type[ModelT]):
        self.logger = logging.getLogger(__name__)
        self.config_path = Path(config_path)
        self.schema = schema
        self.config: ModelT = self._load_config()

    def _load_config(self) -> ModelT:
        """Load configuration from file."""
        if not self.config_path.exists():
            raise ConfigError(f"Config file not found: {self.config_path}")

        try:
            with open(self.config_path, 'r', encoding='utf-8') as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"Config file {self.config_path} is not valid JSON: {e}") from e

        if not isinstance(data, dict):
            raise ConfigError(f"Config file {self.config_path} must hold an object")

        config = parse_config(self.schema, data)
        self.logger.info(
            f"Loaded {self.schema.__name__} from {self.config_path}",
            extra={'context': {'hash': config.config_hash()}}
        )
        return config

    def get(self, key: str, default: Any = None) -> Any:
        """Get a top-level configuration value."""
        return getattr(self.config, key, default)

    def override(self, **updates: Any) -> ModelT:
        """Re-validate the configuration with top-level overrides applied."""
        data = self.config.model_dump(mode='json')
        data.update({k: v for k, v in updates.items() if v is not None})
        self.config = parse_config(self.schema, data)
        return self.config

    def config_hash(self) -> Optional[str]:
        return self.config.config_hash()
