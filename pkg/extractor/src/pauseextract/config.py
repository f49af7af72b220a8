"""Extraction configuration: model identifiers, audio layer, window length."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Union

from .tokens import SPECIAL_TOKENS

DEFAULT_TEXT_MODEL = "bert-base-german-cased"
DEFAULT_AUDIO_MODEL = "oliverguhr/wav2vec2-base-german-cv9"

MIN_AUDIO_LAYER = 1
MAX_AUDIO_LAYER = 12


class ConfigError(ValueError):
    """Extraction configuration is malformed or out of range."""


@dataclass(frozen=True)
class ExtractionConfig:
    """Everything both extractors need, loadable from a JSON document.

    ``text_model`` and ``audio_model`` may be hub identifiers or local
    directories; ``audio_layer`` selects which transformer layer's hidden
    states the audio extractor pools; ``window_s`` is the audio window
    length in seconds.
    """

    text_model: str = DEFAULT_TEXT_MODEL
    audio_model: str = DEFAULT_AUDIO_MODEL
    audio_layer: int = 12
    window_s: float = 10.0
    special_tokens: tuple[str, ...] = field(default=SPECIAL_TOKENS)

    def __post_init__(self) -> None:
        object.__setattr__(self, "special_tokens", tuple(self.special_tokens))
        if not isinstance(self.audio_layer, int) or isinstance(self.audio_layer, bool):
            raise ConfigError(f"audio_layer must be an integer, got {self.audio_layer!r}")
        if not MIN_AUDIO_LAYER <= self.audio_layer <= MAX_AUDIO_LAYER:
            raise ConfigError(
                f"audio_layer must be in [{MIN_AUDIO_LAYER}, {MAX_AUDIO_LAYER}], "
                f"got {self.audio_layer}"
            )
        if not isinstance(self.window_s, (int, float)) or isinstance(self.window_s, bool) \
                or not math.isfinite(self.window_s) or self.window_s <= 0:
            raise ConfigError(f"window_s must be a positive number, got {self.window_s!r}")
        if not self.text_model or not isinstance(self.text_model, str):
            raise ConfigError("text_model must be a non-empty string")
        if not self.audio_model or not isinstance(self.audio_model, str):
            raise ConfigError("audio_model must be a non-empty string")
        if not self.special_tokens:
            raise ConfigError("special_tokens must not be empty")
        if len(set(self.special_tokens)) != len(self.special_tokens):
            raise ConfigError("special_tokens contains duplicates")
        for token in self.special_tokens:
            if not (isinstance(token, str) and token.startswith("[") and token.endswith("]")):
                raise ConfigError(f"special token must look like [XYZ], got {token!r}")


_CONFIG_KEYS = {"text_model", "audio_model", "audio_layer", "window_s", "special_tokens"}


def load_extraction_config(source: Union[str, Path, IO[str]]) -> ExtractionConfig:
    """Read a configuration document (UTF-8 JSON object, strict keys)."""
    try:
        if isinstance(source, (str, Path)):
            raw = Path(source).read_text(encoding="utf-8")
        else:
            raw = source.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(doc) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "special_tokens" in doc:
        tokens = doc["special_tokens"]
        if not isinstance(tokens, list):
            raise ConfigError("special_tokens must be a list of strings")
        doc = dict(doc, special_tokens=tuple(tokens))
    return ExtractionConfig(**doc)


def config_to_json(config: ExtractionConfig) -> str:
    doc = {
        "text_model": config.text_model,
        "audio_model": config.audio_model,
        "audio_layer": config.audio_layer,
        "window_s": config.window_s,
        "special_tokens": list(config.special_tokens),
    }
    return json.dumps(doc, indent=2) + "\n"


__all__ = [
    "DEFAULT_AUDIO_MODEL",
    "DEFAULT_TEXT_MODEL",
    "MAX_AUDIO_LAYER",
    "MIN_AUDIO_LAYER",
    "ConfigError",
    "ExtractionConfig",
    "config_to_json",
    "load_extraction_config",
]
