"""Application configuration: dataclass defaults, a diffable key=value config
file with section-prefixed keys (`chat.base_url=...`), and strict precedence
defaults < config file < command-line flags. Secrets never live in the file;
only the name of the environment variable holding the API key does.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import InvalidInput
from .retrieve import DEFAULT_CONTEXT_BUDGET, DEFAULT_TOP_K


@dataclass
class ChatSettings:
    base_url: str = ""
    model: str = ""
    temperature: float = 0.7
    api_key_env: str = "RAZEWRIGHT_API_KEY"


@dataclass
class EmbedSettings:
    base_url: str = ""
    model: str = "bge-m3"
    api_key_env: str = "RAZEWRIGHT_API_KEY"


@dataclass
class ExamSettings:
    votes_per_round: int = 5
    max_rounds: int = 5
    temperature: float = 0.7


@dataclass
class RetrievalSettings:
    mode: str = "hybrid"
    top_k: int = DEFAULT_TOP_K
    context_budget: int = DEFAULT_CONTEXT_BUDGET


@dataclass
class PathSettings:
    corpus: str = ""
    index: str = ""
    templates: str = ""


@dataclass
class AppConfig:
    chat: ChatSettings = field(default_factory=ChatSettings)
    embed: EmbedSettings = field(default_factory=EmbedSettings)
    exam: ExamSettings = field(default_factory=ExamSettings)
    retrieval: RetrievalSettings = field(default_factory=RetrievalSettings)
    paths: PathSettings = field(default_factory=PathSettings)

    def set_option(self, dotted_key: str, raw_value: str):
        """Apply one `section.field=value` assignment with type coercion."""
        section_name, _, field_name = dotted_key.partition(".")
        if not field_name:
            raise InvalidInput(f"config key must look like section.field: {dotted_key!r}")
        try:
            section = getattr(self, section_name)
        except AttributeError:
            raise InvalidInput(f"unknown config section: {section_name!r}") from None
        section_fields = {f.name: f for f in fields(section)}
        if field_name not in section_fields:
            raise InvalidInput(f"unknown config key: {dotted_key!r}")
        current = getattr(section, field_name)
        try:
            if isinstance(current, bool):
                value = raw_value.lower() in ("1", "true", "yes")
            elif isinstance(current, int):
                value = int(raw_value)
            elif isinstance(current, float):
                value = float(raw_value)
            else:
                value = raw_value
        except ValueError as exc:
            raise InvalidInput(f"bad value for {dotted_key}: {raw_value!r}") from exc
        setattr(section, field_name, value)


def load_config(path: str | Path | None) -> AppConfig:
    """Defaults overlaid with the config file's assignments, if a file is given."""
    config = AppConfig()
    if path is None:
        return config
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise InvalidInput(f"{path}:{lineno}: expected key=value, got {line!r}")
        config.set_option(key.strip(), value.strip())
    return config
