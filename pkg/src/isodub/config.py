"""Pipeline configuration and its ``key = value`` file format."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

from .errors import ConfigError

ENGINES = {
    "translate": ("stub", "stub-reorder", "command"),
    "transliterate": ("stub", "command"),
    "tagger": ("stub", "command"),
    "tts": ("stub", "command"),
    "disfluency": ("none", "command"),
}

_PATH_FIELDS = ("source_srt", "source_audio", "output_dir", "lexicon", "stopwords", "rules")


def bundled(name: str) -> Path:
    return Path(str(resources.files("isodub.data").joinpath(name)))


@dataclass
class PipelineConfig:
    source_srt: Path
    source_audio: Path
    output_dir: Path
    source_lang: str = "en"
    target_lang: str = "hi"

    # source analysis
    frame_ms: int = 25
    hop_ms: int = 10
    silence_threshold_db: float = -35.0
    min_silence_ms: int = 200

    # isochrony
    snap_radius_ms: int = 500
    coarticulation_gap_ms: int = 50

    # term discovery
    lexicon: Path | None = None
    stopwords: Path | None = None
    top_k: int = 5
    textrank_window: int = 2
    damping: float = 0.85

    # rhythm
    rules: Path | None = None
    max_tokens_per_chunk: int = 12
    minor_pause_ms: int = 150
    major_pause_ms: int = 400

    # synthesis
    syllable_rate: float = 4.0
    sample_rate_hz: int = 16000

    # engines
    translate_engine: str = "stub"
    transliterate_engine: str = "stub"
    tagger_engine: str = "stub"
    tts_engine: str = "stub"
    disfluency_engine: str = "none"

    workers: int = 1
    write_report: bool = True
    extra: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        for name in _PATH_FIELDS:
            value = getattr(self, name)
            if value is not None and not isinstance(value, Path):
                setattr(self, name, Path(value))

    @property
    def rules_path(self) -> Path:
        return self.rules if self.rules is not None else bundled(f"rules_{self.target_lang}.tsv")

    @property
    def stopwords_path(self) -> Path:
        if self.stopwords is not None:
            return self.stopwords
        return bundled(f"stopwords_{self.source_lang}.txt")

    def validate(self) -> None:
        """Raise :class:`ConfigError` listing every problem found."""
        problems = []
        for label, path in (("source SRT", self.source_srt), ("source audio", self.source_audio),
                            ("rule file", self.rules_path)):
            if not path.is_file():
                problems.append(f"{label} not found: {path}")
        if self.lexicon is not None and not self.lexicon.is_file():
            problems.append(f"lexicon not found: {self.lexicon}")
        if self.stopwords is not None and not self.stopwords.is_file():
            problems.append(f"stopword list not found: {self.stopwords}")
        if not 0 < self.hop_ms <= self.frame_ms:
            problems.append("need 0 < hop_ms <= frame_ms")
        if not -120 < self.silence_threshold_db < 0:
            problems.append("silence_threshold_db must be in (-120, 0)")
        if self.min_silence_ms < self.hop_ms:
            problems.append("min_silence_ms must be at least hop_ms")
        if self.snap_radius_ms < 0 or self.coarticulation_gap_ms < 0:
            problems.append("snap_radius_ms and coarticulation_gap_ms must be non-negative")
        if self.top_k < 1 or self.textrank_window < 2:
            problems.append("need top_k >= 1 and textrank_window >= 2")
        if not 0 < self.damping < 1:
            problems.append("damping must be in (0, 1)")
        if self.max_tokens_per_chunk < 1:
            problems.append("max_tokens_per_chunk must be positive")
        if self.minor_pause_ms < 0 or self.major_pause_ms < 0:
            problems.append("pause durations must be non-negative")
        if not 0.5 <= self.syllable_rate <= 20:
            problems.append("syllable_rate must be in [0.5, 20] syllables/s")
        if self.workers < 1:
            problems.append("workers must be >= 1")
        for stage, allowed in ENGINES.items():
            value = getattr(self, f"{stage}_engine")
            if value not in allowed:
                problems.append(f"{stage}_engine must be one of {', '.join(allowed)}")
        if problems:
            raise ConfigError("; ".join(problems))


_FIELDS = {f.name: f for f in dataclasses.fields(PipelineConfig) if f.name != "extra"}


def _coerce(name: str, raw: str):
    kind = _FIELDS[name].type
    if name in _PATH_FIELDS:
        return Path(raw) if raw else None
    if "bool" in kind:
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{name}: expected a boolean, got {raw!r}")
    try:
        if kind.startswith("int"):
            return int(raw)
        if kind.startswith("float"):
            return float(raw)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r}") from None
    return raw


def parse_config_text(text: str, base_dir: Path | None = None) -> dict[str, Any]:
    """Parse ``key = value`` lines (``#`` comments) into typed field values."""
    values: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep:
            raise ConfigError(f"config line {lineno}: expected key = value")
        if key not in _FIELDS:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        value = _coerce(key, raw.strip())
        if isinstance(value, Path) and base_dir is not None and not value.is_absolute():
            value = base_dir / value
        values[key] = value
    return values


def load_config(path=None, overrides: Mapping[str, Any] | None = None) -> PipelineConfig:
    values: dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        values.update(parse_config_text(path.read_text(encoding="utf-8"), path.parent))
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    missing = [k for k in ("source_srt", "source_audio", "output_dir") if k not in values]
    if missing:
        raise ConfigError(f"missing required settings: {', '.join(missing)}")
    return PipelineConfig(**values)
