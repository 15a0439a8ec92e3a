"""Engine adapters for the MT, transliteration, tagging and TTS stages.

Stub engines are deterministic and self-contained so the whole pipeline
runs on a laptop.  Command engines wrap an external executable that
reads UTF-8 text on stdin and writes its result (text, or WAV bytes for
TTS) on stdout; a non-zero exit status is a failure.
"""

from __future__ import annotations

import os
import re
import shlex
import subprocess
import unicodedata
from fractions import Fraction
from typing import Protocol, Sequence

import numpy as np

from .audio import AudioBuffer, load_wav, ms_to_samples
from .errors import AdapterError, DubbingError
from .rhythm import RuleSet, TaggedToken, split_pause_marks, stub_tag

ENV_COMMANDS = {
    "translate": "ISODUB_MT_CMD",
    "transliterate": "ISODUB_TRANSLIT_CMD",
    "tag": "ISODUB_TAGGER_CMD",
    "synthesize": "ISODUB_TTS_CMD",
    "disfluency": "ISODUB_DISFLUENCY_CMD",
}


class Translator(Protocol):
    def translate(self, text: str) -> str: ...


class Transliterator(Protocol):
    def transliterate(self, term: str) -> str: ...


class Tagger(Protocol):
    def tag(self, words: Sequence[str]) -> list[TaggedToken]: ...


class Synthesizer(Protocol):
    def synthesize(self, annotated_text: str, rate_syll_per_s: float) -> AudioBuffer: ...


# -- syllable counting ------------------------------------------------------------

_VOWEL_GROUPS = re.compile(r"[aeiouy]+", re.IGNORECASE)


def count_syllables(word: str) -> int:
    """Rough syllable count: vowel groups for Latin script, aksharas otherwise."""
    if not any(c.isalnum() for c in word):
        return 0
    count = 0
    latin = "".join(c for c in word if c.isascii() and c.isalpha())
    if latin:
        count += max(1, len(_VOWEL_GROUPS.findall(latin)))
    count += sum(c.isdigit() for c in word)
    prev_virama = False
    for c in word:
        if c.isascii():
            prev_virama = False
            continue
        if unicodedata.category(c) == "Lo" and not prev_virama:
            count += 1
        prev_virama = "VIRAMA" in unicodedata.name(c, "") or "PULLI" in unicodedata.name(c, "")
    return count


def count_text_syllables(text: str) -> int:
    return sum(count_syllables(w) for w in split_pause_marks(text) if isinstance(w, str))


# -- stubs ----------------------------------------------------------------------

class StubTranslator:
    """Identity translation; ``reorder=True`` reverses word order."""

    def __init__(self, reorder: bool = False):
        self.reorder = reorder

    def translate(self, text: str) -> str:
        if not self.reorder:
            return text
        return " ".join(reversed(text.split()))


class StubTransliterator:
    def transliterate(self, term: str) -> str:
        return term


class StubTagger:
    def __init__(self, rules: RuleSet, default_tag: str = "N"):
        self.rules = rules
        self.default_tag = default_tag

    def tag(self, words: Sequence[str]) -> list[TaggedToken]:
        return stub_tag(words, self.rules, default=self.default_tag)


class StubSynthesizer:
    """One tone burst per syllable at a fixed syllable rate, silence for pauses.

    Duration is ``syllables / rate`` seconds plus the annotated pauses; the
    sample grid is derived from the exact timeline so the total is within
    one sample of that figure.
    """

    def __init__(self, sample_rate_hz: int = 16000, burst_ms: int = 150,
                 freq_hz: float = 220.0, amplitude: float = 0.5):
        self.sample_rate_hz = sample_rate_hz
        self.burst_ms = burst_ms
        self.freq_hz = freq_hz
        self.amplitude = amplitude

    def synthesize(self, annotated_text: str, rate_syll_per_s: float) -> AudioBuffer:
        if rate_syll_per_s <= 0:
            raise AdapterError("syllable rate must be positive")
        sr = self.sample_rate_hz
        period = Fraction(1000) / Fraction(rate_syll_per_s).limit_denominator(10_000)
        onsets: list[Fraction] = []
        t = Fraction(0)
        for item in split_pause_marks(annotated_text):
            if isinstance(item, int):
                t += item
                continue
            for _ in range(count_syllables(item)):
                onsets.append(t)
                t += period

        def to_sample(ms: Fraction) -> int:
            return int((ms * sr / 1000 + Fraction(1, 2)) // 1)

        out = np.zeros(to_sample(t))
        burst_len = ms_to_samples(min(self.burst_ms, int(period)), sr)
        n = np.arange(burst_len)
        burst = self.amplitude * np.sin(2.0 * np.pi * self.freq_hz * n / sr)
        for onset in onsets:
            a = to_sample(onset)
            b = min(a + burst_len, out.size)
            out[a:b] = burst[: b - a]
        return AudioBuffer(sr, out)


# -- external commands ------------------------------------------------------------

def _run(cmd: Sequence[str], payload: bytes, stage: str, timeout: float) -> bytes:
    try:
        proc = subprocess.run(list(cmd), input=payload, capture_output=True, timeout=timeout)
    except (OSError, subprocess.TimeoutExpired) as exc:
        raise AdapterError(f"{stage} command {cmd[0]!r} failed to run: {exc}") from exc
    if proc.returncode != 0:
        err = proc.stderr.decode("utf-8", "replace").strip()
        raise AdapterError(f"{stage} command exited with status {proc.returncode}: {err}")
    return proc.stdout


class CommandAdapter:
    def __init__(self, command: str | Sequence[str], timeout: float = 120.0):
        self.argv = shlex.split(command) if isinstance(command, str) else list(command)
        if not self.argv:
            raise AdapterError("empty adapter command")
        self.timeout = timeout

    @classmethod
    def from_env(cls, stage: str, environ=None, **kwargs):
        environ = os.environ if environ is None else environ
        var = ENV_COMMANDS[stage]
        cmd = environ.get(var)
        if not cmd:
            raise DubbingError(f"external {stage} adapter selected but ${var} is not set")
        return cls(cmd, **kwargs)


class CommandTranslator(CommandAdapter):
    def translate(self, text: str) -> str:
        return _run(self.argv, text.encode("utf-8"), "translate", self.timeout).decode("utf-8").strip()


class CommandTransliterator(CommandAdapter):
    def transliterate(self, term: str) -> str:
        return _run(self.argv, term.encode("utf-8"), "transliterate",
                    self.timeout).decode("utf-8").strip()


class CommandTagger(CommandAdapter):
    """Words go in one per line; ``word<TAB>tag`` lines come back."""

    def tag(self, words: Sequence[str]) -> list[TaggedToken]:
        raw = _run(self.argv, ("\n".join(words) + "\n").encode("utf-8"), "tag", self.timeout)
        out = []
        for line in raw.decode("utf-8").splitlines():
            if not line.strip():
                continue
            surface, _, tag = line.partition("\t")
            out.append(TaggedToken(surface, tag.strip()))
        if [t.surface for t in out] != list(words):
            raise AdapterError("tagger output does not match its input words")
        return out


class CommandSynthesizer(CommandAdapter):
    """Annotated text on stdin, ``--rate <syll/s>`` appended to argv, WAV on stdout."""

    def synthesize(self, annotated_text: str, rate_syll_per_s: float) -> AudioBuffer:
        argv = [*self.argv, "--rate", repr(float(rate_syll_per_s))]
        raw = _run(argv, annotated_text.encode("utf-8"), "synthesize", self.timeout)
        try:
            return load_wav(raw)
        except DubbingError as exc:
            raise AdapterError(f"synthesizer returned invalid audio: {exc}") from exc


class CommandTextFilter(CommandAdapter):
    """Generic text-to-text hook (e.g. disfluency removal before term discovery)."""

    def __call__(self, text: str) -> str:
        return _run(self.argv, text.encode("utf-8"), "filter", self.timeout).decode("utf-8").strip()
