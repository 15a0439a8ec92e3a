"""Deterministic 2-cue demo lecture used by tests and ``isodub plan --demo``."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .audio import AudioBuffer, ms_to_samples, tone, write_wav

SAMPLE_RATE = 16000

FIXTURE_SRT = """1
00:00:01,000 --> 00:00:06,000
In this lecture we sort the heap with a binary search tree.

2
00:00:06,500 --> 00:00:12,000
The loop for (i = 0; i< n-1; i++) a++; increments the variable.
"""

# (kind, ms): "s" = speech-like burst train, "p" = pause
FIXTURE_LAYOUT = [
    ("p", 1000),
    ("s", 2100), ("p", 400), ("s", 2500),   # cue 1: 1000-6000
    ("p", 500),
    ("s", 1680), ("p", 250), ("s", 1470), ("p", 500), ("s", 1600),  # cue 2: 6500-12000
    ("p", 500),
]


def _speech(duration_ms: int, rng_seed: int) -> np.ndarray:
    """150 ms syllable bursts separated by 60 ms micro-gaps."""
    out = np.zeros(ms_to_samples(duration_ms, SAMPLE_RATE))
    rng = np.random.default_rng(rng_seed)
    t = 0
    while t < duration_ms:
        burst = tone(min(150, duration_ms - t), freq_hz=float(rng.integers(140, 260)),
                     amplitude=float(rng.uniform(0.3, 0.6)), sample_rate_hz=SAMPLE_RATE)
        a = ms_to_samples(t, SAMPLE_RATE)
        out[a:a + burst.size] = burst[: out.size - a]
        t += 210
    return out


def fixture_audio() -> AudioBuffer:
    parts = []
    for k, (kind, ms) in enumerate(FIXTURE_LAYOUT):
        if kind == "p":
            parts.append(np.zeros(ms_to_samples(ms, SAMPLE_RATE)))
        else:
            parts.append(_speech(ms, k))
    return AudioBuffer(SAMPLE_RATE, np.concatenate(parts))


def write_fixture(directory) -> dict[str, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    srt = directory / "lecture.srt"
    wav = directory / "lecture.wav"
    srt.write_text(FIXTURE_SRT, encoding="utf-8")
    write_wav(fixture_audio(), wav)
    return {"srt": srt, "wav": wav}
