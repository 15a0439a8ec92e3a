"""Audio ingestion and the signal primitives used by the aligner.

Everything here works on mono float buffers.  Frame energies are RMS
levels in dBFS; silences are runs of frames quieter than a threshold
relative to the loudest frame; syllable boundaries are valleys in a
smoothed energy envelope.
"""

from __future__ import annotations

import io
import struct
import wave
from dataclasses import dataclass

import numpy as np

from .errors import AudioTooShortError, ContractError, WavCorruptionError, WavFormatError

SUPPORTED_RATES = (8000, 16000, 22050, 44100, 48000)
DB_FLOOR = -120.0
COARTICULATION_GAP_MS = 50


@dataclass(frozen=True, eq=False)
class AudioBuffer:
    sample_rate_hz: int
    samples: np.ndarray

    def __post_init__(self):
        if self.sample_rate_hz not in SUPPORTED_RATES:
            raise ContractError(f"unsupported sample rate {self.sample_rate_hz}")
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ContractError("AudioBuffer must be mono (1-D)")
        if samples.size and (samples.min() < -1.0 or samples.max() > 1.0):
            raise ContractError("samples must lie within [-1, 1]")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, AudioBuffer):
            return NotImplemented
        return (self.sample_rate_hz == other.sample_rate_hz
                and np.array_equal(self.samples, other.samples))

    @property
    def duration_ms(self) -> int:
        """Duration rounded to the nearest millisecond."""
        return samples_to_ms(self.samples.size, self.sample_rate_hz)

    def slice_ms(self, start_ms: int, end_ms: int) -> "AudioBuffer":
        a = ms_to_samples(start_ms, self.sample_rate_hz)
        b = ms_to_samples(end_ms, self.sample_rate_hz)
        return AudioBuffer(self.sample_rate_hz, self.samples[a:b])

    @classmethod
    def silence(cls, duration_ms: int, sample_rate_hz: int = 16000) -> "AudioBuffer":
        return cls(sample_rate_hz, np.zeros(ms_to_samples(duration_ms, sample_rate_hz)))


def ms_to_samples(ms: int, sample_rate_hz: int) -> int:
    # round half up, integer arithmetic only
    return (int(ms) * sample_rate_hz + 500) // 1000


def samples_to_ms(n: int, sample_rate_hz: int) -> int:
    return (int(n) * 1000 + sample_rate_hz // 2) // sample_rate_hz


@dataclass(frozen=True)
class FrameEnergy:
    frame_ms: int
    hop_ms: int
    values: tuple[float, ...]
    duration_ms: int = 0

    def __post_init__(self):
        if self.hop_ms > self.frame_ms:
            raise ContractError("hop_ms must not exceed frame_ms")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)

    def frame_start_ms(self, i: int) -> int:
        return i * self.hop_ms


@dataclass(frozen=True, order=True)
class SilenceRegion:
    start: int  # ms, inclusive
    end: int  # ms, exclusive

    @property
    def duration_ms(self) -> int:
        return self.end - self.start


@dataclass(frozen=True, order=True)
class SyllableBoundary:
    at: int  # ms
    gap_to_next_ms: int

    @property
    def insertable(self) -> bool:
        return self.gap_to_next_ms >= COARTICULATION_GAP_MS


# -- WAV I/O -----------------------------------------------------------------

def load_wav(data: bytes) -> AudioBuffer:
    """Decode a 16-bit PCM RIFF/WAVE byte string into a mono buffer.

    Stereo (or wider) files are downmixed by averaging channels.
    """
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise WavFormatError("not a RIFF/WAVE file")
    fmt_tag = _read_format_tag(data)
    if fmt_tag is not None and fmt_tag != 1:
        raise WavFormatError(f"unsupported WAV format tag {fmt_tag} (PCM required)")
    try:
        with wave.open(io.BytesIO(data), "rb") as w:
            channels = w.getnchannels()
            width = w.getsampwidth()
            rate = w.getframerate()
            declared = w.getnframes()
            raw = w.readframes(declared)
    except (wave.Error, EOFError, struct.error) as exc:
        raise WavCorruptionError(str(exc)) from exc

    if width != 2:
        raise WavFormatError(f"unsupported bit depth {8 * width} (16-bit PCM required)")
    if rate not in SUPPORTED_RATES:
        raise WavFormatError(f"unsupported sample rate {rate}")
    if len(raw) < declared * channels * width:
        raise WavCorruptionError(
            f"data chunk truncated: {len(raw)} of {declared * channels * width} bytes")

    pcm = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    if channels > 1:
        pcm = pcm.reshape(-1, channels).mean(axis=1)
    return AudioBuffer(rate, pcm)


def _read_format_tag(data: bytes) -> int | None:
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos:pos + 4]
        size = struct.unpack_from("<I", data, pos + 4)[0]
        if chunk_id == b"fmt ":
            if pos + 10 > len(data):
                raise WavCorruptionError("truncated fmt chunk")
            return struct.unpack_from("<H", data, pos + 8)[0]
        pos += 8 + size + (size & 1)
    return None


def read_wav(path) -> AudioBuffer:
    with open(path, "rb") as fh:
        return load_wav(fh.read())


def to_wav_bytes(buf: AudioBuffer) -> bytes:
    pcm = np.clip(np.round(buf.samples * 32768.0), -32768, 32767).astype("<i2")
    out = io.BytesIO()
    with wave.open(out, "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(buf.sample_rate_hz)
        w.writeframes(pcm.tobytes())
    return out.getvalue()


def write_wav(buf: AudioBuffer, path) -> None:
    with open(path, "wb") as fh:
        fh.write(to_wav_bytes(buf))


# -- analysis ----------------------------------------------------------------

def frame_energies(buf: AudioBuffer, frame_ms: int = 25, hop_ms: int = 10) -> FrameEnergy:
    if hop_ms <= 0 or frame_ms <= 0 or hop_ms > frame_ms:
        raise ContractError("need 0 < hop_ms <= frame_ms")
    sr = buf.sample_rate_hz
    frame_len = max(1, ms_to_samples(frame_ms, sr))
    hop_len = max(1, ms_to_samples(hop_ms, sr))
    if buf.samples.size < frame_len:
        raise AudioTooShortError(
            f"buffer of {buf.duration_ms} ms is shorter than one {frame_ms} ms frame")
    frames = np.lib.stride_tricks.sliding_window_view(buf.samples, frame_len)[::hop_len]
    mean_sq = np.mean(frames * frames, axis=1)
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(mean_sq)
    db = np.maximum(db, DB_FLOOR)
    return FrameEnergy(frame_ms, hop_ms, tuple(db.tolist()), buf.duration_ms)


def _quiet_mask(energy: FrameEnergy, threshold_db_rel_peak: float) -> np.ndarray:
    values = energy.as_array()
    if values.size == 0:
        return np.zeros(0, dtype=bool)
    peak = values.max()
    # frames at the floor are digital silence whatever the peak is
    return (values < peak + threshold_db_rel_peak) | (values <= DB_FLOOR)


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Inclusive (first, last) index pairs of True runs."""
    if mask.size == 0:
        return []
    padded = np.concatenate(([False], mask, [False])).astype(np.int8)
    edges = np.flatnonzero(np.diff(padded))
    return [(int(a), int(b) - 1) for a, b in zip(edges[::2], edges[1::2])]


def _run_to_region(energy: FrameEnergy, first: int, last: int) -> SilenceRegion:
    start = first * energy.hop_ms
    end = last * energy.hop_ms + energy.frame_ms
    if last == len(energy.values) - 1 and energy.duration_ms:
        end = max(end, energy.duration_ms)
    return SilenceRegion(start, end)


def detect_silences(energy: FrameEnergy, threshold_db_rel_peak: float = -35.0,
                    min_silence_ms: int = 200) -> list[SilenceRegion]:
    """Maximal quiet runs lasting at least ``min_silence_ms``.

    A frame counts as quiet when its level is below ``peak + threshold``
    (or at the -120 dBFS floor).  A run of quiet frames ``i..j`` is
    reported as ``[i*hop, j*hop + frame)``; a run reaching the final
    frame is extended to the end of the audio.
    """
    regions = []
    for first, last in _runs(_quiet_mask(energy, threshold_db_rel_peak)):
        region = _run_to_region(energy, first, last)
        if region.duration_ms >= min_silence_ms:
            regions.append(region)
    return regions


def _moving_average(values: np.ndarray, width: int) -> np.ndarray:
    if width <= 1:
        return values.copy()
    kernel = np.ones(width)
    sums = np.convolve(values, kernel, mode="same")
    counts = np.convolve(np.ones_like(values), kernel, mode="same")
    return sums / counts


def _collapse_minima(env: np.ndarray) -> list[int]:
    """Centers of local-minimum plateaus (interior only)."""
    n = env.size
    minima = []
    i = 0
    while i < n:
        j = i
        while j + 1 < n and env[j + 1] == env[i]:
            j += 1
        left_higher = i > 0 and env[i - 1] > env[i]
        right_higher = j < n - 1 and env[j + 1] > env[i]
        if left_higher and right_higher:
            minima.append((i + j) // 2)
        i = j + 1
    return minima


def _flank_peak(env: np.ndarray, m: int, step: int) -> float:
    """Highest envelope value between ``m`` and the next strictly lower point."""
    peak = env[m]
    k = m + step
    while 0 <= k < env.size and env[k] >= env[m]:
        peak = max(peak, env[k])
        k += step
    return float(peak)


def detect_syllable_boundaries(buf: AudioBuffer, frame_ms: int = 25, hop_ms: int = 10,
                               smooth_ms: int = 50, min_depth_db: float = 6.0,
                               threshold_db_rel_peak: float = -35.0,
                               max_valley_db_rel_peak: float = -10.0) -> list[SyllableBoundary]:
    """Energy-valley syllable segmentation.

    The dBFS envelope is smoothed with a ``smooth_ms`` moving average and
    every interior local minimum lying at least ``min_depth_db`` below the
    highest point on each side (up to the next deeper point) yields one
    boundary.  When the valley sits in a run of quiet frames the boundary
    is placed at the middle of that run and ``gap_to_next_ms`` is the run
    length; otherwise the syllables are treated as contiguous (gap 0).
    """
    if buf.samples.size < ms_to_samples(frame_ms, buf.sample_rate_hz):
        return []
    energy = frame_energies(buf, frame_ms, hop_ms)
    raw = energy.as_array()
    peak = raw.max()
    if peak <= DB_FLOOR:
        return []
    width = max(1, round(smooth_ms / hop_ms))
    width += 1 - width % 2  # keep the window centred
    env = _moving_average(raw, width)

    quiet = _quiet_mask(energy, threshold_db_rel_peak)
    run_of = {}
    for first, last in _runs(quiet):
        for k in range(first, last + 1):
            run_of[k] = (first, last)

    found: dict[int, SyllableBoundary] = {}
    seen_runs = set()
    for m in _collapse_minima(env):
        left = _flank_peak(env, m, -1)
        right = _flank_peak(env, m, +1)
        if env[m] > left - min_depth_db or env[m] > right - min_depth_db:
            continue
        if m in run_of:
            run = run_of[m]
            if run in seen_runs:
                continue
            seen_runs.add(run)
            region = _run_to_region(energy, *run)
            at = (region.start + region.end) // 2
            gap = region.duration_ms
        else:
            if raw[m] > peak + max_valley_db_rel_peak:
                continue
            at = m * hop_ms + frame_ms // 2
            gap = 0
        found.setdefault(at, SyllableBoundary(at, gap))
    return [found[k] for k in sorted(found)]


def tone(duration_ms: int, freq_hz: float = 440.0, amplitude: float = 1.0,
         sample_rate_hz: int = 16000, phase_samples: int = 0) -> np.ndarray:
    """Sine samples; handy for fixtures and the stub synthesizer."""
    n = ms_to_samples(duration_ms, sample_rate_hz)
    t = (np.arange(n) + phase_samples) / sample_rate_hz
    return amplitude * np.sin(2.0 * np.pi * freq_hz * t)
