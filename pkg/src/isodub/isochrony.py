"""Transfer the source speaker's pauses onto target speech and plan retiming.

For each subtitle cue the longest source silence is placed first, at the
point of the target speech that splits it in the same proportion as the
source speech, snapped to the nearest insertable syllable boundary.  The
silences on either side are then placed recursively inside the target
range left and right of that point.  Inserted durations scale with the
target/source speech ratio.  The video segment of each cue is then
stretched uniformly to the resulting target audio duration.
"""

from __future__ import annotations

import json
import math
from bisect import bisect_left, bisect_right
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from typing import Sequence

import numpy as np

from .audio import (COARTICULATION_GAP_MS, AudioBuffer, SilenceRegion, SyllableBoundary,
                    detect_syllable_boundaries, ms_to_samples)
from .errors import ContractError
from .subtitles import SubtitleTrack

PLAN_VERSION = 1
BAND_LOW = 1.2
BAND_HIGH = 1.5
DEFAULT_SNAP_RADIUS_MS = 500


@dataclass(frozen=True)
class PauseProfile:
    total_ms: int
    silences: tuple[SilenceRegion, ...] = ()

    def __post_init__(self):
        sil = tuple(sorted(self.silences))
        object.__setattr__(self, "silences", sil)
        if self.total_ms < 0:
            raise ContractError("total_ms must be non-negative")
        for s in sil:
            if not 0 <= s.start < s.end <= self.total_ms:
                raise ContractError(f"silence {s} outside [0, {self.total_ms}]")
        for a, b in zip(sil, sil[1:]):
            if b.start < a.end:
                raise ContractError(f"silences {a} and {b} overlap")

    @property
    def speech_ms(self) -> int:
        return self.total_ms - sum(s.duration_ms for s in self.silences)

    def speech_before(self, k: int) -> int:
        """Source speech (ms) preceding silence ``k``."""
        s = self.silences[k]
        return s.start - sum(x.duration_ms for x in self.silences[:k])


@dataclass(frozen=True)
class SilenceInsertion:
    at_speech_ms: int
    duration_ms: int
    snapped_from_ms: int

    def __post_init__(self):
        if self.duration_ms <= 0:
            raise ContractError("insertion duration must be positive")
        if self.at_speech_ms < 0:
            raise ContractError("insertion point must be non-negative")


def _nearest_int(x: Fraction) -> int:
    """Nearest integer, halves going down (matches earliest-boundary ties)."""
    return math.ceil(x - Fraction(1, 2))


def _round_half_up(x: Fraction) -> int:
    return math.floor(x + Fraction(1, 2))


def ideal_insertions(profile: PauseProfile, target_speech_ms: int) -> list[tuple[Fraction, Fraction]]:
    """Unsnapped ``(point, duration)`` for every source silence, in source order."""
    if profile.speech_ms <= 0:
        raise ContractError("profile has no speech")
    scale = Fraction(target_speech_ms, profile.speech_ms)
    return [(scale * profile.speech_before(k), scale * s.duration_ms)
            for k, s in enumerate(profile.silences)]


def plan_silence_insertions(profile: PauseProfile, target_speech_ms: int,
                            boundaries: Sequence[SyllableBoundary],
                            snap_radius_ms: int = DEFAULT_SNAP_RADIUS_MS,
                            min_gap_ms: int = COARTICULATION_GAP_MS,
                            warnings: list[str] | None = None) -> list[SilenceInsertion]:
    """Plan prorated silence insertions into the target speech.

    Silences with no insertable boundary within ``snap_radius_ms`` of their
    ideal point are skipped; a message is appended to ``warnings`` (when
    given) for each one.
    """
    if target_speech_ms <= 0:
        raise ContractError("target_speech_ms must be positive")
    if not profile.silences:
        return []
    if profile.speech_ms <= 0:
        if warnings is not None:
            warnings.append("source cue contains no speech; no silences transferred")
        return []

    ideal = ideal_insertions(profile, target_speech_ms)
    points = sorted({b.at for b in boundaries if b.gap_to_next_ms >= min_gap_ms})
    planned: list[tuple[int, int, SilenceInsertion]] = []

    def place(ks: list[int], lo: int, hi: int) -> None:
        if not ks:
            return
        # longest silence first, earliest on ties
        pick = min(ks, key=lambda k: (-profile.silences[k].duration_ms, k))
        point, dur = ideal[pick]
        region = profile.silences[pick]
        snapped_from = _nearest_int(point)
        best = None
        first, last = bisect_left(points, lo), bisect_right(points, hi)
        k = bisect_left(points, point, first, last)
        for at in points[max(first, k - 1):min(last, k + 1)]:
            dist = abs(at - point)
            if best is None or dist < best[0]:
                best = (dist, at)
        split = min(max(snapped_from, lo), hi)
        duration = _round_half_up(dur)
        if best is None or best[0] > snap_radius_ms:
            if warnings is not None:
                warnings.append(
                    f"skipped silence {region.start}-{region.end} ms: no insertable "
                    f"syllable boundary within {snap_radius_ms} ms of {snapped_from} ms")
        elif duration <= 0:
            if warnings is not None:
                warnings.append(
                    f"skipped silence {region.start}-{region.end} ms: prorated duration rounds to 0")
        else:
            split = best[1]
            planned.append((split, pick, SilenceInsertion(split, duration, snapped_from)))
        place([k for k in ks if k < pick], lo, split)
        place([k for k in ks if k > pick], split, hi)

    place(list(range(len(profile.silences))), 0, target_speech_ms)
    planned.sort(key=lambda item: (item[0], item[1]))
    return [ins for _, _, ins in planned]


def render_target_audio(speech: AudioBuffer, insertions: Sequence[SilenceInsertion]) -> AudioBuffer:
    """Splice digital silence into ``speech`` at each insertion point."""
    if not insertions:
        return speech
    sr = speech.sample_rate_hz
    n = speech.samples.size
    pieces, pos, last_at = [], 0, -1
    for ins in insertions:
        if ins.at_speech_ms < last_at:
            raise ContractError("insertions must be sorted by at_speech_ms")
        last_at = ins.at_speech_ms
        cut = ms_to_samples(ins.at_speech_ms, sr)
        if cut > n:
            raise ContractError(
                f"insertion at {ins.at_speech_ms} ms beyond speech end ({speech.duration_ms} ms)")
        pieces.append(speech.samples[pos:cut])
        pieces.append(np.zeros(ms_to_samples(ins.duration_ms, sr)))
        pos = cut
    pieces.append(speech.samples[pos:])
    return AudioBuffer(sr, np.concatenate(pieces))


def compute_stretch(source_video_ms: int, target_audio_ms: int) -> float:
    if source_video_ms <= 0 or target_audio_ms <= 0:
        raise ContractError("durations must be positive")
    return target_audio_ms / source_video_ms


def classify_duration_ratio(ratio: float) -> str:
    """``within`` for 1.2 <= ratio <= 1.5, else ``below`` / ``above``."""
    if ratio < BAND_LOW:
        return "below"
    if ratio > BAND_HIGH:
        return "above"
    return "within"


@dataclass(frozen=True)
class CueAlignment:
    cue_index: int
    source_video_ms: int
    target_audio_ms: int
    insertions: tuple[SilenceInsertion, ...]
    stretch_factor: float
    duration_ratio: float
    band: str
    source_speech_ms: int = 0
    target_speech_ms: int = 0
    warnings: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "index": self.cue_index,
            "source_video_ms": self.source_video_ms,
            "target_audio_ms": self.target_audio_ms,
            "source_speech_ms": self.source_speech_ms,
            "target_speech_ms": self.target_speech_ms,
            "stretch_factor": self.stretch_factor,
            "duration_ratio": self.duration_ratio,
            "band": self.band,
            "insertions": [
                {"at_speech_ms": i.at_speech_ms, "duration_ms": i.duration_ms,
                 "snapped_from_ms": i.snapped_from_ms}
                for i in self.insertions
            ],
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CueAlignment":
        return cls(
            cue_index=d["index"],
            source_video_ms=d["source_video_ms"],
            target_audio_ms=d["target_audio_ms"],
            insertions=tuple(SilenceInsertion(**i) for i in d["insertions"]),
            stretch_factor=d["stretch_factor"],
            duration_ratio=d["duration_ratio"],
            band=d["band"],
            source_speech_ms=d.get("source_speech_ms", 0),
            target_speech_ms=d.get("target_speech_ms", 0),
            warnings=tuple(d.get("warnings", ())),
        )


@dataclass(frozen=True)
class AlignmentPlan:
    cues: tuple[CueAlignment, ...] = field(default_factory=tuple)
    version: int = PLAN_VERSION

    @property
    def totals(self) -> dict:
        src = sum(c.source_video_ms for c in self.cues)
        tgt = sum(c.target_audio_ms for c in self.cues)
        return {
            "cue_count": len(self.cues),
            "source_video_ms": src,
            "target_audio_ms": tgt,
            "inserted_silence_ms": sum(i.duration_ms for c in self.cues for i in c.insertions),
            "insertion_count": sum(len(c.insertions) for c in self.cues),
            "cues_outside_band": sum(c.band != "within" for c in self.cues),
            "warning_count": sum(len(c.warnings) for c in self.cues),
            "overall_stretch": tgt / src if src else 0.0,
        }

    def to_dict(self) -> dict:
        return {"version": self.version, "cues": [c.to_dict() for c in self.cues],
                "totals": self.totals}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "AlignmentPlan":
        if d.get("version") != PLAN_VERSION:
            raise ContractError(f"unsupported plan version {d.get('version')!r}")
        return cls(tuple(CueAlignment.from_dict(c) for c in d["cues"]), d["version"])

    @classmethod
    def from_json(cls, text: str) -> "AlignmentPlan":
        return cls.from_dict(json.loads(text))


def plan_schema() -> dict:
    return json.loads(resources.files("isodub.data").joinpath("plan.schema.json").read_text("utf-8"))


def validate_plan_dict(doc: dict) -> None:
    """Raise ``jsonschema.ValidationError`` unless ``doc`` matches the plan schema."""
    import jsonschema

    jsonschema.validate(doc, plan_schema())


def align_cue(cue_index: int, source_video_ms: int, profile: PauseProfile,
              target_speech: AudioBuffer, boundaries: Sequence[SyllableBoundary] | None = None,
              snap_radius_ms: int = DEFAULT_SNAP_RADIUS_MS,
              min_gap_ms: int = COARTICULATION_GAP_MS) -> CueAlignment:
    target_speech_ms = target_speech.duration_ms
    if boundaries is None:
        boundaries = detect_syllable_boundaries(target_speech)
    warnings: list[str] = []
    insertions = plan_silence_insertions(profile, target_speech_ms, boundaries,
                                         snap_radius_ms, min_gap_ms, warnings)
    target_audio_ms = target_speech_ms + sum(i.duration_ms for i in insertions)
    if profile.speech_ms <= 0:
        raise ContractError(f"cue {cue_index}: source profile has no speech")
    ratio = target_speech_ms / profile.speech_ms
    stretch = compute_stretch(source_video_ms, target_audio_ms)
    band = classify_duration_ratio(ratio)
    if stretch < 1.0:
        warnings.append(f"video compressed (stretch {stretch:.4f} < 1)")
    return CueAlignment(cue_index, source_video_ms, target_audio_ms, tuple(insertions),
                        stretch, ratio, band, profile.speech_ms, target_speech_ms,
                        tuple(warnings))


def build_alignment_plan(track: SubtitleTrack, per_cue_source: Sequence[PauseProfile],
                         per_cue_target_speech: Sequence[AudioBuffer],
                         per_cue_boundaries: Sequence[Sequence[SyllableBoundary]] | None = None,
                         snap_radius_ms: int = DEFAULT_SNAP_RADIUS_MS,
                         min_gap_ms: int = COARTICULATION_GAP_MS,
                         max_workers: int = 1) -> AlignmentPlan:
    """Align every cue; boundaries are detected on the target speech if not given."""
    n = len(track.cues)
    if len(per_cue_source) != n or len(per_cue_target_speech) != n:
        raise ContractError(
            f"per-cue inputs ({len(per_cue_source)} profiles, {len(per_cue_target_speech)} "
            f"buffers) do not match {n} cues")
    if per_cue_boundaries is not None and len(per_cue_boundaries) != n:
        raise ContractError(f"{len(per_cue_boundaries)} boundary lists for {n} cues")

    def one(k: int) -> CueAlignment:
        cue = track.cues[k]
        return align_cue(cue.index, cue.end - cue.start, per_cue_source[k],
                         per_cue_target_speech[k],
                         None if per_cue_boundaries is None else per_cue_boundaries[k],
                         snap_radius_ms, min_gap_ms)

    if max_workers > 1 and n > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            cues = list(pool.map(one, range(n)))
    else:
        cues = [one(k) for k in range(n)]
    return AlignmentPlan(tuple(cues))
