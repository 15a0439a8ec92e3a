"""Isochronous cross-lingual dubbing planner for lecture videos."""

from .audio import (AudioBuffer, FrameEnergy, SilenceRegion, SyllableBoundary,
                    detect_silences, detect_syllable_boundaries, frame_energies, load_wav)
from .errors import DubbingError
from .isochrony import (AlignmentPlan, CueAlignment, PauseProfile, SilenceInsertion,
                        build_alignment_plan, classify_duration_ratio, compute_stretch,
                        plan_silence_insertions, render_target_audio)
from .rhythm import breaks_to_pause_marks, chunk_tokens
from .subtitles import SubtitleCue, SubtitleTrack, parse_srt, serialize_srt, validate_track
from .terms import (TermAction, TermCandidate, detect_code_spans, lexicon_match,
                    resolve_term_actions, textrank_keywords, tfidf_scores,
                    unwrap_placeholders, wrap_placeholders)

__version__ = "0.1.0"

__all__ = [
    "AudioBuffer", "FrameEnergy", "SilenceRegion", "SyllableBoundary", "detect_silences",
    "detect_syllable_boundaries", "frame_energies", "load_wav", "DubbingError",
    "AlignmentPlan", "CueAlignment", "PauseProfile", "SilenceInsertion",
    "build_alignment_plan", "classify_duration_ratio", "compute_stretch",
    "plan_silence_insertions", "render_target_audio", "breaks_to_pause_marks",
    "chunk_tokens", "SubtitleCue", "SubtitleTrack", "parse_srt", "serialize_srt",
    "validate_track", "TermAction", "TermCandidate", "detect_code_spans", "lexicon_match",
    "resolve_term_actions", "textrank_keywords", "tfidf_scores", "unwrap_placeholders",
    "wrap_placeholders",
]
