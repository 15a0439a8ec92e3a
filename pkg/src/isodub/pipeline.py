"""End-to-end dubbing run: SRT + source audio in, plan + target audio out.

Per cue: source pause analysis, term discovery and placeholder wrapping,
translation, placeholder check, rhythm chunking, synthesis, silence
planning and rendering.  Cues are independent and may run on a thread
pool; results are always assembled in cue order.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from . import adapters as ad
from .audio import (AudioBuffer, SilenceRegion, detect_silences, detect_syllable_boundaries,
                    frame_energies, read_wav, write_wav)
from .config import PipelineConfig
from .errors import ContractError, DubbingError, SrtValidationError, StageError
from .isochrony import (AlignmentPlan, CueAlignment, PauseProfile, align_cue,
                        render_target_audio)
from .rhythm import breaks_to_pause_marks, chunk_tokens, load_rules
from .subtitles import SubtitleCue, SubtitleTrack, load_srt, serialize_srt, validate_track
from .terms import (ResolvedSpan, TermAction, TfidfIndex, discover_terms, load_lexicon,
                    load_stopwords, tokenize, unwrap_placeholders, wrap_placeholders)

log = logging.getLogger(__name__)

_PUNCT = ".,;:?!।॥"


@dataclass
class Engines:
    translator: ad.Translator
    transliterator: ad.Transliterator
    tagger: ad.Tagger
    synthesizer: ad.Synthesizer
    disfluency: Callable[[str], str] | None = None


def build_engines(config: PipelineConfig, rules, environ=None) -> Engines:
    def pick(stage, value, stub, command_cls):
        if value == "command":
            return command_cls.from_env(stage, environ)
        return stub

    return Engines(
        translator=pick("translate", config.translate_engine,
                        ad.StubTranslator(reorder=config.translate_engine == "stub-reorder"),
                        ad.CommandTranslator),
        transliterator=pick("transliterate", config.transliterate_engine,
                            ad.StubTransliterator(), ad.CommandTransliterator),
        tagger=pick("tag", config.tagger_engine, ad.StubTagger(rules), ad.CommandTagger),
        synthesizer=pick("synthesize", config.tts_engine,
                         ad.StubSynthesizer(config.sample_rate_hz), ad.CommandSynthesizer),
        disfluency=(ad.CommandTextFilter.from_env("disfluency", environ)
                    if config.disfluency_engine == "command" else None),
    )


@dataclass
class CueResult:
    alignment: CueAlignment
    audio: AudioBuffer
    translated_text: str
    annotated_text: str
    spans: list[ResolvedSpan]
    source_chars: int
    flagged_chars: int


@dataclass
class RunReport:
    cues: list[dict] = field(default_factory=list)
    totals: dict = field(default_factory=dict)
    chars_total: int = 0
    chars_auto: int = 0
    chars_flagged: int = 0
    terms_protected: int = 0
    terms_by_action: dict = field(default_factory=dict)
    failed_cue: int | None = None
    failed_stage: str | None = None
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "cues": self.cues, "totals": self.totals,
            "effort_proxy": {"chars_total": self.chars_total, "chars_auto": self.chars_auto,
                             "chars_flagged": self.chars_flagged},
            "terms": {"protected": self.terms_protected, "by_action": self.terms_by_action},
            "failure": None if self.failed_cue is None else {
                "cue": self.failed_cue, "stage": self.failed_stage, "error": self.error},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        eff = d.get("effort_proxy", {})
        terms = d.get("terms", {})
        fail = d.get("failure") or {}
        return cls(d.get("cues", []), d.get("totals", {}), eff.get("chars_total", 0),
                   eff.get("chars_auto", 0), eff.get("chars_flagged", 0),
                   terms.get("protected", 0), terms.get("by_action", {}),
                   fail.get("cue"), fail.get("stage"), fail.get("error"))


@dataclass
class PipelineResult:
    plan: AlignmentPlan
    target_srt: str
    audio_paths: list[Path]
    report: RunReport
    output_dir: Path


def source_profile(audio: AudioBuffer, cue: SubtitleCue, config: PipelineConfig) -> PauseProfile:
    """Pause profile of the source audio under one cue."""
    total = cue.end - cue.start
    if cue.end > audio.duration_ms:
        raise ContractError(f"cue ends at {cue.end} ms, audio is {audio.duration_ms} ms")
    segment = audio.slice_ms(cue.start, cue.end)
    if segment.duration_ms < config.frame_ms:
        return PauseProfile(total, ())
    energy = frame_energies(segment, config.frame_ms, config.hop_ms)
    regions = detect_silences(energy, config.silence_threshold_db, config.min_silence_ms)
    clipped = tuple(SilenceRegion(r.start, min(r.end, total)) for r in regions
                    if r.start < total and min(r.end, total) > r.start)
    return PauseProfile(total, clipped)


def split_words(text: str) -> list[str]:
    """Whitespace words with sentence punctuation split off as its own token."""
    words = []
    for w in text.split():
        lead = []
        while len(w) > 1 and w[0] in _PUNCT:
            lead.append(w[0])
            w = w[1:]
        trail = []
        while len(w) > 1 and w[-1] in _PUNCT:
            trail.append(w[-1])
            w = w[:-1]
        words.extend(lead)
        words.append(w)
        words.extend(reversed(trail))
    return words


class _Context:
    """Inputs shared read-only by every cue worker."""

    def __init__(self, config: PipelineConfig, track: SubtitleTrack, audio: AudioBuffer,
                 engines: Engines, rules, lexicon, stopwords, texts: list[str]):
        self.config = config
        self.track = track
        self.audio = audio
        self.engines = engines
        self.rules = rules
        self.lexicon = lexicon
        self.stopwords = stopwords
        self.texts = texts
        self.tfidf = TfidfIndex([tokenize(t) for t in texts]) if texts else None


def _process_cue(ctx: _Context, k: int) -> CueResult:
    cue = ctx.track.cues[k]
    cfg = ctx.config
    eng = ctx.engines
    stage = "source-analysis"
    try:
        profile = source_profile(ctx.audio, cue, cfg)

        stage = "terms"
        text = ctx.texts[k]
        spans = discover_terms(text, doc_index=k, lexicon=ctx.lexicon, stopwords=ctx.stopwords,
                               top_k=cfg.top_k, window=cfg.textrank_window,
                               damping=cfg.damping, tfidf_index=ctx.tfidf)
        tagged = wrap_placeholders(text, spans)

        stage = "translate"
        translated = eng.translator.translate(tagged.text_with_placeholders)

        stage = "placeholders"
        translit = eng.transliterator.transliterate
        plain = unwrap_placeholders(translated, tagged.side_table, transliterate=translit)

        stage = "tag"
        tokens = eng.tagger.tag(split_words(translated))

        stage = "chunk"
        chunked = chunk_tokens(tokens, ctx.rules, cfg.max_tokens_per_chunk)
        annotated = unwrap_placeholders(
            breaks_to_pause_marks(chunked, cfg.minor_pause_ms, cfg.major_pause_ms),
            tagged.side_table, transliterate=translit)

        stage = "synthesize"
        speech = eng.synthesizer.synthesize(annotated, cfg.syllable_rate)

        stage = "align"
        boundaries = detect_syllable_boundaries(speech, cfg.frame_ms, cfg.hop_ms,
                                                threshold_db_rel_peak=cfg.silence_threshold_db)
        alignment = align_cue(cue.index, cue.end - cue.start, profile, speech, boundaries,
                              cfg.snap_radius_ms, cfg.coarticulation_gap_ms)

        stage = "render"
        rendered = render_target_audio(speech, alignment.insertions)
    except StageError:
        raise
    except Exception as exc:  # noqa: BLE001 - every failure is reported per stage
        raise StageError(cue.index, stage, exc) from exc

    if alignment.warnings or alignment.band != "within":
        flagged = len(text)
    else:
        flagged = sum(s.length for s in spans if s.method == "unsupervised")
    return CueResult(alignment, rendered, plain, annotated, spans, len(text), flagged)


def retime_track(track: SubtitleTrack, results: list[CueResult]) -> SubtitleTrack:
    """Target-language track laid out on the stretched video timeline."""
    cues, shift = [], 0
    for cue, res in zip(track.cues, results):
        start = cue.start + shift
        end = start + res.alignment.target_audio_ms
        cues.append(SubtitleCue(cue.index, start, end, res.translated_text or cue.text))
        shift += res.alignment.target_audio_ms - res.alignment.source_video_ms
    return SubtitleTrack(tuple(cues))


def build_report(plan: AlignmentPlan, results: list[CueResult]) -> RunReport:
    by_action: dict[str, int] = {a.value: 0 for a in TermAction}
    for res in results:
        for s in res.spans:
            by_action[s.action.value] += 1
    total = sum(r.source_chars for r in results)
    flagged = sum(r.flagged_chars for r in results)
    return RunReport(
        cues=[{"index": c.cue_index, "duration_ratio": c.duration_ratio, "band": c.band,
               "stretch_factor": c.stretch_factor, "warnings": list(c.warnings)}
              for c in plan.cues],
        totals=plan.totals,
        chars_total=total, chars_auto=total - flagged, chars_flagged=flagged,
        terms_protected=sum(by_action.values()), terms_by_action=by_action,
    )


def _write_outputs(out: Path, track: SubtitleTrack, results: list[CueResult],
                   config: PipelineConfig, report: RunReport) -> tuple[AlignmentPlan, str, list[Path]]:
    plan = AlignmentPlan(tuple(r.alignment for r in results))
    out.mkdir(parents=True, exist_ok=True)
    (out / "wav").mkdir(exist_ok=True)
    paths = []
    for res in results:
        path = out / "wav" / f"cue_{res.alignment.cue_index:04d}.wav"
        write_wav(res.audio, path)
        paths.append(path)
    sub = SubtitleTrack(tuple(c for c in track.cues[:len(results)]))
    srt_text = serialize_srt(retime_track(sub, results)) if results else ""
    (out / "plan.json").write_text(plan.to_json(), encoding="utf-8")
    (out / "target.srt").write_text(srt_text, encoding="utf-8")
    (out / "run_report.json").write_text(
        json.dumps(report.to_dict(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    if config.write_report:
        (out / "report.txt").write_text(render_report(plan, report), encoding="utf-8")
    return plan, srt_text, paths


def run_pipeline(config: PipelineConfig, engines: Engines | None = None,
                 environ=None) -> PipelineResult:
    """Run every stage for every cue and write the outputs.

    Configuration, SRT and input problems abort before anything is
    written.  A failure inside cue ``k`` still writes the outputs of cues
    before ``k`` (plus a report naming the failure) and then raises the
    :class:`StageError`.
    """
    config.validate()
    track = load_srt(config.source_srt)
    violations = validate_track(track)
    if violations:
        raise SrtValidationError(violations)
    audio = read_wav(config.source_audio)
    rules = load_rules(config.rules_path, config.target_lang)
    lexicon = load_lexicon(config.lexicon) if config.lexicon else None
    stopwords = load_stopwords(config.stopwords_path) if config.stopwords_path.is_file() \
        else frozenset()
    if engines is None:
        engines = build_engines(config, rules, environ)

    texts = [cue.text for cue in track.cues]
    if engines.disfluency is not None:
        try:
            texts = [engines.disfluency(t) for t in texts]
        except DubbingError as exc:
            raise StageError(track.cues[0].index if track.cues else 0, "disfluency", exc) from exc
    ctx = _Context(config, track, audio, engines, rules, lexicon, stopwords, texts)

    results: list[CueResult] = []
    failure: StageError | None = None
    n = len(track.cues)
    if config.workers > 1 and n > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            futures = [pool.submit(_process_cue, ctx, k) for k in range(n)]
            for fut in futures:
                if failure is not None:
                    fut.cancel()
                    continue
                try:
                    results.append(fut.result())
                except StageError as exc:
                    failure = exc
    else:
        for k in range(n):
            try:
                results.append(_process_cue(ctx, k))
            except StageError as exc:
                failure = exc
                break

    plan = AlignmentPlan(tuple(r.alignment for r in results))
    report = build_report(plan, results)
    if failure is not None:
        report.failed_cue = failure.cue_index
        report.failed_stage = failure.stage
        report.error = str(failure.cause)
    plan, srt_text, paths = _write_outputs(config.output_dir, track, results, config, report)
    if failure is not None:
        log.error("%s", failure)
        raise failure
    return PipelineResult(plan, srt_text, paths, report, config.output_dir)


def render_report(plan: AlignmentPlan, report: RunReport | None = None) -> str:
    """Plain-text summary: one line per cue, then totals."""
    lines = [f"isodub alignment report (plan version {plan.version})"]
    if plan.cues:
        lines.append(f"{'cue':>5}  {'ratio':>7}  {'band':<11}  {'stretch':>8}  {'ins':>3}  warnings")
    for c in plan.cues:
        band = f"{c.band} band"
        warn = "; ".join(c.warnings) if c.warnings else "-"
        lines.append(f"{c.cue_index:>5}  {c.duration_ratio:>7.4f}  {band:<11}  "
                     f"{c.stretch_factor:>8.4f}  {len(c.insertions):>3}  {warn}")
    t = plan.totals
    below = sum(c.band == "below" for c in plan.cues)
    above = sum(c.band == "above" for c in plan.cues)
    lines.append("")
    lines.append(f"cues: {t['cue_count']}  source video: {t['source_video_ms']} ms  "
                 f"target audio: {t['target_audio_ms']} ms  "
                 f"inserted silence: {t['inserted_silence_ms']} ms")
    lines.append(f"overall stretch: {t['overall_stretch']:.4f}")
    lines.append(f"cues outside [1.2, 1.5] band: {t['cues_outside_band']} "
                 f"(below: {below}, above: {above})")
    if report is not None:
        lines.append(f"effort proxy: {report.chars_auto} of {report.chars_total} chars "
                     f"auto-processed, {report.chars_flagged} flagged for review")
        if report.terms_by_action:
            counts = ", ".join(f"{k}: {v}" for k, v in report.terms_by_action.items())
            lines.append(f"protected terms: {report.terms_protected} ({counts})")
        if report.failed_cue is not None:
            lines.append(f"FAILED at cue {report.failed_cue}, stage {report.failed_stage}: "
                         f"{report.error}")
    return "\n".join(lines) + "\n"
