"""Command-line entry point: ``isodub {analyze,terms,plan,report}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .audio import detect_silences, detect_syllable_boundaries, frame_energies, read_wav
from .config import bundled, load_config
from .errors import DubbingError
from .isochrony import AlignmentPlan
from .pipeline import RunReport, render_report, run_pipeline
from .terms import (TfidfIndex, discover_terms, load_lexicon, load_stopwords, tokenize,
                    wrap_placeholders)


def _emit(payload, out: str | None) -> None:
    text = json.dumps(payload, indent=2, ensure_ascii=False) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_analyze(args) -> int:
    buf = read_wav(args.audio)
    energy = frame_energies(buf, args.frame_ms, args.hop_ms)
    silences = detect_silences(energy, args.threshold_db, args.min_silence_ms)
    bounds = detect_syllable_boundaries(buf, args.frame_ms, args.hop_ms,
                                        threshold_db_rel_peak=args.threshold_db)
    _emit({
        "sample_rate_hz": buf.sample_rate_hz,
        "duration_ms": buf.duration_ms,
        "silences": [{"start": s.start, "end": s.end} for s in silences],
        "syllable_boundaries": [
            {"at": b.at, "gap_to_next_ms": b.gap_to_next_ms, "insertable": b.insertable}
            for b in bounds
        ],
    }, args.output)
    return 0


def cmd_terms(args) -> int:
    raw = Path(args.text).read_text(encoding="utf-8")
    lines = [line for line in raw.splitlines() if line.strip()]
    if not lines:
        raise DubbingError("no text to analyze")
    lexicon = load_lexicon(args.lexicon) if args.lexicon else None
    stop_path = Path(args.stopwords) if args.stopwords else bundled("stopwords_en.txt")
    stopwords = load_stopwords(stop_path)
    index = TfidfIndex([tokenize(t) for t in lines])
    docs = []
    for k, text in enumerate(lines):
        spans = discover_terms(text, doc_index=k, lexicon=lexicon, stopwords=stopwords,
                               top_k=args.top_k, tfidf_index=index)
        tagged = wrap_placeholders(text, spans)
        docs.append({
            "line": k + 1,
            "text": text,
            "tagged_text": tagged.text_with_placeholders,
            "spans": [{"start": s.start, "end": s.end, "surface": text[s.start:s.end],
                       "action": s.action.value, "method": s.method} for s in spans],
            "side_table": {pid: {"surface": t.surface, "action": t.action.value}
                           for pid, t in tagged.side_table.items()},
        })
    _emit(docs, args.output)
    return 0


_PLAN_FLAGS = {
    "srt": "source_srt", "audio": "source_audio", "out": "output_dir",
    "source_lang": "source_lang", "target_lang": "target_lang",
    "lexicon": "lexicon", "stopwords": "stopwords", "rules": "rules",
    "syllable_rate": "syllable_rate", "snap_radius_ms": "snap_radius_ms",
    "min_silence_ms": "min_silence_ms", "threshold_db": "silence_threshold_db",
    "top_k": "top_k", "max_tokens": "max_tokens_per_chunk",
    "translate": "translate_engine", "transliterate": "transliterate_engine",
    "tagger": "tagger_engine", "tts": "tts_engine", "disfluency": "disfluency_engine",
    "workers": "workers",
}


def cmd_plan(args) -> int:
    overrides = {field: getattr(args, flag) for flag, field in _PLAN_FLAGS.items()}
    config_path = args.config
    if args.demo and config_path is None:
        config_path = bundled("fixture/lecture.cfg")
    config = load_config(config_path, overrides)
    result = run_pipeline(config)
    sys.stdout.write(render_report(result.plan, result.report))
    return 0


def cmd_report(args) -> int:
    plan = AlignmentPlan.from_json(Path(args.plan).read_text(encoding="utf-8"))
    report = None
    run_report = Path(args.run_report) if args.run_report else Path(args.plan).with_name(
        "run_report.json")
    if run_report.is_file():
        report = RunReport.from_dict(json.loads(run_report.read_text(encoding="utf-8")))
    sys.stdout.write(render_report(plan, report))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isodub", description="Isochronous lecture dubbing planner.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="silences and syllable boundaries of a WAV file")
    p.add_argument("audio")
    p.add_argument("--frame-ms", type=int, default=25)
    p.add_argument("--hop-ms", type=int, default=10)
    p.add_argument("--threshold-db", type=float, default=-35.0)
    p.add_argument("--min-silence-ms", type=int, default=200)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("terms", help="domain-term spans for each line of a text file")
    p.add_argument("text")
    p.add_argument("--lexicon")
    p.add_argument("--stopwords")
    p.add_argument("--top-k", type=int, default=5)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_terms)

    p = sub.add_parser("plan", help="run the full pipeline")
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--demo", action="store_true", help="use the bundled 2-cue fixture")
    p.add_argument("--srt")
    p.add_argument("--audio")
    p.add_argument("--out")
    p.add_argument("--source-lang")
    p.add_argument("--target-lang")
    p.add_argument("--lexicon")
    p.add_argument("--stopwords")
    p.add_argument("--rules")
    p.add_argument("--syllable-rate", type=float)
    p.add_argument("--snap-radius-ms", type=int)
    p.add_argument("--min-silence-ms", type=int)
    p.add_argument("--threshold-db", type=float)
    p.add_argument("--top-k", type=int)
    p.add_argument("--max-tokens", type=int)
    p.add_argument("--translate", choices=["stub", "stub-reorder", "command"])
    p.add_argument("--transliterate", choices=["stub", "command"])
    p.add_argument("--tagger", choices=["stub", "command"])
    p.add_argument("--tts", choices=["stub", "command"])
    p.add_argument("--disfluency", choices=["none", "command"])
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("report", help="render a plan JSON as text")
    p.add_argument("plan")
    p.add_argument("--run-report")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (DubbingError, OSError) as exc:
        print(f"isodub: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
