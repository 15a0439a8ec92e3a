"""Acceptance suite: one test per criterion, each reporting PASS/FAIL.

Run ``pytest tests/test_acceptance.py`` (the summary lines are printed at
the end of the session) or ``python3 tests/test_acceptance.py``.
"""

import functools
import json
import math
import random
import sys
import time
from fractions import Fraction
from pathlib import Path

import jsonschema
import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import layout_signal, zero_spans  # noqa: E402
from test_isochrony import recursive_oracle, round_half_up, round_nearest  # noqa: E402
from test_terms import dense_power_iteration  # noqa: E402

from isodub import pipeline as pl  # noqa: E402
from isodub.audio import (AudioBuffer, SilenceRegion, SyllableBoundary,  # noqa: E402
                          detect_silences, detect_syllable_boundaries, frame_energies,
                          ms_to_samples)
from isodub.config import bundled, load_config  # noqa: E402
from isodub.errors import PlaceholderDuplicationError, PlaceholderIntegrityError  # noqa: E402
from isodub.isochrony import (AlignmentPlan, PauseProfile, SilenceInsertion,  # noqa: E402
                              classify_duration_ratio, ideal_insertions, plan_schema,
                              plan_silence_insertions, render_target_audio)
from isodub.rhythm import load_rules  # noqa: E402
from isodub.subtitles import (SubtitleCue, SubtitleTrack, parse_srt,  # noqa: E402
                              serialize_srt, validate_track)
from isodub.terms import (TermAction, discover_terms, load_lexicon, load_stopwords,  # noqa: E402
                          pagerank, textrank_keywords, tfidf_scores, tokenize,
                          unwrap_placeholders, wrap_placeholders)

RESULTS: dict[int, str] = {}
LOOP = "for (i = 0; i< n-1; i++)"


def criterion(number, title, budget_s=None):
    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            t0 = time.perf_counter()
            try:
                detail = fn(*args, **kwargs) or ""
                elapsed = time.perf_counter() - t0
                if budget_s is not None:
                    detail = f"{detail} {elapsed:.2f}s (limit {budget_s}s)".strip()
                    assert elapsed < budget_s, f"took {elapsed:.2f}s, limit {budget_s}s"
            except BaseException as exc:
                RESULTS[number] = f"criterion {number:2d} FAIL  {title}: {exc}"
                raise
            RESULTS[number] = f"criterion {number:2d} PASS  {title}" + (
                f" [{detail}]" if detail else "")
        run.criterion = number
        return run
    return wrap


def summary_lines():
    return [RESULTS[k] for k in sorted(RESULTS)]


# -- 1 ---------------------------------------------------------------------------

_ALPHABET = ("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 .,;:!?'\"-()<>"
             "éüßñाहिंदीதமிழ்中文—…")


def random_track(rng):
    cues, t, idx = [], rng.randint(0, 5000), 0
    for _ in range(rng.randint(1, 12)):
        idx += rng.randint(1, 3)
        start = t + rng.randint(0, 3000)
        end = start + rng.randint(1, 8000)
        lines = []
        for _ in range(rng.randint(1, 3)):
            line = "".join(rng.choice(_ALPHABET) for _ in range(rng.randint(1, 40))).strip()
            lines.append(line or "x")
        cues.append(SubtitleCue(idx, start, end, "\n".join(lines)))
        t = end
    return SubtitleTrack(tuple(cues))


@criterion(1, "SRT round-trip on 100 fuzzed tracks", budget_s=1.0)
def test_c01_srt_round_trip():
    rng = random.Random(1)
    for _ in range(100):
        track = random_track(rng)
        assert validate_track(track) == []
        assert parse_srt(serialize_srt(track)) == track
    return "100/100 exact"


# -- 2 ---------------------------------------------------------------------------

def random_silence_layout(rng):
    layout = []
    if rng.random() < 0.3:
        layout.append(("z", rng.randint(250, 700)))
    for _ in range(rng.randint(1, 6)):
        layout.append(("t", rng.randint(40, 400)))
        # short gaps must not be reported, long ones must
        gap = rng.randint(250, 800) if rng.random() < 0.6 else rng.randint(20, 150)
        layout.append(("z", gap))
    layout.append(("t", rng.randint(40, 400)))
    if rng.random() < 0.3:
        layout.append(("z", rng.randint(250, 700)))
    return layout


@criterion(2, "silence boundaries within one hop on 50 layouts", budget_s=5.0)
def test_c02_silence_detection():
    rng = random.Random(2)
    worst = 0
    for _ in range(50):
        layout = random_silence_layout(rng)
        truth = [(a, b) for a, b in zero_spans(layout) if b - a >= 200]
        found = detect_silences(frame_energies(layout_signal(layout)))
        assert len(found) == len(truth), f"{layout}: {found} vs {truth}"
        for r, (a, b) in zip(found, truth):
            err = max(abs(r.start - a), abs(r.end - b))
            assert err <= 10, f"{layout}: {r} vs {(a, b)}"
            worst = max(worst, err)
    return f"max boundary error {worst} ms"


# -- 3 ---------------------------------------------------------------------------

@criterion(3, "syllable boundaries on burst trains")
def test_c03_syllable_detection():
    rng = random.Random(3)
    for _ in range(60):
        n = rng.randint(2, 10)
        layout = [("t", rng.randint(100, 250))]
        for _ in range(n - 1):
            layout += [("z", rng.randint(80, 300)), ("t", rng.randint(100, 250))]
        bounds = detect_syllable_boundaries(layout_signal(layout))
        gaps = zero_spans(layout)
        assert len(bounds) == n - 1, f"{layout}: {bounds}"
        for b, (lo, hi) in zip(bounds, gaps):
            assert lo <= b.at < hi and b.insertable
    for _ in range(20):
        n = rng.randint(2, 6)
        layout = [("t", rng.randint(100, 250))]
        for _ in range(n - 1):
            layout += [("z", rng.randint(30, 45)), ("t", rng.randint(100, 250))]
        bounds = detect_syllable_boundaries(layout_signal(layout))
        assert not any(b.insertable for b in bounds)
        assert all(b.gap_to_next_ms < 50 for b in bounds)
    return "60 trains exact, 20 coarticulated trains non-insertable"


# -- 4 ---------------------------------------------------------------------------

def random_profile(rng):
    total = rng.randint(2000, 20000)
    n = rng.randint(0, 6)
    points = sorted(rng.sample(range(50, total - 50), 2 * n)) if n else []
    return total, [(points[2 * i], points[2 * i + 1]) for i in range(n)]


def make_profile(total, regions):
    return PauseProfile(total, tuple(SilenceRegion(a, b) for a, b in regions))


@criterion(4, "isochrony proportionality (dense oracle, sparse invariant)")
def test_c04_isochrony():
    rng = random.Random(4)
    for _ in range(100):
        total, regions = random_profile(rng)
        p = make_profile(total, regions)
        target = int(p.speech_ms * rng.uniform(0.7, 1.8)) + 1
        expected = [(round_nearest(pt), round_half_up(d))
                    for pt, d, _ in recursive_oracle(total, regions, target)
                    if round_half_up(d) > 0]
        dense = [SyllableBoundary(t, 100) for t in range(target + 1)]
        got = plan_silence_insertions(p, target, dense)
        assert [(i.at_speech_ms, i.duration_ms) for i in got] == expected
    worst = 0
    for _ in range(100):
        total, regions = random_profile(rng)
        p = make_profile(total, regions)
        target = int(p.speech_ms * rng.uniform(1.0, 1.6)) + 1
        bounds = sorted({SyllableBoundary(rng.randint(0, target), rng.choice([20, 60, 120]))
                         for _ in range(rng.randint(0, 40))})
        got = plan_silence_insertions(p, target, bounds, snap_radius_ms=500, warnings=[])
        ideal = ideal_insertions(p, target)
        points = {}
        for k, (pt, _) in enumerate(ideal):
            points.setdefault(round_nearest(pt), k)
        for ins in got:
            k = points[ins.snapped_from_ms]
            snap = abs(ins.at_speech_ms - ideal[k][0])
            assert snap <= 500
            lhs = abs(Fraction(ins.at_speech_ms, target)
                      - Fraction(p.speech_before(k), p.speech_ms))
            assert lhs <= snap / target
            worst = max(worst, snap)
    return f"max sparse snap {float(worst):.1f} ms"


# -- 5 ---------------------------------------------------------------------------

@criterion(5, "render duration conservation, sample-exact")
def test_c05_duration_conservation():
    rng = random.Random(5)
    for _ in range(300):
        sr = rng.choice([8000, 16000, 22050, 44100, 48000])
        dur = rng.randint(10, 3000)
        n = ms_to_samples(dur, sr)
        speech = AudioBuffer(sr, np.full(n, 0.25))
        ats = sorted(rng.randint(0, dur) for _ in range(rng.randint(0, 6)))
        ins = [SilenceInsertion(a, rng.randint(1, 600), a) for a in ats]
        out = render_target_audio(speech, ins)
        assert len(out) == n + sum(ms_to_samples(i.duration_ms, sr) for i in ins)
        assert np.count_nonzero(out.samples) == n
    return "300 cases"


# -- 6 ---------------------------------------------------------------------------

@criterion(6, "duration band 1.2-1.5 inclusive")
def test_c06_band():
    cases = {1.2: "within", 1.5: "within", 1.35: "within", 1.19: "below", 1.51: "above"}
    for ratio, band in cases.items():
        assert classify_duration_ratio(ratio) == band, ratio


# -- 7 ---------------------------------------------------------------------------

@criterion(7, "TextRank vs dense power iteration, 20 graphs")
def test_c07_textrank():
    rng = random.Random(7)
    worst = 0.0
    for _ in range(20):
        n = rng.randint(1, 12)
        edges = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < 0.35]
        nbrs = [set() for _ in range(n)]
        for u, v in edges:
            nbrs[u].add(v)
            nbrs[v].add(u)
        got = np.array(pagerank(nbrs))
        want = dense_power_iteration(n, edges)
        worst = max(worst, float(np.max(np.abs(got - want))))
        assert worst < 1e-6
    (only,) = textrank_keywords(tokenize("the heap of"), stopwords={"the", "of"})
    assert only.score == 1 - 0.85 and math.isclose(only.score, 0.15, abs_tol=1e-15)
    return f"max abs error {worst:.1e}"


# -- 8 ---------------------------------------------------------------------------

@criterion(8, "TF-IDF hand values")
def test_c08_tfidf():
    corpus = [tokenize("heap heap heap sort tree tree insert insert search search"),
              tokenize("graph edge edge node")]
    scores = tfidf_scores(corpus, 0)
    assert abs(scores["heap"] - 0.3 * math.log(2)) < 1e-9
    assert abs(scores["heap"] - 0.20794415416798356) < 1e-9
    assert abs(scores["tree"] - 0.2 * math.log(2)) < 1e-9
    assert abs(tfidf_scores(corpus, 1)["edge"] - 0.5 * math.log(2)) < 1e-9
    shared = [tokenize("the heap"), tokenize("the tree"), tokenize("the graph")]
    for k in range(3):
        assert tfidf_scores(shared, k)["the"] == 0.0


# -- 9 ---------------------------------------------------------------------------

@criterion(9, "placeholder round-trip and loss detection")
def test_c09_placeholders():
    rng = random.Random(9)
    actions = list(TermAction)
    for _ in range(500):
        text = "".join(rng.choice("abc xyz,.()=+") for _ in range(rng.randint(1, 60)))
        cuts = sorted(set(rng.randint(0, len(text)) for _ in range(rng.randint(0, 10))))
        spans = [(a, b, rng.choice(actions)) for a, b in zip(cuts[::2], cuts[1::2]) if b > a]
        tagged = wrap_placeholders(text, spans)
        assert unwrap_placeholders(tagged.text_with_placeholders, tagged.side_table) == text
        if not spans:
            continue
        victim = rng.choice(sorted(tagged.side_table))
        with pytest.raises(PlaceholderIntegrityError) as exc:
            unwrap_placeholders(tagged.text_with_placeholders.replace(victim, "", 1),
                                tagged.side_table)
        assert exc.value.ids == [victim]
        with pytest.raises(PlaceholderDuplicationError) as exc:
            unwrap_placeholders(tagged.text_with_placeholders + victim, tagged.side_table)
        assert exc.value.ids == [victim]
    return "500 random span sets"


# -- 10 ----------------------------------------------------------------------------

@criterion(10, "code clause kept as one protected span end-to-end")
def test_c10_code_span(tmp_path):
    cue_text = f"The loop {LOOP} a++; increments the variable."
    spans = discover_terms(cue_text, lexicon=load_lexicon(bundled("lexicon_cs.tsv")),
                           stopwords=load_stopwords(bundled("stopwords_en.txt")))
    code = [s for s in spans if s.method == "code"]
    assert len(code) == 1 and code[0].action is TermAction.KEEP
    assert cue_text[code[0].start:code[0].end].startswith(LOOP)

    seen = []

    class Recording:
        def translate(self, text):
            seen.append(text)
            return text

    cfg = load_config(bundled("fixture/lecture.cfg"), {"output_dir": tmp_path})
    engines = pl.build_engines(cfg, load_rules(cfg.rules_path))
    engines.translator = Recording()
    result = pl.run_pipeline(cfg, engines)
    pieces = ["for (", "i = 0", "i++", "n-1"]
    assert len(seen) == 2
    assert not any(p in text for text in seen for p in pieces), seen
    assert LOOP in parse_srt(result.target_srt)[1].text


# -- 11 ----------------------------------------------------------------------------

def _files(root):
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file()}


@criterion(11, "fixture run twice is byte-identical", budget_s=10.0)
def test_c11_determinism(tmp_path):
    runs = []
    for name in ("a", "b"):
        cfg = load_config(bundled("fixture/lecture.cfg"), {"output_dir": tmp_path / name})
        pl.run_pipeline(cfg)
        runs.append(_files(tmp_path / name))
    assert runs[0] == runs[1]
    assert {"plan.json", "target.srt", "wav/cue_0001.wav", "wav/cue_0002.wav"} <= set(runs[0])


# -- 12 ----------------------------------------------------------------------------

@criterion(12, "plan JSON schema and stretch identity")
def test_c12_plan_schema(tmp_path):
    cfg = load_config(bundled("fixture/lecture.cfg"), {"output_dir": tmp_path})
    pl.run_pipeline(cfg)
    doc = json.loads((tmp_path / "plan.json").read_text())
    jsonschema.validate(doc, plan_schema())
    plan = AlignmentPlan.from_dict(doc)
    assert len(plan.cues) == 2
    for cue in plan.cues:
        rel = abs(cue.stretch_factor * cue.source_video_ms - cue.target_audio_ms)
        assert rel <= 1e-9 * cue.target_audio_ms
    ratios = ", ".join(f"{c.duration_ratio:.4f}" for c in plan.cues)
    return f"duration ratios {ratios}"


if __name__ == "__main__":
    import inspect
    import tempfile

    failed = 0
    for name, fn in sorted(globals().items()):
        if not name.startswith("test_c"):
            continue
        try:
            if "tmp_path" in inspect.signature(fn).parameters:
                with tempfile.TemporaryDirectory() as d:
                    fn(Path(d))
            else:
                fn()
        except BaseException:
            failed += 1
    print("\n".join(summary_lines()))
    sys.exit(1 if failed else 0)
