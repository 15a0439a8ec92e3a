import json
from fractions import Fraction
from pathlib import Path

import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from isodub import pipeline as pl
from isodub.adapters import StubSynthesizer, count_text_syllables
from isodub.audio import read_wav
from isodub.config import ConfigError, bundled, load_config, parse_config_text
from isodub.errors import SrtValidationError, StageError
from isodub.fixture import FIXTURE_SRT, fixture_audio, write_fixture
from isodub.isochrony import AlignmentPlan, validate_plan_dict
from isodub.rhythm import load_rules, total_pause_ms
from isodub.subtitles import parse_srt

FIXTURE_CFG = bundled("fixture/lecture.cfg")


def demo_config(out, **overrides):
    return load_config(FIXTURE_CFG, {"output_dir": out, **overrides})


@pytest.fixture(scope="module")
def demo_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("demo")
    return pl.run_pipeline(demo_config(out))


def true_silences(start_ms, end_ms, min_ms=200):
    """Exact zero runs of the fixture audio inside a cue (sample-level oracle)."""
    samples = fixture_audio().samples[start_ms * 16:end_ms * 16]
    silent = samples == 0
    runs, i = [], 0
    while i < silent.size:
        if silent[i]:
            j = i
            while j < silent.size and silent[j]:
                j += 1
            if (j - i) / 16 >= min_ms:
                runs.append((i / 16, j / 16))
            i = j
        else:
            i += 1
    return runs


def test_bundled_fixture_is_reproducible(tmp_path):
    paths = write_fixture(tmp_path)
    assert paths["srt"].read_bytes() == bundled("fixture/lecture.srt").read_bytes()
    assert paths["wav"].read_bytes() == bundled("fixture/lecture.wav").read_bytes()


def test_demo_plan_matches_independent_recomputation(demo_run):
    plan = demo_run.plan
    track = parse_srt(FIXTURE_SRT)
    assert len(plan.cues) == 2
    for cue, align, wav in zip(track.cues, plan.cues, demo_run.audio_paths):
        assert align.source_video_ms == cue.end - cue.start
        truth = true_silences(cue.start, cue.end)
        true_speech = (cue.end - cue.start) - sum(b - a for a, b in truth)
        # each detected silence edge is within one hop of the truth
        assert abs(align.source_speech_ms - true_speech) <= 20 * len(truth)
        assert align.target_audio_ms == align.target_speech_ms + sum(
            i.duration_ms for i in align.insertions)
        # prorated durations, longest silence first
        ratio = Fraction(align.target_speech_ms, align.source_speech_ms)
        assert align.duration_ratio == pytest.approx(float(ratio), rel=1e-12)
        assert len(align.insertions) == len(truth)
        by_position = sorted(truth)
        for ins, (a, b) in zip(align.insertions, by_position):
            assert abs(ins.duration_ms - (b - a) * ratio) <= 20 * ratio + 1
        assert abs(align.stretch_factor * align.source_video_ms - align.target_audio_ms) \
            <= 1e-9 * align.target_audio_ms
        assert read_wav(wav).duration_ms == align.target_audio_ms
    validate_plan_dict(json.loads((demo_run.output_dir / "plan.json").read_text()))


def test_target_speech_follows_syllable_law(tmp_path):
    seen = []

    class Recording(StubSynthesizer):
        def synthesize(self, text, rate):
            seen.append((text, rate))
            return super().synthesize(text, rate)

    cfg = demo_config(tmp_path)
    rules = load_rules(cfg.rules_path)
    engines = pl.build_engines(cfg, rules)
    engines.synthesizer = Recording()
    result = pl.run_pipeline(cfg, engines)
    for (text, rate), cue in zip(seen, result.plan.cues):
        expected = count_text_syllables(text) * 1000 / rate + total_pause_ms(text)
        assert abs(cue.target_speech_ms - expected) <= 1


def test_outputs_written(demo_run):
    out = demo_run.output_dir
    names = sorted(p.relative_to(out).as_posix() for p in out.rglob("*") if p.is_file())
    assert names == ["plan.json", "report.txt", "run_report.json", "target.srt",
                     "wav/cue_0001.wav", "wav/cue_0002.wav"]
    srt = parse_srt((out / "target.srt").read_text())
    assert [c.end - c.start for c in srt] == [c.target_audio_ms for c in demo_run.plan.cues]
    gap_in = 6500 - 6000
    assert srt[1].start - srt[0].end == gap_in


def _digest(out: Path):
    return {p.relative_to(out).as_posix(): p.read_bytes()
            for p in sorted(out.rglob("*")) if p.is_file()}


def test_deterministic_across_runs_and_threads(tmp_path, demo_run):
    a = _digest(demo_run.output_dir)
    pl.run_pipeline(demo_config(tmp_path / "b", workers=4))
    assert _digest(tmp_path / "b") == a


def test_missing_audio_is_startup_error(tmp_path):
    cfg = demo_config(tmp_path / "out", source_audio=tmp_path / "nope.wav")
    with pytest.raises(ConfigError, match="source audio not found"):
        pl.run_pipeline(cfg)
    assert not (tmp_path / "out").exists()


def test_invalid_srt_aborts_before_stages(tmp_path):
    srt = tmp_path / "bad.srt"
    srt.write_text("1\n00:00:01,000 --> 00:00:03,000\na\n\n2\n00:00:02,000 --> 00:00:04,000\nb\n")
    cfg = demo_config(tmp_path / "out", source_srt=srt)
    with pytest.raises(SrtValidationError):
        pl.run_pipeline(cfg)
    assert not (tmp_path / "out").exists()


class DroppingTranslator:
    def __init__(self, fail_on):
        self.fail_on = fail_on
        self.calls = 0

    def translate(self, text):
        self.calls += 1
        if self.calls == self.fail_on:
            return text.replace("__DT0__", "")
        return text


def test_placeholder_loss_aborts_with_cue_index(tmp_path):
    cfg = demo_config(tmp_path)
    engines = pl.build_engines(cfg, load_rules(cfg.rules_path))
    engines.translator = DroppingTranslator(fail_on=2)
    with pytest.raises(StageError) as exc:
        pl.run_pipeline(cfg, engines)
    assert exc.value.cue_index == 2 and exc.value.stage == "placeholders"
    assert "__DT0__" in str(exc.value)
    # cue 1 outputs survive and the report names the failure
    assert (tmp_path / "wav" / "cue_0001.wav").is_file()
    assert not (tmp_path / "wav" / "cue_0002.wav").exists()
    plan = AlignmentPlan.from_json((tmp_path / "plan.json").read_text())
    assert [c.cue_index for c in plan.cues] == [1]
    assert "FAILED at cue 2, stage placeholders" in (tmp_path / "report.txt").read_text()


def test_adapter_failure_names_stage(tmp_path):
    class Broken:
        def synthesize(self, text, rate):
            raise RuntimeError("engine down")

    cfg = demo_config(tmp_path)
    engines = pl.build_engines(cfg, load_rules(cfg.rules_path))
    engines.synthesizer = Broken()
    with pytest.raises(StageError) as exc:
        pl.run_pipeline(cfg, engines)
    assert (exc.value.cue_index, exc.value.stage) == (1, "synthesize")


@settings(max_examples=12, deadline=None,
          suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(st.lists(st.sampled_from(["keep", "drop", "dup", "shuffle"]), min_size=2, max_size=2))
def test_placeholder_safety_any_adapter(tmp_path, moves):
    import re

    class Mutating:
        def __init__(self):
            self.k = 0

        def translate(self, text):
            move = moves[self.k]
            self.k += 1
            ids = re.findall(r"__DT\d+__", text)
            if move == "drop" and ids:
                return text.replace(ids[-1], "", 1)
            if move == "dup" and ids:
                return text + " " + ids[0]
            if move == "shuffle":
                return " ".join(sorted(text.split()))
            return text

    out = tmp_path / "-".join(moves)
    cfg = demo_config(out)
    engines = pl.build_engines(cfg, load_rules(cfg.rules_path))
    engines.translator = Mutating()
    try:
        result = pl.run_pipeline(cfg, engines)
    except StageError as exc:
        assert exc.stage == "placeholders"
        return
    srt = parse_srt(result.target_srt)
    assert "for (i = 0; i< n-1; i++) a++;" in srt[1].text


def test_config_file_parsing(tmp_path):
    values = parse_config_text("syllable_rate = 3.5\nworkers=2 # comment\nsource_srt = a.srt\n",
                               tmp_path)
    assert values == {"syllable_rate": 3.5, "workers": 2, "source_srt": tmp_path / "a.srt"}
    with pytest.raises(ConfigError):
        parse_config_text("nonsense = 1\n")
    with pytest.raises(ConfigError):
        parse_config_text("workers = many\n")
    with pytest.raises(ConfigError):
        load_config(None, {"source_srt": "x"})


def test_config_validation_lists_problems(tmp_path):
    cfg = demo_config(tmp_path, syllable_rate=0.1, damping=1.5)
    with pytest.raises(ConfigError) as exc:
        cfg.validate()
    assert "syllable_rate" in str(exc.value) and "damping" in str(exc.value)


def test_render_report_counts_band():
    from isodub.isochrony import CueAlignment
    c1 = CueAlignment(1, 1000, 1300, (), 1.3, 1.3, "within")
    c2 = CueAlignment(2, 1000, 1600, (), 1.6, 1.6, "above",
                      warnings=("skipped silence 100-400 ms: no insertable syllable boundary"
                                " within 500 ms of 120 ms",))
    text = pl.render_report(AlignmentPlan((c1, c2)))
    assert text.count("above band") == 1
    assert "cues outside [1.2, 1.5] band: 1 (below: 0, above: 1)" in text
    assert c2.warnings[0] in text


def test_render_report_empty_plan():
    text = pl.render_report(AlignmentPlan(()))
    assert "cues: 0" in text and "ratio" not in text
