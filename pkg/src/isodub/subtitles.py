"""SRT subtitle tracks: parsing, validation and canonical serialization.

Times are integer milliseconds.  Parsing is deliberately lenient about
what it accepts (BOM, CRLF, ``.`` as millisecond separator) and never
checks cross-cue rules; call :func:`validate_track` for that.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import EmptyTrackError, SrtParseError, SrtValidationError

MAX_TIME_MS = 100 * 3600 * 1000 - 1  # 99:59:59,999

_TIMESTAMP = r"(\d+):([0-5]\d):([0-5]\d)[,.](\d{3})"
_TIMING_RE = re.compile(rf"^\s*{_TIMESTAMP}\s*-->\s*{_TIMESTAMP}\s*$")


@dataclass(frozen=True)
class SubtitleCue:
    index: int
    start: int  # ms
    end: int  # ms
    text: str

    @property
    def duration_ms(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class SubtitleTrack:
    cues: tuple[SubtitleCue, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "cues", tuple(self.cues))

    def __len__(self) -> int:
        return len(self.cues)

    def __iter__(self):
        return iter(self.cues)

    def __getitem__(self, i):
        return self.cues[i]


@dataclass(frozen=True, order=True)
class Violation:
    rule: str
    cues: tuple[int, ...]
    detail: str = ""

    def __str__(self) -> str:
        which = ",".join(str(c) for c in self.cues)
        msg = f"cue {which}: {self.rule}"
        return f"{msg} ({self.detail})" if self.detail else msg


def format_timestamp(ms: int) -> str:
    if ms < 0:
        raise ValueError(f"negative time {ms}")
    hours, rest = divmod(ms, 3_600_000)
    minutes, rest = divmod(rest, 60_000)
    seconds, millis = divmod(rest, 1000)
    return f"{hours:02d}:{minutes:02d}:{seconds:02d},{millis:03d}"


def parse_timestamp(text: str) -> int:
    m = re.fullmatch(_TIMESTAMP, text.strip())
    if not m:
        raise ValueError(f"bad timestamp {text!r}")
    h, mi, s, ms = (int(g) for g in m.groups())
    return ((h * 60 + mi) * 60 + s) * 1000 + ms


def parse_srt(raw_text: str) -> SubtitleTrack:
    """Parse SRT text into a track, in file order.

    Raises :class:`SrtParseError` (with a 1-based line number) on a
    malformed index or timing line and :class:`EmptyTrackError` when the
    input holds no cues at all.
    """
    if raw_text.startswith("\ufeff"):
        raw_text = raw_text[1:]
    lines = raw_text.replace("\r\n", "\n").replace("\r", "\n").split("\n")

    cues = []
    i, n = 0, len(lines)
    while i < n:
        if not lines[i].strip():
            i += 1
            continue
        index_line = lines[i].strip()
        if not index_line.isdigit():
            raise SrtParseError(f"expected cue index, got {index_line!r}", i + 1)
        index = int(index_line)
        i += 1
        if i >= n:
            raise SrtParseError("missing timing line", i + 1)
        m = _TIMING_RE.match(lines[i])
        if not m:
            raise SrtParseError(f"malformed timing line {lines[i]!r}", i + 1)
        g = [int(x) for x in m.groups()]
        start = ((g[0] * 60 + g[1]) * 60 + g[2]) * 1000 + g[3]
        end = ((g[4] * 60 + g[5]) * 60 + g[6]) * 1000 + g[7]
        i += 1
        text_lines = []
        while i < n and lines[i].strip():
            text_lines.append(lines[i].rstrip())
            i += 1
        cues.append(SubtitleCue(index, start, end, "\n".join(text_lines).strip()))

    if not cues:
        raise EmptyTrackError("no cues found")
    return SubtitleTrack(tuple(cues))


def validate_track(track: SubtitleTrack) -> list[Violation]:
    """Return every invariant violation in ``track`` (empty when clean)."""
    found: set[Violation] = set()
    for cue in track.cues:
        if cue.index < 1:
            found.add(Violation("non-positive index", (cue.index,)))
        if cue.start < 0 or cue.end < 0:
            found.add(Violation("negative time", (cue.index,)))
        if cue.end < cue.start:
            found.add(Violation("negative duration", (cue.index,),
                                f"{cue.start} > {cue.end}"))
        elif cue.end == cue.start:
            found.add(Violation("zero duration", (cue.index,)))
        if max(cue.start, cue.end) > MAX_TIME_MS:
            found.add(Violation("time beyond 99:59:59,999", (cue.index,)))
        if not cue.text.strip():
            found.add(Violation("empty text", (cue.index,)))
        elif any(not line.strip() for line in cue.text.split("\n")):
            found.add(Violation("blank line inside text", (cue.index,)))
        elif "\r" in cue.text or cue.text != cue.text.strip() or any(
            line != line.rstrip() for line in cue.text.split("\n")
        ):
            found.add(Violation("untrimmed text", (cue.index,)))

    for prev, cur in zip(track.cues, track.cues[1:]):
        if cur.index <= prev.index:
            found.add(Violation("index not increasing", (prev.index, cur.index)))
        if cur.start < prev.start:
            found.add(Violation("unsorted", (prev.index, cur.index)))

    # pairwise overlap check over start-sorted cues
    ordered = sorted(track.cues, key=lambda c: (c.start, c.end, c.index))
    for k, a in enumerate(ordered):
        for b in ordered[k + 1:]:
            if b.start >= a.end:
                break
            pair = tuple(sorted((a.index, b.index)))
            found.add(Violation("overlap", pair))
    return sorted(found)


def serialize_srt(track: SubtitleTrack) -> str:
    """Canonical SRT text: LF endings, ``,`` millis, one blank line between cues."""
    violations = validate_track(track)
    if violations:
        raise SrtValidationError(violations)
    blocks = [
        f"{c.index}\n{format_timestamp(c.start)} --> {format_timestamp(c.end)}\n{c.text}\n"
        for c in track.cues
    ]
    return "\n".join(blocks)


def load_srt(path) -> SubtitleTrack:
    with open(path, encoding="utf-8-sig") as fh:
        return parse_srt(fh.read())


def write_srt(track: SubtitleTrack, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_srt(track))
