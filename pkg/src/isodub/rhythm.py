"""Language-rhythm chunking of tagged target-language tokens.

Break rules map a morpheme tag (or a tag bigram) to a break strength.
Rule files are plain text::

    # comment
    tags<TAB>N PSP VM VAUX CC SYM
    VAUX<TAB>Major
    N PSP<TAB>Minor

The first non-comment line declares the tag inventory.  A unigram rule
breaks after every token carrying that tag; a bigram rule breaks between
two adjacent tokens carrying that tag pair.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import RuleFileError, TaggingError

PAUSE_MARK_RE = re.compile(r"⟨pause ms=(\d+)⟩")


class BreakStrength(enum.IntEnum):
    MINOR = 1
    MAJOR = 2

    @classmethod
    def parse(cls, text: str) -> "BreakStrength":
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise RuleFileError(f"unknown break strength {text!r}") from None


@dataclass(frozen=True)
class TaggedToken:
    surface: str
    tag: str


@dataclass(frozen=True)
class RuleSet:
    inventory: frozenset[str]
    rules: Mapping[tuple[str, ...], BreakStrength]
    language: str = ""

    def __post_init__(self):
        object.__setattr__(self, "inventory", frozenset(self.inventory))
        object.__setattr__(self, "rules", dict(self.rules))
        for pattern in self.rules:
            if not 1 <= len(pattern) <= 2:
                raise RuleFileError(f"pattern {pattern} must be a tag or tag bigram")
            unknown = [t for t in pattern if t not in self.inventory]
            if unknown:
                raise RuleFileError(f"pattern {' '.join(pattern)} uses undeclared tags {unknown}")

    def __eq__(self, other):
        if not isinstance(other, RuleSet):
            return NotImplemented
        return self.inventory == other.inventory and self.rules == other.rules

    def __hash__(self):
        return hash((self.inventory, tuple(sorted(self.rules.items()))))


def parse_rules(text: str, language: str = "") -> RuleSet:
    inventory = None
    rules: dict[tuple[str, ...], BreakStrength] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "\t" not in stripped:
            raise RuleFileError(f"line {lineno}: expected a tab-separated pair")
        left, right = (s.strip() for s in stripped.split("\t", 1))
        if inventory is None:
            if left.lower() != "tags":
                raise RuleFileError(f"line {lineno}: first entry must be the tags header")
            inventory = frozenset(right.split())
            if not inventory:
                raise RuleFileError(f"line {lineno}: empty tag inventory")
            continue
        pattern = tuple(left.split())
        if pattern in rules:
            raise RuleFileError(f"line {lineno}: duplicate pattern {left!r}")
        try:
            rules[pattern] = BreakStrength.parse(right)
        except RuleFileError as exc:
            raise RuleFileError(f"line {lineno}: {exc}") from None
    if inventory is None:
        raise RuleFileError("rule file has no tags header")
    return RuleSet(inventory, rules, language)


def load_rules(path, language: str = "") -> RuleSet:
    with open(path, encoding="utf-8") as fh:
        return parse_rules(fh.read(), language)


@dataclass(frozen=True)
class ChunkedText:
    tokens: tuple[TaggedToken, ...]
    breaks: Mapping[int, BreakStrength] = field(default_factory=dict)

    def chunks(self) -> list[list[TaggedToken]]:
        cuts = [0, *sorted(self.breaks), len(self.tokens)]
        return [list(self.tokens[a:b]) for a, b in zip(cuts, cuts[1:])]


def chunk_tokens(tokens: Sequence[TaggedToken], rules: RuleSet,
                 max_tokens_per_chunk: int = 12) -> ChunkedText:
    """Place rule-driven breaks, then split oversize chunks at their midpoint.

    Break index ``b`` sits between ``tokens[b-1]`` and ``tokens[b]``.  When
    rules disagree at a boundary the stronger break wins.
    """
    if not tokens:
        raise ValueError("cannot chunk an empty token list")
    if max_tokens_per_chunk < 1:
        raise ValueError("max_tokens_per_chunk must be positive")
    for i, tok in enumerate(tokens):
        if tok.tag not in rules.inventory:
            raise TaggingError(f"token {i} ({tok.surface!r}) has unknown tag {tok.tag!r}")

    n = len(tokens)
    breaks: dict[int, BreakStrength] = {}

    def put(b: int, strength: BreakStrength) -> None:
        if 0 < b < n and strength > breaks.get(b, 0):
            breaks[b] = strength

    for i, tok in enumerate(tokens):
        strength = rules.rules.get((tok.tag,))
        if strength is not None:
            put(i + 1, strength)
        if i + 1 < n:
            strength = rules.rules.get((tok.tag, tokens[i + 1].tag))
            if strength is not None:
                put(i + 1, strength)

    pending = [0, *sorted(breaks), n]
    spans = list(zip(pending, pending[1:]))
    while spans:
        a, b = spans.pop()
        if b - a > max_tokens_per_chunk:
            mid = a + (b - a) // 2
            breaks[mid] = BreakStrength.MINOR
            spans.extend([(a, mid), (mid, b)])

    return ChunkedText(tuple(tokens), dict(sorted(breaks.items())))


def pause_mark(ms: int) -> str:
    return f"⟨pause ms={ms}⟩"


def breaks_to_pause_marks(chunked: ChunkedText, minor_ms: int = 150, major_ms: int = 400) -> str:
    """Token stream joined by spaces, with a pause mark at every break."""
    durations = {BreakStrength.MINOR: minor_ms, BreakStrength.MAJOR: major_ms}
    parts = []
    for i, tok in enumerate(chunked.tokens):
        if i in chunked.breaks:
            parts.append(pause_mark(durations[chunked.breaks[i]]))
        parts.append(tok.surface)
    return " ".join(parts)


def split_pause_marks(annotated: str) -> list[str | int]:
    """Inverse view of an annotated string: words (str) and pauses (int ms)."""
    out: list[str | int] = []
    pos = 0
    for m in PAUSE_MARK_RE.finditer(annotated):
        out.extend(annotated[pos:m.start()].split())
        out.append(int(m.group(1)))
        pos = m.end()
    out.extend(annotated[pos:].split())
    return out


def strip_pause_marks(annotated: str) -> str:
    return " ".join(p for p in split_pause_marks(annotated) if isinstance(p, str))


def total_pause_ms(annotated: str) -> int:
    return sum(int(m.group(1)) for m in PAUSE_MARK_RE.finditer(annotated))


_PUNCT = frozenset(".,;:?!।॥")


def stub_tag(words: Iterable[str], rules: RuleSet, default: str = "N",
             punct: str = "SYM", conjunctions: Mapping[str, str] | None = None
             ) -> list[TaggedToken]:
    """Deterministic placeholder tagger for desk runs (no morphology).

    Punctuation gets ``punct``, listed conjunctions get their tag, anything
    else ``default``; tags missing from the inventory fall back to
    ``default``.
    """
    conj = conjunctions if conjunctions is not None else {
        "and": "CC", "or": "CC", "but": "CC", "और": "CC", "या": "CC", "लेकिन": "CC",
        "மற்றும்": "CC"}
    out = []
    for w in words:
        if w and all(c in _PUNCT for c in w):
            tag = punct
        else:
            tag = conj.get(w.lower(), default)
        if tag not in rules.inventory:
            tag = default
        out.append(TaggedToken(w, tag))
    return out
