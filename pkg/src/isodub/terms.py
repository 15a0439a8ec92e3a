"""Domain-term discovery and the placeholder protocol around translation.

Terms come from four sources: TextRank and TF-IDF (single tokens), a
lexicon (possibly multi-word) and a code detector working on raw
characters.  :func:`resolve_term_actions` merges them into
non-overlapping character spans, each with a :class:`TermAction`, and
:func:`wrap_placeholders` / :func:`unwrap_placeholders` hide those spans
from the translation engine and restore them afterwards.
"""

from __future__ import annotations

import enum
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from .errors import (ContractError, PlaceholderDuplicationError,
                     PlaceholderIntegrityError)

_TOKEN_RE = re.compile(r"\w+(?:['’-]\w+)*|[^\w\s]")


class TermAction(enum.Enum):
    TRANSLATE = "Translate"
    TRANSLITERATE = "Transliterate"
    KEEP = "Keep"

    @classmethod
    def parse(cls, text: str) -> "TermAction":
        key = text.strip().lower()
        for action in cls:
            if action.value.lower() == key:
                return action
        raise ValueError(f"unknown term action {text!r}")


@dataclass(frozen=True)
class Token:
    surface: str
    normalized: str
    start: int  # char offset in the source text
    end: int


@dataclass(frozen=True)
class Document:
    tokens: tuple[Token, ...]
    text: str = ""

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def normalized(self) -> list[str]:
        return [t.normalized for t in self.tokens]

    def char_range(self, i: int, j: int) -> tuple[int, int]:
        return self.tokens[i].start, self.tokens[j - 1].end


def tokenize(text: str) -> Document:
    """Split into word tokens and single punctuation marks, keeping offsets."""
    tokens = tuple(
        Token(m.group(), m.group().lower(), m.start(), m.end())
        for m in _TOKEN_RE.finditer(text)
    )
    return Document(tokens, text)


@dataclass(frozen=True)
class TermCandidate:
    start: int  # token index, inclusive
    end: int  # token index, exclusive
    score: float
    method: str  # textrank | tfidf | lexicon | code
    term: str = ""  # normalized surface, used to detect document mismatches
    action: TermAction | None = None

    def __post_init__(self):
        if not 0 <= self.start < self.end:
            raise ContractError(f"bad token span [{self.start}, {self.end})")
        if self.score < 0:
            raise ContractError("score must be non-negative")


@dataclass(frozen=True)
class LexiconEntry:
    domain: str
    action: TermAction


class TermLexicon(dict):
    """Mapping of normalized (space-joined, lowercased) term to entry."""

    def __setitem__(self, key, value):
        key = normalize_term(key)
        if not key:
            raise ContractError("lexicon keys must be non-empty")
        super().__setitem__(key, value)

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, LexiconEntry]) -> "TermLexicon":
        lex = cls()
        for k, v in mapping.items():
            lex[k] = v
        return lex

    @property
    def max_tokens(self) -> int:
        return max((len(k.split(" ")) for k in self), default=0)


def normalize_term(term: str) -> str:
    return " ".join(t.normalized for t in tokenize(term).tokens)


def parse_lexicon(text: str) -> TermLexicon:
    """Parse ``term<TAB>domain<TAB>action`` lines; ``#`` starts a comment."""
    lex = TermLexicon()
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.rstrip("\n").split("\t")
        if len(parts) != 3:
            raise ValueError(f"lexicon line {lineno}: expected 3 tab-separated fields")
        term, domain, action = parts
        key = normalize_term(term)
        if not key:
            raise ValueError(f"lexicon line {lineno}: empty term")
        if key in lex:
            raise ValueError(f"lexicon line {lineno}: duplicate term {term!r}")
        lex[key] = LexiconEntry(domain.strip(), TermAction.parse(action))
    return lex


def load_lexicon(path) -> TermLexicon:
    with open(path, encoding="utf-8") as fh:
        return parse_lexicon(fh.read())


def load_stopwords(path) -> frozenset[str]:
    with open(path, encoding="utf-8") as fh:
        return frozenset(
            w.strip().lower() for w in fh
            if w.strip() and not w.lstrip().startswith("#"))


def is_candidate(token: Token, stopwords: Iterable[str] = ()) -> bool:
    return token.surface.isalpha() and token.normalized not in stopwords


# -- TextRank -----------------------------------------------------------------

def textrank_keywords(doc: Document, window: int = 2, damping: float = 0.85,
                      eps: float = 1e-6, max_iter: int = 100,
                      stopwords: Iterable[str] = frozenset()) -> list[TermCandidate]:
    """Rank single-token candidates with TextRank.

    Candidate tokens (alphabetic, not stopwords) are linked when they fall
    within ``window`` positions of each other in the filtered sequence.
    Scores follow ``S(v) = (1-d) + d * sum(S(u) / deg(u))`` over neighbours,
    iterated from all-ones until no score moves by ``eps`` or more.
    """
    stop = frozenset(stopwords)
    seq = [(i, t.normalized) for i, t in enumerate(doc.tokens) if is_candidate(t, stop)]
    if not seq:
        return []
    first_pos: dict[str, int] = {}
    for i, term in seq:
        first_pos.setdefault(term, i)
    nodes = list(first_pos)
    index = {term: k for k, term in enumerate(nodes)}

    neighbours: list[set[int]] = [set() for _ in nodes]
    for a in range(len(seq)):
        for b in range(a + 1, min(a + window, len(seq))):
            u, v = index[seq[a][1]], index[seq[b][1]]
            if u != v:
                neighbours[u].add(v)
                neighbours[v].add(u)

    scores = pagerank(neighbours, damping, eps, max_iter)
    order = sorted(range(len(nodes)), key=lambda k: (-scores[k], first_pos[nodes[k]]))
    return [
        TermCandidate(first_pos[nodes[k]], first_pos[nodes[k]] + 1, scores[k],
                      "textrank", nodes[k])
        for k in order
    ]


def pagerank(neighbours: Sequence[Iterable[int]], damping: float = 0.85,
             eps: float = 1e-6, max_iter: int = 100) -> list[float]:
    """Undirected, unweighted TextRank iteration (Jacobi updates)."""
    adj = [sorted(set(n)) for n in neighbours]
    deg = [len(n) for n in adj]
    scores = [1.0] * len(adj)
    for _ in range(max_iter):
        new = [
            (1.0 - damping) + damping * sum(scores[u] / deg[u] for u in adj[v])
            for v in range(len(adj))
        ]
        delta = max((abs(a - b) for a, b in zip(new, scores)), default=0.0)
        scores = new
        if delta < eps:
            break
    return scores


# -- TF-IDF -------------------------------------------------------------------

def tfidf_scores(corpus: Sequence[Document], doc_index: int) -> dict[str, float]:
    """``tf * idf`` with ``tf = count / len(doc)`` and ``idf = ln(N / df)``."""
    if not corpus:
        raise ContractError("corpus must not be empty")
    if not 0 <= doc_index < len(corpus):
        raise ContractError(f"doc_index {doc_index} out of range")
    doc = corpus[doc_index]
    if not doc.tokens:
        return {}
    counts = Counter(doc.normalized)
    n_docs = len(corpus)
    vocab = [set(d.normalized) for d in corpus]
    return {
        term: (count / len(doc)) * math.log(n_docs / sum(term in v for v in vocab))
        for term, count in counts.items()
    }


class TfidfIndex:
    """Document frequencies computed once for a corpus, then read-only."""

    def __init__(self, corpus: Sequence[Document]):
        if not corpus:
            raise ContractError("corpus must not be empty")
        self.corpus = tuple(corpus)
        self.df = Counter()
        for doc in self.corpus:
            self.df.update(set(doc.normalized))

    def scores(self, doc_index: int) -> dict[str, float]:
        doc = self.corpus[doc_index]
        if not doc.tokens:
            return {}
        counts = Counter(doc.normalized)
        n = len(self.corpus)
        return {t: (c / len(doc)) * math.log(n / self.df[t]) for t, c in counts.items()}


def tfidf_keywords(doc: Document, scores: Mapping[str, float],
                   stopwords: Iterable[str] = frozenset()) -> list[TermCandidate]:
    """Candidate tokens ranked by TF-IDF score (ties by first occurrence)."""
    stop = frozenset(stopwords)
    first_pos: dict[str, int] = {}
    for i, tok in enumerate(doc.tokens):
        if is_candidate(tok, stop):
            first_pos.setdefault(tok.normalized, i)
    ranked = sorted(first_pos, key=lambda t: (-scores.get(t, 0.0), first_pos[t]))
    return [TermCandidate(first_pos[t], first_pos[t] + 1, scores.get(t, 0.0), "tfidf", t)
            for t in ranked]


# -- lexicon ------------------------------------------------------------------

def lexicon_match(doc: Document, lexicon: Mapping[str, LexiconEntry]) -> list[TermCandidate]:
    """Greedy longest match, left to right, over normalized tokens."""
    if not lexicon:
        return []
    longest = max(len(k.split(" ")) for k in lexicon)
    norm = doc.normalized
    out = []
    i = 0
    while i < len(norm):
        for j in range(min(len(norm), i + longest), i, -1):
            key = " ".join(norm[i:j])
            if key in lexicon:
                out.append(TermCandidate(i, j, 1.0, "lexicon", key, lexicon[key].action))
                i = j
                break
        else:
            i += 1
    return out


# -- code spans ---------------------------------------------------------------

CODE_CHARS = frozenset("=+-*/%<>!&|^~(){}[];")
CODE_DENSITY = 0.25
CODE_WINDOW = 20
CODE_LEAD_KEYWORDS = frozenset(
    {"for", "while", "if", "switch", "return", "sizeof", "else", "do", "print", "printf"})
_OPEN, _CLOSE = "([{", ")]}"


def _code_like(word: str) -> bool:
    return any(c in CODE_CHARS for c in word) or word.isdigit() or len(word) == 1


def _dense(chars: str) -> bool:
    """True if some window of CODE_WINDOW non-space chars is dense in operators."""
    compact = [c for c in chars if not c.isspace()]
    width = min(CODE_WINDOW, len(compact))
    if width == 0:
        return False
    ops = [1 if c in CODE_CHARS else 0 for c in compact]
    count = sum(ops[:width])
    best = count
    for k in range(width, len(ops)):
        count += ops[k] - ops[k - width]
        best = max(best, count)
    return best / width > CODE_DENSITY


def _match_brackets(text: str) -> dict[int, int]:
    pairs, stack = {}, []
    for i, c in enumerate(text):
        if c in _OPEN:
            stack.append(i)
        elif c in _CLOSE and stack and _OPEN.index(text[stack[-1]]) == _CLOSE.index(c):
            j = stack.pop()
            pairs[i], pairs[j] = j, i
    return pairs


def detect_code_spans(raw_text: str) -> list[tuple[int, int]]:
    """Character ranges of inline code, e.g. ``for (i = 0; i< n-1; i++) a++;``.

    Runs of whitespace-separated "code-like" words (containing an operator
    or bracket, numeric, or single-character) are flagged when some
    20-character window of their non-space characters is more than 25%
    operators/brackets.  Flagged ranges grow to enclose matching brackets
    and absorb a directly preceding control keyword or function name.
    """
    words = [(m.start(), m.end()) for m in re.finditer(r"\S+", raw_text)]
    ranges = []
    k = 0
    while k < len(words):
        if not _code_like(raw_text[slice(*words[k])]):
            k += 1
            continue
        j = k
        while j + 1 < len(words) and _code_like(raw_text[slice(*words[j + 1])]):
            j += 1
        start, end = words[k][0], words[j][1]
        if _dense(raw_text[start:end]):
            ranges.append([start, end])
        k = j + 1

    pairs = _match_brackets(raw_text)
    for r in ranges:
        changed = True
        while changed:
            changed = False
            for pos in range(r[0], r[1]):
                partner = pairs.get(pos)
                if partner is None:
                    continue
                if partner < r[0]:
                    r[0], changed = partner, True
                elif partner >= r[1]:
                    r[1], changed = partner + 1, True
        # absorb "for (" / "printf(" style leads
        if raw_text[r[0]] in _OPEN:
            m = re.search(r"(\w+)(\s*)$", raw_text[:r[0]])
            if m and (not m.group(2) or m.group(1).lower() in CODE_LEAD_KEYWORDS):
                r[0] = m.start(1)
        # keep the run's own edge punctuation only if it is code
        while r[1] > r[0] and raw_text[r[1] - 1] in ",.:?\"'" and r[1] - 1 not in pairs:
            r[1] -= 1

    merged: list[list[int]] = []
    for r in sorted(ranges):
        if merged and r[0] <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], r[1])
        else:
            merged.append(list(r))
    return [(a, b) for a, b in merged if b > a]


# -- resolution ---------------------------------------------------------------

_PRECEDENCE = {"code": 3, "lexicon": 2, "external": 2, "unsupervised": 1}


@dataclass(frozen=True, order=True)
class ResolvedSpan:
    start: int  # char offset
    end: int
    action: TermAction = field(compare=False)
    method: str = field(default="", compare=False)

    @property
    def length(self) -> int:
        return self.end - self.start


def _check_candidate(doc: Document, cand: TermCandidate) -> None:
    if cand.end > len(doc.tokens):
        raise ContractError(f"{cand.method} span [{cand.start},{cand.end}) outside document")
    if cand.term and " ".join(doc.normalized[cand.start:cand.end]) != cand.term:
        raise ContractError(
            f"{cand.method} candidate {cand.term!r} does not match the document")


def resolve_term_actions(doc: Document, *, textrank: Sequence[TermCandidate] = (),
                         tfidf: Sequence[TermCandidate] = (),
                         lexicon_spans: Sequence[TermCandidate] = (),
                         code_spans: Sequence[tuple[int, int]] = (),
                         external: Sequence[TermCandidate] = (),
                         lexicon: Mapping[str, LexiconEntry] | None = None,
                         top_k: int = 5) -> list[ResolvedSpan]:
    """Merge candidates into non-overlapping character spans with actions.

    Precedence is code > lexicon (and externally tagged terms) > terms in
    both the TextRank and TF-IDF top ``top_k``.  Code gets Keep, lexicon
    hits keep their stored action, unsupervised-only terms get
    Transliterate.  Overlaps are won by higher precedence, then the longer
    span, then the earlier one.  Unsupervised terms are protected at every
    occurrence in the document.
    """
    for cand in (*textrank, *tfidf, *lexicon_spans, *external):
        _check_candidate(doc, cand)
    for a, b in code_spans:
        if not 0 <= a < b <= len(doc.text):
            raise ContractError(f"code span ({a}, {b}) outside document text")

    pool: list[tuple[int, ResolvedSpan]] = []
    for a, b in code_spans:
        pool.append((_PRECEDENCE["code"], ResolvedSpan(a, b, TermAction.KEEP, "code")))

    for cand in (*lexicon_spans, *external):
        action = cand.action
        if action is None and lexicon is not None and cand.term in lexicon:
            action = lexicon[cand.term].action
        if action is None:
            action = TermAction.TRANSLITERATE
        a, b = doc.char_range(cand.start, cand.end)
        pool.append((_PRECEDENCE["lexicon"], ResolvedSpan(a, b, action, cand.method)))

    top_tr = {c.term or doc.normalized[c.start] for c in textrank[:top_k]}
    top_tf = {c.term or doc.normalized[c.start] for c in tfidf[:top_k] if c.score > 0}
    chosen = top_tr & top_tf
    if chosen:
        for i, tok in enumerate(doc.tokens):
            if tok.normalized in chosen:
                action = TermAction.TRANSLITERATE
                if lexicon is not None and tok.normalized in lexicon:
                    action = lexicon[tok.normalized].action
                pool.append((_PRECEDENCE["unsupervised"],
                             ResolvedSpan(tok.start, tok.end, action, "unsupervised")))

    pool.sort(key=lambda item: (-item[0], -item[1].length, item[1].start))
    accepted: list[ResolvedSpan] = []
    for _, span in pool:
        if all(span.end <= s.start or span.start >= s.end for s in accepted):
            accepted.append(span)
    return sorted(accepted)


def discover_terms(text: str, *, corpus: Sequence[Document] | None = None,
                   doc_index: int = 0, lexicon: Mapping[str, LexiconEntry] | None = None,
                   stopwords: Iterable[str] = frozenset(), top_k: int = 5,
                   window: int = 2, damping: float = 0.85,
                   tfidf_index: TfidfIndex | None = None,
                   external: Sequence[TermCandidate] = ()) -> list[ResolvedSpan]:
    """Run every detector on ``text`` and resolve the result."""
    doc = tokenize(text)
    if tfidf_index is not None:
        scores = tfidf_index.scores(doc_index)
    else:
        scores = tfidf_scores(list(corpus) if corpus else [doc], doc_index if corpus else 0)
    stop = frozenset(stopwords)
    return resolve_term_actions(
        doc,
        textrank=textrank_keywords(doc, window, damping, stopwords=stop),
        tfidf=tfidf_keywords(doc, scores, stop),
        lexicon_spans=lexicon_match(doc, lexicon or {}),
        code_spans=detect_code_spans(text),
        external=external,
        lexicon=lexicon,
        top_k=top_k,
    )


# -- placeholders ---------------------------------------------------------------

@dataclass(frozen=True)
class PlaceholderSyntax:
    prefix: str = "__DT"
    suffix: str = "__"

    def make(self, n: int) -> str:
        return f"{self.prefix}{n}{self.suffix}"

    @property
    def pattern(self) -> re.Pattern:
        return re.compile(re.escape(self.prefix) + r"(\d+)" + re.escape(self.suffix))


DEFAULT_SYNTAX = PlaceholderSyntax()


@dataclass(frozen=True)
class ProtectedTerm:
    surface: str
    action: TermAction


@dataclass(frozen=True)
class TaggedText:
    text_with_placeholders: str
    side_table: dict[str, ProtectedTerm]
    syntax: PlaceholderSyntax = DEFAULT_SYNTAX


def wrap_placeholders(raw_text: str, spans: Sequence, syntax: PlaceholderSyntax = DEFAULT_SYNTAX
                      ) -> TaggedText:
    """Replace each span's surface by ``__DT<n>__``, numbered left to right.

    ``spans`` holds :class:`ResolvedSpan` objects or ``(start, end, action)``
    triples over character offsets.
    """
    norm = []
    for s in spans:
        if isinstance(s, ResolvedSpan):
            norm.append((s.start, s.end, s.action))
        else:
            a, b, action = s
            norm.append((a, b, action))
    norm.sort(key=lambda s: (s[0], s[1]))
    for a, b, _ in norm:
        if not 0 <= a < b <= len(raw_text):
            raise ContractError(f"span ({a}, {b}) outside text")
    for (a1, b1, _), (a2, b2, _) in zip(norm, norm[1:]):
        if a2 < b1:
            raise ContractError(f"overlapping spans ({a1}, {b1}) and ({a2}, {b2})")
    if syntax.pattern.search(raw_text):
        raise ContractError("source text already contains placeholder syntax")

    pieces, table, pos = [], {}, 0
    for n, (a, b, action) in enumerate(norm):
        pid = syntax.make(n)
        pieces.append(raw_text[pos:a])
        pieces.append(pid)
        table[pid] = ProtectedTerm(raw_text[a:b], action)
        pos = b
    pieces.append(raw_text[pos:])
    return TaggedText("".join(pieces), table, syntax)


def unwrap_placeholders(translated_text: str, side_table: Mapping[str, ProtectedTerm],
                        transliterate: Callable[[str], str] | None = None,
                        translate: Callable[[str], str] | None = None,
                        syntax: PlaceholderSyntax = DEFAULT_SYNTAX) -> str:
    """Restore protected terms; every placeholder must appear exactly once.

    Keep terms come back verbatim; Transliterate and Translate terms go
    through the matching callback (verbatim when no callback is given).
    """
    pattern = syntax.pattern
    seen = Counter(m.group(0) for m in pattern.finditer(translated_text))
    missing = [pid for pid in side_table if seen[pid] == 0]
    unknown = [pid for pid in seen if pid not in side_table]
    if missing or unknown:
        parts = []
        if missing:
            parts.append("missing " + ", ".join(missing))
        if unknown:
            parts.append("unknown " + ", ".join(unknown))
        raise PlaceholderIntegrityError(
            "placeholder integrity violated (" + "; ".join(parts) + ")", missing + unknown)
    dupes = [pid for pid, c in seen.items() if c > 1]
    if dupes:
        raise PlaceholderDuplicationError("placeholder duplicated", dupes)

    def render(m: re.Match) -> str:
        term = side_table[m.group(0)]
        if term.action is TermAction.TRANSLITERATE and transliterate is not None:
            return transliterate(term.surface)
        if term.action is TermAction.TRANSLATE and translate is not None:
            return translate(term.surface)
        return term.surface

    return pattern.sub(render, translated_text)


def placeholder_ids(text: str, syntax: PlaceholderSyntax = DEFAULT_SYNTAX) -> list[str]:
    return [m.group(0) for m in syntax.pattern.finditer(text)]
