"""Sentence and clause segmentation, the unit of all downstream matching.

Rule-based: sentences split on terminal punctuation with abbreviation and
decimal guards; clauses split on semicolons, on coordinating conjunctions
preceded by a comma, and on subordinator cue words that open a new finite
clause. A parser-backed segmenter can be swapped in through the
ClauseSegmenter protocol.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Protocol, Sequence

# Words that block a sentence break at a following period. Single-letter
# tokens (initials) are guarded separately.
ABBREVIATIONS = frozenset({
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "vs", "etc",
    "eg", "e.g", "ie", "i.e", "cf", "al", "ca", "fig", "figs", "eq",
    "no", "dept", "est", "approx",
})

# Coordinators split only when preceded by a comma; "for" is left out because
# its prepositional reading dominates in this register.
COORDINATORS = frozenset({"and", "but", "or", "nor", "so", "yet"})

# Cue words that open a new finite clause mid-sentence. "so that" is handled
# as a two-word cue before bare "so" is considered a coordinator.
SUBORDINATORS = frozenset({"because", "when", "if", "since", "while", "although", "unless"})

_TERMINAL_RUN = re.compile(r"[.!?]+")
_TOKEN = re.compile(r"\S+")

DEFAULT_MIN_CLAUSE_TOKENS = 3


@dataclass(frozen=True)
class Sentence:
    essay_id: str
    index: int
    text: str
    char_span: tuple[int, int]


@dataclass(frozen=True)
class Clause:
    essay_id: str
    sentence_index: int
    clause_index: int
    text: str
    token_count: int

    @property
    def key(self) -> tuple[str, int, int]:
        return (self.essay_id, self.sentence_index, self.clause_index)


def _word(token: str) -> str:
    return token.strip(".,;:!?\"'()[]").lower()


def _blocks_break(text: str, dot_pos: int) -> bool:
    """True when the period at dot_pos ends an abbreviation or an initial."""
    start = dot_pos
    while start > 0 and not text[start - 1].isspace():
        start -= 1
    token = text[start:dot_pos].lower().rstrip(".")
    if not token:
        return False
    if token in ABBREVIATIONS:
        return True
    # Single-letter initials such as "J. Smith".
    return len(token) == 1 and token.isalpha()


def split_sentences(text: str, essay_id: str = "") -> list[Sentence]:
    """Split normalized text into sentences.

    Breaks after runs of {., !, ?} that are followed by whitespace or end of
    text. Decimals never break because the digit follows the period directly;
    abbreviations and initials are guarded explicitly. Trailing unpunctuated
    text becomes a final sentence.
    """
    spans: list[tuple[int, int]] = []
    cursor = 0
    n = len(text)
    while cursor < n and text[cursor].isspace():
        cursor += 1
    start = cursor
    for match in _TERMINAL_RUN.finditer(text):
        end = match.end()
        if end < n and not text[end].isspace():
            continue
        if match.group() == "." and _blocks_break(text, match.start()):
            continue
        if match.start() < start:
            continue
        if text[start:end].strip():
            spans.append((start, end))
        start = end
        while start < n and text[start].isspace():
            start += 1
    if start < n and text[start:].strip():
        spans.append((start, n))
    return [Sentence(essay_id=essay_id, index=i, text=text[a:b], char_span=(a, b))
            for i, (a, b) in enumerate(spans)]


def _is_subordinator(tokens: Sequence[tuple[str, int, int]], i: int) -> bool:
    w = _word(tokens[i][0])
    if w in SUBORDINATORS:
        return True
    return w == "so" and i + 1 < len(tokens) and _word(tokens[i + 1][0]) == "that"


def _opens_subordinate(tokens: Sequence[tuple[str, int, int]], start: int) -> bool:
    if start >= len(tokens):
        return False
    if _is_subordinator(tokens, start):
        return True
    # "and if ...": the coordinator stays attached to the cue clause.
    return (_word(tokens[start][0]) in COORDINATORS
            and start + 1 < len(tokens) and _is_subordinator(tokens, start + 1))


def extract_clauses(sentence: Sentence,
                    min_clause_tokens: int = DEFAULT_MIN_CLAUSE_TOKENS) -> list[Clause]:
    """Split one sentence into clauses.

    Boundaries: after semicolons; before a coordinator that follows a comma;
    before a subordinator cue opening a new finite clause (the boundary lands
    on an immediately preceding bare coordinator, so "and if" starts one
    clause); and at the comma that closes a subordinator-opened clause.
    Fragments shorter than min_clause_tokens merge into the preceding clause
    (the first fragment merges forward).
    """
    text = sentence.text
    tokens = [(m.group(), m.start(), m.end()) for m in _TOKEN.finditer(text)]
    if not tokens:
        return []
    n = len(tokens)

    boundaries: list[int] = [0]
    clause_start = 0
    open_sub = _opens_subordinate(tokens, 0)
    for i in range(1, n):
        prev_raw = tokens[i - 1][0]
        target: int | None = None
        if prev_raw.endswith(";"):
            target = i
        elif _is_subordinator(tokens, i) and i + 1 < n:
            if _word(prev_raw) in COORDINATORS and not prev_raw.endswith(","):
                target = i - 1
            else:
                target = i
        elif prev_raw.endswith(","):
            w = _word(tokens[i][0])
            if w in COORDINATORS or open_sub:
                target = i
        if target is not None and target > clause_start:
            boundaries.append(target)
            clause_start = target
            open_sub = _opens_subordinate(tokens, target)

    segments = [(boundaries[k], boundaries[k + 1] if k + 1 < len(boundaries) else n)
                for k in range(len(boundaries))]

    # Merge short fragments into a neighbor; forward only for a leading fragment.
    merged: list[tuple[int, int]] = []
    for seg in segments:
        if merged and (seg[1] - seg[0]) < min_clause_tokens:
            merged[-1] = (merged[-1][0], seg[1])
        elif merged and (merged[-1][1] - merged[-1][0]) < min_clause_tokens:
            merged[-1] = (merged[-1][0], seg[1])
        else:
            merged.append(seg)

    clauses = []
    for idx, (a, b) in enumerate(merged):
        clause_text = text[tokens[a][1]:tokens[b - 1][2]]
        clauses.append(Clause(essay_id=sentence.essay_id, sentence_index=sentence.index,
                              clause_index=idx, text=clause_text, token_count=b - a))
    return clauses


class ClauseSegmenter(Protocol):
    """Pluggable segmentation interface; the rule-based one is the default."""

    def segment(self, essay_id: str, text: str) -> tuple[list[Sentence], list[Clause]]:
        ...


class RuleBasedSegmenter:
    def __init__(self, min_clause_tokens: int = DEFAULT_MIN_CLAUSE_TOKENS):
        if min_clause_tokens < 1:
            raise ValueError("min_clause_tokens must be >= 1")
        self.min_clause_tokens = min_clause_tokens

    def segment(self, essay_id: str, text: str) -> tuple[list[Sentence], list[Clause]]:
        sentences = split_sentences(text, essay_id)
        clauses = [clause
                   for sentence in sentences
                   for clause in extract_clauses(sentence, self.min_clause_tokens)]
        return sentences, clauses


DEFAULT_SEGMENTER = RuleBasedSegmenter()


def segment_essay(essay_id: str, text: str,
                  segmenter: ClauseSegmenter | None = None) -> list[Clause]:
    """Clauses of one essay; use split_sentences for the sentence layer."""
    _, clauses = (segmenter or DEFAULT_SEGMENTER).segment(essay_id, text)
    return clauses


def segmentation_report(essay_id: str, sentences: Sequence[Sentence],
                        clauses: Sequence[Clause]) -> str:
    """Plain-text debug dump of one essay's segmentation."""
    lines = [f"essay {essay_id}: {len(sentences)} sentence(s), {len(clauses)} clause(s)"]
    by_sentence: dict[int, list[Clause]] = {}
    for clause in clauses:
        by_sentence.setdefault(clause.sentence_index, []).append(clause)
    for sentence in sentences:
        a, b = sentence.char_span
        lines.append(f"  sentence {sentence.index} [{a},{b}): {sentence.text}")
        for clause in by_sentence.get(sentence.index, []):
            lines.append(f"    clause {clause.clause_index} "
                         f"({clause.token_count} tokens): {clause.text}")
    return "\n".join(lines) + "\n"
