"""Essay corpora, rubrics, and gold presence labels.

File formats owned by this module:
  Essays, delimited table: CSV with header ``id,role,draft_index,text``,
  UTF-8, quoted text cells.
  Essays, structured records: JSON Lines, one object per essay with the same
  required fields plus an optional ``metadata`` mapping.
  Gold labels: CSV with header ``essay_id,mi1,...,miN`` and 0/1 cells.
  Rubric: JSON object ``{"main_ideas": [{"id", "text", "confidence"}, ...]}``.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import re
import unicodedata
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterator, Mapping, Sequence

_logger = logging.getLogger(__name__)

ROLES = ("exemplar", "student")
ESSAY_COLUMNS = ("id", "role", "draft_index", "text")
FORMATS = ("delimited-table", "structured-records")

_WHITESPACE_RUN = re.compile(r"\s+")


def normalize_text(text: str) -> str:
    """Unicode NFC, whitespace runs collapsed to single spaces, punctuation kept."""
    return _WHITESPACE_RUN.sub(" ", unicodedata.normalize("NFC", text)).strip()


@dataclass(frozen=True)
class Essay:
    """One essay record; text is normalized on construction."""

    id: str
    role: str
    text: str
    draft_index: int = 0
    metadata: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("essay id must be non-empty")
        if self.role not in ROLES:
            raise ValueError(f"essay {self.id!r}: role must be one of {ROLES}, got {self.role!r}")
        if not isinstance(self.draft_index, int) or self.draft_index < 0:
            raise ValueError(f"essay {self.id!r}: draft_index must be an integer >= 0")
        normalized = normalize_text(self.text)
        if not normalized:
            raise ValueError(f"essay {self.id!r}: text is empty")
        object.__setattr__(self, "text", normalized)


class Corpus:
    """Ordered, immutable collection of essays with unique ids."""

    def __init__(self, essays: Sequence[Essay]):
        by_id: dict[str, Essay] = {}
        for essay in essays:
            if essay.id in by_id:
                raise ValueError(f"duplicate essay id {essay.id!r}")
            by_id[essay.id] = essay
        self._essays = tuple(essays)
        self._by_id = by_id

    def __iter__(self) -> Iterator[Essay]:
        return iter(self._essays)

    def __len__(self) -> int:
        return len(self._essays)

    def __contains__(self, essay_id: str) -> bool:
        return essay_id in self._by_id

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Corpus) and self._essays == other._essays

    def __getitem__(self, essay_id: str) -> Essay:
        return self._by_id[essay_id]

    @property
    def essays(self) -> tuple[Essay, ...]:
        return self._essays

    def with_role(self, role: str) -> tuple[Essay, ...]:
        return tuple(e for e in self._essays if e.role == role)


@dataclass(frozen=True)
class MainIdea:
    id: int
    text: str
    confidence: float

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError(f"main idea {self.id}: text is empty")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"main idea {self.id}: confidence must be in [0, 1]")


@dataclass(frozen=True)
class Rubric:
    main_ideas: tuple[MainIdea, ...]

    def __post_init__(self) -> None:
        ids = [idea.id for idea in self.main_ideas]
        if ids != list(range(1, len(ids) + 1)):
            raise ValueError(f"main idea ids must be 1..N contiguous, got {ids}")
        texts = [idea.text for idea in self.main_ideas]
        if len(set(texts)) != len(texts):
            raise ValueError("main idea texts must be pairwise distinct")
        object.__setattr__(self, "main_ideas", tuple(self.main_ideas))

    def __len__(self) -> int:
        return len(self.main_ideas)


def rubric_hash(rubric: Rubric) -> str:
    """Content hash over idea ids and texts.

    Confidences are presentation metadata (historical accuracy) and may be
    updated without invalidating pyramids built against the rubric, so they
    stay out of the hash.
    """
    canonical = json.dumps([[idea.id, idea.text] for idea in rubric.main_ideas],
                           ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class GoldLabels:
    """Per-essay gold presence vectors, one boolean per rubric main idea."""

    def __init__(self, labels: Mapping[str, Sequence[bool]], n_ideas: int):
        self.n_ideas = n_ideas
        self._labels: dict[str, tuple[bool, ...]] = {}
        for essay_id, vector in labels.items():
            vec = tuple(bool(v) for v in vector)
            if len(vec) != n_ideas:
                raise ValueError(
                    f"gold labels for {essay_id!r}: expected {n_ideas} values, got {len(vec)}")
            self._labels[essay_id] = vec

    def __len__(self) -> int:
        return len(self._labels)

    def __contains__(self, essay_id: str) -> bool:
        return essay_id in self._labels

    def __getitem__(self, essay_id: str) -> tuple[bool, ...]:
        return self._labels[essay_id]

    def items(self) -> Iterator[tuple[str, tuple[bool, ...]]]:
        return iter(self._labels.items())

    @property
    def essay_ids(self) -> tuple[str, ...]:
        return tuple(self._labels)


def _essay_from_record(record: Mapping[str, object], where: str) -> Essay:
    missing = [c for c in ESSAY_COLUMNS if record.get(c) in (None, "")]
    if missing:
        raise ValueError(f"{where}: missing required field(s) {', '.join(missing)}")
    raw_index = record["draft_index"]
    try:
        draft_index = int(raw_index)  # type: ignore[arg-type]
    except (TypeError, ValueError):
        raise ValueError(f"{where}: draft_index {raw_index!r} is not an integer") from None
    metadata = record.get("metadata") or {}
    if not isinstance(metadata, Mapping):
        raise ValueError(f"{where}: metadata must be a mapping")
    return Essay(id=str(record["id"]), role=str(record["role"]),
                 draft_index=draft_index, text=str(record["text"]), metadata=dict(metadata))


def ingest_corpus(path: str | Path, format: str = "delimited-table") -> Corpus:
    """Load a corpus file, preserving record order.

    Args:
        path: corpus file location.
        format: "delimited-table" (CSV) or "structured-records" (JSON Lines).

    Raises:
        ValueError: on parse failures (with line/record number), duplicate ids,
            or invalid essay fields.
    """
    if format not in FORMATS:
        raise ValueError(f"unknown corpus format {format!r}; expected one of {FORMATS}")
    path = Path(path)
    essays: list[Essay] = []
    if format == "delimited-table":
        with path.open(newline="", encoding="utf-8") as handle:
            reader = csv.DictReader(handle)
            header = reader.fieldnames or []
            missing = [c for c in ESSAY_COLUMNS if c not in header]
            if missing:
                raise ValueError(
                    f"{path}: header is missing column(s) {', '.join(missing)}")
            for row in reader:
                where = f"{path}: line {reader.line_num}"
                try:
                    essays.append(_essay_from_record(row, where))
                except ValueError as exc:
                    raise ValueError(str(exc)) from None
    else:
        with path.open(encoding="utf-8") as handle:
            for number, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                where = f"{path}: record {number}"
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ValueError(f"{where}: invalid JSON ({exc.msg})") from None
                if not isinstance(record, Mapping):
                    raise ValueError(f"{where}: expected a JSON object")
                essays.append(_essay_from_record(record, where))
    return Corpus(essays)


def save_corpus(corpus: Corpus, path: str | Path, format: str = "delimited-table") -> None:
    """Write a corpus back out; inverse of ingest_corpus for both formats."""
    if format not in FORMATS:
        raise ValueError(f"unknown corpus format {format!r}; expected one of {FORMATS}")
    path = Path(path)
    if format == "delimited-table":
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, quoting=csv.QUOTE_ALL)
            writer.writerow(ESSAY_COLUMNS)
            for essay in corpus:
                writer.writerow([essay.id, essay.role, essay.draft_index, essay.text])
    else:
        with path.open("w", encoding="utf-8") as handle:
            for essay in corpus:
                record = {"id": essay.id, "role": essay.role,
                          "draft_index": essay.draft_index, "text": essay.text}
                if essay.metadata:
                    record["metadata"] = dict(essay.metadata)
                handle.write(json.dumps(record, ensure_ascii=False) + "\n")


def load_gold_labels(path: str | Path, rubric: Rubric,
                     corpus: Corpus | None = None) -> GoldLabels:
    """Load gold presence labels and validate them against the rubric.

    Args:
        path: CSV with header ``essay_id,mi1,...,miN`` and 0/1 cells.
        rubric: rubric the labels are scored against; fixes the arity N.
        corpus: when given, essay ids not present in it are reported.

    Raises:
        ValueError: wrong arity, non-boolean cell, or duplicate essay id.
    """
    n = len(rubric)
    expected_header = ["essay_id"] + [f"mi{i}" for i in range(1, n + 1)]
    labels: dict[str, tuple[bool, ...]] = {}
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty gold-label file")
        if [h.strip() for h in header] != expected_header:
            raise ValueError(
                f"{path}: expected header {','.join(expected_header)}, got {','.join(header)}")
        for row in reader:
            if not row:
                continue
            where = f"{path}: line {reader.line_num}"
            if len(row) != n + 1:
                raise ValueError(f"{where}: expected {n + 1} fields, got {len(row)}")
            essay_id = row[0].strip()
            if not essay_id:
                raise ValueError(f"{where}: empty essay_id")
            if essay_id in labels:
                raise ValueError(f"{where}: duplicate essay_id {essay_id!r}")
            vector = []
            for column, cell in zip(expected_header[1:], row[1:]):
                cell = cell.strip()
                if cell not in ("0", "1"):
                    raise ValueError(f"{where}: column {column} has non-boolean cell {cell!r}")
                vector.append(cell == "1")
            labels[essay_id] = tuple(vector)
    if corpus is not None:
        unknown = sorted(e for e in labels if e not in corpus)
        if unknown:
            _logger.warning("gold labels reference %d essay id(s) not in the corpus: %s",
                            len(unknown), ", ".join(unknown))
    return GoldLabels(labels, n)


def load_rubric(path: str | Path) -> Rubric:
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid rubric JSON ({exc.msg})") from None
    ideas = document.get("main_ideas") if isinstance(document, dict) else None
    if not isinstance(ideas, list) or not ideas:
        raise ValueError(f"{path}: rubric must contain a non-empty 'main_ideas' list")
    parsed = []
    for entry in ideas:
        try:
            parsed.append(MainIdea(id=int(entry["id"]), text=normalize_text(str(entry["text"])),
                                   confidence=float(entry["confidence"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"{path}: malformed main idea entry {entry!r}: {exc}") from None
    return Rubric(tuple(parsed))


def default_rubric() -> Rubric:
    """The shipped six-idea roller-coaster energy rubric."""
    source = resources.files("essaycheck.data").joinpath("roller_coaster_rubric.json")
    with resources.as_file(source) as path:
        return load_rubric(path)
