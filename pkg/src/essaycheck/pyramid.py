"""Content models built from exemplar essays.

A pyramid groups exemplar clause vectors into content units (CUs), at most
one clause per exemplar per CU, greedily maximizing within-CU average
pairwise cosine similarity. Weight-E CUs (one member from every exemplar)
are labeled with rubric main ideas and drive presence verdicts downstream.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .corpus import Corpus, GoldLabels, Rubric, rubric_hash
from .embedding import ClauseVector, EmbeddingSpace, cosine_between, embed_text

_logger = logging.getLogger(__name__)

PYRAMID_FORMAT_VERSION = 1
DEFAULT_MIN_PAIR_SIM = 0.40


def mean_pairwise_cosine(members: Sequence[ClauseVector]) -> float:
    """Mean cosine over all member pairs; defined as 1.0 for singletons."""
    if len(members) < 2:
        return 1.0
    total = 0.0
    count = 0
    for i in range(len(members)):
        for j in range(i + 1, len(members)):
            total += cosine_between(members[i], members[j])
            count += 1
    return total / count


@dataclass(eq=False, frozen=True)
class ContentUnit:
    id: int
    weight: int
    members: tuple[ClauseVector, ...]
    intra_sim: float
    main_idea_id: int | None = None

    def __post_init__(self) -> None:
        if self.weight != len(self.members):
            raise ValueError(f"CU {self.id}: weight {self.weight} != member count")
        exemplars = [m.essay_id for m in self.members]
        if len(set(exemplars)) != len(exemplars):
            raise ValueError(f"CU {self.id}: two members share an exemplar")

    def centroid(self) -> np.ndarray:
        return np.mean([m.vector for m in self.members], axis=0)

    def member_keys(self) -> tuple[tuple[str, int, int], ...]:
        return tuple(m.clause_key for m in self.members)


class Pyramid:
    """Content units sorted by descending weight, plus provenance."""

    def __init__(self, content_units: Sequence[ContentUnit], exemplar_ids: Sequence[str],
                 embedding_space_id: str, rubric_hash: str | None = None):
        self.content_units = tuple(content_units)
        self.exemplar_ids = tuple(exemplar_ids)
        self.embedding_space_id = embedding_space_id
        self.rubric_hash = rubric_hash
        self._id: str | None = None
        self._validate()

    def _validate(self) -> None:
        e = len(self.exemplar_ids)
        weights = [cu.weight for cu in self.content_units]
        if weights != sorted(weights, reverse=True):
            raise ValueError("content units must be sorted by descending weight")
        seen: set[tuple[str, int, int]] = set()
        for cu in self.content_units:
            if not 1 <= cu.weight <= e:
                raise ValueError(f"CU {cu.id}: weight {cu.weight} outside 1..{e}")
            if cu.main_idea_id is not None and cu.weight != e:
                raise ValueError(f"CU {cu.id}: main_idea_id set on weight {cu.weight} < {e}")
            recomputed = mean_pairwise_cosine(cu.members)
            if abs(recomputed - cu.intra_sim) > 1e-9:
                raise ValueError(f"CU {cu.id}: intra_sim {cu.intra_sim} != recomputed {recomputed}")
            for key in cu.member_keys():
                if key in seen:
                    raise ValueError(f"clause {key} appears in more than one CU")
                seen.add(key)
        counts: dict[int, int] = {}
        for w in weights:
            counts[w] = counts.get(w, 0) + 1
        tail = [counts.get(w, 0) for w in range(e, 0, -1)]
        if any(tail[i] > tail[i + 1] for i in range(len(tail) - 1)):
            _logger.warning("pyramid long-tail shape violated: CU counts by weight "
                            "%s..1 are %s", e, tail)

    @property
    def n_exemplars(self) -> int:
        return len(self.exemplar_ids)

    def weight_e_units(self) -> tuple[ContentUnit, ...]:
        e = self.n_exemplars
        return tuple(cu for cu in self.content_units if cu.weight == e)

    def unit_for_idea(self, idea_id: int) -> ContentUnit | None:
        for cu in self.weight_e_units():
            if cu.main_idea_id == idea_id:
                return cu
        return None

    def is_rubric_ready(self, n_ideas: int) -> bool:
        labeled = [cu.main_idea_id for cu in self.weight_e_units()]
        return (len(labeled) == n_ideas and None not in labeled
                and sorted(labeled) == list(range(1, n_ideas + 1)))

    def to_document(self) -> dict:
        return {
            "version": PYRAMID_FORMAT_VERSION,
            "embedding_space_id": self.embedding_space_id,
            "rubric_hash": self.rubric_hash,
            "exemplar_ids": list(self.exemplar_ids),
            "content_units": [{
                "id": cu.id,
                "weight": cu.weight,
                "main_idea_id": cu.main_idea_id,
                "intra_sim": cu.intra_sim,
                "members": [{
                    "exemplar_id": m.clause_key[0],
                    "sentence_index": m.clause_key[1],
                    "clause_index": m.clause_key[2],
                    "clause_text": m.text,
                    "vector": [float(c) for c in m.vector],
                } for m in cu.members],
            } for cu in self.content_units],
        }

    @property
    def id(self) -> str:
        if self._id is None:
            canonical = json.dumps(self.to_document(), sort_keys=True, separators=(",", ":"))
            self._id = hashlib.sha256(canonical.encode("utf-8")).hexdigest()
        return self._id


def build_pyramid(exemplar_vectors: Mapping[str, Sequence[ClauseVector]],
                  min_pair_sim: float = DEFAULT_MIN_PAIR_SIM) -> Pyramid:
    """Group exemplar clause vectors into content units.

    Greedy agglomeration: all cross-exemplar clause pairs with cosine >=
    min_pair_sim are visited in descending similarity order (ties by clause
    key); a pair of unassigned clauses opens a new CU, and an unassigned
    clause joins an existing CU only if the CU lacks a member from its
    exemplar and the post-merge average pairwise cosine stays >= min_pair_sim.
    Unassigned clauses end as weight-1 CUs. Flagged vectors are dropped.

    Raises:
        ValueError: all vectors flagged, or fewer than 2 exemplars with a
            usable clause vector.
    """
    usable: dict[str, list[ClauseVector]] = {}
    total = 0
    for essay_id, vectors in exemplar_vectors.items():
        total += len(vectors)
        kept = [cv for cv in vectors if not cv.flagged]
        if kept:
            usable[essay_id] = kept
    if total and not usable:
        raise ValueError("all exemplar clause vectors are flagged (no in-vocabulary words)")
    if len(usable) < 2:
        raise ValueError("need at least 2 exemplar essays with usable clause vectors")
    space_ids = {cv.space_id for vectors in usable.values() for cv in vectors}
    if len(space_ids) != 1:
        raise ValueError(f"exemplar vectors come from {len(space_ids)} different spaces")
    dims = {len(cv.vector) for vectors in usable.values() for cv in vectors}
    if len(dims) != 1:
        raise ValueError("exemplar vectors have mixed dimensions")

    by_key = {cv.clause_key: cv for vectors in usable.values() for cv in vectors}
    essay_ids = sorted(usable)
    pairs: list[tuple[float, tuple[str, int, int], tuple[str, int, int]]] = []
    for a, b in itertools.combinations(essay_ids, 2):
        for u in usable[a]:
            for v in usable[b]:
                sim = cosine_between(u, v)
                if sim >= min_pair_sim:
                    ku, kv = sorted((u.clause_key, v.clause_key))
                    pairs.append((sim, ku, kv))
    pairs.sort(key=lambda p: (-p[0], p[1], p[2]))

    assignment: dict[tuple[str, int, int], int] = {}
    groups: list[list[ClauseVector]] = []

    def try_merge(group_index: int, incoming: ClauseVector) -> None:
        group = groups[group_index]
        if any(m.essay_id == incoming.essay_id for m in group):
            return
        merged = group + [incoming]
        if mean_pairwise_cosine(merged) >= min_pair_sim:
            groups[group_index] = merged
            assignment[incoming.clause_key] = group_index

    for sim, ku, kv in pairs:
        au, av = assignment.get(ku), assignment.get(kv)
        if au is None and av is None:
            assignment[ku] = assignment[kv] = len(groups)
            groups.append([by_key[ku], by_key[kv]])
        elif au is not None and av is None:
            try_merge(au, by_key[kv])
        elif av is not None and au is None:
            try_merge(av, by_key[ku])

    for key in sorted(by_key):
        if key not in assignment:
            assignment[key] = len(groups)
            groups.append([by_key[key]])

    prepared = []
    for group in groups:
        members = tuple(sorted(group, key=lambda m: m.clause_key))
        prepared.append((members, mean_pairwise_cosine(members)))
    prepared.sort(key=lambda g: (-len(g[0]), -g[1], g[0][0].clause_key))
    units = [ContentUnit(id=i + 1, weight=len(members), members=members, intra_sim=intra)
             for i, (members, intra) in enumerate(prepared)]
    return Pyramid(units, exemplar_ids=essay_ids,
                   embedding_space_id=next(iter(space_ids)))


def enumerate_candidate_pyramids(exemplars: Sequence[str], subset_size: int,
                                 vectors: Mapping[str, Sequence[ClauseVector]],
                                 min_pair_sim: float = DEFAULT_MIN_PAIR_SIM) -> list[Pyramid]:
    """One pyramid per exemplar subset of the given size, in lexicographic
    subset order.

    Raises:
        ValueError: subset_size < 2 or larger than the exemplar count.
    """
    if subset_size < 2:
        raise ValueError("subset_size must be >= 2")
    ids = sorted(set(exemplars))
    if subset_size > len(ids):
        raise ValueError(f"subset_size {subset_size} exceeds {len(ids)} exemplars")
    return [build_pyramid({e: vectors[e] for e in combo}, min_pair_sim)
            for combo in itertools.combinations(ids, subset_size)]


def label_main_ideas(pyramid: Pyramid, rubric: Rubric, space: EmbeddingSpace) -> Pyramid:
    """Assign rubric main ideas to the weight-E content units.

    Rubric statements are folded into the space; the bijection maximizing the
    total cosine between CU centroids and rubric vectors is found by
    exhaustive search over the free assignments (N! for N <= 8 is trivial).
    CUs already carrying a main_idea_id (manual overrides from a pyramid
    file) keep it.

    Raises:
        ValueError: weight-E CU count != rubric size (not rubric-ready), a
            space mismatch, or inconsistent overrides.
    """
    e = pyramid.n_exemplars
    weight_e = pyramid.weight_e_units()
    if len(weight_e) != len(rubric):
        raise ValueError(f"pyramid is not rubric-ready: {len(weight_e)} weight-{e} "
                         f"content units for {len(rubric)} main ideas")
    if pyramid.embedding_space_id != space.id:
        raise ValueError("pyramid was built over a different embedding space")

    idea_vectors: dict[int, np.ndarray | None] = {}
    for idea in rubric.main_ideas:
        vec = embed_text(space, idea.text)
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            _logger.warning("rubric idea %d has no in-vocabulary words", idea.id)
            idea_vectors[idea.id] = None
        else:
            idea_vectors[idea.id] = vec / norm

    def sim(cu: ContentUnit, idea_id: int) -> float:
        ivec = idea_vectors[idea_id]
        if ivec is None:
            return -1.0
        centroid = cu.centroid()
        norm = float(np.linalg.norm(centroid))
        if norm == 0.0:
            return -1.0
        return float(centroid @ ivec / norm)

    fixed: dict[int, int] = {}
    for cu in weight_e:
        if cu.main_idea_id is not None:
            if cu.main_idea_id in fixed.values():
                raise ValueError(f"two CUs carry main idea override {cu.main_idea_id}")
            if not 1 <= cu.main_idea_id <= len(rubric):
                raise ValueError(f"CU {cu.id}: override idea {cu.main_idea_id} not in rubric")
            fixed[cu.id] = cu.main_idea_id

    free_cus = [cu for cu in weight_e if cu.id not in fixed]
    free_ideas = sorted(set(range(1, len(rubric) + 1)) - set(fixed.values()))
    if len(free_ideas) != len(free_cus):
        raise ValueError("overrides leave an unassignable remainder")

    best: tuple[float, tuple[int, ...]] | None = None
    for perm in itertools.permutations(free_ideas):
        total = sum(sim(cu, idea_id) for cu, idea_id in zip(free_cus, perm))
        if best is None or total > best[0] + 1e-12:
            best = (total, perm)
    chosen = dict(fixed)
    if free_cus:
        assert best is not None
        chosen.update({cu.id: idea_id for cu, idea_id in zip(free_cus, best[1])})

    relabeled = [replace(cu, main_idea_id=chosen[cu.id]) if cu.weight == e else cu
                 for cu in pyramid.content_units]
    return Pyramid(relabeled, exemplar_ids=pyramid.exemplar_ids,
                   embedding_space_id=pyramid.embedding_space_id,
                   rubric_hash=rubric_hash(rubric))


def select_best_pyramid(candidates: Sequence[Pyramid], corpus: Corpus, gold: GoldLabels,
                        space: EmbeddingSpace, config=None) -> tuple[Pyramid, list[float]]:
    """Pick the candidate with the highest total accuracy on the gold labels.

    Ties go to the higher mean intra_sim over weight-E CUs, then to the
    lexicographically lower exemplar subset.

    Raises:
        ValueError: empty candidate list or a candidate that is not
            rubric-ready.
    """
    from .assessment import AssessmentConfig, assess_essay
    from .analytics import score_accuracy

    if not candidates:
        raise ValueError("no candidate pyramids to select from")
    if config is None:
        config = AssessmentConfig()
    essays = [corpus[essay_id] for essay_id in gold.essay_ids if essay_id in corpus]
    if not essays:
        raise ValueError("no corpus essay has a gold record")
    accuracies: list[float] = []
    for candidate in candidates:
        if not candidate.is_rubric_ready(gold.n_ideas):
            raise ValueError("candidate pyramid is not rubric-ready")
        assessments = [assess_essay(essay, candidate, space, config) for essay in essays]
        report = score_accuracy(assessments, gold)
        accuracies.append(report.total_acc)

    def sort_key(index: int):
        candidate = candidates[index]
        weight_e = candidate.weight_e_units()
        mean_intra = sum(cu.intra_sim for cu in weight_e) / len(weight_e)
        return (-accuracies[index], -mean_intra, tuple(sorted(candidate.exemplar_ids)))

    best = min(range(len(candidates)), key=sort_key)
    return candidates[best], accuracies


def save_pyramid(pyramid: Pyramid, path: str | Path) -> None:
    """Write the versioned pyramid document; floats survive bit-exactly."""
    Path(path).write_text(json.dumps(pyramid.to_document(), ensure_ascii=False, indent=1),
                          encoding="utf-8")


def load_pyramid(path: str | Path) -> Pyramid:
    """Read a pyramid document written by save_pyramid.

    Raises:
        ValueError: version mismatch (naming expected and found), corrupted
            document, or corrupted vector block.
    """
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: corrupted pyramid file ({exc.msg} at line {exc.lineno})") from None
    if not isinstance(document, dict):
        raise ValueError(f"{path}: corrupted pyramid file (not a document)")
    version = document.get("version")
    if version != PYRAMID_FORMAT_VERSION:
        raise ValueError(f"{path}: pyramid file version {version!r} unsupported; "
                         f"expected {PYRAMID_FORMAT_VERSION}")
    try:
        space_id = document["embedding_space_id"]
        units = []
        dimension: int | None = None
        for cu_doc in document["content_units"]:
            members = []
            for m in cu_doc["members"]:
                vector = np.asarray(m["vector"], dtype=np.float64)
                if vector.ndim != 1 or not np.all(np.isfinite(vector)):
                    raise ValueError("corrupted vector block")
                if dimension is None:
                    dimension = len(vector)
                elif len(vector) != dimension:
                    raise ValueError("corrupted vector block (ragged dimensions)")
                key = (str(m["exemplar_id"]), int(m["sentence_index"]), int(m["clause_index"]))
                members.append(ClauseVector(clause_key=key, text=str(m["clause_text"]),
                                            vector=vector, norm=float(np.linalg.norm(vector)),
                                            space_id=space_id, provenance="loaded"))
            units.append(ContentUnit(id=int(cu_doc["id"]), weight=int(cu_doc["weight"]),
                                     members=tuple(members),
                                     intra_sim=float(cu_doc["intra_sim"]),
                                     main_idea_id=(None if cu_doc.get("main_idea_id") is None
                                                   else int(cu_doc["main_idea_id"]))))
        return Pyramid(units, exemplar_ids=[str(e) for e in document["exemplar_ids"]],
                       embedding_space_id=str(space_id),
                       rubric_hash=document.get("rubric_hash"))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"{path}: corrupted pyramid file (missing or malformed field: {exc})") from None


def pyramid_report(pyramid: Pyramid, rubric: Rubric | None = None) -> str:
    """Plain-text report: per CU, weight, main idea, intra_sim, member texts."""
    idea_texts = {i.id: i.text for i in rubric.main_ideas} if rubric else {}
    lines = [f"pyramid over exemplars {', '.join(pyramid.exemplar_ids)} "
             f"({len(pyramid.content_units)} content units)"]
    for cu in pyramid.content_units:
        idea = "unlabeled"
        if cu.main_idea_id is not None:
            idea = f"main idea {cu.main_idea_id}"
            if cu.main_idea_id in idea_texts:
                idea += f" ({idea_texts[cu.main_idea_id]})"
        lines.append(f"CU {cu.id}: weight {cu.weight}, {idea}, sim {cu.intra_sim:.2f}")
        for m in cu.members:
            lines.append(f"  [{m.clause_key[0]}] {m.text}")
    return "\n".join(lines) + "\n"
