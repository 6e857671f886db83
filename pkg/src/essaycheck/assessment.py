"""Matching student clauses to pyramid content units.

The candidate-match hypergraph holds (content unit, clause) pairs whose mean
cosine to the CU's members clears a threshold, capped at topk per CU; a
greedy maximal-independent-set pass picks the final matches. A main idea is
present iff its weight-E CU got a match. Everything is deterministic and
pure, so assessments can run concurrently over shared pyramids and spaces.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .corpus import Essay, Rubric, rubric_hash
from .embedding import ClauseVector, EmbeddingSpace, cosine_between, fold_in_clause
from .pyramid import Pyramid
from .segmenter import ClauseSegmenter, segment_essay


@dataclass(frozen=True)
class AssessmentConfig:
    """Matching hyperparameters: candidates kept per CU and the cosine floor."""

    topk: int = 3
    t: float = 0.55

    def __post_init__(self) -> None:
        if self.topk < 1:
            raise ValueError(f"topk must be >= 1, got {self.topk}")
        if not 0.0 <= self.t <= 1.0:
            raise ValueError(f"t must be in [0, 1], got {self.t}")


@dataclass(frozen=True)
class CandidateMatch:
    cu_id: int
    cu_weight: int
    main_idea_id: int | None
    clause_key: tuple[str, int, int]
    clause_text: str
    sim: float


class AssessmentHypergraph:
    """Candidate matches plus the conflict pairs (same clause or same CU)."""

    def __init__(self, nodes: Sequence[CandidateMatch], conflicts: Sequence[tuple[int, int]],
                 config: AssessmentConfig):
        self.nodes = tuple(nodes)
        self.conflicts = frozenset(conflicts)
        self.config = config
        per_cu: dict[int, int] = {}
        for node in self.nodes:
            if node.sim < config.t:
                raise ValueError(f"node for CU {node.cu_id} has sim {node.sim} below t")
            per_cu[node.cu_id] = per_cu.get(node.cu_id, 0) + 1
        if any(count > config.topk for count in per_cu.values()):
            raise ValueError("a content unit exceeds topk candidate matches")
        n = len(self.nodes)
        for i, j in self.conflicts:
            if not (0 <= i < j < n):
                raise ValueError(f"conflict pair ({i}, {j}) is not canonical")
        self._neighbors: dict[int, set[int]] = {i: set() for i in range(n)}
        for i, j in self.conflicts:
            self._neighbors[i].add(j)
            self._neighbors[j].add(i)

    def __len__(self) -> int:
        return len(self.nodes)

    def neighbors(self, index: int) -> frozenset[int]:
        return frozenset(self._neighbors[index])

    def in_conflict(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self.conflicts


@dataclass(frozen=True)
class MatchSet:
    selected: tuple[CandidateMatch, ...]
    selected_indices: tuple[int, ...]

    def detected_ideas(self) -> frozenset[int]:
        return frozenset(m.main_idea_id for m in self.selected if m.main_idea_id is not None)


def _mean_cu_sims(clause_vectors: Sequence[ClauseVector],
                  pyramid: Pyramid) -> dict[tuple[tuple[str, int, int], int], float]:
    """Mean cosine of every non-flagged clause to every CU's members."""
    sims: dict[tuple[tuple[str, int, int], int], float] = {}
    for cv in clause_vectors:
        if cv.flagged:
            continue
        for cu in pyramid.content_units:
            total = sum(cosine_between(cv, member) for member in cu.members)
            sims[(cv.clause_key, cu.id)] = total / len(cu.members)
    return sims


def build_hypergraph(clause_vectors: Sequence[ClauseVector], pyramid: Pyramid,
                     config: AssessmentConfig,
                     _sims: Mapping[tuple[tuple[str, int, int], int], float] | None = None,
                     ) -> AssessmentHypergraph:
    """Top-k clauses above threshold per CU, with shared-clause/CU conflicts.

    Raises:
        ValueError: clause vector dimension differs from the pyramid's.
    """
    usable = [cv for cv in clause_vectors if not cv.flagged]
    if pyramid.content_units:
        expected = len(pyramid.content_units[0].members[0].vector)
        for cv in usable:
            if len(cv.vector) != expected:
                raise ValueError(f"clause {cv.clause_key} has dimension {len(cv.vector)}, "
                                 f"pyramid expects {expected}")
    sims = _mean_cu_sims(usable, pyramid) if _sims is None else _sims
    by_key = {cv.clause_key: cv for cv in usable}

    nodes: list[CandidateMatch] = []
    for cu in pyramid.content_units:
        reaching = [(sims[(key, cu.id)], key) for key in sorted(by_key)
                    if sims[(key, cu.id)] >= config.t]
        reaching.sort(key=lambda pair: (-pair[0], pair[1]))
        for sim, key in reaching[:config.topk]:
            nodes.append(CandidateMatch(cu_id=cu.id, cu_weight=cu.weight,
                                        main_idea_id=cu.main_idea_id, clause_key=key,
                                        clause_text=by_key[key].text, sim=sim))

    conflicts = [(i, j) for i in range(len(nodes)) for j in range(i + 1, len(nodes))
                 if nodes[i].clause_key == nodes[j].clause_key or nodes[i].cu_id == nodes[j].cu_id]
    return AssessmentHypergraph(nodes, conflicts, config)


def select_matches(graph: AssessmentHypergraph) -> MatchSet:
    """Greedy maximal independent set over the hypergraph.

    Visit order: descending sim, then descending CU weight, then lower cu_id,
    then lower clause key. Accepting a node blocks its conflict neighborhood.
    """
    order = sorted(range(len(graph)),
                   key=lambda i: (-graph.nodes[i].sim, -graph.nodes[i].cu_weight,
                                  graph.nodes[i].cu_id, graph.nodes[i].clause_key))
    blocked: set[int] = set()
    picked: list[int] = []
    for i in order:
        if i not in blocked:
            picked.append(i)
            blocked.add(i)
            blocked.update(graph.neighbors(i))
    if __debug__:
        for a in range(len(picked)):
            for b in range(a + 1, len(picked)):
                assert not graph.in_conflict(picked[a], picked[b]), "selection not independent"
        assert blocked == set(range(len(graph))), "selection not maximal"
    return MatchSet(selected=tuple(graph.nodes[i] for i in picked),
                    selected_indices=tuple(picked))


@dataclass(eq=False)
class Assessment:
    """Presence verdicts for one essay, with evidence and the full match trace."""

    essay_id: str
    draft_index: int
    present: dict[int, bool]
    evidence: dict[int, tuple[str, float]]
    config: AssessmentConfig
    pyramid_id: str
    rubric_hash: str
    space_id: str
    trace: dict = field(repr=False)

    def detected_ideas(self) -> frozenset[int]:
        return frozenset(i for i, flag in self.present.items() if flag)


def assess_essay(essay: Essay, pyramid: Pyramid, space: EmbeddingSpace,
                 config: AssessmentConfig | None = None,
                 segmenter: ClauseSegmenter | None = None) -> Assessment:
    """Segment, fold in, match, and report main-idea presence for one essay.

    The trace records every clause's mean cosine to every labeled CU
    (unfiltered), the hypergraph nodes and conflicts, the greedy visit
    order, and the accepted node indices.

    Raises:
        ValueError: pyramid unlabeled or built over a different space; essay
            empty after segmentation.
    """
    if config is None:
        config = AssessmentConfig()
    weight_e = pyramid.weight_e_units()
    if pyramid.rubric_hash is None or not pyramid.is_rubric_ready(len(weight_e)):
        raise ValueError("pyramid is not rubric-ready: label it with a rubric first")
    if pyramid.embedding_space_id != space.id:
        raise ValueError("pyramid was built over a different embedding space")

    clauses = segment_essay(essay.id, essay.text, segmenter)
    if not clauses:
        raise ValueError(f"essay {essay.id!r} is empty after segmentation")
    vectors = [fold_in_clause(clause, space) for clause in clauses]
    usable = [cv for cv in vectors if not cv.flagged]
    sims = _mean_cu_sims(usable, pyramid)

    graph = build_hypergraph(usable, pyramid, config, _sims=sims)
    matches = select_matches(graph)

    present: dict[int, bool] = {}
    evidence: dict[int, tuple[str, float]] = {}
    for cu in sorted(weight_e, key=lambda cu: cu.main_idea_id or 0):
        assert cu.main_idea_id is not None
        present[cu.main_idea_id] = False
    for match in matches.selected:
        if match.main_idea_id is not None:
            present[match.main_idea_id] = True
            evidence[match.main_idea_id] = (match.clause_text, match.sim)

    idea_by_cu = {cu.id: cu.main_idea_id for cu in weight_e}
    trace = {
        "clauses": [{
            "clause_key": cv.clause_key,
            "text": cv.text,
            "flagged": cv.flagged,
            "main_idea_sims": {idea_by_cu[cu.id]: sims[(cv.clause_key, cu.id)]
                               for cu in weight_e} if not cv.flagged else {},
        } for cv in vectors],
        "nodes": [{
            "cu_id": n.cu_id, "cu_weight": n.cu_weight, "main_idea_id": n.main_idea_id,
            "clause_key": n.clause_key, "clause_text": n.clause_text, "sim": n.sim,
        } for n in graph.nodes],
        "conflicts": sorted(graph.conflicts),
        "visit_order": sorted(range(len(graph)),
                              key=lambda i: (-graph.nodes[i].sim, -graph.nodes[i].cu_weight,
                                             graph.nodes[i].cu_id, graph.nodes[i].clause_key)),
        "selected": list(matches.selected_indices),
    }
    return Assessment(essay_id=essay.id, draft_index=essay.draft_index, present=present,
                      evidence=evidence, config=config, pyramid_id=pyramid.id,
                      rubric_hash=pyramid.rubric_hash, space_id=space.id, trace=trace)


@dataclass(frozen=True)
class ChecklistRow:
    idea_id: int
    idea_text: str
    detected: bool
    confidence: float


@dataclass(frozen=True)
class EvidenceItem:
    idea_id: int
    clause: str
    sim: float


@dataclass(frozen=True)
class FeedbackChecklist:
    essay_id: str
    rows: tuple[ChecklistRow, ...]
    evidence: tuple[EvidenceItem, ...]


def make_checklist(assessment: Assessment, rubric: Rubric) -> FeedbackChecklist:
    """One row per rubric idea, in rubric order, with the rubric's confidence.

    Raises:
        ValueError: assessment was produced under a different rubric.
    """
    if assessment.rubric_hash != rubric_hash(rubric):
        raise ValueError("assessment rubric hash does not match the given rubric")
    rows = tuple(ChecklistRow(idea_id=idea.id, idea_text=idea.text,
                              detected=assessment.present[idea.id],
                              confidence=idea.confidence)
                 for idea in rubric.main_ideas)
    evidence = tuple(EvidenceItem(idea_id=idea.id,
                                  clause=assessment.evidence[idea.id][0],
                                  sim=assessment.evidence[idea.id][1])
                     for idea in rubric.main_ideas if assessment.present[idea.id])
    return FeedbackChecklist(essay_id=assessment.essay_id, rows=rows, evidence=evidence)


def checklist_to_document(checklist: FeedbackChecklist) -> dict:
    return {
        "essay_id": checklist.essay_id,
        "rows": [{"idea_id": r.idea_id, "idea_text": r.idea_text,
                  "detected": r.detected, "confidence": r.confidence}
                 for r in checklist.rows],
        "evidence": [{"idea_id": e.idea_id, "clause": e.clause, "sim": e.sim}
                     for e in checklist.evidence],
    }


def checklist_from_document(document: Mapping) -> FeedbackChecklist:
    try:
        rows = tuple(ChecklistRow(idea_id=int(r["idea_id"]), idea_text=str(r["idea_text"]),
                                  detected=bool(r["detected"]),
                                  confidence=float(r["confidence"]))
                     for r in document["rows"])
        evidence = tuple(EvidenceItem(idea_id=int(e["idea_id"]), clause=str(e["clause"]),
                                      sim=float(e["sim"]))
                         for e in document.get("evidence", []))
        return FeedbackChecklist(essay_id=str(document["essay_id"]), rows=rows,
                                 evidence=evidence)
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed checklist document: {exc}") from None


def assessment_trace_document(assessment: Assessment) -> dict:
    """JSON-ready trace dump (clause keys become lists, idea keys strings)."""
    trace = assessment.trace
    return {
        "essay_id": assessment.essay_id,
        "draft_index": assessment.draft_index,
        "pyramid_id": assessment.pyramid_id,
        "space_id": assessment.space_id,
        "config": {"topk": assessment.config.topk, "t": assessment.config.t},
        "present": {str(i): flag for i, flag in sorted(assessment.present.items())},
        "clauses": [{**c, "clause_key": list(c["clause_key"]),
                     "main_idea_sims": {str(i): s for i, s in c["main_idea_sims"].items()}}
                    for c in trace["clauses"]],
        "nodes": [{**n, "clause_key": list(n["clause_key"])} for n in trace["nodes"]],
        "conflicts": [list(pair) for pair in trace["conflicts"]],
        "visit_order": list(trace["visit_order"]),
        "selected": list(trace["selected"]),
    }
