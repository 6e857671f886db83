from __future__ import annotations

import json
import math

import numpy as np
import pytest

from essaycheck.assessment import (Assessment, AssessmentConfig, AssessmentHypergraph,
                                   CandidateMatch, FeedbackChecklist, MatchSet, assess_essay,
                                   assessment_trace_document, build_hypergraph,
                                   checklist_from_document, checklist_to_document,
                                   make_checklist, select_matches)
from essaycheck.corpus import Essay, MainIdea, Rubric, rubric_hash
from essaycheck.embedding import ClauseVector, cosine
from essaycheck.pyramid import ContentUnit, Pyramid, build_pyramid, mean_pairwise_cosine
from oracles import verify_match_set_exhaustively
from synthetic import (idea_clause, labeled_orthogonal_pyramid, orthogonal_rubric,
                       orthogonal_space, vague_clause)


def unit_cv(essay_id, sentence, clause, vector, space_id="s"):
    v = np.asarray(vector, dtype=np.float64)
    return ClauseVector(clause_key=(essay_id, sentence, clause), text=f"{essay_id} clause",
                        vector=v, norm=float(np.linalg.norm(v)), space_id=space_id,
                        provenance="loaded")


def at_angle(radians):
    return [math.cos(radians), math.sin(radians)]


def test_config_defaults_and_validation():
    config = AssessmentConfig()
    assert config.topk == 3
    assert config.t == 0.55
    with pytest.raises(ValueError):
        AssessmentConfig(topk=0)
    with pytest.raises(ValueError):
        AssessmentConfig(t=-0.1)
    with pytest.raises(ValueError):
        AssessmentConfig(t=1.5)


def angled_fixture():
    # One clause at cosine 0.9 to CU 1 and 0.6 to CU 2.
    a1 = math.acos(0.9)
    a2 = a1 + math.acos(0.6)
    units = [ContentUnit(id=1, weight=1, members=(unit_cv("p1", 0, 0, at_angle(0.0)),),
                         intra_sim=1.0),
             ContentUnit(id=2, weight=1, members=(unit_cv("p2", 0, 0, at_angle(a2)),),
                         intra_sim=1.0)]
    pyramid = Pyramid(units, exemplar_ids=("p1", "p2"), embedding_space_id="s")
    clause = unit_cv("student", 0, 0, at_angle(a1))
    return pyramid, clause


def test_build_hypergraph_two_nodes_one_conflict():
    pyramid, clause = angled_fixture()
    graph = build_hypergraph([clause], pyramid, AssessmentConfig())
    assert len(graph) == 2
    sims = {n.cu_id: n.sim for n in graph.nodes}
    assert sims[1] == pytest.approx(0.9)
    assert sims[2] == pytest.approx(0.6)
    assert graph.in_conflict(0, 1)
    assert graph.neighbors(0) == {1}


def test_build_hypergraph_below_threshold_is_empty():
    pyramid, clause = angled_fixture()
    graph = build_hypergraph([clause], pyramid, AssessmentConfig(t=0.95))
    assert len(graph) == 0
    assert select_matches(graph).selected == ()


def test_build_hypergraph_dimension_mismatch():
    pyramid, _ = angled_fixture()
    wrong = unit_cv("student", 0, 0, [1.0, 0.0, 0.0])
    with pytest.raises(ValueError, match="dimension"):
        build_hypergraph([wrong], pyramid, AssessmentConfig())


def test_build_hypergraph_skips_flagged():
    pyramid, clause = angled_fixture()
    flagged = ClauseVector(clause_key=("student", 0, 1), text="oov", vector=np.zeros(2),
                           norm=0.0, space_id="s", provenance="loaded")
    graph = build_hypergraph([clause, flagged], pyramid, AssessmentConfig())
    assert {n.clause_key for n in graph.nodes} == {clause.clause_key}


def random_match_instance(seed, n_cus=6, n_clauses=5, dim=4):
    rng = np.random.default_rng(seed)
    units = []
    for i in range(n_cus):
        direction = rng.standard_normal(dim)
        members = tuple(
            unit_cv(f"x{k}", 0, i, direction + 0.3 * rng.standard_normal(dim))
            for k in (1, 2))
        units.append(ContentUnit(id=i + 1, weight=2, members=members,
                                 intra_sim=mean_pairwise_cosine(members)))
    pyramid = Pyramid(units, exemplar_ids=("x1", "x2"), embedding_space_id="s")
    clauses = [unit_cv("student", 0, c, rng.standard_normal(dim))
               for c in range(n_clauses)]
    return pyramid, clauses


def test_build_hypergraph_matches_exhaustive_oracle():
    config = AssessmentConfig(topk=2, t=0.3)
    for seed in range(6):
        pyramid, clauses = random_match_instance(seed)
        graph = build_hypergraph(clauses, pyramid, config)

        expected = set()
        for cu in pyramid.content_units:
            sims = []
            for cv in clauses:
                mean = np.mean([cosine(cv.vector, m.vector) for m in cu.members])
                if mean >= config.t:
                    sims.append((-mean, cv.clause_key))
            for negative, key in sorted(sims)[:config.topk]:
                expected.add((cu.id, key, round(-negative, 12)))
        got = {(n.cu_id, n.clause_key, round(n.sim, 12)) for n in graph.nodes}
        assert got == expected

        conflict_oracle = {(i, j)
                           for i in range(len(graph.nodes))
                           for j in range(i + 1, len(graph.nodes))
                           if graph.nodes[i].clause_key == graph.nodes[j].clause_key
                           or graph.nodes[i].cu_id == graph.nodes[j].cu_id}
        assert set(graph.conflicts) == conflict_oracle


def test_raising_t_weakly_shrinks_the_graph():
    pyramid, clauses = random_match_instance(11)
    counts = [len(build_hypergraph(clauses, pyramid, AssessmentConfig(topk=3, t=t)))
              for t in (0.0, 0.2, 0.4, 0.6, 0.8)]
    assert counts == sorted(counts, reverse=True)


def test_hypergraph_constructor_validation():
    config = AssessmentConfig(topk=1, t=0.55)
    node = CandidateMatch(cu_id=1, cu_weight=2, main_idea_id=1,
                          clause_key=("e", 0, 0), clause_text="x", sim=0.9)
    low = CandidateMatch(cu_id=1, cu_weight=2, main_idea_id=1,
                         clause_key=("e", 0, 1), clause_text="x", sim=0.4)
    with pytest.raises(ValueError, match="below t"):
        AssessmentHypergraph([low], [], config)
    second = CandidateMatch(cu_id=1, cu_weight=2, main_idea_id=1,
                            clause_key=("e", 0, 1), clause_text="x", sim=0.8)
    with pytest.raises(ValueError, match="topk"):
        AssessmentHypergraph([node, second], [(0, 1)], config)
    with pytest.raises(ValueError, match="canonical"):
        AssessmentHypergraph([node], [(0, 0)], config)


def test_select_on_empty_graph():
    graph = AssessmentHypergraph([], [], AssessmentConfig())
    match_set = select_matches(graph)
    assert match_set.selected == ()
    assert match_set.detected_ideas() == frozenset()


def test_select_prefers_higher_sim_on_shared_clause():
    pyramid, clause = angled_fixture()
    graph = build_hypergraph([clause], pyramid, AssessmentConfig())
    match_set = select_matches(graph)
    assert len(match_set.selected) == 1
    assert match_set.selected[0].cu_id == 1
    assert match_set.selected[0].sim == pytest.approx(0.9)


def make_node(cu_id, weight, clause, sim, idea=None):
    return CandidateMatch(cu_id=cu_id, cu_weight=weight, main_idea_id=idea,
                          clause_key=("e", 0, clause), clause_text=f"c{clause}", sim=sim)


def test_select_tie_breaks_weight_then_cu_id():
    config = AssessmentConfig(topk=3, t=0.55)
    heavy = make_node(cu_id=5, weight=3, clause=0, sim=0.8)
    light = make_node(cu_id=1, weight=2, clause=0, sim=0.8)
    graph = AssessmentHypergraph([light, heavy], [(0, 1)], config)
    match_set = select_matches(graph)
    assert match_set.selected == (heavy,)

    first = make_node(cu_id=1, weight=2, clause=0, sim=0.8)
    second = make_node(cu_id=2, weight=2, clause=0, sim=0.8)
    graph = AssessmentHypergraph([second, first], [(0, 1)], config)
    assert select_matches(graph).selected == (first,)


def test_select_verified_exhaustively_on_random_instances():
    config = AssessmentConfig(topk=2, t=0.3)
    for seed in range(8):
        pyramid, clauses = random_match_instance(seed, n_cus=4, n_clauses=4)
        graph = build_hypergraph(clauses, pyramid, config)
        assert len(graph) <= 12
        match_set = select_matches(graph)
        verify_match_set_exhaustively(graph, match_set)
        cu_ids = [m.cu_id for m in match_set.selected]
        clause_keys = [m.clause_key for m in match_set.selected]
        assert len(set(cu_ids)) == len(cu_ids)
        assert len(set(clause_keys)) == len(clause_keys)
        for _ in range(3):
            assert select_matches(graph).selected_indices == match_set.selected_indices


def test_tail_units_conflict_but_carry_no_idea():
    # A tail CU can outcompete the weight-E CU for a clause; the idea is then
    # not detected because tail nodes carry no main idea.
    theta = math.radians(10)
    weight2 = ContentUnit(id=1, weight=2,
                          members=(unit_cv("p1", 0, 0, at_angle(0.0)),
                                   unit_cv("p2", 0, 0, at_angle(0.0))),
                          intra_sim=1.0, main_idea_id=1)
    tail = ContentUnit(id=2, weight=1, members=(unit_cv("p1", 0, 1, at_angle(theta)),),
                       intra_sim=1.0)
    pyramid = Pyramid([weight2, tail], exemplar_ids=("p1", "p2"), embedding_space_id="s")
    clause = unit_cv("student", 0, 0, at_angle(theta))
    graph = build_hypergraph([clause], pyramid, AssessmentConfig())
    assert len(graph) == 2
    match_set = select_matches(graph)
    assert len(match_set.selected) == 1
    assert match_set.selected[0].cu_id == 2
    assert match_set.detected_ideas() == frozenset()


def test_assess_orthogonal_subset_is_exact():
    space = orthogonal_space(n_ideas=6)
    pyramid = labeled_orthogonal_pyramid(space, n_ideas=6)
    essay = Essay(id="s", role="student",
                  text=" ".join([idea_clause(1), idea_clause(3)]))
    assessment = assess_essay(essay, pyramid, space)
    assert assessment.present == {1: True, 2: False, 3: True,
                                  4: False, 5: False, 6: False}
    assert assessment.detected_ideas() == {1, 3}
    assert set(assessment.evidence) == {1, 3}
    assert assessment.evidence[1][0] == "idea1 point stated here."
    assert assessment.evidence[1][1] >= 0.55


def test_assess_self_consistency_toy(toy_corpus, toy_pyramid, toy_space, toy_rubric):
    for exemplar in toy_corpus.with_role("exemplar"):
        assessment = assess_essay(exemplar, toy_pyramid, toy_space)
        assert assessment.detected_ideas() == set(range(1, len(toy_rubric) + 1))


def test_assess_vague_clause_yields_at_most_one_idea():
    space = orthogonal_space(n_ideas=6, vague_pairs=((1, 2),))
    pyramid = labeled_orthogonal_pyramid(space, n_ideas=6)
    essay = Essay(id="s", role="student", text=vague_clause(1, 2))
    assessment = assess_essay(essay, pyramid, space)
    detected = assessment.detected_ideas()
    assert len(detected) == 1
    assert detected <= {1, 2}
    sims = assessment.trace["clauses"][0]["main_idea_sims"]
    assert sims[1] == pytest.approx(sims[2], abs=1e-9)
    assert sims[1] >= 0.55


def test_assess_is_deterministic():
    space = orthogonal_space(n_ideas=4)
    pyramid = labeled_orthogonal_pyramid(space, n_ideas=4)
    essay = Essay(id="s", role="student",
                  text=" ".join([idea_clause(2), idea_clause(4)]))
    a = assess_essay(essay, pyramid, space)
    b = assess_essay(essay, pyramid, space)
    assert a.present == b.present
    assert a.evidence == b.evidence
    assert a.trace == b.trace
    assert a.pyramid_id == b.pyramid_id == pyramid.id


def test_assess_requires_labeled_pyramid_and_matching_space():
    from synthetic import exemplar_essays, vector_map
    space = orthogonal_space(n_ideas=3)
    unlabeled = build_pyramid(vector_map(exemplar_essays(3), space))
    essay = Essay(id="s", role="student", text=idea_clause(1))
    with pytest.raises(ValueError, match="rubric-ready"):
        assess_essay(essay, unlabeled, space)
    labeled = labeled_orthogonal_pyramid(space, n_ideas=3)
    other = orthogonal_space(n_ideas=3, regularizer=0.07)
    with pytest.raises(ValueError, match="different embedding space"):
        assess_essay(essay, labeled, other)


class NullSegmenter:
    def segment(self, essay_id, text):
        return [], []


def test_assess_empty_segmentation_error():
    space = orthogonal_space(n_ideas=3)
    pyramid = labeled_orthogonal_pyramid(space, n_ideas=3)
    essay = Essay(id="s", role="student", text=idea_clause(1))
    with pytest.raises(ValueError, match="empty after segmentation"):
        assess_essay(essay, pyramid, space, segmenter=NullSegmenter())


def test_assess_trace_is_complete_and_consistent():
    space = orthogonal_space(n_ideas=4)
    pyramid = labeled_orthogonal_pyramid(space, n_ideas=4)
    essay = Essay(id="s", role="student",
                  text=" ".join([idea_clause(1), "zzz www qqq.", idea_clause(4)]))
    assessment = assess_essay(essay, pyramid, space)
    trace = assessment.trace

    assert [c["text"] for c in trace["clauses"]] == [
        "idea1 point stated here.", "zzz www qqq.", "idea4 point stated here."]
    flagged = trace["clauses"][1]
    assert flagged["flagged"] is True
    assert flagged["main_idea_sims"] == {}
    for entry in (trace["clauses"][0], trace["clauses"][2]):
        assert sorted(entry["main_idea_sims"]) == [1, 2, 3, 4]

    n = len(trace["nodes"])
    assert sorted(trace["visit_order"]) == list(range(n))
    assert set(trace["selected"]) <= set(range(n))
    assert all(0 <= i < j < n for i, j in trace["conflicts"])
    for idea, (text, sim) in assessment.evidence.items():
        matching = [node for node in trace["nodes"]
                    if node["main_idea_id"] == idea and node["clause_text"] == text]
        assert any(node["sim"] == sim for node in matching)


def three_idea_pipeline():
    space = orthogonal_space(n_ideas=3)
    pyramid = labeled_orthogonal_pyramid(space, n_ideas=3)
    rubric = orthogonal_rubric(3)
    essay = Essay(id="s", role="student",
                  text=" ".join([idea_clause(1), idea_clause(2), idea_clause(3)]))
    return assess_essay(essay, pyramid, space), rubric


def test_checklist_rows_follow_rubric_order():
    assessment, rubric = three_idea_pipeline()
    checklist = make_checklist(assessment, rubric)
    assert checklist.essay_id == "s"
    assert [r.idea_id for r in checklist.rows] == [1, 2, 3]
    assert all(r.detected for r in checklist.rows)
    assert [r.idea_text for r in checklist.rows] == [i.text for i in rubric.main_ideas]
    assert [r.confidence for r in checklist.rows] == [i.confidence for i in rubric.main_ideas]
    assert [e.idea_id for e in checklist.evidence] == [1, 2, 3]


def test_checklist_carries_accuracy_confidences():
    confidences = (0.7692, 0.8205, 0.6923, 0.8974, 0.7179, 0.8462)
    rubric = Rubric(main_ideas=tuple(
        MainIdea(id=i, text=f"Students explain idea{i} clearly.", confidence=c)
        for i, c in enumerate(confidences, start=1)))
    space = orthogonal_space(n_ideas=6)
    pyramid = labeled_orthogonal_pyramid(space, n_ideas=6)
    essay = Essay(id="s", role="student", text=idea_clause(4))
    assessment = assess_essay(essay, pyramid, space)
    checklist = make_checklist(assessment, rubric)
    assert [r.confidence for r in checklist.rows] == list(confidences)
    assert [r.detected for r in checklist.rows] == [False, False, False, True, False, False]
    assert [e.idea_id for e in checklist.evidence] == [4]


def test_checklist_hash_mismatch():
    assessment, _ = three_idea_pipeline()
    other = Rubric(main_ideas=(MainIdea(1, "something else entirely", 0.5),
                               MainIdea(2, "and another", 0.5),
                               MainIdea(3, "and a third", 0.5)))
    with pytest.raises(ValueError, match="hash"):
        make_checklist(assessment, other)


def test_checklist_document_round_trip():
    assessment, rubric = three_idea_pipeline()
    checklist = make_checklist(assessment, rubric)
    document = checklist_to_document(checklist)
    assert set(document) == {"essay_id", "rows", "evidence"}
    assert checklist_from_document(document) == checklist
    assert checklist_to_document(checklist_from_document(document)) == document
    again = json.loads(json.dumps(document))
    assert checklist_from_document(again) == checklist


def test_checklist_from_document_malformed():
    with pytest.raises(ValueError, match="malformed checklist"):
        checklist_from_document({"essay_id": "s", "rows": [{"idea_id": 1}]})


def test_trace_document_is_json_ready():
    assessment, _ = three_idea_pipeline()
    document = assessment_trace_document(assessment)
    encoded = json.dumps(document)
    decoded = json.loads(encoded)
    assert decoded["essay_id"] == "s"
    assert decoded["config"] == {"topk": 3, "t": 0.55}
    assert decoded["present"] == {"1": True, "2": True, "3": True}
    assert [c["clause_key"] for c in decoded["clauses"]] == [["s", 0, 0], ["s", 1, 0], ["s", 2, 0]]
    assert decoded["selected"] == list(assessment.trace["selected"])
