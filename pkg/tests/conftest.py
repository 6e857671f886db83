from __future__ import annotations

import re

import pytest

from essaycheck.corpus import Corpus, Essay, GoldLabels, MainIdea, Rubric
from essaycheck.embedding import WtmfConfig, build_term_matrix, fold_in_clause, train_wtmf
from essaycheck.pyramid import build_pyramid, label_main_ideas
from essaycheck.segmenter import segment_essay

EXEMPLAR_TEXTS = {
    "ex1": ("Potential energy turns into kinetic energy as the car rolls down. "
            "Friction takes away some of the energy. "
            "The first hill must be the tallest hill. "
            "Energy cannot be created or destroyed."),
    "ex2": ("As the coaster drops, potential energy becomes kinetic energy. "
            "Some energy is lost to friction and heat. "
            "The tallest hill has to come first. "
            "The total energy is conserved and cannot be destroyed."),
    "ex3": ("Stored potential energy changes to kinetic energy going downhill. "
            "Friction steals energy from the car. "
            "The first hill is the biggest hill. "
            "Energy is never created or destroyed, only transformed."),
}

STUDENT_TEXTS = {
    "s1": ("The car goes fast because potential energy becomes kinetic energy. "
           "Friction slows it down and takes energy."),
    "s2": "Roller coasters are fun and scary. I like the loops.",
    "s3": "The first hill is always the tallest one. Energy cannot be created or destroyed.",
}

GOLD_ROWS = {
    "s1": (True, True, False, False),
    "s2": (False, False, False, False),
    "s3": (False, False, True, True),
}


@pytest.fixture(scope="session")
def toy_corpus() -> Corpus:
    essays = [Essay(id=k, role="exemplar", text=v) for k, v in EXEMPLAR_TEXTS.items()]
    essays += [Essay(id=k, role="student", text=v) for k, v in STUDENT_TEXTS.items()]
    return Corpus(essays)


@pytest.fixture(scope="session")
def toy_space(toy_corpus):
    _, matrix = build_term_matrix(toy_corpus)
    return train_wtmf(matrix, WtmfConfig(dimension=12, sweeps=6, seed=3))


@pytest.fixture(scope="session")
def toy_rubric() -> Rubric:
    return Rubric(main_ideas=(
        MainIdea(1, "Potential energy converts to kinetic energy on the drop.", 0.8),
        MainIdea(2, "Friction dissipates some of the energy.", 0.7),
        MainIdea(3, "The first hill must be the tallest.", 0.9),
        MainIdea(4, "Total energy is conserved, never created or destroyed.", 0.85),
    ))


@pytest.fixture(scope="session")
def toy_vectors(toy_corpus, toy_space):
    return {e.id: [fold_in_clause(c, toy_space) for c in segment_essay(e.id, e.text)]
            for e in toy_corpus.with_role("exemplar")}


@pytest.fixture(scope="session")
def toy_pyramid(toy_vectors, toy_rubric, toy_space):
    return label_main_ideas(build_pyramid(toy_vectors), toy_rubric, toy_space)


@pytest.fixture(scope="session")
def toy_gold() -> GoldLabels:
    return GoldLabels(GOLD_ROWS, n_ideas=4)


# One visible verdict per release criterion at the end of the run.

CRITERIA = {
    1: "pair-confusability counts vs similarity correlate at 0.78 +/- 0.02",
    2: "accuracy pooling reproduces the reference per-idea rows within 0.01",
    3: "per-idea confusability means match the reference quotes within 0.005",
    4: "factorization: monotone objective, rank-1 recovery, gradient check",
    5: "greedy grouping reaches the exhaustive optimum in >= 90/100 instances",
    6: "exemplar subset enumeration yields C(7,5) = 21 candidate models",
    7: "match selection is conflict-free and maximal on 200 random graphs",
    8: "clean corpus scores 100%; vague clauses degrade accuracy as expected",
    9: "every exemplar essay self-assesses to full idea detection",
    10: "accuracy, correlation, and agreement formulas match hand oracles",
    11: "service round-trips checklists bit-exactly; draft indices stay gapless",
}

_CRITERION_RE = re.compile(r"test_acceptance\.py::test_criterion_(\d+)")
_criterion_outcomes: dict[int, str] = {}


def pytest_runtest_logreport(report):
    match = _CRITERION_RE.search(report.nodeid)
    if match is None:
        return
    number = int(match.group(1))
    if report.when == "call":
        outcome = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
    elif report.failed:
        outcome = "FAIL"
    else:
        return
    # setup errors must not be shadowed by a later teardown pass
    if _criterion_outcomes.get(number) != "FAIL":
        _criterion_outcomes[number] = outcome


def pytest_terminal_summary(terminalreporter):
    if not _criterion_outcomes:
        return
    terminalreporter.section("release criteria")
    for number in sorted(_criterion_outcomes):
        verdict = _criterion_outcomes[number]
        label = CRITERIA.get(number, "")
        terminalreporter.write_line(f"criterion {number:2d}: {verdict}  {label}")
