"""Scoring, tuning, and diagnostics over assessments.

Accuracy treats "idea present in gold" as the positive class, so pos_acc is
sensitivity and neg_acc specificity. Diagnostic tables (confusability,
similarity histograms, error bins) are emitted as tab-delimited, plot-ready
text; rendering is left to external tooling.
"""

from __future__ import annotations

import bisect
import logging
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .assessment import Assessment, AssessmentConfig, assess_essay
from .corpus import Corpus, Essay, GoldLabels, Rubric
from .embedding import EmbeddingSpace, cosine_between, fold_in_clause
from .pyramid import Pyramid
from .segmenter import segment_essay

_logger = logging.getLogger(__name__)

DEFAULT_TOPK_GRID = (1, 2, 3, 4, 5)
DEFAULT_T_GRID = (0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90)


@dataclass(frozen=True)
class IdeaCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def correct(self) -> int:
        return self.tp + self.tn


class ConfusionCounts:
    """Per-idea and overall tp/fp/tn/fn; every idea covers every scored essay."""

    def __init__(self, per_idea: Mapping[int, IdeaCounts], essay_count: int):
        self.per_idea = dict(per_idea)
        self.essay_count = essay_count
        for idea_id, counts in self.per_idea.items():
            if counts.total != essay_count:
                raise ValueError(f"idea {idea_id}: counts sum to {counts.total}, "
                                 f"expected {essay_count} essays")

    @property
    def overall(self) -> IdeaCounts:
        return IdeaCounts(tp=sum(c.tp for c in self.per_idea.values()),
                          fp=sum(c.fp for c in self.per_idea.values()),
                          tn=sum(c.tn for c in self.per_idea.values()),
                          fn=sum(c.fn for c in self.per_idea.values()))


def _rate(numerator: int, denominator: int) -> float:
    # vacuous denominators (no positive or no negative cases) read as perfect
    if denominator == 0:
        return 100.0
    return 100.0 * numerator / denominator


@dataclass(frozen=True)
class AccuracyReport:
    tag: str
    pos_acc: float
    neg_acc: float
    total_acc: float
    per_idea_acc: tuple[float, ...]
    essay_count: int
    counts: ConfusionCounts | None = None

    def row(self) -> str:
        return f"{self.tag} {self.pos_acc:.2f} {self.neg_acc:.2f} {self.total_acc:.2f}"

    def idea_row(self) -> str:
        return " ".join([self.tag] + [f"{acc:.2f}" for acc in self.per_idea_acc])


def score_accuracy(assessments: Sequence[Assessment], gold: GoldLabels,
                   rubric: Rubric | None = None, tag: str = "") -> AccuracyReport:
    """Confusion counts and accuracy percentages over a labeled essay set.

    Raises:
        ValueError: an assessed essay has no gold record, or idea sets
            disagree between assessments, gold, and rubric.
    """
    if not assessments:
        raise ValueError("no assessments to score")
    n_ideas = gold.n_ideas
    if rubric is not None and len(rubric) != n_ideas:
        raise ValueError(f"rubric has {len(rubric)} ideas, gold labels have {n_ideas}")
    idea_ids = list(range(1, n_ideas + 1))
    raw = {i: {"tp": 0, "fp": 0, "tn": 0, "fn": 0} for i in idea_ids}
    for assessment in assessments:
        if assessment.essay_id not in gold:
            raise ValueError(f"no gold record for essay {assessment.essay_id!r}")
        truth = gold[assessment.essay_id]
        if sorted(assessment.present) != idea_ids:
            raise ValueError(f"assessment for {assessment.essay_id!r} covers ideas "
                             f"{sorted(assessment.present)}, gold expects {idea_ids}")
        for i in idea_ids:
            predicted, actual = assessment.present[i], truth[i - 1]
            if actual:
                raw[i]["tp" if predicted else "fn"] += 1
            else:
                raw[i]["fp" if predicted else "tn"] += 1
    counts = ConfusionCounts({i: IdeaCounts(**raw[i]) for i in idea_ids}, len(assessments))
    overall = counts.overall
    report = AccuracyReport(
        tag=tag,
        pos_acc=_rate(overall.tp, overall.tp + overall.fn),
        neg_acc=_rate(overall.tn, overall.tn + overall.fp),
        total_acc=_rate(overall.correct, overall.total),
        per_idea_acc=tuple(_rate(counts.per_idea[i].correct, len(assessments))
                           for i in idea_ids),
        essay_count=len(assessments),
        counts=counts,
    )
    _logger.debug("pos_acc %.2f vs neg_acc %.2f (greedy matching tends to favor "
                  "positive accuracy)", report.pos_acc, report.neg_acc)
    return report


def aggregate_reports(reports: Sequence[AccuracyReport | tuple[AccuracyReport, int]],
                      tag: str | None = None) -> AccuracyReport:
    """Pool accuracy reports, essay-count weighted.

    When every input still carries its confusion counts the pooling is exact
    (identical to rescoring the concatenated raw data); otherwise the stored
    percentages are weighted by essay count.

    Raises:
        ValueError: empty input or mismatched idea counts across reports.
    """
    items: list[tuple[AccuracyReport, int]] = []
    for entry in reports:
        if isinstance(entry, AccuracyReport):
            items.append((entry, entry.essay_count))
        else:
            report, count = entry
            items.append((report, int(count)))
    if not items:
        raise ValueError("no reports to aggregate")
    n_ideas = len(items[0][0].per_idea_acc)
    if any(len(r.per_idea_acc) != n_ideas for r, _ in items):
        raise ValueError("reports cover different rubric sizes")
    total_essays = sum(count for _, count in items)
    if total_essays == 0:
        raise ValueError("aggregate essay count is zero")
    merged_tag = tag if tag is not None else "+".join(r.tag for r, _ in items if r.tag)

    exact = all(r.counts is not None and count == r.essay_count for r, count in items)
    if exact:
        pooled = {}
        for i in range(1, n_ideas + 1):
            pooled[i] = IdeaCounts(
                tp=sum(r.counts.per_idea[i].tp for r, _ in items),
                fp=sum(r.counts.per_idea[i].fp for r, _ in items),
                tn=sum(r.counts.per_idea[i].tn for r, _ in items),
                fn=sum(r.counts.per_idea[i].fn for r, _ in items))
        counts = ConfusionCounts(pooled, total_essays)
        overall = counts.overall
        return AccuracyReport(
            tag=merged_tag,
            pos_acc=_rate(overall.tp, overall.tp + overall.fn),
            neg_acc=_rate(overall.tn, overall.tn + overall.fp),
            total_acc=_rate(overall.correct, overall.total),
            per_idea_acc=tuple(_rate(counts.per_idea[i].correct, total_essays)
                               for i in range(1, n_ideas + 1)),
            essay_count=total_essays,
            counts=counts,
        )

    def weighted(values: Iterable[float]) -> float:
        return sum(v * count for v, (_, count) in zip(values, items)) / total_essays

    return AccuracyReport(
        tag=merged_tag,
        pos_acc=weighted(r.pos_acc for r, _ in items),
        neg_acc=weighted(r.neg_acc for r, _ in items),
        total_acc=weighted(r.total_acc for r, _ in items),
        per_idea_acc=tuple(weighted(r.per_idea_acc[i] for r, _ in items)
                           for i in range(n_ideas)),
        essay_count=total_essays,
        counts=None,
    )


@dataclass(frozen=True)
class TuningResult:
    grid: Mapping[tuple[int, float], AccuracyReport]
    best: tuple[int, float]

    def table(self) -> str:
        lines = ["topk\tt\tpos_acc\tneg_acc\ttotal_acc"]
        for (topk, t), report in sorted(self.grid.items()):
            marker = "\t*" if (topk, t) == self.best else ""
            lines.append(f"{topk}\t{t:.2f}\t{report.pos_acc:.2f}\t{report.neg_acc:.2f}"
                         f"\t{report.total_acc:.2f}{marker}")
        return "\n".join(lines) + "\n"


def grid_search(corpus: Corpus, gold: GoldLabels, pyramid: Pyramid, space: EmbeddingSpace,
                topk_grid: Sequence[int] = DEFAULT_TOPK_GRID,
                t_grid: Sequence[float] = DEFAULT_T_GRID) -> TuningResult:
    """Evaluate every (topk, t) cell; best by total accuracy, ties to the
    smaller topk then the larger t (simpler, stricter model).

    Raises:
        ValueError: empty grid or no labeled essays in the corpus.
    """
    if not topk_grid or not t_grid:
        raise ValueError("hyperparameter grids must be non-empty")
    essays = [corpus[essay_id] for essay_id in gold.essay_ids if essay_id in corpus]
    if not essays:
        raise ValueError("no corpus essay has a gold record")
    grid: dict[tuple[int, float], AccuracyReport] = {}
    for topk in topk_grid:
        for t in t_grid:
            config = AssessmentConfig(topk=topk, t=float(t))
            assessments = [assess_essay(essay, pyramid, space, config) for essay in essays]
            grid[(topk, float(t))] = score_accuracy(assessments, gold,
                                                    tag=f"topk={topk},t={t:.2f}")
    best = min(grid, key=lambda cell: (-grid[cell].total_acc, cell[0], -cell[1]))
    return TuningResult(grid=grid, best=best)


@dataclass(frozen=True)
class ConfusabilityRow:
    idea_pair: tuple[int, int]
    count: int
    avg_sim: float

    def __post_init__(self) -> None:
        i, j = self.idea_pair
        if not i < j:
            raise ValueError(f"idea pair must be ordered, got ({i}, {j})")
        if self.count < 0 or not -1.0 <= self.avg_sim <= 1.0:
            raise ValueError("confusability row out of range")


def confusability_table(essays: Sequence[Essay], pyramid: Pyramid, space: EmbeddingSpace,
                        t: float = 0.55) -> tuple[list[ConfusabilityRow], float]:
    """How often each main-idea pair attracts the same clause.

    count = clauses whose mean cosine reaches t for both ideas' CUs; avg_sim =
    mean cosine over all cross pairs of the two CUs' member vectors. Rows are
    sorted by descending count (ties by idea pair). The second return value is
    the Pearson correlation between the count and avg_sim columns, or NaN when
    either column has zero variance.

    Raises:
        ValueError: pyramid not rubric-ready.
    """
    weight_e = pyramid.weight_e_units()
    if not pyramid.is_rubric_ready(len(weight_e)) or not weight_e:
        raise ValueError("pyramid is not rubric-ready: label it with a rubric first")
    by_idea = {cu.main_idea_id: cu for cu in weight_e}
    idea_ids = sorted(by_idea)

    pair_counts: dict[tuple[int, int], int] = {}
    pair_sims: dict[tuple[int, int], float] = {}
    for a_index, i in enumerate(idea_ids):
        for j in idea_ids[a_index + 1:]:
            pair_counts[(i, j)] = 0
            cross = [cosine_between(u, v)
                     for u in by_idea[i].members for v in by_idea[j].members]
            pair_sims[(i, j)] = sum(cross) / len(cross)

    for essay in essays:
        for clause in segment_essay(essay.id, essay.text):
            cv = fold_in_clause(clause, space)
            if cv.flagged:
                continue
            reached = [i for i in idea_ids
                       if sum(cosine_between(cv, m) for m in by_idea[i].members)
                       / len(by_idea[i].members) >= t]
            for a_index, i in enumerate(reached):
                for j in reached[a_index + 1:]:
                    pair_counts[(i, j)] += 1

    rows = [ConfusabilityRow(idea_pair=pair, count=pair_counts[pair], avg_sim=pair_sims[pair])
            for pair in sorted(pair_counts, key=lambda p: (-pair_counts[p], p))]
    try:
        correlation = pearson([float(r.count) for r in rows], [r.avg_sim for r in rows])
    except ValueError:
        correlation = float("nan")
    return rows, correlation


def confusability_to_table(rows: Sequence[ConfusabilityRow]) -> str:
    lines = ["idea_pair\tcount\tavg_sim"]
    lines += [f"{r.idea_pair[0]}-{r.idea_pair[1]}\t{r.count}\t{r.avg_sim:.2f}" for r in rows]
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Histogram:
    edges: tuple[float, ...]
    counts: tuple[int, ...]
    label: str

    def __post_init__(self) -> None:
        if len(self.edges) != len(self.counts) + 1:
            raise ValueError("histogram needs one more edge than counts")

    def table(self) -> str:
        lines = ["bin_left\tbin_right\tseries\tcount"]
        lines += [f"{self.edges[i]:.4f}\t{self.edges[i + 1]:.4f}\t{self.label}\t{c}"
                  for i, c in enumerate(self.counts)]
        return "\n".join(lines) + "\n"


def similarity_histogram(essays: Sequence[Essay], pyramid: Pyramid, space: EmbeddingSpace,
                         t: float = 0.55, bin_width: float = 0.02,
                         idea_id: int | None = None, label: str | None = None) -> Histogram:
    """Bin every candidate (clause, CU) mean cosine >= t over [t, 1.0].

    Scope is the whole pyramid (every CU, no topk cap) or, with idea_id, the
    single CU labeled with that idea. Bins are closed on the left; the last
    bin is closed on both sides.

    Raises:
        ValueError: bin_width <= 0 or idea_id absent from the pyramid.
    """
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    if idea_id is None:
        scope = pyramid.content_units
    else:
        unit = pyramid.unit_for_idea(idea_id)
        if unit is None:
            raise ValueError(f"no content unit is labeled with main idea {idea_id}")
        scope = (unit,)
    n_bins = max(1, math.ceil((1.0 - t) / bin_width - 1e-12))
    edges = [round(t + i * bin_width, 12) for i in range(n_bins + 1)]
    counts = [0] * n_bins
    for essay in essays:
        for clause in segment_essay(essay.id, essay.text):
            cv = fold_in_clause(clause, space)
            if cv.flagged:
                continue
            for cu in scope:
                sim = sum(cosine_between(cv, m) for m in cu.members) / len(cu.members)
                if sim >= t:
                    index = min(bisect.bisect_right(edges, sim) - 1, n_bins - 1)
                    counts[index] += 1
    if label is None:
        label = "pooled" if idea_id is None else f"main idea {idea_id}"
    return Histogram(edges=tuple(edges), counts=tuple(counts), label=label)


@dataclass(frozen=True)
class ErrorBin:
    label: str
    essay_ids: tuple[str, ...]
    clause_count: int
    mean_matched: float | None
    sd_matched: float | None

    @property
    def essay_count(self) -> int:
        return len(self.essay_ids)


def _matched_ideas_per_clause(assessment: Assessment) -> list[int]:
    t = assessment.config.t
    return [sum(1 for sim in clause["main_idea_sims"].values() if sim >= t)
            for clause in assessment.trace["clauses"]]


def bin_essays_by_errors(assessments: Sequence[Assessment], gold: GoldLabels,
                         thresholds: tuple[int, int] = (1, 2)) -> tuple[ErrorBin, ErrorBin, ErrorBin]:
    """Split essays into high/mid/low-accuracy bins by verdict errors.

    With the default thresholds (1, 2): at most 1 error, exactly 2, and 3 or
    more. Each bin reports the mean and sample (n-1) standard deviation of
    how many main ideas each clause reaches t for, pooled over the bin's
    clauses. Flagged clauses count as matching zero ideas.

    Raises:
        ValueError: bad thresholds or a missing gold record.
    """
    low_edge, high_edge = thresholds
    if not 0 <= low_edge < high_edge:
        raise ValueError(f"thresholds must satisfy 0 <= a < b, got {thresholds}")
    grouped: dict[str, tuple[list[str], list[int]]] = {
        "high": ([], []), "mid": ([], []), "low": ([], [])}
    for assessment in assessments:
        if assessment.essay_id not in gold:
            raise ValueError(f"no gold record for essay {assessment.essay_id!r}")
        truth = gold[assessment.essay_id]
        errors = sum(1 for i, flag in assessment.present.items() if flag != truth[i - 1])
        if errors <= low_edge:
            bucket = "high"
        elif errors <= high_edge:
            bucket = "mid"
        else:
            bucket = "low"
        grouped[bucket][0].append(assessment.essay_id)
        grouped[bucket][1].extend(_matched_ideas_per_clause(assessment))

    def finish(label: str) -> ErrorBin:
        essay_ids, values = grouped[label]
        mean = sum(values) / len(values) if values else None
        sd = None
        if len(values) >= 2:
            assert mean is not None
            sd = math.sqrt(sum((v - mean) ** 2 for v in values) / (len(values) - 1))
        return ErrorBin(label=label, essay_ids=tuple(essay_ids),
                        clause_count=len(values), mean_matched=mean, sd_matched=sd)

    return finish("high"), finish("mid"), finish("low")


def error_bins_table(bins: Sequence[ErrorBin]) -> str:
    lines = ["bin\tessays\tclauses\tmean_matched\tsd_matched"]
    for b in bins:
        mean = "n/a" if b.mean_matched is None else f"{b.mean_matched:.2f}"
        sd = "n/a" if b.sd_matched is None else f"{b.sd_matched:.2f}"
        lines.append(f"{b.label}\t{b.essay_count}\t{b.clause_count}\t{mean}\t{sd}")
    return "\n".join(lines) + "\n"


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Pearson correlation coefficient.

    Raises:
        ValueError: mismatched lengths, fewer than 2 points, or zero variance.
    """
    if len(xs) != len(ys):
        raise ValueError(f"length mismatch: {len(xs)} vs {len(ys)}")
    if len(xs) < 2:
        raise ValueError("pearson needs at least 2 points")
    n = len(xs)
    mean_x = sum(xs) / n
    mean_y = sum(ys) / n
    var_x = sum((x - mean_x) ** 2 for x in xs)
    var_y = sum((y - mean_y) ** 2 for y in ys)
    if var_x == 0.0 or var_y == 0.0:
        raise ValueError("zero variance in at least one input")
    cov = sum((x - mean_x) * (y - mean_y) for x, y in zip(xs, ys))
    return cov / math.sqrt(var_x * var_y)


def cohen_kappa(a: Sequence, b: Sequence) -> float:
    """Cohen's kappa between two label sequences.

    Raises:
        ValueError: empty input or mismatched lengths.
    """
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    if not a:
        raise ValueError("cohen_kappa needs at least 1 pair")
    n = len(a)
    observed = sum(1 for x, y in zip(a, b) if x == y) / n
    count_a, count_b = Counter(a), Counter(b)
    expected = sum((count_a[label] / n) * (count_b[label] / n)
                   for label in set(count_a) | set(count_b))
    if expected == 1.0:
        return 1.0
    return (observed - expected) / (1.0 - expected)


def accuracy_table(reports: Sequence[AccuracyReport]) -> str:
    lines = ["dataset\tpos_acc\tneg_acc\ttotal_acc"]
    lines += [f"{r.tag}\t{r.pos_acc:.2f}\t{r.neg_acc:.2f}\t{r.total_acc:.2f}" for r in reports]
    return "\n".join(lines) + "\n"


def idea_accuracy_table(reports: Sequence[AccuracyReport]) -> str:
    n = len(reports[0].per_idea_acc) if reports else 0
    lines = ["dataset\t" + "\t".join(f"mi{i}" for i in range(1, n + 1))]
    lines += [r.tag + "\t" + "\t".join(f"{a:.2f}" for a in r.per_idea_acc) for r in reports]
    return "\n".join(lines) + "\n"
