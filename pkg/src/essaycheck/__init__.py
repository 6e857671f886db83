"""Rubric-based formative feedback for short science explanations.

Workflow: ingest a corpus, train a word vector space on it, segment exemplar
essays into clauses, group the clause vectors into a content pyramid, label
the top-weight units with rubric main ideas, then assess student essays
against the pyramid and hand back a feedback checklist. Analytics cover
accuracy scoring, hyperparameter tuning, and the diagnostic tables; an HTTP
service and CLI wrap the pipeline.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .analytics import (AccuracyReport, ConfusabilityRow, ErrorBin, Histogram, TuningResult,
                        aggregate_reports, bin_essays_by_errors, cohen_kappa,
                        confusability_table, grid_search, pearson, score_accuracy,
                        similarity_histogram)
from .assessment import (Assessment, AssessmentConfig, AssessmentHypergraph, CandidateMatch,
                         FeedbackChecklist, MatchSet, assess_essay, build_hypergraph,
                         checklist_from_document, checklist_to_document, make_checklist,
                         select_matches)
from .corpus import (Corpus, Essay, GoldLabels, MainIdea, Rubric, default_rubric,
                     ingest_corpus, load_gold_labels, load_rubric, normalize_text,
                     rubric_hash, save_corpus)
from .embedding import (ClauseVector, EmbeddingSpace, TermClauseMatrix, Vocabulary,
                        WordRanking, WtmfConfig, build_term_matrix, concat_spaces, cosine,
                        cosine_between, embed_text, fold_in_clause, load_external_vectors,
                        load_space, refine_space, save_space, tfidf_rank, tokenize,
                        train_wtmf)
from .pyramid import (ContentUnit, Pyramid, build_pyramid, enumerate_candidate_pyramids,
                      label_main_ideas, load_pyramid, pyramid_report, save_pyramid,
                      select_best_pyramid)
from .segmenter import (Clause, RuleBasedSegmenter, Sentence, extract_clauses, segment_essay,
                        segmentation_report, split_sentences)
