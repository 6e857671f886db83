"""Command-line interface: train, build, assess, tune, diagnose, serve.

Every subcommand computes its outputs fully before writing, and files land
via an atomic rename, so interrupted runs never leave partial output behind.
With fixed inputs and seeds, outputs are byte-identical across runs.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
import tempfile
from pathlib import Path
from typing import Sequence

from .analytics import (DEFAULT_T_GRID, DEFAULT_TOPK_GRID, accuracy_table, bin_essays_by_errors,
                        confusability_table, confusability_to_table, error_bins_table,
                        grid_search, idea_accuracy_table, score_accuracy, similarity_histogram)
from .assessment import (AssessmentConfig, assess_essay, assessment_trace_document,
                         checklist_to_document, make_checklist)
from .corpus import (Corpus, Essay, ingest_corpus, load_gold_labels, load_rubric, rubric_hash)
from .embedding import WtmfConfig, build_term_matrix, fold_in_clause, load_space, save_space, train_wtmf
from .pyramid import (DEFAULT_MIN_PAIR_SIM, build_pyramid, enumerate_candidate_pyramids,
                      label_main_ideas, load_pyramid, pyramid_report, save_pyramid,
                      select_best_pyramid)
from .segmenter import segment_essay

DEFAULT_PORT = 8000
PORT_ENV_VAR = "ESSAYCHECK_PORT"


def _infer_format(path: str) -> str:
    suffix = Path(path).suffix.lower()
    if suffix == ".csv":
        return "delimited-table"
    if suffix in (".jsonl", ".ndjson"):
        return "structured-records"
    raise ValueError(f"cannot infer corpus format from {path!r}; pass --format")


def _load_corpus(path: str, format: str | None) -> Corpus:
    return ingest_corpus(path, format or _infer_format(path))


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _save_atomic(save, obj, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    os.close(fd)
    try:
        save(obj, tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _int_list(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part.strip()]


def _float_list(text: str) -> list[float]:
    return [float(part) for part in text.split(",") if part.strip()]


def _exemplar_vectors(essays: Sequence[Essay], space) -> dict[str, list]:
    return {essay.id: [fold_in_clause(clause, space)
                       for clause in segment_essay(essay.id, essay.text)]
            for essay in essays}


def _safe_filename(essay_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", essay_id) or "essay"


def _load_bundle_files(args):
    pyramid = load_pyramid(args.pyramid)
    space = load_space(args.space)
    rubric = load_rubric(args.rubric)
    if pyramid.rubric_hash is not None and pyramid.rubric_hash != rubric_hash(rubric):
        raise ValueError("pyramid was labeled with a different rubric than the one given")
    return pyramid, space, rubric


def _cmd_train_wtmf(args) -> int:
    corpus = _load_corpus(args.corpus, args.format)
    vocab, matrix = build_term_matrix(corpus, min_df=args.min_df)
    config = WtmfConfig(dimension=args.dim, missing_weight=args.missing_weight,
                        regularizer=args.regularizer, sweeps=args.sweeps, seed=args.seed)
    space = train_wtmf(matrix, config)
    _save_atomic(save_space, space, Path(args.out))
    print(f"trained {args.dim}-dimension space over {len(vocab)} words "
          f"({matrix.n_cols} sentences); objective "
          f"{space.objective_trace[0]:.4f} -> {space.objective_trace[-1]:.4f}")
    print(f"wrote {args.out}")
    return 0


def _cmd_build_pyramid(args) -> int:
    if args.enumerate is not None and args.gold is None:
        raise ValueError("--enumerate requires --gold to pick the best subset")
    if args.gold is not None and args.enumerate is None:
        raise ValueError("--gold only applies together with --enumerate")
    corpus = _load_corpus(args.exemplars, args.format)
    exemplars = corpus.with_role("exemplar")
    if len(exemplars) < 2:
        raise ValueError(f"corpus has {len(exemplars)} exemplar essays; need at least 2")
    space = load_space(args.space)
    rubric = load_rubric(args.rubric)
    vectors = _exemplar_vectors(exemplars, space)

    if args.enumerate is None:
        pyramid = label_main_ideas(build_pyramid(vectors, args.min_pair_sim), rubric, space)
    else:
        candidates = enumerate_candidate_pyramids([e.id for e in exemplars], args.enumerate,
                                                  vectors, args.min_pair_sim)
        labeled = []
        for candidate in candidates:
            try:
                labeled.append(label_main_ideas(candidate, rubric, space))
            except ValueError:
                print(f"skipping subset {', '.join(candidate.exemplar_ids)}: "
                      "not rubric-ready", file=sys.stderr)
        if not labeled:
            raise ValueError("no exemplar subset produced a rubric-ready pyramid")
        gold = load_gold_labels(args.gold, rubric, corpus)
        pyramid, accuracies = select_best_pyramid(labeled, corpus, gold, space)
        for candidate, acc in zip(labeled, accuracies):
            marker = "  <- selected" if candidate is pyramid else ""
            print(f"subset {', '.join(candidate.exemplar_ids)}: "
                  f"total_acc {acc:.2f}{marker}")

    _save_atomic(save_pyramid, pyramid, Path(args.out))
    print(pyramid_report(pyramid, rubric), end="")
    print(f"wrote {args.out}")
    return 0


def _cmd_assess(args) -> int:
    pyramid, space, rubric = _load_bundle_files(args)
    config = AssessmentConfig(topk=args.topk, t=args.t)
    if args.essay is not None:
        text = Path(args.essay).read_text(encoding="utf-8")
        essays = [Essay(id=Path(args.essay).stem, text=text, role="student")]
    else:
        essays = list(_load_corpus(args.corpus, args.format).essays)

    results = []
    for essay in essays:
        assessment = assess_essay(essay, pyramid, space, config)
        results.append((essay, assessment, make_checklist(assessment, rubric)))

    out_dir = Path(args.out)
    names = {}
    for essay, _, _ in results:
        name = _safe_filename(essay.id)
        if name in names:
            raise ValueError(f"essay ids {names[name]!r} and {essay.id!r} collide "
                             "as output file names")
        names[name] = essay.id
    for essay, assessment, checklist in results:
        _write_atomic(out_dir / f"{_safe_filename(essay.id)}.checklist.json",
                      json.dumps(checklist_to_document(checklist), ensure_ascii=False,
                                 indent=1) + "\n")
    traces = "".join(json.dumps(assessment_trace_document(a), ensure_ascii=False) + "\n"
                     for _, a, _ in results)
    _write_atomic(out_dir / "traces.jsonl", traces)
    for essay, assessment, _ in results:
        detected = sorted(assessment.detected_ideas())
        print(f"{essay.id}: detected main ideas "
              f"{', '.join(map(str, detected)) if detected else 'none'}")
    print(f"wrote {len(results)} checklists and traces.jsonl to {out_dir}")
    return 0


def _cmd_tune(args) -> int:
    pyramid, space, rubric = _load_bundle_files(args)
    corpus = _load_corpus(args.corpus, args.format)
    gold = load_gold_labels(args.gold, rubric, corpus)
    result = grid_search(corpus, gold, pyramid, space, args.topk_grid, args.t_grid)
    table = result.table()
    if args.out:
        _write_atomic(Path(args.out), table)
        print(f"wrote {args.out}")
    else:
        print(table, end="")
    best = result.grid[result.best]
    print(f"best cell: topk={result.best[0]} t={result.best[1]:.2f} "
          f"total_acc={best.total_acc:.2f}")
    return 0


def _cmd_diagnose(args) -> int:
    pyramid, space, rubric = _load_bundle_files(args)
    corpus = _load_corpus(args.corpus, args.format)
    gold = load_gold_labels(args.gold, rubric, corpus)
    essays = [corpus[essay_id] for essay_id in gold.essay_ids if essay_id in corpus]
    if not essays:
        raise ValueError("no corpus essay has a gold record")
    config = AssessmentConfig(topk=args.topk, t=args.t)

    assessments = [assess_essay(essay, pyramid, space, config) for essay in essays]
    report = score_accuracy(assessments, gold, rubric, tag="all")
    rows, correlation = confusability_table(essays, pyramid, space, t=config.t)
    histogram = similarity_histogram(essays, pyramid, space, t=config.t)
    bins = bin_essays_by_errors(assessments, gold)

    files = {
        "accuracy.tsv": accuracy_table([report]) + "\n" + idea_accuracy_table([report]),
        "confusability.tsv": (confusability_to_table(rows)
                              + f"\npearson\t{correlation:.4f}\n"),
        "histogram.tsv": histogram.table(),
        "error_bins.tsv": error_bins_table(bins),
        "traces.jsonl": "".join(json.dumps(assessment_trace_document(a), ensure_ascii=False)
                                + "\n" for a in assessments),
    }
    out_dir = Path(args.out)
    for name, text in files.items():
        _write_atomic(out_dir / name, text)
    print(report.row())
    print(f"wrote {', '.join(sorted(files))} to {out_dir}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import RevisionStore, ServiceBundle, create_app

    pyramid, space, rubric = _load_bundle_files(args)
    config = AssessmentConfig(topk=args.topk, t=args.t)
    bundle = ServiceBundle(pyramid=pyramid, space=space, rubric=rubric, config=config,
                           store=RevisionStore(args.store), max_text_chars=args.max_chars)
    port = args.port if args.port is not None else int(os.environ.get(PORT_ENV_VAR,
                                                                      str(DEFAULT_PORT)))
    uvicorn.run(create_app(bundle), host=args.host, port=port)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="essaycheck",
                                     description="Formative feedback on science explanations: "
                                                 "train vector spaces, build content pyramids, "
                                                 "assess essays, tune, diagnose, serve.")
    sub = parser.add_subparsers(dest="command", required=True)

    def corpus_format(p):
        p.add_argument("--format", choices=("delimited-table", "structured-records"),
                       help="corpus file format (default: inferred from extension)")

    p = sub.add_parser("train-wtmf", help="train a weighted matrix-factorization space")
    p.add_argument("--corpus", required=True)
    corpus_format(p)
    p.add_argument("--dim", type=int, default=100)
    p.add_argument("--min-df", type=int, default=1)
    p.add_argument("--missing-weight", type=float, default=0.01)
    p.add_argument("--regularizer", type=float, default=20.0)
    p.add_argument("--sweeps", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_train_wtmf)

    p = sub.add_parser("build-pyramid", help="group exemplar clauses into a labeled pyramid")
    p.add_argument("--exemplars", required=True, help="corpus file with exemplar essays")
    corpus_format(p)
    p.add_argument("--space", required=True)
    p.add_argument("--rubric", required=True)
    p.add_argument("--min-pair-sim", type=float, default=DEFAULT_MIN_PAIR_SIM)
    p.add_argument("--enumerate", type=int, metavar="K",
                   help="try every exemplar subset of size K and keep the best")
    p.add_argument("--gold", help="gold labels used to rank enumerated subsets")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_build_pyramid)

    p = sub.add_parser("assess", help="write feedback checklists and match traces")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--essay", help="plain-text essay file")
    group.add_argument("--corpus", help="corpus file of essays")
    corpus_format(p)
    p.add_argument("--pyramid", required=True)
    p.add_argument("--space", required=True)
    p.add_argument("--rubric", required=True)
    p.add_argument("--topk", type=int, default=3)
    p.add_argument("--t", type=float, default=0.55)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(handler=_cmd_assess)

    p = sub.add_parser("tune", help="grid-search topk and t against gold labels")
    p.add_argument("--corpus", required=True)
    corpus_format(p)
    p.add_argument("--gold", required=True)
    p.add_argument("--pyramid", required=True)
    p.add_argument("--space", required=True)
    p.add_argument("--rubric", required=True)
    p.add_argument("--topk-grid", type=_int_list, default=list(DEFAULT_TOPK_GRID),
                   metavar="1,2,3", help="comma-separated candidate counts")
    p.add_argument("--t-grid", type=_float_list, default=list(DEFAULT_T_GRID),
                   metavar="0.50,0.55", help="comma-separated thresholds")
    p.add_argument("--out", help="write the table here instead of stdout")
    p.set_defaults(handler=_cmd_tune)

    p = sub.add_parser("diagnose", help="accuracy, confusability, histogram, error-bin reports")
    p.add_argument("--corpus", required=True)
    corpus_format(p)
    p.add_argument("--gold", required=True)
    p.add_argument("--pyramid", required=True)
    p.add_argument("--space", required=True)
    p.add_argument("--rubric", required=True)
    p.add_argument("--topk", type=int, default=3)
    p.add_argument("--t", type=float, default=0.55)
    p.add_argument("--out", default="diagnostics", help="output directory")
    p.set_defaults(handler=_cmd_diagnose)

    p = sub.add_parser("serve", help="run the HTTP assessment service")
    p.add_argument("--pyramid", required=True)
    p.add_argument("--space", required=True)
    p.add_argument("--rubric", required=True)
    p.add_argument("--store", required=True, help="append-only revision log (JSONL)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=None,
                   help=f"default {DEFAULT_PORT}, or the {PORT_ENV_VAR} environment variable")
    p.add_argument("--topk", type=int, default=3)
    p.add_argument("--t", type=float, default=0.55)
    p.add_argument("--max-chars", type=int, default=20_000,
                   help="reject essays longer than this many characters")
    p.set_defaults(handler=_cmd_serve)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
