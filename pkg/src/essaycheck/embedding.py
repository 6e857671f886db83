"""Clause vectors: WTMF training, fold-in, refinement, and external spaces.

The factorization model is X ~ P Q^T over a sparse tf-idf term-sentence
matrix, minimizing

    sum_ij W_ij (X_ij - P_i . Q_j)^2 + reg * (||P||^2 + ||Q||^2)

with W_ij = 1 on observed cells and missing_weight on missing cells, fit by
alternating least squares. Unseen clauses are folded in by the same
regularized weighted least-squares solve against the fixed word vectors.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import Essay
from .segmenter import Clause, split_sentences

_logger = logging.getLogger(__name__)

_TOKEN_SPLIT = re.compile(r"[^a-z0-9]+")

PROVENANCES = ("trained", "loaded", "refined", "concatenated")
VECTOR_FILE_FORMAT = "wtmf-vector-dictionary"


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric runs."""
    return [t for t in _TOKEN_SPLIT.split(text.lower()) if t]


@dataclass(frozen=True)
class Vocabulary:
    words: tuple[str, ...]
    doc_freq: tuple[int, ...]
    n_docs: int

    def __post_init__(self) -> None:
        if len(self.words) != len(self.doc_freq):
            raise ValueError("words and doc_freq lengths differ")
        if any(f < 1 for f in self.doc_freq):
            raise ValueError("document frequencies must be >= 1")
        object.__setattr__(self, "_index", {w: i for i, w in enumerate(self.words)})

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self._index  # type: ignore[attr-defined]

    def word_id(self, word: str) -> int:
        return self._index[word]  # type: ignore[attr-defined]

    def idf(self, word_id: int) -> float:
        return math.log(self.n_docs / self.doc_freq[word_id])


class TermClauseMatrix:
    """Sparse tf-idf matrix; rows are words, columns are training sentences."""

    def __init__(self, vocab: Vocabulary, n_cols: int,
                 cols: Sequence[tuple[np.ndarray, np.ndarray]]):
        if len(cols) != n_cols:
            raise ValueError("column count mismatch")
        for ids, weights in cols:
            if len(ids) != len(weights):
                raise ValueError("ragged column")
            if np.any(weights <= 0):
                raise ValueError("stored weights must be > 0")
            if len(ids) and (ids.min() < 0 or ids.max() >= len(vocab)):
                raise ValueError("word id out of range")
        self.vocab = vocab
        self.n_cols = n_cols
        self.cols = tuple((np.asarray(i, dtype=np.intp), np.asarray(w, dtype=np.float64))
                          for i, w in cols)

    @property
    def n_rows(self) -> int:
        return len(self.vocab)

    def rows(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """Row-major view: per word, (observed column ids, cell values)."""
        ids: list[list[int]] = [[] for _ in range(self.n_rows)]
        vals: list[list[float]] = [[] for _ in range(self.n_rows)]
        for j, (word_ids, weights) in enumerate(self.cols):
            for w, x in zip(word_ids.tolist(), weights.tolist()):
                ids[w].append(j)
                vals[w].append(x)
        return [(np.asarray(i, dtype=np.intp), np.asarray(v, dtype=np.float64))
                for i, v in zip(ids, vals)]

    @property
    def n_observed(self) -> int:
        return sum(len(ids) for ids, _ in self.cols)


def build_term_matrix(corpus: Iterable[Essay], min_df: int = 1) -> tuple[Vocabulary, TermClauseMatrix]:
    """Tokenize a corpus into a sparse tf-idf term-sentence matrix.

    Each sentence of each essay is one training column; tf-idf = tf * ln(N/df)
    where N is the sentence count. Words below min_df are dropped; cells whose
    idf is 0 (ubiquitous words) are pruned.

    Raises:
        ValueError: when no vocabulary or no nonzero cell survives filtering.
    """
    if min_df < 1:
        raise ValueError("min_df must be >= 1")
    units: list[list[str]] = []
    for essay in corpus:
        for sentence in split_sentences(essay.text, essay.id):
            tokens = tokenize(sentence.text)
            if tokens:
                units.append(tokens)
    if not units:
        raise ValueError("corpus produced no training sentences")
    df: Counter[str] = Counter()
    for tokens in units:
        df.update(set(tokens))
    words = tuple(sorted(w for w, f in df.items() if f >= min_df))
    if not words:
        raise ValueError(
            f"empty vocabulary after min_df={min_df} filtering; lower min_df")
    vocab = Vocabulary(words=words, doc_freq=tuple(df[w] for w in words), n_docs=len(units))
    idf = np.array([vocab.idf(i) for i in range(len(vocab))])
    cols = []
    n_nonzero = 0
    for tokens in units:
        counts = Counter(t for t in tokens if t in vocab)
        ids, weights = [], []
        for word, tf in sorted(counts.items()):
            i = vocab.word_id(word)
            weight = tf * idf[i]
            if weight > 0:
                ids.append(i)
                weights.append(weight)
        n_nonzero += len(ids)
        cols.append((np.asarray(ids, dtype=np.intp), np.asarray(weights, dtype=np.float64)))
    if n_nonzero == 0:
        raise ValueError(
            f"term matrix has no nonzero cells at min_df={min_df}; lower min_df")
    return vocab, TermClauseMatrix(vocab, len(units), cols)


@dataclass(frozen=True)
class WtmfConfig:
    dimension: int = 100
    missing_weight: float = 0.01
    regularizer: float = 20.0
    sweeps: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        if not 0 < self.missing_weight <= 1:
            raise ValueError("missing_weight must be in (0, 1]")
        if self.regularizer <= 0:
            raise ValueError("regularizer must be > 0")
        if self.sweeps < 1:
            raise ValueError("sweeps must be >= 1")


class EmbeddingSpace:
    """Fixed word-vector dictionary plus the parameters needed to fold in clauses."""

    def __init__(self, words: Sequence[str], matrix: np.ndarray, idf: np.ndarray,
                 regularizer: float, missing_weight: float, provenance: str,
                 objective_trace: Sequence[float] = ()):
        matrix = np.asarray(matrix, dtype=np.float64)
        idf = np.asarray(idf, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != len(words):
            raise ValueError("word matrix shape does not match vocabulary")
        if idf.shape != (len(words),):
            raise ValueError("idf length does not match vocabulary")
        if not np.all(np.isfinite(matrix)):
            raise ValueError("word vectors contain non-finite components")
        if provenance not in PROVENANCES:
            raise ValueError(f"provenance must be one of {PROVENANCES}")
        self.words = tuple(words)
        self.matrix = matrix
        self.idf = idf
        self.regularizer = float(regularizer)
        self.missing_weight = float(missing_weight)
        self.provenance = provenance
        self.objective_trace = tuple(float(v) for v in objective_trace)
        self._index = {w: i for i, w in enumerate(self.words)}
        self._gram: np.ndarray | None = None
        self._id: str | None = None

    @property
    def dimension(self) -> int:
        return self.matrix.shape[1]

    def __contains__(self, word: str) -> bool:
        return word in self._index

    def word_id(self, word: str) -> int:
        return self._index[word]

    def vector(self, word: str) -> np.ndarray:
        return self.matrix[self._index[word]]

    @property
    def word_vectors(self) -> dict[str, np.ndarray]:
        return {w: self.matrix[i] for i, w in enumerate(self.words)}

    def gram(self) -> np.ndarray:
        if self._gram is None:
            self._gram = self.matrix.T @ self.matrix
        return self._gram

    @property
    def id(self) -> str:
        if self._id is None:
            hasher = hashlib.sha256()
            hasher.update(f"{self.dimension} {len(self.words)} "
                          f"{self.regularizer!r} {self.missing_weight!r}\n".encode())
            for i, word in enumerate(self.words):
                hasher.update(_record_line(word, self.idf[i], self.matrix[i]).encode())
            self._id = hasher.hexdigest()
        return self._id


@dataclass(eq=False)
class ClauseVector:
    """A clause's semantic vector with provenance and a cached norm."""

    clause_key: tuple[str, int, int]
    text: str
    vector: np.ndarray
    norm: float
    space_id: str
    provenance: str = "trained"

    @property
    def flagged(self) -> bool:
        """True when the clause had no usable in-vocabulary word."""
        return self.norm == 0.0

    @property
    def essay_id(self) -> str:
        return self.clause_key[0]


def cosine(a, b) -> float:
    """Cosine similarity of two equal-dimension vectors.

    Raises:
        ValueError: on dimension mismatch or a zero-norm input (flagged
            vectors must be filtered out before matching).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine of a zero-norm vector is undefined")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def cosine_between(u: ClauseVector, v: ClauseVector) -> float:
    """Cosine over ClauseVectors using their cached norms."""
    if u.norm == 0.0 or v.norm == 0.0:
        raise ValueError("cosine of a flagged zero vector is undefined")
    return float(np.clip(u.vector @ v.vector / (u.norm * v.norm), -1.0, 1.0))


def _solve(A: np.ndarray, b: np.ndarray, context: str) -> np.ndarray:
    try:
        return np.linalg.solve(A, b)
    except np.linalg.LinAlgError:
        raise ValueError(
            f"singular normal-equation system {context}; increase the regularizer") from None


def wtmf_objective(P: np.ndarray, Q: np.ndarray, matrix: TermClauseMatrix,
                   regularizer: float, missing_weight: float) -> float:
    """Full WTMF objective; missing cells enter through the Frobenius term."""
    total = missing_weight * float(np.sum((P.T @ P) * (Q.T @ Q)))
    for j, (ids, x) in enumerate(matrix.cols):
        if not len(ids):
            continue
        xhat = P[ids] @ Q[j]
        err = x - xhat
        total += float(err @ err) - missing_weight * float(xhat @ xhat)
    total += regularizer * (float(np.sum(P * P)) + float(np.sum(Q * Q)))
    return total


def wtmf_row_objective(row_vector: np.ndarray, Q: np.ndarray,
                       obs_cols: np.ndarray, obs_vals: np.ndarray,
                       regularizer: float, missing_weight: float) -> float:
    """Terms of the WTMF objective that depend on one row of P.

    Evaluating only these terms keeps finite-difference checks free of
    cancellation noise from the rest of the objective.
    """
    xhat_obs = Q[obs_cols] @ row_vector
    err = obs_vals - xhat_obs
    full = Q @ row_vector
    return (float(err @ err)
            + missing_weight * (float(full @ full) - float(xhat_obs @ xhat_obs))
            + regularizer * float(row_vector @ row_vector))


def wtmf_gradient_row(row_vector: np.ndarray, Q: np.ndarray,
                      obs_cols: np.ndarray, obs_vals: np.ndarray,
                      regularizer: float, missing_weight: float) -> np.ndarray:
    """Analytic gradient of the objective w.r.t. one row of P."""
    gram = Q.T @ Q
    q_obs = Q[obs_cols]
    return 2.0 * (missing_weight * (gram @ row_vector)
                  + (1.0 - missing_weight) * (q_obs.T @ (q_obs @ row_vector))
                  - q_obs.T @ obs_vals
                  + regularizer * row_vector)


def train_wtmf(matrix: TermClauseMatrix, config: WtmfConfig = WtmfConfig()) -> EmbeddingSpace:
    """Factorize the term matrix by alternating least squares.

    Initialization is drawn from the seeded generator in the config, so runs
    are bit-reproducible. The per-sweep objective is recorded on the returned
    space and checked non-increasing.

    Raises:
        ValueError: singular normal equations or non-finite values (the error
            names the sweep).
        RuntimeError: objective increase beyond float tolerance (ALS with
            exact solves cannot increase the objective).
    """
    V, C, K = matrix.n_rows, matrix.n_cols, config.dimension
    rng = np.random.default_rng(config.seed)
    P = 0.01 * rng.standard_normal((V, K))
    Q = 0.01 * rng.standard_normal((C, K))
    rows = matrix.rows()
    cols = matrix.cols
    lam, w_m = config.regularizer, config.missing_weight
    reg_eye = lam * np.eye(K)
    trace: list[float] = []
    previous = math.inf
    for sweep in range(1, config.sweeps + 1):
        gram_q = Q.T @ Q
        base = w_m * gram_q + reg_eye
        for i, (obs, vals) in enumerate(rows):
            if not len(obs):
                P[i] = 0.0
                continue
            q_obs = Q[obs]
            A = base + (1.0 - w_m) * (q_obs.T @ q_obs)
            P[i] = _solve(A, q_obs.T @ vals, f"at sweep {sweep}")
        gram_p = P.T @ P
        base = w_m * gram_p + reg_eye
        for j, (obs, vals) in enumerate(cols):
            if not len(obs):
                Q[j] = 0.0
                continue
            p_obs = P[obs]
            A = base + (1.0 - w_m) * (p_obs.T @ p_obs)
            Q[j] = _solve(A, p_obs.T @ vals, f"at sweep {sweep}")
        if not (np.all(np.isfinite(P)) and np.all(np.isfinite(Q))):
            raise ValueError(f"non-finite values detected at sweep {sweep}")
        objective = wtmf_objective(P, Q, matrix, lam, w_m)
        if not math.isfinite(objective):
            raise ValueError(f"non-finite objective at sweep {sweep}")
        if objective > previous + 1e-9 * max(1.0, abs(previous)):
            raise RuntimeError(
                f"ALS objective increased at sweep {sweep}: {previous} -> {objective}")
        trace.append(objective)
        previous = objective
        _logger.debug("wtmf sweep %d: objective %.6f", sweep, objective)
    idf = np.array([matrix.vocab.idf(i) for i in range(V)])
    return EmbeddingSpace(words=matrix.vocab.words, matrix=P, idf=idf,
                          regularizer=lam, missing_weight=w_m,
                          provenance="trained", objective_trace=trace)


def _fold_vector(space: EmbeddingSpace, text: str) -> np.ndarray:
    counts: Counter[str] = Counter(t for t in tokenize(text) if t in space)
    ids = []
    x = []
    for word, tf in sorted(counts.items()):
        i = space.word_id(word)
        weight = tf * space.idf[i]
        # Words with idf 0 were missing cells during training; keep them missing.
        if weight > 0:
            ids.append(i)
            x.append(weight)
    if not ids:
        return np.zeros(space.dimension)
    p_obs = space.matrix[np.asarray(ids, dtype=np.intp)]
    w_m = space.missing_weight
    A = (w_m * space.gram()
         + (1.0 - w_m) * (p_obs.T @ p_obs)
         + space.regularizer * np.eye(space.dimension))
    return _solve(A, p_obs.T @ np.asarray(x), "during fold-in")


def fold_in_clause(clause: Clause, space: EmbeddingSpace) -> ClauseVector:
    """Solve the regularized weighted least-squares fold-in for one clause.

    Clause tf uses raw counts times the training idf. A clause with zero
    usable in-vocabulary words yields a flagged zero vector, not an error.
    """
    vector = _fold_vector(space, clause.text)
    return ClauseVector(clause_key=clause.key, text=clause.text, vector=vector,
                        norm=float(np.linalg.norm(vector)), space_id=space.id,
                        provenance=space.provenance)


def embed_text(space: EmbeddingSpace, text: str) -> np.ndarray:
    """Fold in free-standing text (rubric statements); returns the raw vector."""
    return _fold_vector(space, text)


@dataclass(frozen=True)
class WordRanking:
    """tf-idf-derived salience ranks; 1 = most domain-salient."""

    rank: Mapping[str, int]
    scores: Mapping[str, float]

    def __post_init__(self) -> None:
        ranks = sorted(self.rank.values())
        if ranks != list(range(1, len(ranks) + 1)):
            raise ValueError("ranks must be a permutation of 1..N")

    def __contains__(self, word: str) -> bool:
        return word in self.rank

    def __len__(self) -> int:
        return len(self.rank)


def tfidf_rank(corpus: Iterable[Essay]) -> WordRanking:
    """Rank words by descending corpus-level tf-idf mass.

    Documents are the corpus records; mass(w) = total_tf(w) * ln(N/df(w)).
    Score ties fall back to descending term frequency, then alphabetical, so
    degenerate corpora (a single document, where every idf is 0) still rank
    frequent words first.
    """
    docs = [tokenize(essay.text) for essay in corpus]
    docs = [d for d in docs if d]
    if not docs:
        raise ValueError("corpus is empty")
    n = len(docs)
    tf: Counter[str] = Counter()
    df: Counter[str] = Counter()
    for tokens in docs:
        tf.update(tokens)
        df.update(set(tokens))
    scores = {w: tf[w] * math.log(n / df[w]) for w in tf}
    ordered = sorted(scores, key=lambda w: (-scores[w], -tf[w], w))
    return WordRanking(rank={w: i + 1 for i, w in enumerate(ordered)}, scores=scores)


def refine_space(space: EmbeddingSpace, ranking: WordRanking,
                 neighbors: int = 10, iterations: int = 10,
                 strength: float = 0.1) -> EmbeddingSpace:
    """Adjust ranked word vectors toward rank-near neighbors.

    Per pass, each ranked word's `neighbors` cosine-nearest ranked words are
    re-ordered by ranking proximity; the nearer half pulls the word's vector
    (weight 1/position) and the farther half pushes it (weight 1/position
    from the far end), scaled by `strength`. Updates within a pass read the
    pass-start vectors, so the result is order-independent. Returns a new
    space; the input is unchanged.

    Raises:
        ValueError: neighbors < 1 or iterations < 1.
    """
    if neighbors < 1:
        raise ValueError("neighbors must be >= 1")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    matrix = space.matrix.copy()
    ranked = [i for i, w in enumerate(space.words) if w in ranking]
    for _ in range(iterations):
        base = matrix.copy()
        norms = np.linalg.norm(base[ranked], axis=1) if ranked else np.array([])
        valid = [i for i, norm in zip(ranked, norms) if norm > 0]
        if len(valid) < 2:
            break
        unit = base[valid] / np.linalg.norm(base[valid], axis=1, keepdims=True)
        sims = unit @ unit.T
        for a_pos, a in enumerate(valid):
            order = sorted((b_pos for b_pos in range(len(valid)) if b_pos != a_pos),
                           key=lambda b_pos: (-sims[a_pos, b_pos], space.words[valid[b_pos]]))
            chosen = order[:neighbors]
            rank_a = ranking.rank[space.words[a]]
            chosen.sort(key=lambda b_pos: (abs(ranking.rank[space.words[valid[b_pos]]] - rank_a),
                                           space.words[valid[b_pos]]))
            n = len(chosen)
            if n == 0:
                continue
            half = math.ceil(n / 2)
            delta = np.zeros(space.dimension)
            for position, b_pos in enumerate(chosen, start=1):
                direction = base[valid[b_pos]] - base[a]
                if position <= half:
                    delta += direction / position
                else:
                    delta -= direction / (n - position + 1)
            candidate = base[a] + strength * delta
            if np.all(np.isfinite(candidate)) and np.linalg.norm(candidate) > 1e-12:
                matrix[a] = candidate
    return EmbeddingSpace(words=space.words, matrix=matrix, idf=space.idf,
                          regularizer=space.regularizer, missing_weight=space.missing_weight,
                          provenance="refined")


def load_external_vectors(path: str | Path, clauses: Sequence[Clause]) -> list[ClauseVector]:
    """Load precomputed per-clause vectors (e.g. from a contextual model).

    The file is JSON Lines keyed by (essay_id, sentence_index, clause_index).

    Raises:
        ValueError: missing clause key (named) or ragged dimensions.
    """
    path = Path(path)
    table: dict[tuple[str, int, int], np.ndarray] = {}
    dimension: int | None = None
    with path.open(encoding="utf-8") as handle:
        for number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except ValueError as exc:
                raise ValueError(f"{path}: record {number}: invalid JSON ({exc})") from None
            try:
                key = (str(record["essay_id"]), int(record["sentence_index"]),
                       int(record["clause_index"]))
                vector = np.asarray(record["vector"], dtype=np.float64)
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}: record {number}: malformed ({exc})") from None
            if vector.ndim != 1 or not np.all(np.isfinite(vector)):
                raise ValueError(f"{path}: record {number}: invalid vector")
            if dimension is None:
                dimension = len(vector)
            elif len(vector) != dimension:
                raise ValueError(f"{path}: record {number}: ragged dimensions "
                                 f"({len(vector)} vs {dimension})")
            table[key] = vector
    hasher = hashlib.sha256()
    for key in sorted(table):
        hasher.update(repr((key, table[key].tolist())).encode())
    space_id = "external:" + hasher.hexdigest()
    result = []
    for clause in clauses:
        if clause.key not in table:
            raise ValueError(f"{path}: no vector for clause {clause.key}")
        vector = table[clause.key]
        result.append(ClauseVector(clause_key=clause.key, text=clause.text, vector=vector,
                                   norm=float(np.linalg.norm(vector)), space_id=space_id,
                                   provenance="loaded"))
    return result


def save_external_vectors(vectors: Sequence[ClauseVector], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as handle:
        for cv in vectors:
            essay_id, sentence_index, clause_index = cv.clause_key
            handle.write(json.dumps({
                "essay_id": essay_id, "sentence_index": sentence_index,
                "clause_index": clause_index,
                "vector": [float(c) for c in cv.vector],
            }) + "\n")


def concat_spaces(a: Sequence[ClauseVector], b: Sequence[ClauseVector]) -> list[ClauseVector]:
    """Concatenate two clause-vector sets with L2-normalized halves.

    Normalizing each half first makes the cosine of the concatenation the
    mean of the two per-space cosines, so neither space dominates.

    Raises:
        ValueError: clause key mismatch between the two lists.
    """
    b_by_key = {cv.clause_key: cv for cv in b}
    if {cv.clause_key for cv in a} != set(b_by_key) or len(a) != len(b):
        raise ValueError("clause key mismatch between the two vector lists")
    dim_a = len(a[0].vector) if a else 0
    dim_b = len(next(iter(b_by_key.values())).vector) if b else 0
    space_id = "concat:" + hashlib.sha256(
        f"{a[0].space_id if a else ''}|{b[0].space_id if b else ''}".encode()).hexdigest()
    result = []
    for left in a:
        right = b_by_key[left.clause_key]
        if left.flagged or right.flagged:
            vector = np.zeros(dim_a + dim_b)
        else:
            vector = np.concatenate([left.vector / left.norm, right.vector / right.norm])
        result.append(ClauseVector(clause_key=left.clause_key, text=left.text, vector=vector,
                                   norm=float(np.linalg.norm(vector)), space_id=space_id,
                                   provenance="concatenated"))
    return result


def _record_line(word: str, idf: float, vector: np.ndarray) -> str:
    components = " ".join(repr(float(c)) for c in vector)
    return f"{word} {float(idf)!r} {components}\n"


def save_space(space: EmbeddingSpace, path: str | Path) -> None:
    """Write the vector dictionary: a JSON header, then word + idf + K floats
    per record. Floats are written as shortest round-tripping reprs, so the
    round-trip is bit-exact."""
    header = {"format": VECTOR_FILE_FORMAT, "dimension": space.dimension,
              "vocabulary_size": len(space.words), "regularizer": space.regularizer,
              "missing_weight": space.missing_weight}
    with Path(path).open("w", encoding="utf-8") as handle:
        handle.write(json.dumps(header) + "\n")
        for i, word in enumerate(space.words):
            handle.write(_record_line(word, space.idf[i], space.matrix[i]))


def load_space(path: str | Path) -> EmbeddingSpace:
    """Read a vector dictionary written by save_space; provenance = loaded.

    Raises:
        ValueError: malformed header, record count mismatch, or ragged record.
    """
    path = Path(path)
    with path.open(encoding="utf-8") as handle:
        header_line = handle.readline()
        try:
            header = json.loads(header_line)
            if header.get("format") != VECTOR_FILE_FORMAT:
                raise ValueError(f"not a {VECTOR_FILE_FORMAT} file")
            dimension = int(header["dimension"])
            size = int(header["vocabulary_size"])
            regularizer = float(header["regularizer"])
            missing_weight = float(header["missing_weight"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"{path}: malformed vector dictionary header: {exc}") from None
        words, idfs, rows = [], [], []
        for number, line in enumerate(handle, start=2):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != dimension + 2:
                raise ValueError(f"{path}: line {number}: expected word, idf and "
                                 f"{dimension} components, got {len(parts)} fields")
            words.append(parts[0])
            idfs.append(float(parts[1]))
            rows.append([float(p) for p in parts[2:]])
    if len(words) != size:
        raise ValueError(f"{path}: header promises {size} records, found {len(words)}")
    return EmbeddingSpace(words=words, matrix=np.array(rows).reshape(len(words), dimension),
                          idf=np.array(idfs), regularizer=regularizer,
                          missing_weight=missing_weight, provenance="loaded")
