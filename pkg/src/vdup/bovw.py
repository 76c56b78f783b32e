"""Visual vocabulary and bag-of-visual-words TF-IDF encoding.

A :class:`VisualCodebook` quantizes frame feature vectors into discrete
visual words (nearest centroid by Euclidean distance, ties to the lowest
centroid index). Videos are then represented as sparse TF-IDF vectors over
word ids and compared by cosine similarity, which is the unordered visual
similarity of two videos.

Sparse vectors are plain ``{term_id: weight}`` dicts with no zero-weight
entries.

The k-means here is intentionally hand-rolled: training must be bit-for-bit
reproducible from (features order, k, seed), ties must resolve to the
lowest index, empty clusters are re-seeded to the point currently farthest
from its centroid, and the per-iteration inertia trace is kept so callers
can assert it never increases.
"""

from __future__ import annotations

import json
import math
import os
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .errors import InsufficientDataError, ParseError, ValidationError
from .validation import as_feature_matrix

SparseVector = dict  # term id -> positive weight

CODEBOOK_PRESETS = (1000, 5000, 10000)


def build_tf(video_words: Sequence[int]) -> SparseVector:
    """Raw word counts for one video's visual-word list."""
    if len(video_words) == 0:
        raise ValidationError("cannot build TF for an empty word list")
    tf: SparseVector = {}
    for w in video_words:
        tf[int(w)] = tf.get(int(w), 0) + 1
    return tf


class IdfTable:
    """Document frequencies over a reference corpus of word documents."""

    def __init__(self, doc_count: int, df: Mapping[int, int]):
        if doc_count < 1:
            raise ValidationError("IDF table needs at least one reference document")
        for w, c in df.items():
            if not (0 <= c <= doc_count):
                raise ValidationError(f"df({w})={c} outside [0, N={doc_count}]")
        self.doc_count = int(doc_count)
        self.df = {int(w): int(c) for w, c in df.items()}

    def idf(self, word: int) -> float:
        # Smoothed form: defined for unseen words (df=0) and floored at 1
        # when a word occurs in every document.
        return math.log((self.doc_count + 1) / (self.df.get(int(word), 0) + 1)) + 1.0

    def save(self, path) -> None:
        payload = {"N": self.doc_count, "df": {str(w): c for w, c in sorted(self.df.items())}}
        tmp = Path(path).with_suffix(".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(payload, fh)
        os.replace(tmp, path)

    @classmethod
    def load(cls, path) -> "IdfTable":
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
            return cls(int(data["N"]), {int(w): int(c) for w, c in data["df"].items()})
        except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
            raise ParseError(f"{path}: malformed IDF file ({exc})") from exc


def build_idf(reference_docs: Iterable[Sequence[int]]) -> IdfTable:
    """Document frequency per word over a reference corpus, one word list
    per document (each reference image is one document)."""
    df: dict[int, int] = {}
    n = 0
    for doc in reference_docs:
        n += 1
        for w in set(int(x) for x in doc):
            df[w] = df.get(w, 0) + 1
    if n == 0:
        raise ValidationError("reference corpus is empty")
    return IdfTable(n, df)


def encode_tfidf(tf: SparseVector, idf: IdfTable) -> SparseVector:
    """weight(w) = tf(w) * idf(w); zero weights are dropped."""
    if not tf:
        raise ValidationError("cannot encode an empty TF vector")
    out: SparseVector = {}
    for w, count in tf.items():
        weight = count * idf.idf(w)
        if weight != 0.0:
            out[w] = weight
    return out


def cosine(a: SparseVector, b: SparseVector) -> float:
    """Cosine over shared term ids; 0 if either side is empty or zero."""
    if not a or not b:
        return 0.0
    dot = 0.0
    small, large = (a, b) if len(a) <= len(b) else (b, a)
    for term, wa in small.items():
        wb = large.get(term)
        if wb is not None:
            dot += wa * wb
    if dot == 0.0:
        return 0.0
    na = math.sqrt(sum(w * w for w in a.values()))
    nb = math.sqrt(sum(w * w for w in b.values()))
    if na == 0.0 or nb == 0.0:
        return 0.0
    # rounding can push identical vectors a hair past 1
    return min(1.0, max(0.0, dot / (na * nb)))


def _kmeans_pp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centroids = np.empty((k, X.shape[1]), dtype=np.float64)
    first = int(rng.integers(n))
    centroids[0] = X[first]
    dist_sq = np.sum((X - centroids[0]) ** 2, axis=1)
    for c in range(1, k):
        total = dist_sq.sum()
        if total == 0.0:
            # all remaining points coincide with a centroid; fall back to
            # uniform choice so we still return k centroids
            choice = int(rng.integers(n))
        else:
            choice = int(rng.choice(n, p=dist_sq / total))
        centroids[c] = X[choice]
        dist_sq = np.minimum(dist_sq, np.sum((X - centroids[c]) ** 2, axis=1))
    return centroids


def _assign(X: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # argmin resolves ties to the lowest centroid index
    d = np.sum(X * X, axis=1)[:, None] - 2.0 * X @ centroids.T + np.sum(centroids * centroids, axis=1)[None, :]
    np.maximum(d, 0.0, out=d)
    labels = np.argmin(d, axis=1)
    return labels, d[np.arange(X.shape[0]), labels]


class VisualCodebook(BaseEstimator):
    """k-means visual vocabulary with deterministic training.

    Parameters
    ----------
    k : int
        Vocabulary size. The reference configurations are 1000, 5000 and
        10000 words; any k >= 1 is accepted for small corpora.
    seed : int
        Seeds the k-means++ initialization; same (features, k, seed) gives
        a bit-identical codebook.
    max_iters, tol : stopping rule (centroid shift below tol).

    Attributes
    ----------
    centroids_ : (k, dim) array
    inertia_ : float
    inertia_history_ : list of per-iteration inertia values (non-increasing)
    """

    def __init__(self, k: int = 1000, seed: int = 0, max_iters: int = 100, tol: float = 1e-4):
        self.k = k
        self.seed = seed
        self.max_iters = max_iters
        self.tol = tol

    def fit(self, X, y=None) -> "VisualCodebook":
        X = as_feature_matrix(X)
        if self.k < 1:
            raise ValidationError(f"k must be >= 1, got {self.k}")
        if X.shape[0] < self.k:
            raise InsufficientDataError(
                f"need at least k={self.k} feature vectors, got {X.shape[0]}"
            )
        rng = np.random.default_rng(self.seed)
        centroids = _kmeans_pp_init(X, self.k, rng)
        history: list[float] = []
        for _ in range(self.max_iters):
            labels, dist_sq = _assign(X, centroids)
            history.append(float(dist_sq.sum()))
            new_centroids = centroids.copy()
            counts = np.bincount(labels, minlength=self.k)
            for c in range(self.k):
                if counts[c] > 0:
                    new_centroids[c] = X[labels == c].mean(axis=0)
            empty = [c for c in range(self.k) if counts[c] == 0]
            if empty:
                # hand each empty cluster the point currently farthest from
                # its own centroid, farthest first, without reusing points
                order = np.argsort(-dist_sq, kind="stable")
                taken = 0
                for c in empty:
                    new_centroids[c] = X[order[taken]]
                    taken += 1
            shift = float(np.max(np.linalg.norm(new_centroids - centroids, axis=1)))
            centroids = new_centroids
            if shift < self.tol:
                break
        labels, dist_sq = _assign(X, centroids)
        history.append(float(dist_sq.sum()))
        self.centroids_ = centroids
        self.labels_ = labels
        self.inertia_ = history[-1]
        self.inertia_history_ = history
        self.extractor_id_ = ""
        return self

    def _check_fitted(self) -> None:
        if not hasattr(self, "centroids_"):
            raise ValidationError("codebook is not trained; call fit() or load()")

    @property
    def dim(self) -> int:
        self._check_fitted()
        return int(self.centroids_.shape[1])

    def predict(self, vectors) -> list[int]:
        """Visual word id (nearest centroid) per input vector."""
        self._check_fitted()
        X = as_feature_matrix(vectors)
        if X.shape[1] != self.dim:
            raise ValidationError(
                f"vectors have dim {X.shape[1]}, codebook expects {self.dim}"
            )
        labels, _ = _assign(X, self.centroids_)
        return [int(w) for w in labels]

    def assign_words(self, frame_vectors) -> list[int]:
        return self.predict(frame_vectors)

    def save(self, path) -> None:
        self._check_fitted()
        payload = {
            "k": self.k,
            "dim": self.dim,
            "seed": self.seed,
            "extractor_id": self.extractor_id_,
            "centroids": [[float(x) for x in row] for row in self.centroids_],
        }
        tmp = Path(path).with_suffix(".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(payload, fh)
        os.replace(tmp, path)

    @classmethod
    def load(cls, path) -> "VisualCodebook":
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
            cb = cls(k=int(data["k"]), seed=int(data["seed"]))
            cb.centroids_ = np.asarray(data["centroids"], dtype=np.float64)
            cb.extractor_id_ = data.get("extractor_id", "")
        except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
            raise ParseError(f"{path}: malformed codebook file ({exc})") from exc
        if cb.centroids_.ndim != 2 or cb.centroids_.shape[0] != cb.k:
            raise ParseError(f"{path}: centroid count does not match k={cb.k}")
        if not np.all(np.isfinite(cb.centroids_)):
            raise ParseError(f"{path}: centroids contain NaN/Inf")
        cb.inertia_ = float("nan")
        cb.inertia_history_ = []
        return cb


def train_codebook(
    features,
    k: int,
    seed: int,
    max_iters: int = 100,
    tol: float = 1e-4,
    extractor_id: str = "",
) -> VisualCodebook:
    cb = VisualCodebook(k=k, seed=seed, max_iters=max_iters, tol=tol).fit(features)
    cb.extractor_id_ = extractor_id
    return cb


def video_words(report_frames_vectors: Sequence[Sequence[np.ndarray]],
                codebook: VisualCodebook) -> list[list[int]]:
    """Word ids per frame: one word per vector, so single-vector frames get
    one word and multi-descriptor frames one per descriptor."""
    out = []
    for vectors in report_frames_vectors:
        out.append(codebook.predict(vectors) if len(vectors) else [])
    return out


def encode_video(words_per_frame: Sequence[Sequence[int]], idf: IdfTable,
                 flat: Optional[Sequence[int]] = None) -> SparseVector:
    """TF-IDF vector for a whole video from its per-frame word lists."""
    all_words = list(flat) if flat is not None else [w for frame in words_per_frame for w in frame]
    return encode_tfidf(build_tf(all_words), idf)
