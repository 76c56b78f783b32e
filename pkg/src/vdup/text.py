"""Textual similarity from per-frame OCR text.

A textual document is built per video from its frames' OCR text using one
of three strategies:

* ``all_text``: concatenate every frame's text in frame order.
* ``unique_frames``: concatenate only frames whose raw text was not seen
  verbatim earlier (exact match before preprocessing).
* ``unique_words``: the distinct post-preprocessing terms, in first
  occurrence order.

Preprocessing lowercases, splits on non-alphanumeric characters, drops
numeric tokens and tokens shorter than three characters, and applies a
small deterministic suffix lemmatizer (plural -s/-es, -ing, -ed) with an
exception dictionary for common UI words that the rules would mangle.

Documents are scored against an index with a TF-IDF formula using
square-root term-frequency damping and document length normalization:

    score(q, d) = sum over t in q∩d of sqrt(tf(t,d)) * idf(t)^2 / sqrt(|d|)
    idf(t) = 1 + ln(N / (df(t) + 1))

Raw scores are unbounded, so for fusion they are scaled per query by the
corpus maximum: the best candidate maps to 1 and a corpus with no term
overlap maps to all zeros. Scaling preserves the ranking.
"""

from __future__ import annotations

import json
import math
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from sklearn.base import BaseEstimator

from .corpus import VideoReport
from .errors import ParseError, ValidationError

ALL_TEXT = "all_text"
UNIQUE_FRAMES = "unique_frames"
UNIQUE_WORDS = "unique_words"
DOC_STRATEGIES = (ALL_TEXT, UNIQUE_FRAMES, UNIQUE_WORDS)

_TOKEN_SPLIT = re.compile(r"[^a-z0-9]+")
_VOWELS = set("aeiouy")

# UI vocabulary the suffix rules would otherwise mangle
_LEMMA_EXCEPTIONS = {
    "settings": "setting",
    "setting": "setting",
    "ratings": "rating",
    "rating": "rating",
    "warnings": "warning",
    "warning": "warning",
    "during": "during",
    "nothing": "nothing",
    "something": "something",
    "anything": "anything",
    "everything": "everything",
    "morning": "morning",
    "evening": "evening",
}


def _undouble(stem: str) -> str:
    if len(stem) >= 2 and stem[-1] == stem[-2] and stem[-1] not in "aeioulsz":
        return stem[:-1]
    return stem


def _lemmatize(token: str) -> str:
    if token in _LEMMA_EXCEPTIONS:
        return _LEMMA_EXCEPTIONS[token]
    # plural suffixes
    if token.endswith("ies") and len(token) > 4:
        return token[:-3] + "y"
    if token.endswith(("sses", "shes", "ches", "xes", "zes")):
        return token[:-2]
    if token.endswith("s") and not token.endswith(("ss", "us", "is")):
        return token[:-1]
    # gerund
    if token.endswith("ing") and len(token) > 5:
        stem = token[:-3]
        if any(c in _VOWELS for c in stem):
            return _undouble(stem)
        return token
    # past tense
    if token.endswith("ied") and len(token) > 4:
        return token[:-3] + "y"
    if token.endswith("eed"):
        return token
    if token.endswith("ed") and len(token) > 4:
        stem = token[:-2]
        if any(c in _VOWELS for c in stem):
            return _undouble(stem)
    return token


def _keep(token: str) -> bool:
    return len(token) >= 3 and not token.isdigit()


def preprocess(raw: str) -> list[str]:
    """Normalized term list; idempotent under re-joining and re-processing."""
    tokens = []
    for tok in _TOKEN_SPLIT.split(raw.lower()):
        if not _keep(tok):
            continue
        lemma = _lemmatize(tok)
        if _keep(lemma):
            tokens.append(lemma)
    return tokens


def build_document(report: VideoReport, strategy: str = ALL_TEXT) -> str:
    """Raw textual document for one report under the given strategy."""
    if strategy not in DOC_STRATEGIES:
        raise ValidationError(f"unknown document strategy {strategy!r}")
    texts = [fr.ocr_text or "" for fr in report.frames]
    if strategy == ALL_TEXT:
        parts = [t for t in texts if t]
    elif strategy == UNIQUE_FRAMES:
        seen: set[str] = set()
        parts = []
        for t in texts:
            if t and t not in seen:
                seen.add(t)
                parts.append(t)
    else:  # UNIQUE_WORDS
        parts = list(dict.fromkeys(preprocess(" ".join(texts))))
    return " ".join(parts)


@dataclass
class TextDocument:
    """A report's textual document: raw text plus its normalized terms."""

    report_id: str
    raw: str
    tokens: list[str] = field(default_factory=list)

    @classmethod
    def from_report(cls, report: VideoReport, strategy: str = ALL_TEXT) -> "TextDocument":
        raw = build_document(report, strategy)
        return cls(report_id=report.report_id, raw=raw, tokens=preprocess(raw))


class TextSimilarityIndex(BaseEstimator):
    """Corpus text index: document count, document frequencies, doc lengths.

    ``fit`` indexes a document collection; ``score`` ranks it against a
    query document. Documents with no tokens are counted in N but carry no
    index entries and always score 0.
    """

    def __init__(self, strategy: str = ALL_TEXT):
        self.strategy = strategy

    def fit(self, documents: Sequence[TextDocument], y=None) -> "TextSimilarityIndex":
        if not documents:
            raise ValidationError("cannot index an empty document collection")
        ids = [d.report_id for d in documents]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate report ids in document collection")
        self.n_docs_ = len(documents)
        self.df_: dict[str, int] = {}
        self.doc_len_: dict[str, int] = {}
        self._doc_tf: dict[str, dict[str, int]] = {}
        for doc in documents:
            if not doc.tokens:
                continue
            self.doc_len_[doc.report_id] = len(doc.tokens)
            tf: dict[str, int] = {}
            for t in doc.tokens:
                tf[t] = tf.get(t, 0) + 1
            self._doc_tf[doc.report_id] = tf
            for t in tf:
                self.df_[t] = self.df_.get(t, 0) + 1
        self._all_ids = ids
        return self

    def _check_fitted(self) -> None:
        if not hasattr(self, "n_docs_"):
            raise ValidationError("text index is not built; call fit() or load()")

    def idf(self, term: str) -> float:
        self._check_fitted()
        return 1.0 + math.log(self.n_docs_ / (self.df_.get(term, 0) + 1))

    def raw_score(self, query_tokens: Sequence[str], doc_id: str,
                  doc_tf: Optional[dict[str, int]] = None) -> float:
        """Unnormalized retrieval score of one document for the query."""
        self._check_fitted()
        tf = doc_tf if doc_tf is not None else self._doc_tf.get(doc_id)
        if not tf:
            return 0.0
        length = self.doc_len_.get(doc_id) if doc_tf is None else sum(tf.values())
        if not length:
            return 0.0
        score = 0.0
        for t in set(query_tokens):
            count = tf.get(t)
            if count:
                score += math.sqrt(count) * self.idf(t) ** 2
        return score / math.sqrt(length)

    def score(self, query: TextDocument,
              corpus_docs: Optional[Iterable[TextDocument]] = None) -> dict[str, float]:
        """Normalized textual similarity per corpus document.

        Scores are divided by the corpus maximum so the top document maps
        to 1; a corpus with no overlap at all maps to all zeros.
        """
        self._check_fitted()
        if corpus_docs is None:
            raw = {rid: self.raw_score(query.tokens, rid) for rid in self._all_ids}
        else:
            raw = {}
            for doc in corpus_docs:
                tf: dict[str, int] = {}
                for t in doc.tokens:
                    tf[t] = tf.get(t, 0) + 1
                raw[doc.report_id] = self.raw_score(query.tokens, doc.report_id, doc_tf=tf)
        top = max(raw.values(), default=0.0)
        if top <= 0.0:
            return {rid: 0.0 for rid in raw}
        return {rid: s / top for rid, s in raw.items()}

    def save(self, path) -> None:
        self._check_fitted()
        payload = {
            "N": self.n_docs_,
            "df": dict(sorted(self.df_.items())),
            "doc_len": dict(sorted(self.doc_len_.items())),
        }
        tmp = Path(path).with_suffix(".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(payload, fh)
        os.replace(tmp, path)

    @classmethod
    def load(cls, path, strategy: str = ALL_TEXT) -> "TextSimilarityIndex":
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
            index = cls(strategy=strategy)
            index.n_docs_ = int(data["N"])
            index.df_ = {str(t): int(c) for t, c in data["df"].items()}
            index.doc_len_ = {str(i): int(l) for i, l in data["doc_len"].items()}
        except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
            raise ParseError(f"{path}: malformed text index ({exc})") from exc
        if index.n_docs_ < 1:
            raise ParseError(f"{path}: text index has no documents")
        index._doc_tf = {}
        index._all_ids = list(index.doc_len_.keys())
        return index


def score_text(query: TextDocument, index: TextSimilarityIndex,
               corpus_docs: Iterable[TextDocument]) -> dict[str, float]:
    """Functional form of :meth:`TextSimilarityIndex.score`."""
    return index.score(query, corpus_docs=corpus_docs)
