"""Fusing visual and textual similarity into a ranked candidate list.

The fused score is a linear combination, ``(1 - w) * s_vis + w * s_txt``
with w = 0.2 by default. Because textual evidence is only sometimes
trustworthy, a selective mode measures how much vocabulary known duplicate
pairs share versus known non-duplicate pairs: when the gap between the two
group means exceeds a threshold (12.8% by default) the channels are
combined, otherwise ranking falls back to the visual score alone.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from . import sequence
from .bovw import IdfTable, SparseVector, VisualCodebook, build_tf, cosine, encode_tfidf
from .corpus import VideoReport
from .errors import ValidationError
from .text import ALL_TEXT, TextDocument, TextSimilarityIndex
from .validation import check_unit_interval

log = logging.getLogger(__name__)

VISUAL_BOVW = "bovw"
VISUAL_FLCS = "f-lcs"
VISUAL_WLCS = "w-lcs"
VISUAL_B_FLCS = "b+f-lcs"
VISUAL_B_WLCS = "b+w-lcs"
VISUAL_CONFIGS = (VISUAL_BOVW, VISUAL_FLCS, VISUAL_WLCS, VISUAL_B_FLCS, VISUAL_B_WLCS)

MODE_COMBINED = "combined"
MODE_VISUAL_ONLY = "visual_only"


def combine(s_vis: float, s_txt: float, w: float) -> float:
    """Weighted sum of the two channels; w=0 is visual only, w=1 textual only."""
    check_unit_interval(s_vis, "s_vis")
    check_unit_interval(s_txt, "s_txt")
    check_unit_interval(w, "w")
    return (1.0 - w) * s_vis + w * s_txt


def vocabulary_agreement(doc_a: TextDocument, doc_b: TextDocument) -> float:
    """Dice coefficient over the two documents' distinct-term sets.

    The agreement metric itself is pluggable in principle (Jaccard would
    slot in behind the same signature); Dice is the default here.
    """
    va, vb = set(doc_a.tokens), set(doc_b.tokens)
    if not va and not vb:
        return 0.0
    return 2.0 * len(va & vb) / (len(va) + len(vb))


def select_mode(
    dup_agreements: Sequence[float],
    nondup_agreements: Sequence[float],
    threshold: float = 0.128,
) -> tuple[float, float, str]:
    """Decide combined vs visual-only from historical agreement values.

    Returns (mean duplicate agreement, mean non-duplicate agreement, mode):
    combined when the absolute gap exceeds ``threshold``.
    """
    if not dup_agreements or not nondup_agreements:
        raise ValidationError("select_mode needs at least one pair in each group")
    v_d = sum(dup_agreements) / len(dup_agreements)
    v_nd = sum(nondup_agreements) / len(nondup_agreements)
    mode = MODE_COMBINED if abs(v_d - v_nd) > threshold else MODE_VISUAL_ONLY
    return v_d, v_nd, mode


def agreements(pairs: Iterable[tuple[TextDocument, TextDocument]]) -> list[float]:
    return [vocabulary_agreement(a, b) for a, b in pairs]


@dataclass
class FusionConfig:
    """Knobs for the final ranking stage."""

    w: float = 0.2
    visual_config: str = VISUAL_BOVW
    selective: bool = True
    va_threshold: float = 0.128
    tau: float = 0.7
    wlcs_scheme: str = sequence.DENOMINATOR_PRINTED
    strategy: str = ALL_TEXT

    def validate(self) -> None:
        check_unit_interval(self.w, "w")
        check_unit_interval(self.va_threshold, "va_threshold")
        check_unit_interval(self.tau, "tau")
        if self.visual_config not in VISUAL_CONFIGS:
            raise ValidationError(
                f"visual_config must be one of {VISUAL_CONFIGS}, got {self.visual_config!r}"
            )


@dataclass
class RankedEntry:
    report_id: str
    s_vis: float
    s_txt: float
    s_final: float


@dataclass
class RankedResult:
    """Candidates sorted by fused score (ties by report id)."""

    query_id: str
    entries: list[RankedEntry] = field(default_factory=list)
    mode_used: str = MODE_COMBINED

    def ordered_ids(self) -> list[str]:
        return [e.report_id for e in self.entries]

    def to_dict(self) -> dict:
        return {
            "query": self.query_id,
            "mode_used": self.mode_used,
            "entries": [
                {"id": e.report_id, "s_vis": e.s_vis, "s_txt": e.s_txt, "s_final": e.s_final}
                for e in self.entries
            ],
        }


class DuplicateRanker:
    """Ranks a corpus of reports against a query report.

    All reports must be indexed under one shared codebook and IDF table;
    per-report word lists, TF-IDF vectors and text documents are cached on
    first use so repeated rankings over the same corpus stay cheap.
    """

    def __init__(
        self,
        reports: dict[str, VideoReport],
        codebook: VisualCodebook,
        idf: IdfTable,
        text_index: TextSimilarityIndex,
        config: Optional[FusionConfig] = None,
    ):
        self.reports = reports
        self.codebook = codebook
        self.idf = idf
        self.text_index = text_index
        self.config = config or FusionConfig()
        self.config.validate()
        self._tfidf_cache: dict[str, SparseVector] = {}
        self._doc_cache: dict[str, TextDocument] = {}

    def _report(self, report_id: str) -> VideoReport:
        try:
            return self.reports[report_id]
        except KeyError:
            raise ValidationError(f"report {report_id!r} is not loaded in the ranker") from None

    def video_vector(self, report_id: str) -> SparseVector:
        if report_id not in self._tfidf_cache:
            report = self._report(report_id)
            vectors = report.all_vectors()
            if not vectors:
                raise ValidationError(f"report {report_id!r} has no feature vectors")
            words = self.codebook.predict(vectors)
            self._tfidf_cache[report_id] = encode_tfidf(build_tf(words), self.idf)
        return self._tfidf_cache[report_id]

    def text_document(self, report_id: str) -> TextDocument:
        if report_id not in self._doc_cache:
            self._doc_cache[report_id] = TextDocument.from_report(
                self._report(report_id), self.config.strategy
            )
        return self._doc_cache[report_id]

    def _frame_sim_config(self, query: VideoReport) -> sequence.FrameSimConfig:
        repr_mode = (
            sequence.PER_FRAME_BOVW_COSINE
            if query.feature_mode == "multi"
            else sequence.RAW_VECTOR_COSINE
        )
        return sequence.FrameSimConfig(
            tau=self.config.tau, frame_repr=repr_mode, codebook=self.codebook, idf=self.idf
        )

    def visual_similarity(self, query_id: str, candidate_id: str) -> float:
        cfg = self.config
        query = self._report(query_id)
        cand = self._report(candidate_id)
        s_bovw = None
        if cfg.visual_config in (VISUAL_BOVW, VISUAL_B_FLCS, VISUAL_B_WLCS):
            s_bovw = cosine(self.video_vector(query_id), self.video_vector(candidate_id))
            if cfg.visual_config == VISUAL_BOVW:
                return s_bovw
        fcfg = self._frame_sim_config(query)
        m, n = len(query.frames), len(cand.frames)
        if cfg.visual_config in (VISUAL_FLCS, VISUAL_B_FLCS):
            res = sequence.f_lcs(query, cand, fcfg)
            s_lcs = sequence.normalize_flcs(res.overlap, min(m, n))
        else:
            res = sequence.w_lcs(query, cand, fcfg)
            s_lcs = sequence.normalize_wlcs(res.overlap, min(m, n), max(m, n), cfg.wlcs_scheme)
        if s_bovw is None:
            return s_lcs
        return sequence.aggregate_visual(s_bovw, s_lcs)

    def decide_mode(
        self,
        dup_agreements: Optional[Sequence[float]] = None,
        nondup_agreements: Optional[Sequence[float]] = None,
    ) -> str:
        if not self.config.selective:
            return MODE_COMBINED
        if not dup_agreements or not nondup_agreements:
            # no tracker history to judge the textual channel by
            log.warning("selective mode without duplicate history; falling back to combined")
            return MODE_COMBINED
        _, _, mode = select_mode(dup_agreements, nondup_agreements, self.config.va_threshold)
        return mode

    def rank(
        self,
        query_id: str,
        corpus_ids: Sequence[str],
        dup_agreements: Optional[Sequence[float]] = None,
        nondup_agreements: Optional[Sequence[float]] = None,
        mode: Optional[str] = None,
    ) -> RankedResult:
        """Rank ``corpus_ids`` by similarity to ``query_id``.

        ``mode`` forces combined/visual_only; otherwise the selective rule
        decides from the agreement histories (cold start means combined).
        """
        if query_id in corpus_ids:
            raise ValidationError("query must not be part of the ranked corpus")
        mode_used = mode if mode is not None else self.decide_mode(dup_agreements, nondup_agreements)
        if mode_used not in (MODE_COMBINED, MODE_VISUAL_ONLY):
            raise ValidationError(f"unknown ranking mode {mode_used!r}")

        query_doc = self.text_document(query_id)
        corpus_docs = [self.text_document(rid) for rid in corpus_ids]
        s_txt_map = self.text_index.score(query_doc, corpus_docs=corpus_docs)

        entries = []
        for rid in corpus_ids:
            s_vis = self.visual_similarity(query_id, rid)
            s_txt = s_txt_map[rid]
            if mode_used == MODE_COMBINED:
                s_final = combine(s_vis, s_txt, self.config.w)
            else:
                s_final = s_vis
            entries.append(RankedEntry(rid, s_vis, s_txt, s_final))
        entries.sort(key=lambda e: (-e.s_final, e.report_id))
        return RankedResult(query_id=query_id, entries=entries, mode_used=mode_used)
