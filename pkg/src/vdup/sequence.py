"""Ordered visual similarity via fuzzy substring alignment of frame sequences.

Two videos are aligned with a longest-common-substring dynamic program
whose comparison operator is fuzzy: frames i and j "match" when their
similarity s(i, j) is at least ``tau``. Matching cells accumulate the
similarity value itself (not a count), so a perfect subsection match
normalizes to exactly 1:

* fuzzy variant:    cell(i,j) = cell(i-1,j-1) + s(i,j)           if s >= tau, else 0
* weighted variant: cell(i,j) = cell(i-1,j-1) + s(i,j)*(i/m)*(j/n) if s >= tau, else 0

with 1-indexed positions i of m = |A| and j of n = |B|. Late-video matches
therefore count more in the weighted variant, which suits recordings where
the faulty behavior shows up near the end. The overlap is the maximum cell
value; ties resolve to the earliest (i, j) in row-major order.

Frame similarity has two modes: direct cosine of each frame's single
feature vector, or cosine of per-frame TF-IDF bag-of-visual-words vectors
when frames carry multiple descriptors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .bovw import IdfTable, SparseVector, VisualCodebook, build_tf, cosine, encode_tfidf
from .corpus import FrameRecord, VideoReport
from .errors import ValidationError
from .validation import check_unit_interval, clamp01

RAW_VECTOR_COSINE = "raw_vector_cosine"
PER_FRAME_BOVW_COSINE = "per_frame_bovw_cosine"

DENOMINATOR_PRINTED = "printed"
DENOMINATOR_END_ALIGNED = "end-aligned"


@dataclass
class FrameSimConfig:
    """Fuzzy matching threshold and frame representation.

    ``per_frame_bovw_cosine`` needs a trained codebook and IDF table to
    build the per-frame TF-IDF vectors.
    """

    tau: float = 0.7
    frame_repr: str = RAW_VECTOR_COSINE
    codebook: Optional[VisualCodebook] = None
    idf: Optional[IdfTable] = None

    def validate(self) -> None:
        check_unit_interval(self.tau, "tau")
        if self.frame_repr not in (RAW_VECTOR_COSINE, PER_FRAME_BOVW_COSINE):
            raise ValidationError(f"unknown frame_repr {self.frame_repr!r}")
        if self.frame_repr == PER_FRAME_BOVW_COSINE and (self.codebook is None or self.idf is None):
            raise ValidationError("per_frame_bovw_cosine needs a codebook and an IDF table")


@dataclass
class LcsResult:
    """Best fuzzy-matching substring: accumulated overlap value, the frame
    indices where it ends in each video, and its length in frames."""

    overlap: float
    end_i: int
    end_j: int
    length: int


def _dense_cosine(a: np.ndarray, b: np.ndarray) -> float:
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return clamp01(float(np.dot(a, b) / (na * nb)))


def _frame_sparse(frame: FrameRecord, cfg: FrameSimConfig) -> SparseVector:
    words = cfg.codebook.predict(frame.vectors)
    return encode_tfidf(build_tf(words), cfg.idf)


def frame_sim(a: FrameRecord, b: FrameRecord, cfg: FrameSimConfig) -> float:
    """Similarity of two frames in [0, 1] under the configured representation."""
    cfg.validate()
    if not a.vectors or not b.vectors:
        raise ValidationError("both frames need feature vectors for frame similarity")
    if cfg.frame_repr == RAW_VECTOR_COSINE:
        return _dense_cosine(a.vectors[0], b.vectors[0])
    return clamp01(cosine(_frame_sparse(a, cfg), _frame_sparse(b, cfg)))


def frame_sim_matrix(a: VideoReport, b: VideoReport, cfg: FrameSimConfig) -> np.ndarray:
    """All-pairs frame similarity, shape (|A|, |B|)."""
    cfg.validate()
    if a.feature_mode is None or b.feature_mode is None:
        raise ValidationError("both reports need feature vectors")
    if a.feature_mode != b.feature_mode:
        raise ValidationError(
            f"feature mode mismatch: {a.report_id}={a.feature_mode}, "
            f"{b.report_id}={b.feature_mode}"
        )
    if cfg.frame_repr == RAW_VECTOR_COSINE:
        va = np.vstack([fr.vectors[0] for fr in a.frames])
        vb = np.vstack([fr.vectors[0] for fr in b.frames])
        na = np.linalg.norm(va, axis=1)
        nb = np.linalg.norm(vb, axis=1)
        na[na == 0.0] = 1.0
        nb[nb == 0.0] = 1.0
        sims = (va / na[:, None]) @ (vb / nb[:, None]).T
        return np.clip(sims, 0.0, 1.0)
    sparse_a = [_frame_sparse(fr, cfg) for fr in a.frames]
    sparse_b = [_frame_sparse(fr, cfg) for fr in b.frames]
    sims = np.empty((len(sparse_a), len(sparse_b)))
    for i, sa in enumerate(sparse_a):
        for j, sb in enumerate(sparse_b):
            sims[i, j] = clamp01(cosine(sa, sb))
    return sims


def _lcs_dp(sims: np.ndarray, tau: float, weighted: bool) -> LcsResult:
    m, n = sims.shape
    prev_val = np.zeros(n, dtype=np.float64)
    prev_len = np.zeros(n, dtype=np.int64)
    best = LcsResult(0.0, -1, -1, 0)
    for i in range(m):
        cur_val = np.zeros(n, dtype=np.float64)
        cur_len = np.zeros(n, dtype=np.int64)
        for j in range(n):
            s = sims[i, j]
            if s >= tau:
                inc = s * ((i + 1) / m) * ((j + 1) / n) if weighted else s
                diag_val = prev_val[j - 1] if j > 0 else 0.0
                diag_len = prev_len[j - 1] if j > 0 else 0
                cur_val[j] = diag_val + inc
                cur_len[j] = diag_len + 1
                if cur_val[j] > best.overlap:
                    best = LcsResult(float(cur_val[j]), i, j, int(cur_len[j]))
        prev_val, prev_len = cur_val, cur_len
    return best


def f_lcs(a: VideoReport, b: VideoReport, cfg: FrameSimConfig) -> LcsResult:
    """Fuzzy longest-common-substring overlap of two frame sequences."""
    sims = frame_sim_matrix(a, b, cfg)
    return _lcs_dp(sims, cfg.tau, weighted=False)


def w_lcs(a: VideoReport, b: VideoReport, cfg: FrameSimConfig) -> LcsResult:
    """Position-weighted variant: matches near both videos' ends count more."""
    sims = frame_sim_matrix(a, b, cfg)
    return _lcs_dp(sims, cfg.tau, weighted=True)


def normalize_flcs(overlap: float, min_len: int) -> float:
    """overlap / (frames in the shorter video), clamped to [0, 1]."""
    if min_len < 1:
        raise ValidationError(f"min_len must be >= 1, got {min_len}")
    if overlap < 0:
        raise ValidationError(f"overlap must be nonnegative, got {overlap}")
    return clamp01(overlap / min_len)


def wlcs_denominator(min_len: int, max_len: int, scheme: str = DENOMINATOR_PRINTED) -> float:
    """Maximum possible weighted overlap used to normalize the weighted LCS.

    ``printed`` sums (i/min) * ((max - i)/max) for i = min..1. The
    ``end-aligned`` alternative aligns the shorter video's end to the longer
    video's end and sums (i/min) * ((max - min + i)/max) for i = 1..min,
    which is what the prose upper-bound description suggests.
    """
    if not (1 <= min_len <= max_len):
        raise ValidationError(f"need 1 <= min_len <= max_len, got ({min_len}, {max_len})")
    if scheme == DENOMINATOR_PRINTED:
        return sum((i / min_len) * ((max_len - i) / max_len) for i in range(min_len, 0, -1))
    if scheme == DENOMINATOR_END_ALIGNED:
        return sum((i / min_len) * ((max_len - min_len + i) / max_len) for i in range(1, min_len + 1))
    raise ValidationError(f"unknown denominator scheme {scheme!r}")


def normalize_wlcs(overlap: float, min_len: int, max_len: int,
                   scheme: str = DENOMINATOR_PRINTED) -> float:
    """Weighted overlap normalized by the scheme's maximum, clamped to [0, 1].

    Degenerate min = max = 1 makes the printed denominator 0; by convention
    the similarity is then 1 if any overlap was found, else 0.
    """
    if overlap < 0:
        raise ValidationError(f"overlap must be nonnegative, got {overlap}")
    denom = wlcs_denominator(min_len, max_len, scheme)
    if denom == 0.0:
        return 1.0 if overlap > 0 else 0.0
    return clamp01(overlap / denom)


def aggregate_visual(s_bovw: float, s_lcs: float) -> float:
    """Mean of the unordered and ordered visual similarities."""
    check_unit_interval(s_bovw, "s_bovw")
    check_unit_interval(s_lcs, "s_lcs")
    return (s_bovw + s_lcs) / 2.0


def lcs_debug_dump(a: VideoReport, b: VideoReport, cfg: FrameSimConfig) -> dict:
    """JSON-able trace of one pair's alignment, for --dump-lcs."""
    sims = frame_sim_matrix(a, b, cfg)
    fres = _lcs_dp(sims, cfg.tau, weighted=False)
    wres = _lcs_dp(sims, cfg.tau, weighted=True)
    return {
        "a": a.report_id,
        "b": b.report_id,
        "tau": cfg.tau,
        "frame_sims": [[float(x) for x in row] for row in sims],
        "flcs": {"overlap": fres.overlap, "end_i": fres.end_i, "end_j": fres.end_j,
                 "length": fres.length},
        "wlcs": {"overlap": wres.overlap, "end_i": wres.end_i, "end_j": wres.end_j,
                 "length": wres.length},
    }
