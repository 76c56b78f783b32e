import math
from fractions import Fraction

import numpy as np
import pytest

from vdup.bovw import IdfTable, VisualCodebook
from vdup.errors import ValidationError
from vdup.sequence import (
    DENOMINATOR_END_ALIGNED,
    DENOMINATOR_PRINTED,
    PER_FRAME_BOVW_COSINE,
    FrameSimConfig,
    aggregate_visual,
    f_lcs,
    frame_sim,
    frame_sim_matrix,
    lcs_debug_dump,
    normalize_flcs,
    normalize_wlcs,
    w_lcs,
    wlcs_denominator,
)


def oracle_overlap(sims, tau, weighted):
    """Exhaustive scan over every pair of equal-length contiguous windows:
    a window is valid when all aligned pairs clear tau, and its value is
    the (optionally position-weighted) sum of their similarities."""
    m, n = sims.shape
    best = 0.0
    for i in range(m):
        for j in range(n):
            for length in range(1, min(m - i, n - j) + 1):
                pairs = [(i + t, j + t) for t in range(length)]
                if all(sims[a, b] >= tau for a, b in pairs):
                    value = sum(
                        sims[a, b] * (((a + 1) / m) * ((b + 1) / n) if weighted else 1.0)
                        for a, b in pairs
                    )
                    best = max(best, value)
    return best


def _unit(angle):
    return [math.cos(angle), math.sin(angle)]


def test_frame_sim_identity_orthogonal_and_hand_value(report_factory):
    cfg = FrameSimConfig(tau=0.7)
    a = report_factory("a", [[[1.0, 0.0]]]).frames[0]
    b = report_factory("b", [[[1.0, 0.0]]]).frames[0]
    c = report_factory("c", [[[0.0, 1.0]]]).frames[0]
    d = report_factory("d", [[_unit(math.pi / 4)]]).frames[0]
    assert frame_sim(a, b, cfg) == pytest.approx(1.0)
    assert frame_sim(a, c, cfg) == pytest.approx(0.0)
    assert frame_sim(a, d, cfg) == pytest.approx(0.70711, abs=1e-5)


def test_frame_sim_requires_vectors(report_factory):
    cfg = FrameSimConfig()
    with_vec = report_factory("a", [[[1.0, 0.0]]]).frames[0]
    from vdup.corpus import FrameRecord

    without = FrameRecord(index=0)
    with pytest.raises(ValidationError):
        frame_sim(with_vec, without, cfg)


def test_flcs_self_match_equals_frame_count(report_factory):
    vecs = [[_unit(0.1 * i)] for i in range(5)]
    report = report_factory("a", vecs)
    res = f_lcs(report, report, FrameSimConfig(tau=0.7))
    assert res.overlap == pytest.approx(5.0, abs=1e-9)
    assert res.length == 5
    assert (res.end_i, res.end_j) == (4, 4)
    assert normalize_flcs(res.overlap, 5) == pytest.approx(1.0)


def test_flcs_no_pair_above_tau(report_factory):
    a = report_factory("a", [[[1.0, 0.0]]] * 3)
    b = report_factory("b", [[[0.0, 1.0]]] * 3)
    res = f_lcs(a, b, FrameSimConfig(tau=0.7))
    assert res.overlap == 0.0
    assert res.length == 0
    assert (res.end_i, res.end_j) == (-1, -1)


def test_flcs_exact_suffix_match(report_factory):
    # A = [x, y, z], B = [y, z] with orthogonal frames: best common
    # substring is [y, z], overlap 2 (verified by the exhaustive oracle)
    x, y, z = [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]
    a = report_factory("a", [[x], [y], [z]])
    b = report_factory("b", [[y], [z]])
    cfg = FrameSimConfig(tau=0.7)
    res = f_lcs(a, b, cfg)
    assert res.overlap == pytest.approx(2.0, abs=1e-12)
    assert res.length == 2
    sims = frame_sim_matrix(a, b, cfg)
    assert res.overlap == pytest.approx(oracle_overlap(sims, 0.7, weighted=False), abs=1e-12)


def test_wlcs_single_frame_videos(report_factory):
    a = report_factory("a", [[[1.0, 0.0]]])
    b = report_factory("b", [[[1.0, 0.0]]])
    res = w_lcs(a, b, FrameSimConfig(tau=0.7))
    # single matching frames: increment is s * (1/1) * (1/1) = s = 1
    assert res.overlap == pytest.approx(1.0)


def test_wlcs_positional_weighting(report_factory):
    # identical frame at position i=2 of m=4 and j=3 of n=3 contributes
    # s * (2/4) * (3/3) = 0.5; fillers are mutually < tau apart
    x = _unit(0.0)
    a = report_factory("a", [[_unit(math.pi / 2)], [x], [_unit(math.pi / 3)], [_unit(math.pi / 6)]])
    b = report_factory("b", [[_unit(math.pi / 4)], [_unit(math.radians(75))], [x]])
    # kill off-target matches with a high threshold
    res = w_lcs(a, b, FrameSimConfig(tau=0.99))
    assert res.overlap == pytest.approx(0.5, abs=1e-9)
    assert (res.end_i, res.end_j) == (1, 2)


@pytest.mark.parametrize("weighted", [False, True])
def test_lcs_matches_exhaustive_oracle(report_factory, weighted):
    rng = np.random.default_rng(2024)
    cfg = FrameSimConfig(tau=0.7)
    for trial in range(60):
        m, n = rng.integers(1, 7, size=2)
        a = report_factory("a", [[rng.random(3)] for _ in range(m)])
        b = report_factory("b", [[rng.random(3)] for _ in range(n)])
        sims = frame_sim_matrix(a, b, cfg)
        got = (w_lcs if weighted else f_lcs)(a, b, cfg).overlap
        want = oracle_overlap(sims, cfg.tau, weighted)
        assert got == pytest.approx(want, abs=1e-9), f"trial {trial}"


def test_lcs_symmetric_under_swap(report_factory):
    rng = np.random.default_rng(55)
    cfg = FrameSimConfig(tau=0.5)
    for _ in range(20):
        a = report_factory("a", [[rng.random(3)] for _ in range(int(rng.integers(1, 6)))])
        b = report_factory("b", [[rng.random(3)] for _ in range(int(rng.integers(1, 6)))])
        assert f_lcs(a, b, cfg).overlap == pytest.approx(f_lcs(b, a, cfg).overlap, abs=1e-12)
        assert w_lcs(a, b, cfg).overlap == pytest.approx(w_lcs(b, a, cfg).overlap, abs=1e-12)


def test_raising_tau_never_increases_overlap(report_factory):
    rng = np.random.default_rng(99)
    for _ in range(10):
        a = report_factory("a", [[rng.random(3)] for _ in range(5)])
        b = report_factory("b", [[rng.random(3)] for _ in range(5)])
        values = [
            f_lcs(a, b, FrameSimConfig(tau=t)).overlap
            for t in (0.0, 0.25, 0.5, 0.75, 1.0)
        ]
        assert all(x >= y - 1e-12 for x, y in zip(values, values[1:]))


def test_mode_mismatch_rejected(report_factory):
    single = report_factory("a", [[[1.0, 0.0]]])
    multi = report_factory("b", [[[1.0, 0.0], [0.0, 1.0]]])
    with pytest.raises(ValidationError):
        f_lcs(single, multi, FrameSimConfig())


def test_normalize_flcs_values():
    assert normalize_flcs(2.0, 2) == pytest.approx(1.0)
    assert normalize_flcs(0.0, 4) == 0.0
    assert normalize_flcs(1.5, 3) == pytest.approx(0.5)
    with pytest.raises(ValidationError):
        normalize_flcs(1.0, 0)


def test_wlcs_denominator_hand_value():
    # min=2, max=4: (2/2)*(2/4) + (1/2)*(3/4) = 0.875
    assert wlcs_denominator(2, 4) == pytest.approx(0.875, abs=1e-12)
    assert normalize_wlcs(0.875, 2, 4) == pytest.approx(1.0, abs=1e-12)
    assert normalize_wlcs(0.0, 2, 4) == 0.0


def test_wlcs_denominator_matches_fraction_oracle():
    for min_len in range(1, 11):
        for max_len in range(min_len, 11):
            want = sum(
                (Fraction(i, min_len)) * Fraction(max_len - i, max_len)
                for i in range(min_len, 0, -1)
            )
            got = wlcs_denominator(min_len, max_len, DENOMINATOR_PRINTED)
            assert got == pytest.approx(float(want), abs=1e-12)


def test_wlcs_degenerate_min_max_one():
    assert normalize_wlcs(0.5, 1, 1) == 1.0
    assert normalize_wlcs(0.0, 1, 1) == 0.0


def test_wlcs_end_aligned_scheme():
    # min=2, max=4 end-aligned: (1/2)*(3/4) + (2/2)*(4/4) = 1.375
    assert wlcs_denominator(2, 4, DENOMINATOR_END_ALIGNED) == pytest.approx(1.375, abs=1e-12)
    # equal lengths: sum of (i/n)^2, never degenerate
    assert wlcs_denominator(1, 1, DENOMINATOR_END_ALIGNED) == pytest.approx(1.0)


def test_wlcs_invalid_lengths():
    with pytest.raises(ValidationError):
        wlcs_denominator(3, 2)


def test_aggregate_visual():
    assert aggregate_visual(1.0, 1.0) == 1.0
    assert aggregate_visual(0.6, 0.2) == pytest.approx(0.4)
    for s in (0.0, 0.3, 1.0):
        assert aggregate_visual(s, s) == pytest.approx(s)
    with pytest.raises(ValidationError):
        aggregate_visual(1.2, 0.0)


def test_per_frame_bovw_mode(report_factory):
    cb = VisualCodebook(k=2, seed=0)
    cb.centroids_ = np.array([[1.0, 0.0], [0.0, 1.0]])
    cb.extractor_id_ = ""
    idf = IdfTable(4, {0: 2, 1: 2})
    cfg = FrameSimConfig(tau=0.7, frame_repr=PER_FRAME_BOVW_COSINE, codebook=cb, idf=idf)
    a = report_factory("a", [[[0.9, 0.1], [0.8, 0.0]]])
    b = report_factory("b", [[[1.0, 0.2], [0.7, 0.1]]])
    # both frames map to words [0, 0]: identical tf-idf vectors
    assert frame_sim(a.frames[0], b.frames[0], cfg) == pytest.approx(1.0)
    c = report_factory("c", [[[0.1, 0.9], [0.0, 0.8]]])
    assert frame_sim(a.frames[0], c.frames[0], cfg) == pytest.approx(0.0)


def test_bovw_mode_requires_codebook(report_factory):
    cfg = FrameSimConfig(frame_repr=PER_FRAME_BOVW_COSINE)
    a = report_factory("a", [[[1.0, 0.0]]])
    with pytest.raises(ValidationError):
        frame_sim(a.frames[0], a.frames[0], cfg)


def test_lcs_debug_dump_shape(report_factory):
    a = report_factory("a", [[[1.0, 0.0]], [[0.0, 1.0]]])
    b = report_factory("b", [[[1.0, 0.0]]])
    dump = lcs_debug_dump(a, b, FrameSimConfig(tau=0.7))
    assert dump["a"] == "a" and dump["b"] == "b"
    assert len(dump["frame_sims"]) == 2
    assert len(dump["frame_sims"][0]) == 1
    assert dump["flcs"]["overlap"] == pytest.approx(1.0)
