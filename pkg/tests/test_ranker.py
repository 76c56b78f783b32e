import numpy as np
import pytest

from vdup.bovw import IdfTable, VisualCodebook, build_tf, cosine, encode_tfidf, train_codebook
from vdup.errors import ValidationError
from vdup.ranker import (
    MODE_COMBINED,
    MODE_VISUAL_ONLY,
    VISUAL_B_FLCS,
    VISUAL_B_WLCS,
    VISUAL_BOVW,
    VISUAL_FLCS,
    VISUAL_WLCS,
    DuplicateRanker,
    FusionConfig,
    combine,
    select_mode,
    vocabulary_agreement,
)
from vdup.text import TextDocument, TextSimilarityIndex, preprocess


def test_combine_arithmetic():
    assert combine(0.5, 1.0, 0.2) == pytest.approx(0.6)
    assert combine(0.37, 0.9, 0.0) == pytest.approx(0.37)
    assert combine(0.37, 0.9, 1.0) == pytest.approx(0.9)


def test_combine_monotone():
    assert combine(0.6, 0.5, 0.3) > combine(0.4, 0.5, 0.3)
    assert combine(0.5, 0.8, 0.3) > combine(0.5, 0.6, 0.3)


def test_combine_rejects_out_of_range():
    with pytest.raises(ValidationError):
        combine(1.2, 0.5, 0.2)
    with pytest.raises(ValidationError):
        combine(0.5, 0.5, 1.5)


def _doc(rid, text):
    return TextDocument(report_id=rid, raw=text, tokens=preprocess(text))


def test_vocabulary_agreement_dice():
    assert vocabulary_agreement(_doc("a", "login error"), _doc("b", "login error")) == 1.0
    assert vocabulary_agreement(_doc("a", "login"), _doc("b", "camera")) == 0.0
    # {aaa,bbb,ccc} vs {bbb,ccc,ddd}: 2*2/6
    a = _doc("a", "aaa bbb ccc")
    b = _doc("b", "bbb ccc ddd")
    assert vocabulary_agreement(a, b) == pytest.approx(2.0 / 3.0)
    assert vocabulary_agreement(_doc("a", ""), _doc("b", "")) == 0.0


TABLE2 = {
    "APOD": (0.708, 0.379, MODE_COMBINED),
    "DROID": (0.739, 0.570, MODE_COMBINED),
    "GNU": (0.822, 0.586, MODE_COMBINED),
    "GROW": (0.670, 0.417, MODE_COMBINED),
    "TIME": (0.860, 0.863, MODE_VISUAL_ONLY),
    "TOK": (0.696, 0.610, MODE_VISUAL_ONLY),
}


@pytest.mark.parametrize("app", sorted(TABLE2))
def test_select_mode_reference_agreement_values(app):
    v_d, v_nd, expected = TABLE2[app]
    got_vd, got_vnd, mode = select_mode([v_d], [v_nd], threshold=0.128)
    assert (got_vd, got_vnd) == (v_d, v_nd)
    assert mode == expected


def test_select_mode_uses_means_and_rejects_empty():
    v_d, v_nd, mode = select_mode([0.8, 0.6], [0.2, 0.4], threshold=0.128)
    assert v_d == pytest.approx(0.7)
    assert v_nd == pytest.approx(0.3)
    assert mode == MODE_COMBINED
    with pytest.raises(ValidationError):
        select_mode([], [0.5])


@pytest.fixture
def small_stack(report_factory):
    """Corpus of 4 videos over a 4-word vocabulary with a exact copy of q."""
    e = np.eye(4)
    reports = {
        "q": report_factory("q", [[e[0]], [e[1]], [e[2]]], texts=["login menu", "error crash", "crash report"]),
        "copy": report_factory("copy", [[e[0]], [e[1]], [e[2]]], texts=["login menu", "error crash", "crash report"]),
        "near": report_factory("near", [[e[0]], [e[1]], [e[3]]], texts=["login menu", "error crash", "settings"]),
        "far": report_factory("far", [[e[3]], [e[3]], [e[3]]], texts=["gallery photo", "gallery", "photo"]),
    }
    cb = VisualCodebook(k=4, seed=0)
    cb.centroids_ = e.copy()
    cb.extractor_id_ = ""
    idf = IdfTable(8, {0: 2, 1: 2, 2: 2, 3: 2})
    docs = [TextDocument.from_report(r) for r in reports.values()]
    index = TextSimilarityIndex().fit(docs)
    return reports, cb, idf, index


def test_rank_exact_copy_first_with_full_score(small_stack):
    reports, cb, idf, index = small_stack
    ranker = DuplicateRanker(reports, cb, idf, index, FusionConfig(selective=False))
    result = ranker.rank("q", ["copy", "near", "far"])
    assert result.mode_used == MODE_COMBINED
    assert result.entries[0].report_id == "copy"
    assert result.entries[0].s_vis == pytest.approx(1.0)
    assert result.entries[0].s_txt == pytest.approx(1.0)
    assert result.entries[0].s_final == pytest.approx(1.0)


def test_rank_output_is_corpus_permutation(small_stack):
    reports, cb, idf, index = small_stack
    ranker = DuplicateRanker(reports, cb, idf, index, FusionConfig(selective=False))
    corpus = ["far", "copy", "near"]
    result = ranker.rank("q", corpus)
    assert sorted(result.ordered_ids()) == sorted(corpus)
    again = ranker.rank("q", list(reversed(corpus)))
    assert result.ordered_ids() == again.ordered_ids()


def test_rank_w0_equals_visual_only(small_stack):
    reports, cb, idf, index = small_stack
    ranker = DuplicateRanker(reports, cb, idf, index, FusionConfig(w=0.0, selective=False))
    combined = ranker.rank("q", ["copy", "near", "far"])
    visual = ranker.rank("q", ["copy", "near", "far"], mode=MODE_VISUAL_ONLY)
    assert combined.ordered_ids() == visual.ordered_ids()
    for a, b in zip(combined.entries, visual.entries):
        assert a.s_final == pytest.approx(b.s_final, abs=1e-12)


def test_rank_bovw_matches_direct_cosine(small_stack):
    reports, cb, idf, index = small_stack
    ranker = DuplicateRanker(reports, cb, idf, index, FusionConfig(selective=False))
    result = ranker.rank("q", ["copy", "near", "far"])
    by_id = {e.report_id: e for e in result.entries}
    qvec = encode_tfidf(build_tf(cb.predict(reports["q"].all_vectors())), idf)
    for rid in ("copy", "near", "far"):
        cvec = encode_tfidf(build_tf(cb.predict(reports[rid].all_vectors())), idf)
        assert by_id[rid].s_vis == pytest.approx(cosine(qvec, cvec), abs=1e-12)


def test_selective_below_threshold_equals_visual_only(small_stack):
    reports, cb, idf, index = small_stack
    ranker = DuplicateRanker(reports, cb, idf, index, FusionConfig(selective=True))
    # agreement gap below threshold forces visual-only
    selected = ranker.rank("q", ["copy", "near", "far"],
                           dup_agreements=[0.70], nondup_agreements=[0.65])
    forced = ranker.rank("q", ["copy", "near", "far"], mode=MODE_VISUAL_ONLY)
    assert selected.mode_used == MODE_VISUAL_ONLY
    assert selected.ordered_ids() == forced.ordered_ids()
    for a, b in zip(selected.entries, forced.entries):
        assert a.s_final == b.s_final


def test_selective_cold_start_falls_back_to_combined(small_stack, caplog):
    reports, cb, idf, index = small_stack
    ranker = DuplicateRanker(reports, cb, idf, index, FusionConfig(selective=True))
    with caplog.at_level("WARNING"):
        result = ranker.rank("q", ["copy", "near", "far"])
    assert result.mode_used == MODE_COMBINED
    assert any("history" in r.message for r in caplog.records)


def test_rank_rejects_query_in_corpus(small_stack):
    reports, cb, idf, index = small_stack
    ranker = DuplicateRanker(reports, cb, idf, index)
    with pytest.raises(ValidationError):
        ranker.rank("q", ["q", "near"])


def test_rank_missing_vectors_rejected(report_factory, small_stack):
    reports, cb, idf, index = small_stack
    from vdup.corpus import FrameRecord, VideoReport

    bare = VideoReport(report_id="bare", app_id="app", fps=5, frames=[FrameRecord(index=0)])
    reports = dict(reports)
    reports["bare"] = bare
    ranker = DuplicateRanker(reports, cb, idf, index, FusionConfig(selective=False))
    with pytest.raises(ValidationError):
        ranker.rank("q", ["bare", "near"])


@pytest.mark.parametrize("visual_config", [VISUAL_FLCS, VISUAL_WLCS, VISUAL_B_FLCS, VISUAL_B_WLCS])
def test_rank_sequence_configs_put_copy_first(small_stack, visual_config):
    reports, cb, idf, index = small_stack
    cfg = FusionConfig(visual_config=visual_config, selective=False)
    ranker = DuplicateRanker(reports, cb, idf, index, cfg)
    result = ranker.rank("q", ["copy", "near", "far"])
    assert result.entries[0].report_id == "copy"
    assert result.entries[0].s_vis == pytest.approx(1.0)


def test_thirteen_candidate_synthetic_task(report_factory):
    """Duplicates share 80% of frames with the query, non-duplicates none;
    both duplicates must land in the top 2."""
    rng = np.random.default_rng(42)

    def unit_vec(i):
        v = np.zeros(16)
        v[i % 16] = 1.0
        return v

    def video(rid, frame_ids, texts):
        return report_factory(rid, [[unit_vec(i)] for i in frame_ids],
                              texts=texts)

    q_frames = [0, 1, 2, 3, 4]
    q_text = ["login", "menu", "error", "crash", "report"]
    reports = {"q": video("q", q_frames, q_text)}
    # duplicates: share 4 of 5 frames (80%)
    reports["dupA"] = video("dupA", [0, 1, 2, 3, 5], q_text[:4] + ["extra"])
    reports["dupB"] = video("dupB", [6, 1, 2, 3, 4], ["other"] + q_text[1:])
    # three distractors: duplicates of each other, disjoint from q
    for i, rid in enumerate(["distA", "distB", "distC"]):
        reports[rid] = video(rid, [7, 8, 9, 10, 11], ["gallery", "photo", "zoom", "pan", "save"])
    # eight uniques, each on its own frame ids / vocabulary
    for u in range(8):
        fid = 12 + u % 4
        reports[f"uniq{u}"] = video(
            f"uniq{u}",
            [fid, (fid + 1) % 16, (fid + 2) % 16, (fid + 3) % 16, (fid + 5) % 16],
            [f"word{u}a word{u}b"] * 5,
        )

    features = [v for r in reports.values() for v in r.all_vectors()]
    cb = train_codebook(features, k=16, seed=0)
    idf = IdfTable(20, {w: 1 for w in range(16)})
    docs = [TextDocument.from_report(r) for r in reports.values()]
    index = TextSimilarityIndex().fit(docs)

    corpus = sorted(rid for rid in reports if rid != "q")
    assert len(corpus) == 13
    ranker = DuplicateRanker(reports, cb, idf, index, FusionConfig(selective=False))
    result = ranker.rank("q", corpus)
    top2 = {e.report_id for e in result.entries[:2]}
    assert top2 == {"dupA", "dupB"}
