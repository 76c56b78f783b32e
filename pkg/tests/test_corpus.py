import json

import numpy as np
import pytest

from vdup.corpus import CorpusStore, FrameRecord, VideoReport, reports_equal
from vdup.errors import DuplicateReportError, ParseError, ReportNotFoundError, ValidationError


def test_round_trip_three_frames(tmp_path, report_factory):
    report = report_factory(
        "r1",
        [[[0.5, 0.25]], [[1.0, 0.0]], [[0.1234567890123456, 3.0]]],
        texts=["hello", None, "world"],
    )
    store = CorpusStore(tmp_path)
    store.write_report(report)
    loaded = store.read_report("r1")
    assert reports_equal(report, loaded)


def test_written_layout_mirrors_report(tmp_path, report_factory):
    report = report_factory("r2", [[[1.0]], [[2.0]]])
    store = CorpusStore(tmp_path)
    rdir = store.write_report(report)
    assert rdir == tmp_path / "app" / "r2"
    data = json.loads((rdir / "report.json").read_text())
    assert data["report_id"] == "r2"
    assert len(data["frames"]) == 2
    assert data["frames"][1]["vectors"] == [[2.0]]


def test_zero_frames_rejected(tmp_path):
    report = VideoReport(report_id="r3", app_id="app", fps=5, frames=[])
    with pytest.raises(ValidationError):
        CorpusStore(tmp_path).write_report(report)


def test_duplicate_report_id_rejected(tmp_path, report_factory):
    store = CorpusStore(tmp_path)
    store.write_report(report_factory("r4", [[[1.0]]]))
    with pytest.raises(DuplicateReportError):
        store.write_report(report_factory("r4", [[[2.0]]]))


def test_unknown_id_not_found(tmp_path):
    with pytest.raises(ReportNotFoundError):
        CorpusStore(tmp_path).read_report("zzz")


def test_mixed_dims_rejected_at_read(tmp_path):
    rdir = tmp_path / "app" / "bad"
    rdir.mkdir(parents=True)
    payload = {
        "report_id": "bad",
        "app_id": "app",
        "fps": 5,
        "frames": [
            {"index": 0, "image": None, "vectors": [[1.0, 2.0]], "ocr_text": None},
            {"index": 1, "image": None, "vectors": [[1.0]], "ocr_text": None},
        ],
    }
    (rdir / "report.json").write_text(json.dumps(payload))
    (tmp_path / "manifest.json").write_text(json.dumps({
        "app_id": "app", "extractor_id": "", "reports": ["bad"],
        "created_at": "", "format_version": 1,
    }))
    store = CorpusStore(tmp_path)
    with pytest.raises(ParseError):
        store.read_report("bad")


def test_manifest_tracks_report_directories(tmp_path, report_factory):
    store = CorpusStore(tmp_path)
    for rid in ("a", "b", "c"):
        store.write_report(report_factory(rid, [[[1.0, 0.0]]]))
    manifest = store.read_manifest()
    dirs = [p for p in tmp_path.glob("*/*") if (p / "report.json").exists()]
    assert sorted(manifest.reports) == sorted(p.name for p in dirs)
    assert manifest.app_id == "app"
    assert manifest.format_version == 1


def test_frame_indices_must_be_consecutive(report_factory):
    report = VideoReport(
        report_id="r5",
        app_id="app",
        fps=5,
        frames=[FrameRecord(index=0), FrameRecord(index=2)],
    )
    with pytest.raises(ValidationError):
        report.validate()


def test_descriptor_cap_enforced():
    frame = FrameRecord(index=0, vectors=[np.zeros(4)] * 11)
    with pytest.raises(ValidationError):
        frame.validate()


def test_extractor_id_cannot_be_mixed(tmp_path, report_factory):
    store = CorpusStore(tmp_path)
    store.write_report(report_factory("a", [[[1.0]]]), extractor_id="builtin-single-g8")
    with pytest.raises(ValidationError):
        store.write_report(report_factory("b", [[[1.0]]]), extractor_id="other")


def test_read_all_rejects_mixed_corpus_dims(tmp_path, report_factory):
    store = CorpusStore(tmp_path)
    store.write_report(report_factory("a", [[[1.0, 0.0]]]))
    store.write_report(report_factory("b", [[[1.0, 0.0, 0.0]]]))
    with pytest.raises(ValidationError):
        store.read_all()


def test_frame_images_copied_from_staging(tmp_path, report_factory):
    staging = tmp_path / "staging"
    staging.mkdir()
    (staging / "000000.png").write_bytes(b"not-a-real-png")
    report = report_factory("imgy", [[[1.0]]], images=["frames/000000.png"])
    store = CorpusStore(tmp_path / "corpus")
    rdir = store.write_report(report, frames_dir=staging)
    assert (rdir / "frames" / "000000.png").read_bytes() == b"not-a-real-png"
