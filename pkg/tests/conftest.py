import numpy as np
import pytest

from vdup.corpus import FrameRecord, VideoReport


@pytest.fixture
def report_factory():
    """Build small in-memory reports from per-frame vector lists."""

    def make(report_id, frame_vectors, app_id="app", fps=5, texts=None, images=None):
        frames = []
        for i, vecs in enumerate(frame_vectors):
            frames.append(
                FrameRecord(
                    index=i,
                    image=None if images is None else images[i],
                    vectors=[np.asarray(v, dtype=np.float64) for v in vecs],
                    ocr_text=None if texts is None else texts[i],
                )
            )
        report = VideoReport(report_id=report_id, app_id=app_id, fps=fps, frames=frames)
        report.validate()
        return report

    return make


def pytest_runtest_logreport(report):
    # one visible pass/fail line per acceptance criterion
    if report.when == "call" and "test_acceptance" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        status = "PASS" if report.passed else "SKIP" if report.skipped else "FAIL"
        print(f"\n[ACCEPTANCE] {name}: {status}")
