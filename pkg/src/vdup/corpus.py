"""On-disk corpus of video-based bug reports and the shared in-memory types.

Layout::

    <root>/manifest.json
    <root>/<app>/<report>/report.json
    <root>/<app>/<report>/frames/%06d.png

``report.json`` mirrors :class:`VideoReport`::

    {"report_id", "app_id", "fps",
     "frames": [{"index", "image", "vectors": [[f, ...]], "ocr_text"}]}

Frame images are PNG files referenced by path relative to the report
directory. Floats are serialized with Python's shortest round-trip
representation, so reads are bit-exact. Writes go through a temp file and
an atomic rename; one corpus root supports any number of concurrent
readers but writers must be externally serialized.

The per-report feature mode is not stored explicitly: a report where some
frame carries more than one vector is in multi-descriptor mode, otherwise
single-vector mode.
"""

from __future__ import annotations

import json
import os
import shutil
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DuplicateReportError, ParseError, ReportNotFoundError, ValidationError
from .validation import as_feature_vector

MANIFEST_NAME = "manifest.json"
FORMAT_VERSION = 1
MAX_DESCRIPTORS_PER_FRAME = 10

MODE_SINGLE = "single"
MODE_MULTI = "multi"


@dataclass
class FrameRecord:
    """One sampled frame: index, optional image path (relative to the
    report directory), zero or more feature vectors, optional raw OCR text."""

    index: int
    image: Optional[str] = None
    vectors: list[np.ndarray] = field(default_factory=list)
    ocr_text: Optional[str] = None

    def validate(self) -> None:
        if self.index < 0:
            raise ValidationError(f"frame index must be nonnegative, got {self.index}")
        if len(self.vectors) > MAX_DESCRIPTORS_PER_FRAME:
            raise ValidationError(
                f"frame {self.index} has {len(self.vectors)} vectors, "
                f"cap is {MAX_DESCRIPTORS_PER_FRAME}"
            )
        dims = {len(v) for v in self.vectors}
        if len(dims) > 1:
            raise ValidationError(f"frame {self.index} mixes vector dims {sorted(dims)}")


@dataclass
class VideoReport:
    """Identity plus the ordered frame sequence of one screen-recording
    bug report. ``fps`` is the sampling rate the frames were taken at."""

    report_id: str
    app_id: str
    fps: int
    frames: list[FrameRecord] = field(default_factory=list)

    def validate(self) -> None:
        if not self.report_id:
            raise ValidationError("report_id must be nonempty")
        if not self.app_id:
            raise ValidationError("app_id must be nonempty")
        if int(self.fps) != self.fps or self.fps < 1:
            raise ValidationError(f"fps must be a positive integer, got {self.fps!r}")
        if not self.frames:
            raise ValidationError(f"report {self.report_id!r} has no frames")
        for i, fr in enumerate(self.frames):
            fr.validate()
            if fr.index != i:
                raise ValidationError(
                    f"report {self.report_id!r}: frame indices must run 0..n-1, "
                    f"found {fr.index} at position {i}"
                )
        dims = {len(v) for fr in self.frames for v in fr.vectors}
        if len(dims) > 1:
            raise ValidationError(
                f"report {self.report_id!r} mixes vector dims {sorted(dims)} across frames"
            )

    @property
    def feature_mode(self) -> Optional[str]:
        """single / multi / None (no vectors anywhere). Inferred from the
        stored vectors; a report whose frames all carry one descriptor is
        indistinguishable from single mode by design of the file format."""
        counts = [len(fr.vectors) for fr in self.frames if fr.vectors]
        if not counts:
            return None
        return MODE_MULTI if max(counts) > 1 else MODE_SINGLE

    @property
    def vector_dim(self) -> Optional[int]:
        for fr in self.frames:
            if fr.vectors:
                return len(fr.vectors[0])
        return None

    def all_vectors(self) -> list[np.ndarray]:
        return [v for fr in self.frames for v in fr.vectors]


@dataclass
class CorpusManifest:
    """Corpus-level bookkeeping. ``extractor_id`` records which feature
    extractor produced the stored vectors so codebooks cannot be mixed
    across extractors; ``app_id`` is empty for a multi-app root."""

    app_id: str = ""
    extractor_id: str = ""
    reports: list[str] = field(default_factory=list)
    created_at: str = ""
    format_version: int = FORMAT_VERSION

    def to_dict(self) -> dict:
        return {
            "app_id": self.app_id,
            "extractor_id": self.extractor_id,
            "reports": list(self.reports),
            "created_at": self.created_at,
            "format_version": self.format_version,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CorpusManifest":
        if data.get("format_version") != FORMAT_VERSION:
            raise ParseError(
                f"manifest format_version must be {FORMAT_VERSION}, "
                f"got {data.get('format_version')!r}"
            )
        reports = data.get("reports", [])
        if len(set(reports)) != len(reports):
            raise ParseError("manifest reports contain duplicate ids")
        return cls(
            app_id=data.get("app_id", ""),
            extractor_id=data.get("extractor_id", ""),
            reports=list(reports),
            created_at=data.get("created_at", ""),
        )


def _atomic_write_json(path: Path, payload) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")
    os.replace(tmp, path)


def _report_to_dict(report: VideoReport) -> dict:
    return {
        "report_id": report.report_id,
        "app_id": report.app_id,
        "fps": report.fps,
        "frames": [
            {
                "index": fr.index,
                "image": fr.image,
                "vectors": [[float(x) for x in v] for v in fr.vectors],
                "ocr_text": fr.ocr_text,
            }
            for fr in report.frames
        ],
    }


def _report_from_dict(data: dict, source: str) -> VideoReport:
    try:
        frames = []
        for fd in data["frames"]:
            vectors = [as_feature_vector(v, name=f"frame {fd['index']} vector") for v in fd.get("vectors", [])]
            frames.append(
                FrameRecord(
                    index=int(fd["index"]),
                    image=fd.get("image"),
                    vectors=vectors,
                    ocr_text=fd.get("ocr_text"),
                )
            )
        report = VideoReport(
            report_id=data["report_id"],
            app_id=data["app_id"],
            fps=int(data["fps"]),
            frames=frames,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{source}: malformed report.json ({exc})") from exc
    try:
        report.validate()
    except ValidationError as exc:
        raise ParseError(f"{source}: {exc}") from exc
    return report


class CorpusStore:
    """Reader/writer for one corpus root."""

    def __init__(self, root):
        self.root = Path(root)

    @property
    def manifest_path(self) -> Path:
        return self.root / MANIFEST_NAME

    def read_manifest(self) -> CorpusManifest:
        if not self.manifest_path.exists():
            return CorpusManifest()
        try:
            with open(self.manifest_path, encoding="utf-8") as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{self.manifest_path}: invalid JSON ({exc})") from exc
        return CorpusManifest.from_dict(data)

    def _write_manifest(self, manifest: CorpusManifest) -> None:
        _atomic_write_json(self.manifest_path, manifest.to_dict())

    def report_dir(self, report_id: str, app_id: Optional[str] = None) -> Path:
        if app_id is not None:
            return self.root / app_id / report_id
        hits = sorted(self.root.glob(f"*/{report_id}/report.json"))
        if not hits:
            raise ReportNotFoundError(f"report {report_id!r} not found under {self.root}")
        return hits[0].parent

    def report_ids(self) -> list[str]:
        return list(self.read_manifest().reports)

    def write_report(
        self,
        report: VideoReport,
        frames_dir: Optional[Path] = None,
        extractor_id: str = "",
        created_at: Optional[str] = None,
    ) -> Path:
        """Serialize ``report`` under ``root/<app_id>/<report_id>/``.

        ``frames_dir``, when given, is a staging directory holding the
        frame image files named in the report; they are copied into the
        report's ``frames/`` directory. Rejects duplicate report ids.
        """
        report.validate()
        manifest = self.read_manifest()
        if report.report_id in manifest.reports:
            raise DuplicateReportError(f"report {report.report_id!r} already in corpus")

        rdir = self.root / report.app_id / report.report_id
        rdir.mkdir(parents=True, exist_ok=True)
        if frames_dir is not None:
            (rdir / "frames").mkdir(exist_ok=True)
            for fr in report.frames:
                if fr.image:
                    src = Path(frames_dir) / Path(fr.image).name
                    shutil.copyfile(src, rdir / fr.image)
        _atomic_write_json(rdir / "report.json", _report_to_dict(report))

        manifest.reports.append(report.report_id)
        if manifest.app_id == "" and len(manifest.reports) == 1:
            manifest.app_id = report.app_id
        elif manifest.app_id and manifest.app_id != report.app_id:
            manifest.app_id = ""
        if extractor_id:
            if manifest.extractor_id and manifest.extractor_id != extractor_id:
                raise ValidationError(
                    f"corpus extractor is {manifest.extractor_id!r}, "
                    f"refusing to mix in {extractor_id!r}"
                )
            manifest.extractor_id = extractor_id
        if not manifest.created_at:
            manifest.created_at = created_at or datetime.now(timezone.utc).isoformat()
        self._write_manifest(manifest)
        return rdir

    def read_report(self, report_id: str) -> VideoReport:
        rdir = self.report_dir(report_id)
        path = rdir / "report.json"
        if not path.exists():
            raise ReportNotFoundError(f"report {report_id!r} has no report.json")
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON ({exc})") from exc
        return _report_from_dict(data, str(path))

    def read_all(self) -> dict[str, VideoReport]:
        """All reports in the manifest; asserts one vector dimension
        corpus-wide."""
        reports = {rid: self.read_report(rid) for rid in self.report_ids()}
        dims = {r.vector_dim for r in reports.values() if r.vector_dim is not None}
        if len(dims) > 1:
            raise ValidationError(f"corpus mixes vector dims {sorted(dims)} across reports")
        return reports

    def update_report(self, report: VideoReport) -> Path:
        """Rewrite an existing report in place (used by feature/OCR import)."""
        report.validate()
        rdir = self.report_dir(report.report_id)
        _atomic_write_json(rdir / "report.json", _report_to_dict(report))
        return rdir

    def set_extractor_id(self, extractor_id: str) -> None:
        manifest = self.read_manifest()
        if manifest.extractor_id and manifest.extractor_id != extractor_id:
            raise ValidationError(
                f"corpus extractor is {manifest.extractor_id!r}, "
                f"refusing to switch to {extractor_id!r}"
            )
        manifest.extractor_id = extractor_id
        self._write_manifest(manifest)

    def frame_image_path(self, report: VideoReport, frame: FrameRecord) -> Optional[Path]:
        if not frame.image:
            return None
        return self.report_dir(report.report_id, report.app_id) / frame.image


def reports_equal(a: VideoReport, b: VideoReport) -> bool:
    """Field-for-field equality with bit-exact float comparison."""
    if (a.report_id, a.app_id, a.fps) != (b.report_id, b.app_id, b.fps):
        return False
    if len(a.frames) != len(b.frames):
        return False
    for fa, fb in zip(a.frames, b.frames):
        if (fa.index, fa.image, fa.ocr_text) != (fb.index, fb.image, fb.ocr_text):
            return False
        if len(fa.vectors) != len(fb.vectors):
            return False
        for va, vb in zip(fa.vectors, fb.vectors):
            if va.shape != vb.shape or not np.array_equal(va, vb):
                return False
    return True
