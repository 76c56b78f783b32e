"""Turning raw videos into frame sequences and importing external data.

Video decoding and OCR are delegated to external tools through command
templates, because codecs and OCR engines are platform concerns outside
this engine. The decoder template must contain ``{input}`` and
``{outdir}`` placeholders (``{fps}`` is substituted too); any tool that
writes one PNG per sampled frame works, e.g.::

    ffmpeg -y -i {input} -vf fps={fps} {outdir}/%06d.png

Externally computed feature vectors arrive as JSONL with a header line::

    {"mode": "single"|"multi", "dim": D, "extractor_id": "..."}
    {"frame": 0, "vectors": [[...], ...]}

and OCR text as JSONL lines ``{"frame": i, "text": "..."}``. Duplicate
frame entries follow a last-wins policy with a warning. Importing the same
file twice is idempotent.
"""

from __future__ import annotations

import json
import logging
import shlex
import subprocess
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .corpus import (
    MAX_DESCRIPTORS_PER_FRAME,
    CorpusStore,
    FrameRecord,
    VideoReport,
)
from .errors import IngestionError, ParseError, ValidationError
from .validation import as_feature_vector

log = logging.getLogger(__name__)

DEFAULT_DECODER_COMMAND = "ffmpeg -y -i {input} -vf fps={fps} {outdir}/%06d.png"


@dataclass
class IngestionConfig:
    """Sampling rate and decoder invocation. The reference sampling rates
    are 1 and 5 frames per second; any fps >= 1 is accepted."""

    fps: int = 5
    decoder_command: str = DEFAULT_DECODER_COMMAND
    max_frames: Optional[int] = None

    def validate(self) -> None:
        if int(self.fps) != self.fps or self.fps < 1:
            raise ValidationError(f"fps must be an integer >= 1, got {self.fps!r}")
        for placeholder in ("{input}", "{outdir}"):
            if placeholder not in self.decoder_command:
                raise ValidationError(f"decoder_command must contain {placeholder}")
        if self.max_frames is not None and self.max_frames < 1:
            raise ValidationError(f"max_frames must be >= 1, got {self.max_frames}")


def _run_template(template: str, **subs) -> subprocess.CompletedProcess:
    argv = [tok.format(**subs) for tok in shlex.split(template)]
    return subprocess.run(argv, capture_output=True, text=True)


def sample_frames(
    video_path,
    cfg: IngestionConfig,
    report_id: str,
    app_id: str,
    workdir,
) -> tuple[VideoReport, Path]:
    """Decode ``video_path`` at ``cfg.fps`` into ``workdir`` and return the
    frame-only report plus the staging directory holding the PNGs.

    Frames are renumbered 0..n-1 in temporal order; the staging directory
    is what ``CorpusStore.write_report`` copies from.
    """
    cfg.validate()
    video_path = Path(video_path)
    if not video_path.exists():
        raise IngestionError(f"video not found: {video_path}")
    outdir = Path(workdir)
    outdir.mkdir(parents=True, exist_ok=True)

    proc = _run_template(cfg.decoder_command, input=str(video_path), outdir=str(outdir), fps=cfg.fps)
    if proc.returncode != 0:
        raise IngestionError(
            f"decoder failed with exit {proc.returncode} on {video_path}",
            stderr=proc.stderr,
        )
    produced = sorted(outdir.glob("*.png"))
    if not produced:
        raise IngestionError(f"decoder produced no frames for {video_path}")
    if cfg.max_frames is not None:
        produced = produced[: cfg.max_frames]

    frames = []
    for i, src in enumerate(produced):
        name = f"{i:06d}.png"
        if src.name != name:
            src = src.rename(outdir / name)
        frames.append(FrameRecord(index=i, image=f"frames/{name}"))
    report = VideoReport(report_id=report_id, app_id=app_id, fps=cfg.fps, frames=frames)
    report.validate()
    return report, outdir


def _read_jsonl(path) -> list[tuple[int, dict]]:
    entries = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                entries.append((lineno, json.loads(line)))
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: invalid JSON ({exc})") from exc
    return entries


def import_features(store: CorpusStore, report_id: str, feature_file) -> VideoReport:
    """Attach externally computed vectors to a stored report.

    The header fixes the mode and dimension for every line; unknown frame
    indices and dimension mismatches are rejected before anything is
    written, so a failed import leaves the report untouched.
    """
    report = store.read_report(report_id)
    entries = _read_jsonl(feature_file)
    if not entries:
        raise ParseError(f"{feature_file}: empty feature file (missing header)")
    header_line, header = entries[0]
    mode = header.get("mode")
    if mode not in ("single", "multi"):
        raise ParseError(f"{feature_file}:{header_line}: header mode must be 'single' or 'multi'")
    try:
        dim = int(header["dim"])
        extractor_id = str(header["extractor_id"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{feature_file}:{header_line}: header needs dim and extractor_id") from exc

    known = {fr.index for fr in report.frames}
    per_frame: dict[int, list] = {}
    for lineno, entry in entries[1:]:
        try:
            frame_idx = int(entry["frame"])
            raw_vectors = entry["vectors"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{feature_file}:{lineno}: needs frame and vectors") from exc
        if frame_idx not in known:
            raise ValidationError(
                f"{feature_file}:{lineno}: frame {frame_idx} not in report {report_id!r}"
            )
        vectors = [as_feature_vector(v, name=f"line {lineno} vector") for v in raw_vectors]
        if mode == "single" and len(vectors) != 1:
            raise ValidationError(
                f"{feature_file}:{lineno}: single mode requires exactly 1 vector, got {len(vectors)}"
            )
        if not (1 <= len(vectors) <= MAX_DESCRIPTORS_PER_FRAME):
            raise ValidationError(
                f"{feature_file}:{lineno}: {len(vectors)} vectors, cap is {MAX_DESCRIPTORS_PER_FRAME}"
            )
        for v in vectors:
            if len(v) != dim:
                raise ValidationError(
                    f"{feature_file}:{lineno}: vector dim {len(v)} != header dim {dim}"
                )
        if frame_idx in per_frame:
            log.warning("%s: duplicate entry for frame %d, last wins", feature_file, frame_idx)
        per_frame[frame_idx] = vectors

    for fr in report.frames:
        if fr.index in per_frame:
            fr.vectors = per_frame[fr.index]
    report.validate()
    store.update_report(report)
    store.set_extractor_id(extractor_id)
    return report


def import_ocr_text(store: CorpusStore, report_id: str, text_file) -> VideoReport:
    """Attach OCR text per frame; frames absent from the file keep their
    current (empty) text."""
    report = store.read_report(report_id)
    known = {fr.index for fr in report.frames}
    texts: dict[int, str] = {}
    for lineno, entry in _read_jsonl(text_file):
        try:
            frame_idx = int(entry["frame"])
            text = str(entry["text"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{text_file}:{lineno}: needs frame and text") from exc
        if frame_idx not in known:
            raise ValidationError(f"{text_file}:{lineno}: frame {frame_idx} not in report {report_id!r}")
        if frame_idx in texts:
            log.warning("%s: duplicate entry for frame %d, last wins", text_file, frame_idx)
        texts[frame_idx] = text
    for fr in report.frames:
        if fr.index in texts:
            fr.ocr_text = texts[fr.index]
    store.update_report(report)
    return report


def run_ocr(store: CorpusStore, report_id: str, command_template: str) -> VideoReport:
    """Convenience wrapper invoking an external OCR binary per frame image.

    ``command_template`` must contain ``{image}``; the command's stdout
    becomes the frame's OCR text.
    """
    if "{image}" not in command_template:
        raise ValidationError("OCR command template must contain {image}")
    report = store.read_report(report_id)
    for fr in report.frames:
        image = store.frame_image_path(report, fr)
        if image is None:
            continue
        proc = _run_template(command_template, image=str(image))
        if proc.returncode != 0:
            raise IngestionError(
                f"OCR command failed with exit {proc.returncode} on {image}",
                stderr=proc.stderr,
            )
        fr.ocr_text = proc.stdout.strip()
    store.update_report(report)
    return report


def subsample_report(report: VideoReport, target_fps: int) -> VideoReport:
    """Stride-subsample a stored report to a lower sampling rate.

    The stored fps must be an integer multiple of ``target_fps``. Frames
    are renumbered; the result is an in-memory view for evaluation grids,
    not persisted.
    """
    if target_fps == report.fps:
        return report
    if target_fps < 1 or report.fps % target_fps != 0:
        raise ValidationError(
            f"cannot subsample fps={report.fps} to {target_fps}: not an integer stride"
        )
    stride = report.fps // target_fps
    frames = [
        FrameRecord(index=i, image=fr.image, vectors=fr.vectors, ocr_text=fr.ocr_text)
        for i, fr in enumerate(report.frames[::stride])
    ]
    return VideoReport(
        report_id=report.report_id, app_id=report.app_id, fps=target_fps, frames=frames
    )
