"""Deterministic synthetic corpora for desk-scale evaluation.

Each bug gets a signature sequence of colored-block screens and its own
vocabulary. Videos of the same bug share the last ``shared_frame_ratio``
of their frames (and the text on them) so the faulty behavior sits at the
end of every recording; the leading frames are video-specific. Vocabulary
across different bugs overlaps by ``vocab_overlap`` (0 gives fully
disjoint bug vocabularies, 1 gives one shared vocabulary).

Everything is seeded: the same parameters produce a byte-identical corpus,
including a fixed manifest timestamp.

The same screen generator also provides the reference image collection
(the stand-in for a large external screenshot corpus) used by default for
codebook training and IDF statistics.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image

from .corpus import CorpusStore, FrameRecord, VideoReport
from .errors import ParseError, ValidationError
from .features import FrameFeatureExtractor

SYNTH_APP = "synthapp"
SYNTH_CREATED_AT = "2000-01-01T00:00:00+00:00"
DEFAULT_REFERENCE_COUNT = 200
_IMAGE_SIZE = 64
_BLOCKS = 4
_TERMS_PER_BUG = 20


def _block_screen(rng: np.random.Generator, size: int = _IMAGE_SIZE, blocks: int = _BLOCKS) -> np.ndarray:
    """One colored-block screen: a blocks x blocks grid of random colors."""
    cell = size // blocks
    img = np.zeros((size, size, 3), dtype=np.uint8)
    colors = rng.integers(0, 256, size=(blocks, blocks, 3), dtype=np.uint8)
    for by in range(blocks):
        for bx in range(blocks):
            img[by * cell : (by + 1) * cell, bx * cell : (bx + 1) * cell] = colors[by, bx]
    return img


def reference_images(count: int = DEFAULT_REFERENCE_COUNT, seed: int = 0) -> list[np.ndarray]:
    """Deterministic reference screens, one per 'document'."""
    if count < 1:
        raise ValidationError(f"reference image count must be >= 1, got {count}")
    rng = np.random.default_rng((seed, 0))
    return [_block_screen(rng) for _ in range(count)]


def _bug_vocab(bug: int, vocab_overlap: float) -> list[str]:
    """Ordered bug vocabulary: app-wide shared terms first, then terms
    specific to this bug. The leading position matters: the vocabulary's
    head doubles as the 'core' every video of the bug carries, so with
    full overlap the cores coincide across bugs and the duplicate /
    non-duplicate agreement gap collapses to zero."""
    shared = int(round(vocab_overlap * _TERMS_PER_BUG))
    terms = [f"shared{i:03d}" for i in range(shared)]
    terms += [f"bug{bug:02d}word{i:03d}" for i in range(_TERMS_PER_BUG - shared)]
    return terms


def synth_corpus(
    root,
    bugs: int = 4,
    videos_per_bug: int = 3,
    frames_per_video: int = 8,
    shared_frame_ratio: float = 0.8,
    vocab_overlap: float = 0.0,
    seed: int = 0,
    fps: int = 5,
    app_id: str = SYNTH_APP,
    extractor: Optional[FrameFeatureExtractor] = None,
) -> dict[str, list[str]]:
    """Generate a labeled corpus under ``root`` and return the bug map.

    Writes frame PNGs, per-frame OCR text, and feature vectors from the
    built-in extractor, plus ``dataset.json`` recording the bug labels.
    """
    if bugs < 1 or videos_per_bug < 1 or frames_per_video < 1:
        raise ValidationError("bugs, videos_per_bug and frames_per_video must be positive")
    if not (0.0 <= shared_frame_ratio <= 1.0):
        raise ValidationError(f"shared_frame_ratio must be in [0,1], got {shared_frame_ratio}")
    if not (0.0 <= vocab_overlap <= 1.0):
        raise ValidationError(f"vocab_overlap must be in [0,1], got {vocab_overlap}")
    extractor = extractor or FrameFeatureExtractor(mode="single")
    store = CorpusStore(root)
    n_shared = int(round(shared_frame_ratio * frames_per_video))

    bug_map: dict[str, list[str]] = {}
    for bug in range(bugs):
        bug_id = f"bug{bug:02d}"
        vocab = _bug_vocab(bug, vocab_overlap)
        core_size = int(round(shared_frame_ratio * _TERMS_PER_BUG))
        core_text = " ".join(vocab[:core_size])
        base_rng = np.random.default_rng((seed, 1, bug))
        base_screens = [_block_screen(base_rng) for _ in range(frames_per_video)]

        bug_map[bug_id] = []
        for vid in range(videos_per_bug):
            report_id = f"{bug_id}-v{vid}"
            vid_rng = np.random.default_rng((seed, 2, bug, vid))
            noise_text = " ".join(
                f"bug{bug:02d}v{vid}noise{i:02d}" for i in range(_TERMS_PER_BUG - core_size)
            )
            frames = []
            with tempfile.TemporaryDirectory() as staging:
                for f in range(frames_per_video):
                    # faulty behavior lives in the trailing shared frames,
                    # which carry the bug's shared core vocabulary
                    if f >= frames_per_video - n_shared:
                        screen = base_screens[f]
                        text = core_text
                    else:
                        screen = _block_screen(vid_rng)
                        text = noise_text
                    name = f"{f:06d}.png"
                    Image.fromarray(screen).save(Path(staging) / name)
                    frames.append(
                        FrameRecord(
                            index=f,
                            image=f"frames/{name}",
                            vectors=extractor.extract(screen),
                            ocr_text=text,
                        )
                    )
                report = VideoReport(report_id=report_id, app_id=app_id, fps=fps, frames=frames)
                store.write_report(
                    report,
                    frames_dir=Path(staging),
                    extractor_id=extractor.extractor_id,
                    created_at=SYNTH_CREATED_AT,
                )
            bug_map[bug_id].append(report_id)

    dataset = {
        "app_id": app_id,
        "bugs": bug_map,
        "seed": seed,
        "params": {
            "bugs": bugs,
            "videos_per_bug": videos_per_bug,
            "frames_per_video": frames_per_video,
            "shared_frame_ratio": shared_frame_ratio,
            "vocab_overlap": vocab_overlap,
            "fps": fps,
        },
    }
    tmp = Path(root) / "dataset.json.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(dataset, fh, indent=1)
        fh.write("\n")
    os.replace(tmp, Path(root) / "dataset.json")
    return bug_map


def load_dataset(root) -> dict:
    path = Path(root) / "dataset.json"
    if not path.exists():
        raise ParseError(f"{path}: dataset file not found")
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        data["bugs"] = {str(b): list(v) for b, v in data["bugs"].items()}
        return data
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: malformed dataset file ({exc})") from exc
