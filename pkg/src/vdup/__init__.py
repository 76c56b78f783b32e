"""Duplicate detection for video-based bug reports.

Given a new screen-recording bug report, rank a corpus of existing reports
by similarity, combining an unordered bag-of-visual-words TF-IDF channel,
ordered fuzzy frame-sequence alignment, and OCR-text retrieval, with a
vocabulary-agreement rule deciding when the textual channel is trusted.
"""

from .bovw import IdfTable, VisualCodebook, build_idf, build_tf, cosine, encode_tfidf, train_codebook
from .corpus import CorpusManifest, CorpusStore, FrameRecord, VideoReport
from .errors import (
    DuplicateReportError,
    ExtractionError,
    IngestionError,
    InsufficientDataError,
    ParseError,
    ReportNotFoundError,
    ValidationError,
    VdupError,
)
from .evaluation import DetectionTask, MetricsReport, aggregate, evaluate_task, generate_tasks
from .features import FrameFeatureExtractor, extract_multi, extract_single
from .ingest import IngestionConfig, import_features, import_ocr_text, sample_frames
from .ranker import (
    DuplicateRanker,
    FusionConfig,
    RankedResult,
    combine,
    select_mode,
    vocabulary_agreement,
)
from .sequence import (
    FrameSimConfig,
    LcsResult,
    aggregate_visual,
    f_lcs,
    frame_sim,
    normalize_flcs,
    normalize_wlcs,
    w_lcs,
)
from .synth import reference_images, synth_corpus
from .text import TextDocument, TextSimilarityIndex, build_document, preprocess

__version__ = "0.1.0"

__all__ = [
    "CorpusManifest",
    "CorpusStore",
    "DetectionTask",
    "DuplicateRanker",
    "DuplicateReportError",
    "ExtractionError",
    "FrameFeatureExtractor",
    "FrameRecord",
    "FrameSimConfig",
    "FusionConfig",
    "IdfTable",
    "IngestionConfig",
    "IngestionError",
    "InsufficientDataError",
    "LcsResult",
    "MetricsReport",
    "ParseError",
    "RankedResult",
    "ReportNotFoundError",
    "TextDocument",
    "TextSimilarityIndex",
    "ValidationError",
    "VdupError",
    "VideoReport",
    "VisualCodebook",
    "aggregate",
    "aggregate_visual",
    "build_document",
    "build_idf",
    "build_tf",
    "combine",
    "cosine",
    "encode_tfidf",
    "evaluate_task",
    "extract_multi",
    "extract_single",
    "f_lcs",
    "frame_sim",
    "generate_tasks",
    "import_features",
    "import_ocr_text",
    "normalize_flcs",
    "normalize_wlcs",
    "preprocess",
    "reference_images",
    "sample_frames",
    "select_mode",
    "synth_corpus",
    "train_codebook",
    "vocabulary_agreement",
    "w_lcs",
]
