"""Built-in deterministic frame feature extractors.

Two modes mirror the two classes of upstream extractors the engine can
consume:

* ``single``: one vector per frame. The image is converted to grayscale,
  partitioned into a g x g grid, and the per-cell mean intensities (in
  [0, 1]) are L2-normalized into one vector of dim g*g (64 by default).
* ``multi``: up to ``descriptor_cap`` vectors per frame. Non-overlapping
  16 x 16 patches are scored by intensity standard deviation (a local
  contrast proxy); the top patches each yield an orientation histogram
  of their intensity gradients, L2-normalized.

Externally computed embeddings enter through the feature-import path
instead; these extractors exist so the engine is self-contained and
reproducible. Identical pixels always yield identical vectors.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import ExtractionError, ValidationError

PATCH_SIZE = 16

# ITU-R 601 luma weights
_LUMA = np.array([0.299, 0.587, 0.114])


def load_grayscale(image) -> np.ndarray:
    """Return a 2-D float64 intensity array in [0, 1].

    Accepts a path or an ndarray (2-D grayscale, or HxWx3 RGB). Integer
    arrays are scaled by 1/255; float arrays are taken as already in [0, 1].
    """
    if isinstance(image, (str, Path)):
        try:
            with Image.open(image) as img:
                arr = np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
        except (OSError, ValueError) as exc:
            raise ExtractionError(f"cannot read image {image}: {exc}") from exc
        return arr @ _LUMA
    arr = np.asarray(image)
    if arr.ndim == 3:
        arr = arr.astype(np.float64)
        if np.issubdtype(np.asarray(image).dtype, np.integer):
            arr = arr / 255.0
        return arr[..., :3] @ _LUMA
    if arr.ndim != 2:
        raise ExtractionError(f"expected a 2-D or HxWx3 image, got shape {arr.shape}")
    arr = arr.astype(np.float64)
    if np.issubdtype(np.asarray(image).dtype, np.integer):
        arr = arr / 255.0
    return arr


def _l2_normalize(vec: np.ndarray) -> np.ndarray:
    # All-zero vectors are left unnormalized (division-by-zero guard);
    # cosine against a zero vector is defined as 0 downstream.
    norm = np.linalg.norm(vec)
    return vec if norm == 0.0 else vec / norm


def extract_single(image, grid: int = 8) -> np.ndarray:
    """Grid-of-mean-intensities descriptor, L2-normalized, dim grid*grid."""
    gray = load_grayscale(image)
    h, w = gray.shape
    if h < grid or w < grid:
        raise ExtractionError(f"image {h}x{w} smaller than {grid}x{grid} grid")
    cells = np.empty(grid * grid, dtype=np.float64)
    for gy in range(grid):
        y0, y1 = gy * h // grid, (gy + 1) * h // grid
        for gx in range(grid):
            x0, x1 = gx * w // grid, (gx + 1) * w // grid
            cells[gy * grid + gx] = gray[y0:y1, x0:x1].mean()
    return _l2_normalize(cells)


def _orientation_histogram(patch: np.ndarray, bins: int) -> np.ndarray:
    gy, gx = np.gradient(patch)
    magnitude = np.hypot(gx, gy)
    angle = np.arctan2(gy, gx)  # (-pi, pi]
    idx = np.floor((angle + np.pi) / (2.0 * np.pi) * bins).astype(int)
    idx = np.clip(idx, 0, bins - 1)
    hist = np.zeros(bins, dtype=np.float64)
    np.add.at(hist, idx.ravel(), magnitude.ravel())
    return _l2_normalize(hist)


def extract_multi(image, bins: int = 8, descriptor_cap: int = 10) -> list[np.ndarray]:
    """Top-contrast patch descriptors: at most ``descriptor_cap`` orientation
    histograms from the highest-variance 16x16 patches (ties broken in
    row-major patch order)."""
    gray = load_grayscale(image)
    h, w = gray.shape
    if h < PATCH_SIZE or w < PATCH_SIZE:
        raise ExtractionError(f"image {h}x{w} smaller than one {PATCH_SIZE}x{PATCH_SIZE} patch")
    patches = []
    for py in range(h // PATCH_SIZE):
        for px in range(w // PATCH_SIZE):
            patch = gray[
                py * PATCH_SIZE : (py + 1) * PATCH_SIZE,
                px * PATCH_SIZE : (px + 1) * PATCH_SIZE,
            ]
            patches.append(patch)
    scores = [float(np.std(p)) for p in patches]
    order = sorted(range(len(patches)), key=lambda i: (-scores[i], i))
    selected = order[: min(descriptor_cap, len(patches))]
    return [_orientation_histogram(patches[i], bins) for i in selected]


class FrameFeatureExtractor(BaseEstimator, TransformerMixin):
    """Stateless transformer over frame images.

    Parameters
    ----------
    mode : {"single", "multi"}
    grid : int
        Grid side for single mode; output dim is grid*grid.
    bins : int
        Orientation histogram bins for multi mode.
    descriptor_cap : int
        Max descriptors per frame in multi mode (hard cap 10).
    """

    def __init__(self, mode: str = "single", grid: int = 8, bins: int = 8,
                 descriptor_cap: int = 10):
        self.mode = mode
        self.grid = grid
        self.bins = bins
        self.descriptor_cap = descriptor_cap

    def _check_params(self) -> None:
        if self.mode not in ("single", "multi"):
            raise ValidationError(f"mode must be 'single' or 'multi', got {self.mode!r}")
        if self.grid < 1:
            raise ValidationError(f"grid must be >= 1, got {self.grid}")
        if not (1 <= self.descriptor_cap <= 10):
            raise ValidationError(f"descriptor_cap must be in 1..10, got {self.descriptor_cap}")
        if self.bins < 1:
            raise ValidationError(f"bins must be >= 1, got {self.bins}")

    @property
    def extractor_id(self) -> str:
        self._check_params()
        if self.mode == "single":
            return f"builtin-single-g{self.grid}"
        return f"builtin-multi-g{PATCH_SIZE}b{self.bins}"

    def fit(self, X=None, y=None):
        self._check_params()
        return self

    def extract(self, image) -> list[np.ndarray]:
        """Vectors for one frame (length 1 in single mode)."""
        self._check_params()
        if self.mode == "single":
            return [extract_single(image, grid=self.grid)]
        return extract_multi(image, bins=self.bins, descriptor_cap=self.descriptor_cap)

    def transform(self, X) -> list[list[np.ndarray]]:
        """Map a sequence of images (paths or arrays) to per-frame vector lists."""
        return [self.extract(img) for img in X]


def extractor_from_id(extractor_id: str):
    """Rebuild a built-in extractor from its recorded id, or None if the id
    names an external extractor (e.g. imported neural embeddings)."""
    if extractor_id.startswith("builtin-single-g"):
        return FrameFeatureExtractor(mode="single", grid=int(extractor_id.split("g")[-1]))
    if extractor_id.startswith("builtin-multi-g"):
        return FrameFeatureExtractor(mode="multi", bins=int(extractor_id.split("b")[-1]))
    return None
