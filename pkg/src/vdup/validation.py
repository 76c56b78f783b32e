"""Input validation helpers used by the estimators and pipeline stages."""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError


def as_feature_vector(values, name: str = "vector") -> np.ndarray:
    """Coerce to a finite 1-D float64 array."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValidationError(f"{name} must be a nonempty 1-D vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains NaN or Inf")
    return arr


def as_feature_matrix(vectors: Iterable, name: str = "features") -> np.ndarray:
    """Stack vectors into a finite 2-D float64 matrix, checking equal dims."""
    rows = [as_feature_vector(v, name=f"{name}[{i}]") for i, v in enumerate(vectors)]
    if not rows:
        raise ValidationError(f"{name} is empty")
    dim = rows[0].shape[0]
    for i, r in enumerate(rows):
        if r.shape[0] != dim:
            raise ValidationError(
                f"{name}[{i}] has dim {r.shape[0]}, expected {dim} (all dims must match)"
            )
    return np.vstack(rows)


def check_unit_interval(x: float, name: str) -> float:
    x = float(x)
    if not (0.0 <= x <= 1.0):
        raise ValidationError(f"{name} must lie in [0, 1], got {x}")
    return x


def check_positive_int(x, name: str) -> int:
    if int(x) != x or int(x) < 1:
        raise ValidationError(f"{name} must be a positive integer, got {x!r}")
    return int(x)


def check_same_dim(vectors: Sequence[np.ndarray], name: str = "vectors") -> int:
    """Return the common dimension of a nonempty vector list."""
    if not vectors:
        raise ValidationError(f"{name} is empty")
    dim = len(vectors[0])
    for i, v in enumerate(vectors):
        if len(v) != dim:
            raise ValidationError(f"{name}[{i}] has dim {len(v)}, expected {dim}")
    return dim


def clamp01(x: float) -> float:
    return 0.0 if x < 0.0 else 1.0 if x > 1.0 else x
