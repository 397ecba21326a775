"""Input validation helpers.

Small check_* functions in the spirit of sklearn's check_array: coerce to the
canonical dtype/shape and raise ValidationError with a named problem otherwise.
"""
from __future__ import annotations

import numpy as np

from .errors import ValidationError

ROOT_SENTINEL = -1


def check_positions(frames, name: str = "frames") -> np.ndarray:
    """Coerce to a finite float64 (T, N, 3) array."""
    arr = np.asarray(frames, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValidationError(f"{name} must have shape (T, N, 3), got {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def check_parents(parent, name: str = "parent") -> np.ndarray:
    """Coerce to an int array; reject shape-level garbage only.

    Semantic tree validity (single root, no cycles) belongs to
    skeleton.validate_skeleton, which reports rather than raises.
    """
    arr = np.asarray(parent)
    if arr.ndim != 1 or arr.size == 0:
        raise ValidationError(f"{name} must be a non-empty 1-d integer array")
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.all(arr == np.floor(arr)):
            raise ValidationError(f"{name} must contain integers")
    return arr.astype(np.int64)


def check_lengths(lengths, n_bones: int | None = None, name: str = "lengths") -> np.ndarray:
    """Coerce to a positive finite float64 (n_bones,) vector."""
    arr = np.asarray(lengths, dtype=np.float64)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be 1-d, got shape {arr.shape}")
    if n_bones is not None and arr.shape[0] != n_bones:
        raise ValidationError(f"{name} must have {n_bones} entries, got {arr.shape[0]}")
    if not np.isfinite(arr).all():
        raise ValidationError(f"{name} contains non-finite values")
    if np.any(arr <= 0.0):
        bad = int(np.argmax(arr <= 0.0))
        raise ValidationError(f"non-positive length at bone {bad}")
    return arr


def check_quaternions(q, name: str = "quaternions", tol: float = 1e-9) -> np.ndarray:
    """Coerce to float64 (..., 4) with unit norm within tol."""
    arr = np.asarray(q, dtype=np.float64)
    if arr.ndim < 1 or arr.shape[-1] != 4:
        raise ValidationError(f"{name} must have a trailing dimension of 4, got {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValidationError(f"{name} contains non-finite values")
    norms = np.linalg.norm(arr, axis=-1)
    err = np.abs(norms - 1.0)
    if np.any(err > tol):
        idx = np.unravel_index(int(np.argmax(err)), err.shape)
        raise ValidationError(f"{name} not unit-norm at index {idx} (norm {norms[idx]:.12g})")
    return arr


def check_frame_rate(frame_rate, name: str = "frame_rate") -> float:
    rate = float(frame_rate)
    if not np.isfinite(rate) or rate <= 0.0:
        raise ValidationError(f"{name} must be a positive finite number, got {frame_rate!r}")
    return rate


def check_unit_rows(arr, name: str = "directions", tol: float = 1e-9) -> np.ndarray:
    """Coerce to float64 (..., 3) rows of unit Euclidean norm within tol."""
    a = np.asarray(arr, dtype=np.float64)
    if a.ndim < 1 or a.shape[-1] != 3:
        raise ValidationError(f"{name} must have a trailing dimension of 3, got {a.shape}")
    norms = np.linalg.norm(a, axis=-1)
    err = np.abs(norms - 1.0)
    if np.any(err > tol):
        idx = np.unravel_index(int(np.argmax(err)), err.shape)
        raise ValidationError(f"non-unit direction at bone {idx[0] if err.ndim == 1 else idx}")
    return a
