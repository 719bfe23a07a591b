"""Shared input validation helpers.

Thin wrappers that normalize user-supplied values to numpy arrays and raise
DomainError with a named-argument message instead of numpy's generic errors.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError


def as_float_vector(values, name: str) -> np.ndarray:
    """Coerce to a 1-d float array; reject empty or non-finite input."""
    try:
        arr = np.asarray(values, dtype=float)
    except (TypeError, ValueError) as exc:
        raise DomainError(f"{name} must be numeric: {exc}") from exc
    if arr.ndim != 1 or arr.size == 0:
        raise DomainError(f"{name} must be a non-empty 1-d vector, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise DomainError(f"{name} must be finite")
    return arr


def as_float_matrix(rows, name: str) -> np.ndarray:
    """Coerce to a 2-d float array of uniform row length; reject empty input."""
    try:
        arr = np.asarray(rows, dtype=float)
    except (TypeError, ValueError) as exc:
        raise DomainError(f"{name} must be a rectangular numeric array: {exc}") from exc
    if arr.ndim == 1 and arr.size > 0:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise DomainError(f"{name} must be a non-empty 2-d array, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise DomainError(f"{name} must be finite")
    return arr


def check_range(arr: np.ndarray, lo: float, hi: float, name: str) -> np.ndarray:
    if (arr < lo).any() or (arr > hi).any():
        raise DomainError(f"{name} values must lie in [{lo}, {hi}]")
    return arr


def check_choice(value, options, name: str):
    if value not in options:
        raise DomainError(f"{name} must be one of {sorted(options)}, got {value!r}")
    return value
