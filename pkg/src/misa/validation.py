"""Input validation helpers shared across the package."""

from __future__ import annotations

import numpy as np


def check_positive_int(value: int, name: str) -> int:
    if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def check_fraction(value: float, name: str) -> float:
    value = float(value)
    if not (0.0 <= value <= 1.0):
        raise ValueError(f"{name} must lie in [0, 1], got {value!r}")
    return value


def check_finite(arr: np.ndarray, name: str) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must contain only finite values")
    return arr


def check_matrix(arr, name: str, n_rows: int | None = None, n_cols: int | None = None) -> np.ndarray:
    """Coerce to a 2-D float64 array and validate shape and finiteness."""
    out = np.asarray(arr, dtype=np.float64)
    if out.ndim != 2:
        raise ValueError(f"{name} must be a 2-D matrix, got ndim={out.ndim}")
    if n_rows is not None and out.shape[0] != n_rows:
        raise ValueError(f"{name} must have {n_rows} rows, got {out.shape[0]}")
    if n_cols is not None and out.shape[1] != n_cols:
        raise ValueError(f"{name} must have {n_cols} columns, got {out.shape[1]}")
    return check_finite(out, name)


def check_vector(arr, name: str, length: int | None = None) -> np.ndarray:
    out = np.asarray(arr, dtype=np.float64)
    if out.ndim != 1:
        raise ValueError(f"{name} must be a 1-D vector, got ndim={out.ndim}")
    if length is not None and out.shape[0] != length:
        raise ValueError(f"{name} must have length {length}, got {out.shape[0]}")
    return check_finite(out, name)


def check_choice(value: str, options: tuple[str, ...], name: str) -> str:
    if value not in options:
        raise ValueError(f"{name} must be one of {options}, got {value!r}")
    return value
