"""Input checks shared by the estimator wrappers and the spec dataclasses."""

from __future__ import annotations

import numpy as np
from sklearn.utils import check_array


def check_load(X) -> np.ndarray:
    """Coerce hourly MW loads to a 1-d float array.

    Accepts a 1-d sequence or a single-column 2-d array, the latter so the
    estimators drop into sklearn pipelines fed with column vectors.
    """
    arr = check_array(X, ensure_2d=False, dtype=float, ensure_all_finite=True)
    if arr.ndim == 2:
        if arr.shape[1] != 1:
            raise ValueError(f"expected a single load column, got shape {arr.shape}")
        arr = arr[:, 0]
    if arr.size == 0:
        raise ValueError("load series is empty")
    if np.any(arr < 0):
        raise ValueError("load values must be non-negative")
    return arr


def check_fraction(name: str, value: float, *, allow_zero: bool = False) -> None:
    ok = (0 <= value <= 1) if allow_zero else (0 < value <= 1)
    if not ok:
        interval = "[0, 1]" if allow_zero else "(0, 1]"
        raise ValueError(f"{name} must be in {interval}, got {value}")


def check_non_negative(name: str, value: float) -> None:
    if not value >= 0:
        raise ValueError(f"{name} must be >= 0, got {value}")
