"""Input validation helpers shared by the estimators and the CLI."""

from __future__ import annotations

import numbers

import numpy as np


def check_gray_image(img, name="img", allow_empty=False):
    """Validate a grayscale frame and return it as a 2-D ``uint8`` array.

    Accepts any 2-D array-like with values in [0, 255]. Float inputs are
    accepted only if they are integral.
    """
    arr = np.asarray(img)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-D grayscale array, got shape {arr.shape}")
    if not allow_empty and arr.size == 0:
        raise ValueError(f"{name} is empty ({arr.shape[1]}x{arr.shape[0]})")
    if arr.dtype == np.uint8:
        return arr
    if arr.dtype.kind not in "iuf" and arr.dtype != bool:
        raise ValueError(f"{name} has unsupported dtype {arr.dtype}")
    if arr.size and (arr.min() < 0 or arr.max() > 255):
        raise ValueError(f"{name} values must lie in [0, 255]")
    if arr.dtype.kind == "f" and not np.all(np.isfinite(arr) & (arr == np.round(arr))):
        raise ValueError(f"{name} float values must be integral")
    return arr.astype(np.uint8)


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_fraction(value, name, low=0.0, high=1.0, closed=True):
    value = float(value)
    ok = low <= value <= high if closed else low < value < high
    if not ok:
        bounds = f"[{low}, {high}]" if closed else f"({low}, {high})"
        raise ValueError(f"{name} must lie in {bounds}, got {value}")
    return value
