"""Small input-validation helpers shared by the public entry points."""

from __future__ import annotations

import numpy as np

from .errors import ValidationError


def as_float_array(name, value, shape=None, allow_none=False):
    """Coerce to a float64 ndarray, optionally checking the exact shape."""
    if value is None:
        if allow_none:
            return None
        raise ValidationError(f"{name} must not be None")
    arr = np.asarray(value, dtype=np.float64)
    if shape is not None and arr.shape != tuple(shape):
        raise ValidationError(f"{name} has shape {arr.shape}, expected {tuple(shape)}")
    return arr


def check_finite(name, arr):
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def check_same_shape(name_a, a, name_b, b):
    if a.shape != b.shape:
        raise ValidationError(
            f"{name_a} has shape {a.shape} but {name_b} has shape {b.shape}"
        )


def check_positive(name, value):
    if not np.isscalar(value) and np.asarray(value).ndim != 0:
        raise ValidationError(f"{name} must be a scalar")
    if not float(value) > 0.0:
        raise ValidationError(f"{name} must be positive, got {value!r}")
    return float(value)


def check_in_set(name, value, allowed):
    if value not in allowed:
        raise ValidationError(f"{name} must be one of {sorted(allowed)}, got {value!r}")
    return value
