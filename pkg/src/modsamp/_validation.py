"""Small input-validation helpers shared by the functional API and the estimators."""
import math
import numbers

import numpy as np

from .exceptions import ParameterError


def check_positive(value, name):
    if not isinstance(value, numbers.Real) or not math.isfinite(value) or value <= 0:
        raise ParameterError(f"{name} must be a positive finite number, got {value!r}")
    return float(value)


def check_count(value, name, minimum=0):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ParameterError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ParameterError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_fraction(value, name, upper=0.5):
    """Accept ``0 <= value < upper`` (guard bands, default strictly below one half)."""
    if not isinstance(value, numbers.Real) or not 0 <= value < upper:
        raise ParameterError(f"{name} must lie in [0, {upper}), got {value!r}")
    return float(value)


def as_float_array(values, name, min_length=1, finite=True):
    arr = np.array(values, dtype=float, copy=True).reshape(-1)
    if arr.size < min_length:
        raise ParameterError(f"{name} needs at least {min_length} entries, got {arr.size}")
    if finite and not np.all(np.isfinite(arr)):
        raise ParameterError(f"{name} contains non-finite values")
    return arr


def as_flag_array(flags, length, name="flags"):
    arr = np.asarray(flags).reshape(-1)
    if arr.size != length:
        raise ParameterError(f"{name} has length {arr.size}, expected {length}")
    return arr.astype(bool)


def frozen(arr):
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


def interior(n, guard):
    """Index slice dropping ``floor(guard * n)`` entries at each end."""
    check_fraction(guard, "guard")
    cut = int(math.floor(guard * n))
    if n - 2 * cut < 1:
        raise ParameterError(f"guard {guard} leaves no interior samples out of {n}")
    return slice(cut, n - cut)
