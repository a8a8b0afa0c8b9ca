"""Input validation helpers shared by the estimators and simulators."""

import math
import numbers

import numpy as np


def check_finite_nonnegative(value, name):
    if not isinstance(value, numbers.Real) or not math.isfinite(value) or value < 0:
        raise ValueError(f"{name} must be a finite number >= 0, got {value!r}")
    return float(value)


def check_positive(value, name):
    if not isinstance(value, numbers.Real) or not math.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a finite number > 0, got {value!r}")
    return float(value)


def check_probability(value, name, allow_zero=True):
    value = check_finite_nonnegative(value, name)
    if value > 1 or (not allow_zero and value == 0):
        bounds = "[0, 1]" if allow_zero else "(0, 1]"
        raise ValueError(f"{name} must lie in {bounds}, got {value!r}")
    return value


def check_counts(counts, name="counts"):
    """Return ``counts`` as a 1-d int64 array of non-negative values."""
    arr = np.asarray(counts)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if arr.size and (not np.all(np.isfinite(arr)) or np.any(arr < 0)):
        raise ValueError(f"{name} must be finite and >= 0")
    if arr.size and np.any(arr != np.round(arr)):
        raise ValueError(f"{name} must be integers")
    return arr.astype(np.int64)


def check_uniform_edges(edges, name="bin_edges"):
    """Return ``edges`` as a float array of strictly increasing, uniform edges."""
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2:
        raise ValueError(f"{name} needs at least two edges")
    widths = np.diff(edges)
    if np.any(widths <= 0):
        raise ValueError(f"{name} must be strictly increasing")
    if not np.allclose(widths, widths[0], rtol=1e-9, atol=1e-12):
        raise ValueError(f"{name} must be uniform")
    return edges


def check_increasing(values, name):
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or np.any(np.diff(values) <= 0):
        raise ValueError(f"{name} must be strictly increasing")
    return values
