"""Input validation helpers.

scikit-learn's ``check_array`` refuses complex input, so the checks needed
for generator matrices and probe vectors live here.
"""

import numbers

import numpy as np


def check_square_matrix(M, name="matrix"):
    """Return ``M`` as a 2-D complex ndarray, raising ValueError if not square."""
    try:
        arr = np.asarray(M, dtype=complex)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{name} must be numeric: {exc}") from None
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be a square 2-D array, got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise ValueError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def check_vector(v, dim, name="vector"):
    arr = np.asarray(v, dtype=complex)
    if arr.ndim != 1 or arr.shape[0] != dim:
        raise ValueError(f"{name} must have shape ({dim},), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def check_positive(x, name, strict=True):
    if not isinstance(x, numbers.Real) or not np.isfinite(x):
        raise ValueError(f"{name} must be a finite real number, got {x!r}")
    if strict and x <= 0:
        raise ValueError(f"{name} must be > 0, got {x!r}")
    if not strict and x < 0:
        raise ValueError(f"{name} must be >= 0, got {x!r}")
    return float(x)


def check_nonneg_int(n, name, minimum=0):
    if isinstance(n, bool) or not isinstance(n, numbers.Integral):
        raise ValueError(f"{name} must be an integer, got {n!r}")
    if n < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {n!r}")
    return int(n)


def check_grid(grid, name="grid", positive=True):
    arr = np.asarray(grid, dtype=float).ravel()
    if arr.size < 1:
        raise ValueError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    if positive and np.any(arr <= 0):
        raise ValueError(f"{name} must contain positive values only")
    return arr
