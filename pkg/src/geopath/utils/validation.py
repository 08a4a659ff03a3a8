"""Input validation helpers.

These mirror the ``sklearn.utils.validation`` conventions: each helper
returns a cleaned array/scalar or raises :class:`RejectedInputError`.
"""

import numbers

import numpy as np

from ..exceptions import RejectedInputError


def check_scalar(value, name, *, min_val=None, max_val=None, include_min=True,
                 include_max=True, error=RejectedInputError):
    """Return ``value`` as a finite float after bound checks."""
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise error(f"{name} must be a real number, got {type(value).__name__}")
    value = float(value)
    if not np.isfinite(value):
        raise error(f"{name} must be finite, got {value}")
    if min_val is not None:
        if (value < min_val) if include_min else (value <= min_val):
            op = ">=" if include_min else ">"
            raise error(f"{name} must be {op} {min_val}, got {value}")
    if max_val is not None:
        if (value > max_val) if include_max else (value >= max_val):
            op = "<=" if include_max else "<"
            raise error(f"{name} must be {op} {max_val}, got {value}")
    return value


def check_positive(value, name, error=RejectedInputError):
    return check_scalar(value, name, min_val=0.0, include_min=False, error=error)


def check_int(value, name, *, min_val=None, error=RejectedInputError):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise error(f"{name} must be an integer, got {type(value).__name__}")
    value = int(value)
    if min_val is not None and value < min_val:
        raise error(f"{name} must be >= {min_val}, got {value}")
    return value


def check_vector(x, name, *, size=None, dtype=float, min_size=1):
    """Return a finite 1-D array of ``dtype``."""
    try:
        arr = np.asarray(x, dtype=dtype)
    except (TypeError, ValueError) as exc:
        raise RejectedInputError(f"{name}: {exc}") from exc
    if arr.ndim != 1:
        raise RejectedInputError(f"{name} must be 1-D, got shape {arr.shape}")
    if size is not None and arr.size != size:
        raise RejectedInputError(f"{name} must have {size} entries, got {arr.size}")
    if arr.size < min_size:
        raise RejectedInputError(f"{name} needs at least {min_size} entries")
    if not np.all(np.isfinite(arr)):
        raise RejectedInputError(f"{name} contains non-finite values")
    return arr


def check_same_length(*pairs):
    """Raise unless every ``(name, array)`` pair has the same length."""
    sizes = {name: len(arr) for name, arr in pairs}
    if len(set(sizes.values())) > 1:
        raise RejectedInputError(f"length mismatch: {sizes}")
