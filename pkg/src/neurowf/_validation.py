import numpy as np

from .exceptions import InvalidInput


def as_finite_1d(x, name="x", min_length=1):
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        arr = arr.ravel()
    if arr.size < min_length:
        raise InvalidInput(f"{name} must contain at least {min_length} value(s), got {arr.size}")
    if not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.isfinite(arr))[0])
        raise InvalidInput(f"{name} contains a non-finite value at position {bad}")
    return arr


def as_finite_2d(x, name="X"):
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise InvalidInput(f"{name} must be two-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInput(f"{name} contains non-finite values")
    return arr


def is_power_of_two(n):
    n = int(n)
    return n > 0 and (n & (n - 1)) == 0


def check_power_of_two(n, name="length"):
    if not is_power_of_two(n):
        raise InvalidInput(f"{name} must be a power of two, got {n}")
    return int(n)


def check_positive(value, name):
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise InvalidInput(f"{name} must be positive and finite, got {value}")
    return value


def check_binary_labels(y, name="y"):
    """Return labels as an int array of 0 (control) / 1 (case)."""
    arr = np.asarray(y)
    if arr.dtype.kind in "US" or arr.dtype == object:
        mapped = []
        for v in arr.ravel():
            key = str(v).strip().lower()
            if key in ("control", "ctl", "0"):
                mapped.append(0)
            elif key in ("mtbi", "case", "1"):
                mapped.append(1)
            else:
                raise InvalidInput(f"unrecognised label {v!r} in {name}")
        return np.asarray(mapped, dtype=int)
    arr = arr.astype(float).ravel()
    if not np.all(np.isin(arr, (0.0, 1.0))):
        raise InvalidInput(f"{name} must be binary (0=control, 1=mTBI)")
    return arr.astype(int)
