"""Small input-validation helpers shared across the package."""

import numpy as np


def as_complex_signal(x, name="signal"):
    """Coerce to a 1-D complex128 array, rejecting anything non-finite."""
    x = np.asarray(x)
    if x.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {x.shape}")
    x = x.astype(np.complex128, copy=False)
    if not np.all(np.isfinite(x.real)) or not np.all(np.isfinite(x.imag)):
        raise ValueError(f"{name} contains non-finite samples")
    return x


def check_aligned(x, y, name_x="reference", name_y="signal"):
    if len(x) != len(y):
        raise ValueError(
            f"{name_x} and {name_y} must be aligned, got lengths {len(x)} and {len(y)}"
        )


def check_positive(value, name):
    if not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be positive, got {value!r}")


def check_probability(value, name):
    if not 0.0 < value < 1.0:
        raise ValueError(f"{name} must lie strictly in (0, 1), got {value!r}")
