"""Single-level orthonormal Haar transform.

The orthonormal scaling (1/sqrt(2)) makes the transform energy-preserving,
which is what lets it replace average pooling as a lossless downsampler.
"""

import numpy as np

_INV_SQRT2 = 1.0 / np.sqrt(2.0)


def haar_dwt(signal: np.ndarray):
    """Split an even-length signal into (approx, detail) half-rate bands.

    approx[k] = (x[2k] + x[2k+1]) / sqrt(2)
    detail[k] = (x[2k] - x[2k+1]) / sqrt(2)
    """
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"expected 1-D signal, got shape {x.shape}")
    if x.size % 2 != 0:
        raise ValueError(f"signal length must be even, got {x.size}; pad before calling")
    even, odd = x[0::2], x[1::2]
    return (even + odd) * _INV_SQRT2, (even - odd) * _INV_SQRT2


def haar_idwt(approx: np.ndarray, detail: np.ndarray) -> np.ndarray:
    """Invert :func:`haar_dwt`; exact up to float rounding."""
    a = np.asarray(approx, dtype=np.float64)
    d = np.asarray(detail, dtype=np.float64)
    if a.shape != d.shape or a.ndim != 1:
        raise ValueError(f"subband shapes must match and be 1-D, got {a.shape} vs {d.shape}")
    out = np.empty(2 * a.size)
    out[0::2] = (a + d) * _INV_SQRT2
    out[1::2] = (a - d) * _INV_SQRT2
    return out
