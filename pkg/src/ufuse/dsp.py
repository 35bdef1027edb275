"""Envelope detection, normalization and thresholding for the fusion baseline."""
from __future__ import annotations

import numpy as np

from .das import ModeImage
from .geometry import View


def analytic_signal(x, axis: int = -1) -> np.ndarray:
    """Analytic signal by zeroing negative frequencies of an unpadded DFT.

    Positive-frequency bins are doubled; DC and (for even lengths) the
    Nyquist bin are kept as is.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[axis]
    if n < 2:
        raise ValueError(f"envelope needs at least 2 samples along the axis, got {n}")
    h = np.zeros(n)
    h[0] = 1.0
    if n % 2 == 0:
        h[n // 2] = 1.0
        h[1:n // 2] = 2.0
    else:
        h[1:(n + 1) // 2] = 2.0
    shape = [1] * x.ndim
    shape[axis] = n
    return np.fft.ifft(np.fft.fft(x, axis=axis) * h.reshape(shape), axis=axis)


def envelope(x, axis: int = -1) -> np.ndarray:
    return np.abs(analytic_signal(x, axis))


def depth_axis(view: View) -> int:
    # images are (n_x, n_z): depth is z for the top array, x for the right array
    return 1 if View(view) is View.TOP else 0


def hilbert_envelope(u: ModeImage) -> np.ndarray:
    """Envelope of a mode image along the depth direction of its view."""
    return envelope(u.values, axis=depth_axis(u.mode.view))


def minmax_normalize(img) -> np.ndarray:
    img = np.asarray(img, dtype=float)
    lo, hi = img.min(), img.max()
    if hi == lo:
        return np.zeros_like(img)
    return (img - lo) / (hi - lo)


def threshold(img, theta: float) -> np.ndarray:
    if not np.isfinite(theta):
        raise ValueError(f"threshold must be finite, got {theta}")
    return (np.asarray(img) > theta).astype(np.uint8)
