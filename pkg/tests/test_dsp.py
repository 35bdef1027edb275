import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.signal import hilbert

from ufuse.das import ModeImage
from ufuse.dsp import (analytic_signal, depth_axis, envelope, hilbert_envelope, minmax_normalize,
                       threshold)
from ufuse.geometry import ModeSpec, Path, View

signals = arrays(np.float64, st.integers(2, 64), elements=st.floats(-1e3, 1e3))


def dft_analytic(x):
    """Analytic signal by an explicit O(n^2) DFT with the one-sided spectrum weights."""
    n = len(x)
    k = np.arange(n)
    W = np.exp(-2j * np.pi * np.outer(k, k) / n)
    X = W @ x
    h = np.zeros(n)
    h[0] = 1
    h[1:(n + 1) // 2] = 2
    if n % 2 == 0:
        h[n // 2] = 1
    return (W.conj() @ (X * h)) / n


def test_pure_tone_has_flat_envelope():
    n = 128
    t = np.arange(n)
    for a in (1.0, 3.5):
        x = a * np.cos(2 * np.pi * 8 * t / n + 0.3)
        np.testing.assert_allclose(envelope(x), a, atol=1e-12)


def test_matches_direct_dft_on_random_lines():
    rng = np.random.default_rng(0)
    for _ in range(100):
        x = rng.standard_normal(rng.integers(2, 40))
        ref = np.abs(dft_analytic(x))
        assert np.max(np.abs(envelope(x) - ref)) < 1e-9


@settings(max_examples=60)
@given(signals)
def test_matches_scipy_hilbert(x):
    np.testing.assert_allclose(analytic_signal(x), hilbert(x), atol=1e-9 * (1 + np.abs(x).max()))


@settings(max_examples=60)
@given(signals)
def test_real_part_preserved_and_dominance(x):
    a = analytic_signal(x)
    scale = 1 + np.abs(x).max()
    np.testing.assert_allclose(a.real, x, atol=1e-9 * scale)
    assert np.all(np.abs(a) >= np.abs(x) - 1e-9 * scale)


@settings(max_examples=60)
@given(signals)
def test_sign_invariance(x):
    np.testing.assert_array_equal(envelope(-x), envelope(x))


def test_axis_choice():
    rng = np.random.default_rng(1)
    img = rng.standard_normal((6, 9))
    np.testing.assert_allclose(envelope(img, axis=0)[:, 2], envelope(img[:, 2]), atol=1e-13)
    np.testing.assert_allclose(envelope(img, axis=1)[4], envelope(img[4]), atol=1e-13)
    assert depth_axis(View.TOP) == 1 and depth_axis(View.RIGHT) == 0
    mi = ModeImage(img, ModeSpec(View.RIGHT, Path.DIRECT))
    np.testing.assert_array_equal(hilbert_envelope(mi), envelope(img, axis=0))


def test_too_short_rejected():
    with pytest.raises(ValueError):
        envelope(np.ones(1))


def test_minmax_examples():
    np.testing.assert_array_equal(minmax_normalize([[2.0, 4.0], [6.0, 10.0]]),
                                  [[0, 0.25], [0.5, 1.0]])
    np.testing.assert_array_equal(minmax_normalize(np.full((3, 3), 7.0)), np.zeros((3, 3)))


@given(arrays(np.float64, (5, 5), elements=st.integers(-1000, 1000).map(float)),
       st.floats(1e-3, 1e3), st.floats(-1e3, 1e3))
def test_minmax_affine_invariant(img, a, b):
    n1 = minmax_normalize(img)
    assert n1.min() >= 0 and n1.max() <= 1
    np.testing.assert_allclose(minmax_normalize(a * img + b), n1, atol=1e-6)


def test_threshold_examples():
    img = np.array([[0.1, 0.5], [0.51, 0.9]])
    np.testing.assert_array_equal(threshold(img, 0.5), [[0, 0], [1, 1]])
    assert threshold(img, 0.5).dtype == np.uint8
    with pytest.raises(ValueError):
        threshold(img, np.nan)


@given(arrays(np.float64, (4, 4), elements=st.floats(0, 1)), st.floats(0, 1), st.floats(0, 1))
def test_threshold_monotone(img, t1, t2):
    lo, hi = min(t1, t2), max(t1, t2)
    assert np.all(threshold(img, hi) <= threshold(img, lo))
