"""Forward/backward pairs for the layers of the fusion network.

All layers act on a single sample laid out as ``(channels, *spatial)``; the
spatial rank is 2 for images and 3 for data volumes.  Backward functions take
the cache returned by the matching forward.
"""
from __future__ import annotations

import numpy as np

WS_EPS = 1e-10
GN_EPS = 1e-5


def _flat_layout(spatial, ks):
    """Padded shape, flat shift per kernel tap, and the flat range covering the interior.

    On the flattened zero-padded array every tap is a contiguous shift, so a
    convolution becomes a short sum of small matrix products.
    """
    radii = [k // 2 for k in ks]
    padded = tuple(n + 2 * r for n, r in zip(spatial, radii))
    strides = np.cumprod((1,) + padded[:0:-1])[::-1]
    shifts = [int(sum((o - r) * st for o, r, st in zip(off, radii, strides)))
              for off in np.ndindex(*ks)]
    lo = int(sum(r * st for r, st in zip(radii, strides)))
    hi = int(sum((r + n - 1) * st for r, n, st in zip(radii, spatial, strides))) + 1
    interior = tuple(slice(r, r + n) for r, n in zip(radii, spatial))
    return padded, shifts, lo, hi, interior


def conv_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """Same-size, stride-1 cross-correlation with zero padding.

    x: (c_in, *S), w: (c_out, c_in, *K) with odd K, b: (c_out,)
    """
    c_out, c_in, *ks = w.shape
    if x.shape[0] != c_in or x.ndim != w.ndim - 1:
        raise ValueError(f"input {x.shape} does not match weights {w.shape}")
    if any(k % 2 == 0 for k in ks):
        raise ValueError(f"kernel size must be odd, got {tuple(ks)}")
    spatial = x.shape[1:]
    padded, shifts, lo, hi, interior = _flat_layout(spatial, ks)
    xp = np.pad(x, [(0, 0)] + [(k // 2, k // 2) for k in ks]).reshape(c_in, -1)
    taps = w.reshape(c_out, c_in, -1)
    acc = np.empty((c_out, hi - lo))
    acc[...] = b[:, None]
    # one multiply-add per (tap, input channel): a fixed, FMA-free summation order
    for t, d in enumerate(shifts):
        for c in range(c_in):
            acc += taps[:, c, t, None] * xp[c, lo + d:hi + d]
    y = np.zeros((c_out, int(np.prod(padded))))
    y[:, lo:hi] = acc
    y = y.reshape((c_out,) + padded)[(slice(None),) + interior]
    return np.ascontiguousarray(y), (xp, w, spatial)


def conv_backward(dy: np.ndarray, cache, need_dx: bool = True):
    """Gradients ``(dx, dw, db)`` of :func:`conv_forward`; ``dx`` is None unless needed."""
    xp, w, spatial = cache
    c_out, c_in, *ks = w.shape
    padded, shifts, lo, hi, interior = _flat_layout(spatial, ks)
    dyp = np.zeros((c_out,) + padded)
    dyp[(slice(None),) + interior] = dy
    dyp = dyp.reshape(c_out, -1)[:, lo:hi]
    taps = w.reshape(c_out, c_in, -1)
    dtaps = np.empty_like(taps)
    dxp = np.zeros_like(xp) if need_dx else None
    for t, d in enumerate(shifts):
        dtaps[:, :, t] = dyp @ xp[:, lo + d:hi + d].T
        if need_dx:
            dxp[:, lo + d:hi + d] += taps[:, :, t].T @ dyp
    db = dy.reshape(c_out, -1).sum(axis=1)
    dx = None
    if need_dx:
        dx = np.ascontiguousarray(dxp.reshape((c_in,) + padded)[(slice(None),) + interior])
    return dx, dtaps.reshape(w.shape), db


def weight_standardize(w: np.ndarray, eps: float = WS_EPS):
    """Standardize each output filter to zero mean, unit population variance."""
    axes = tuple(range(1, w.ndim))
    if int(np.prod(w.shape[1:])) < 2:
        raise ValueError("weight standardization needs a fan-in of at least 2")
    mu = w.mean(axis=axes, keepdims=True)
    inv = 1.0 / np.sqrt(w.var(axis=axes, keepdims=True) + eps)
    w_hat = (w - mu) * inv
    return w_hat, (w_hat, inv, axes)


def weight_standardize_backward(dw_hat: np.ndarray, cache) -> np.ndarray:
    w_hat, inv, axes = cache
    mean_g = dw_hat.mean(axis=axes, keepdims=True)
    mean_gx = (dw_hat * w_hat).mean(axis=axes, keepdims=True)
    return inv * (dw_hat - mean_g - w_hat * mean_gx)


def group_norm_forward(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray, groups: int,
                       eps: float = GN_EPS):
    c = x.shape[0]
    if c % groups:
        raise ValueError(f"{c} channels are not divisible into {groups} groups")
    xg = x.reshape(groups, -1)
    mu = xg.mean(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(xg.var(axis=1, keepdims=True) + eps)
    x_hat = ((xg - mu) * inv).reshape(x.shape)
    bshape = (c,) + (1,) * (x.ndim - 1)
    y = gamma.reshape(bshape) * x_hat + beta.reshape(bshape)
    return y, (x_hat, inv, gamma, groups)


def group_norm_backward(dy: np.ndarray, cache):
    """Gradients ``(dx, dgamma, dbeta)``."""
    x_hat, inv, gamma, groups = cache
    c = dy.shape[0]
    sp_axes = tuple(range(1, dy.ndim))
    dgamma = (dy * x_hat).sum(axis=sp_axes)
    dbeta = dy.sum(axis=sp_axes)
    dxh = (dy * gamma.reshape((c,) + (1,) * (dy.ndim - 1))).reshape(groups, -1)
    xh = x_hat.reshape(groups, -1)
    dx = inv * (dxh - dxh.mean(axis=1, keepdims=True)
                - xh * (dxh * xh).mean(axis=1, keepdims=True))
    return dx.reshape(dy.shape), dgamma, dbeta


def relu(x: np.ndarray):
    mask = x > 0
    return x * mask, mask


def relu_backward(dy: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return dy * mask


def softmax(logits: np.ndarray, axis: int = 0) -> np.ndarray:
    z = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean per-pixel cross entropy of class logits ``(n_cls, *S)`` against integer labels.

    Returns ``(loss, dlogits)``.
    """
    labels = np.asarray(labels)
    n_cls = logits.shape[0]
    if logits.shape[1:] != labels.shape:
        raise ValueError(f"logits {logits.shape} do not match labels {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= n_cls):
        raise ValueError(f"labels must lie in [0, {n_cls})")
    m = logits.max(axis=0, keepdims=True)
    lse = m[0] + np.log(np.exp(logits - m).sum(axis=0))
    lab = labels.astype(np.int64)
    picked = np.take_along_axis(logits, lab[None], axis=0)[0]
    n = labels.size
    loss = float((lse - picked).sum() / n)
    grad = softmax(logits)
    np.put_along_axis(grad, lab[None], np.take_along_axis(grad, lab[None], axis=0) - 1.0, axis=0)
    return loss, grad / n
