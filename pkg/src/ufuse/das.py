"""Delay-and-sum operator and its exact transpose.

The operator is stored as a list of ``(pixel, data index, weight)`` triplets
laid out pixel-major, then source, receiver and interpolation tap.  Both
directions reduce with ``np.bincount``, which accumulates sequentially in
input order, so results are bit-reproducible and agree bit-for-bit with a
plain nested loop over pixels, sources, receivers and taps.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .geometry import ModeSpec, TravelTimeTable


class Interp(str, Enum):
    NEAREST = "nearest"
    LINEAR = "linear"


@dataclass
class DataVolume:
    values: np.ndarray  # (n_t, n_s, n_r)
    fs: float
    t0: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.ndim != 3 or self.values.shape[0] < 1:
            raise ValueError(f"data volume must be (n_t, n_s, n_r) with n_t >= 1, got {self.values.shape}")
        if not self.fs > 0:
            raise ValueError(f"sampling frequency must be positive, got {self.fs}")

    @property
    def n_t(self) -> int:
        return self.values.shape[0]


@dataclass
class ModeImage:
    values: np.ndarray  # (n_x, n_z)
    mode: ModeSpec


def sample_positions(table: TravelTimeTable, fs: float, t0: float = 0.0) -> np.ndarray:
    """Fractional sample index of every travel time, shape ``(n_pix, n_s, n_r)``."""
    return ((table.times - t0) * fs).transpose(2, 0, 1)


class DasOperator:
    """Linear map from an ``(n_t, n_s, n_r)`` volume to an ``(n_x, n_z)`` image.

    Travel times whose samples fall outside ``[0, n_t)`` contribute nothing.
    """

    def __init__(self, table: TravelTimeTable, n_t: int, fs: float, t0: float = 0.0,
                 interp: Interp | str = Interp.LINEAR):
        if table.n_pixels == 0:
            raise ValueError("travel-time table has no pixels")
        if n_t < 1:
            raise ValueError(f"n_t must be >= 1, got {n_t}")
        self.table = table
        self.mode = table.mode
        self.interp = Interp(interp)
        self.n_t, self.fs, self.t0 = int(n_t), float(fs), float(t0)
        self.image_shape = tuple(table.grid_shape)
        n_s, n_r = table.n_s, table.n_r
        self.data_shape = (self.n_t, n_s, n_r)

        x = sample_positions(table, fs, t0)
        n_pix = x.shape[0]
        channel = (np.arange(n_s)[:, None] * n_r + np.arange(n_r)[None, :])[None]
        if self.interp is Interp.NEAREST:
            k = np.rint(x)[..., None]
            w = np.ones_like(k)
        else:
            k0 = np.floor(x)
            alpha = x - k0
            k = np.stack([k0, k0 + 1.0], axis=-1)
            w = np.stack([1.0 - alpha, alpha], axis=-1)
        n_taps = k.shape[-1]
        valid = (k >= 0) & (k < self.n_t)
        cols = k.clip(0, self.n_t - 1).astype(np.int64) * (n_s * n_r) + channel[..., None]
        rows = np.broadcast_to(np.arange(n_pix)[:, None, None, None], (n_pix, n_s, n_r, n_taps))

        self.rows = np.ascontiguousarray(rows[valid])
        self.cols = np.ascontiguousarray(cols[valid])
        self.weights = np.ascontiguousarray(w[valid])
        self.n_pixels = n_pix

    def forward(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f, dtype=np.float64)
        if f.shape != self.data_shape:
            raise ValueError(f"data shape {f.shape} does not match operator {self.data_shape}")
        u = np.bincount(self.rows, weights=self.weights * f.ravel()[self.cols],
                        minlength=self.n_pixels)
        return u.reshape(self.image_shape)

    def adjoint(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        if u.shape != self.image_shape:
            raise ValueError(f"image shape {u.shape} does not match operator {self.image_shape}")
        f = np.bincount(self.cols, weights=self.weights * u.ravel()[self.rows],
                        minlength=int(np.prod(self.data_shape)))
        return f.reshape(self.data_shape)

    __call__ = forward


def _check_dims(table: TravelTimeTable, shape) -> None:
    if tuple(shape[1:]) != (table.n_s, table.n_r):
        raise ValueError(f"data volume {tuple(shape)} inconsistent with table "
                         f"({table.n_s} sources, {table.n_r} receivers)")


def das_forward(f: DataVolume, table: TravelTimeTable,
                interp: Interp | str = Interp.LINEAR) -> ModeImage:
    _check_dims(table, f.values.shape)
    op = DasOperator(table, f.n_t, f.fs, f.t0, interp)
    return ModeImage(op.forward(f.values), table.mode)


def das_adjoint(u: ModeImage | np.ndarray, table: TravelTimeTable, n_t: int, fs: float,
                t0: float = 0.0, interp: Interp | str = Interp.LINEAR) -> DataVolume:
    values = u.values if isinstance(u, ModeImage) else np.asarray(u)
    if values.shape != tuple(table.grid_shape):
        raise ValueError(f"image shape {values.shape} does not match table grid {table.grid_shape}")
    op = DasOperator(table, n_t, fs, t0, interp)
    return DataVolume(op.adjoint(values), fs, t0)


def adjoint_residual(op: DasOperator, f: np.ndarray, u: np.ndarray, adjoint=None,
                     eps: float = 1e-300) -> float:
    """``|<Bf, u> - <f, B^T u>| / (|Bf| |u| + eps)``."""
    adjoint = adjoint or op.adjoint
    Bf = op.forward(f)
    lhs = float(np.vdot(Bf, u))
    rhs = float(np.vdot(f, adjoint(u)))
    return abs(lhs - rhs) / (np.linalg.norm(Bf) * np.linalg.norm(u) + eps)


def dot_product_check(table: TravelTimeTable, n_t: int, fs: float, seed: int = 0,
                      interp: Interp | str = Interp.LINEAR, t0: float = 0.0,
                      adjoint=None) -> float:
    """Relative adjoint residual for one seeded pair of standard-normal inputs.

    ``adjoint`` overrides the transpose under test (used for mutation checks).
    """
    op = DasOperator(table, n_t, fs, t0, interp)
    rng = np.random.default_rng(seed)
    f = rng.standard_normal(op.data_shape)
    u = rng.standard_normal(op.image_shape)
    return adjoint_residual(op, f, u, adjoint)
