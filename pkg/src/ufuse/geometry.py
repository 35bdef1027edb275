"""Imaging grid, transducer arrays, reflective boundaries and travel-time tables.

Pixels are addressed as ``(i, j)`` with ``i`` along x (horizontal) and ``j``
along z (depth).  Flattened pixel indices are row-major over ``(n_x, n_z)``,
i.e. ``p = i * n_z + j``.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class View(str, Enum):
    TOP = "top"
    RIGHT = "right"


class BoundaryKind(str, Enum):
    BOTTOM = "bottom"
    LEFT = "left"


class Path(str, Enum):
    DIRECT = "direct"
    BOUNCE = "bounce"


@dataclass(frozen=True)
class Grid:
    n_x: int
    n_z: int
    dx: float
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.n_x < 1 or self.n_z < 1:
            raise ValueError(f"grid needs at least one pixel, got {self.n_x}x{self.n_z}")
        if not self.dx > 0:
            raise ValueError(f"pixel spacing must be positive, got {self.dx}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_x, self.n_z)

    @property
    def n_pixels(self) -> int:
        return self.n_x * self.n_z

    def pixel_center(self, i: int, j: int) -> np.ndarray:
        return np.array([self.origin[0] + i * self.dx, self.origin[1] + j * self.dx])

    def pixel_centers(self) -> np.ndarray:
        """All pixel centers as an ``(n_x * n_z, 2)`` array in flattened order."""
        xs = self.origin[0] + np.arange(self.n_x) * self.dx
        zs = self.origin[1] + np.arange(self.n_z) * self.dx
        X, Z = np.meshgrid(xs, zs, indexing="ij")
        return np.stack([X.ravel(), Z.ravel()], axis=1)

    @property
    def x_max(self) -> float:
        return self.origin[0] + (self.n_x - 1) * self.dx

    @property
    def z_max(self) -> float:
        return self.origin[1] + (self.n_z - 1) * self.dx


@dataclass(frozen=True)
class Boundary:
    kind: BoundaryKind
    position: float  # z_b for BOTTOM, x_b for LEFT

    @classmethod
    def bottom(cls, z_b: float) -> "Boundary":
        return cls(BoundaryKind.BOTTOM, float(z_b))

    @classmethod
    def left(cls, x_b: float) -> "Boundary":
        return cls(BoundaryKind.LEFT, float(x_b))


@dataclass(frozen=True)
class ModeSpec:
    view: View
    path: Path
    boundary: Boundary | None = None

    def __post_init__(self):
        if (self.path is Path.BOUNCE) != (self.boundary is not None):
            raise ValueError("a bounce mode needs exactly one boundary; a direct mode none")

    @property
    def index(self) -> int:
        return 0 if self.path is Path.DIRECT else 1

    @property
    def name(self) -> str:
        return f"{self.view.value}{self.index}"


@dataclass(frozen=True)
class TransducerArray:
    view: View
    pitch: float
    positions: np.ndarray  # (n_elem, 2)

    @property
    def n_elem(self) -> int:
        return len(self.positions)


@dataclass
class TravelTimeTable:
    mode: ModeSpec
    times: np.ndarray  # (n_s, n_r, n_x * n_z), seconds
    c: float
    grid_shape: tuple[int, int]

    @property
    def n_s(self) -> int:
        return self.times.shape[0]

    @property
    def n_r(self) -> int:
        return self.times.shape[1]

    @property
    def n_pixels(self) -> int:
        return self.times.shape[2]


def default_boundaries(grid: Grid) -> tuple[Boundary, Boundary]:
    """Bottom and left walls placed half a pixel beyond the outermost pixel centers."""
    return (
        Boundary.bottom(grid.z_max + 0.5 * grid.dx),
        Boundary.left(grid.origin[0] - 0.5 * grid.dx),
    )


def canonical_modes(bottom: Boundary, left: Boundary) -> list[ModeSpec]:
    """The four imaging modes in order top0, top1, right0, right1."""
    return [
        ModeSpec(View.TOP, Path.DIRECT),
        ModeSpec(View.TOP, Path.BOUNCE, bottom),
        ModeSpec(View.RIGHT, Path.DIRECT),
        ModeSpec(View.RIGHT, Path.BOUNCE, left),
    ]


def build_array(view: View, n_elem: int, pitch: float, grid: Grid,
                standoff: float = 0.0) -> TransducerArray:
    """Linear array centered along the grid edge of the given view.

    The top array sits at ``z = origin.z - standoff`` and runs along x; the
    right array sits at ``x = x_max + standoff`` and runs along z.
    """
    view = View(view)
    if n_elem < 1:
        raise ValueError(f"n_elem must be >= 1, got {n_elem}")
    if not pitch > 0:
        raise ValueError(f"pitch must be positive, got {pitch}")
    if view is View.TOP:
        extent, center = grid.n_x * grid.dx, grid.origin[0] + 0.5 * (grid.n_x - 1) * grid.dx
    else:
        extent, center = grid.n_z * grid.dx, grid.origin[1] + 0.5 * (grid.n_z - 1) * grid.dx
    if n_elem * pitch > 2 * extent:
        raise ValueError(
            f"array aperture {n_elem * pitch:g} m exceeds twice the grid extent {extent:g} m")

    along = center + (np.arange(n_elem) - 0.5 * (n_elem - 1)) * pitch
    if view is View.TOP:
        fixed = np.full(n_elem, grid.origin[1] - standoff)
        positions = np.stack([along, fixed], axis=1)
    else:
        fixed = np.full(n_elem, grid.x_max + standoff)
        positions = np.stack([fixed, along], axis=1)
    return TransducerArray(view, float(pitch), positions)


def mirror_position(pos, boundary: Boundary) -> np.ndarray:
    """Reflect one or more 2-D points across a boundary line."""
    out = np.array(pos, dtype=float, copy=True)
    if boundary.kind is BoundaryKind.BOTTOM:
        out[..., 1] = 2.0 * boundary.position - out[..., 1]
    else:
        out[..., 0] = 2.0 * boundary.position - out[..., 0]
    return out


def _distances(points: np.ndarray, pixels: np.ndarray) -> np.ndarray:
    d = points[:, None, :] - pixels[None, :, :]
    return np.sqrt(d[..., 0] ** 2 + d[..., 1] ** 2)


def compute_travel_times(array: TransducerArray, grid: Grid, mode: ModeSpec,
                         c: float) -> TravelTimeTable:
    """Source -> pixel -> receiver times for every (s, r, pixel) triple.

    Bounce modes reflect on the transmit leg: the source is replaced by its
    mirror image across the mode's boundary, the receive leg stays direct.
    """
    if not c > 0:
        raise ValueError(f"sound speed must be positive, got {c}")
    if mode.view is not array.view:
        raise ValueError(f"mode {mode.name} does not belong to the {array.view.value} array")

    pixels = grid.pixel_centers()
    receive = _distances(array.positions, pixels)
    if mode.path is Path.DIRECT:
        transmit = receive
    else:
        transmit = _distances(mirror_position(array.positions, mode.boundary), pixels)
    times = (transmit[:, None, :] + receive[None, :, :]) / c
    return TravelTimeTable(mode, times, float(c), grid.shape)
