"""Simulation and architecture configuration, JSON loading, derived setup."""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path as FsPath

import numpy as np

from .geometry import (Boundary, Grid, ModeSpec, TransducerArray, TravelTimeTable, View,
                       build_array, canonical_modes, compute_travel_times, default_boundaries)

MODE_NAMES = ("top0", "top1", "right0", "right1")


class PulseKind(str, Enum):
    GAUSSIAN_SINE = "gaussian_sine"
    RICKER = "ricker"


@dataclass(frozen=True)
class Pulse:
    f0: float = 10e6
    n_cycles: float = 2.0
    kind: PulseKind = PulseKind.RICKER

    def __post_init__(self):
        object.__setattr__(self, "kind", PulseKind(self.kind))
        if not self.f0 > 0:
            raise ValueError(f"pulse center frequency must be positive, got {self.f0}")

    def half_width(self) -> float:
        """Time beyond which the pulse envelope drops below 1e-6 of its peak."""
        if self.kind is PulseKind.RICKER:
            # solve 2a exp(-a) = 1e-6 for a = (pi f0 t)^2, which bounds |1 - 2a| exp(-a)
            a = np.log(1e6)
            for _ in range(30):
                a = np.log(1e6) + np.log(2 * a)
            return np.sqrt(a) / (np.pi * self.f0)
        sigma = self.n_cycles / (2 * np.pi * self.f0) * np.pi
        return sigma * np.sqrt(2 * np.log(1e6))


@dataclass(frozen=True)
class SimConfig:
    n_x: int = 32
    n_z: int = 32
    dx: float = 1e-4
    origin: tuple[float, float] = (0.0, 0.0)
    n_elem: int = 16
    pitch: float = 2e-4
    standoff: float = 0.0
    bottom_z: float | None = None
    left_x: float | None = None
    c: float = 5920.0
    fs: float = 98.67e6
    n_t: int = 512
    t0: float = 0.0
    pulse: Pulse = field(default_factory=Pulse)
    noise_sigma: float = 0.02
    defect_width: float = 1.2e-3
    defect_height: float = 0.6e-3
    modes_included: tuple[str, ...] = MODE_NAMES

    def __post_init__(self):
        object.__setattr__(self, "origin", tuple(float(v) for v in self.origin))
        object.__setattr__(self, "modes_included", tuple(self.modes_included))
        if isinstance(self.pulse, dict):
            object.__setattr__(self, "pulse", _from_dict(Pulse, self.pulse))
        bad = set(self.modes_included) - set(MODE_NAMES)
        if bad:
            raise ValueError(f"unknown modes {sorted(bad)}; expected a subset of {MODE_NAMES}")
        if not self.fs > 2 * self.pulse.f0:
            raise ValueError(f"fs={self.fs:g} Hz does not exceed twice the pulse frequency")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")


@dataclass(frozen=True)
class ArchConfig:
    pre_layers: int = 2
    pre_channels: int = 2
    pre_kernel: int = 3
    pre_groups: int = 1
    post_layers: int = 8
    post_channels: int = 16
    post_kernel: int = 3
    post_groups: int = 4
    interp: str = "linear"
    zero_init_residual: bool = True

    def __post_init__(self):
        for k in (self.pre_kernel, self.post_kernel):
            if k % 2 != 1:
                raise ValueError(f"kernel sizes must be odd, got {k}")
        if self.pre_layers < 1 or self.post_layers < 1:
            raise ValueError("each sub-network needs at least one layer")
        if self.pre_channels % self.pre_groups or self.post_channels % self.post_groups:
            raise ValueError("hidden channel counts must be divisible by their group counts")


def _from_dict(cls, data: dict):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ValueError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    return cls(**data)


def _to_jsonable(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, (tuple, list)):
        return [_to_jsonable(v) for v in obj]
    return obj


@dataclass(frozen=True)
class Config:
    sim: SimConfig = field(default_factory=SimConfig)
    arch: ArchConfig = field(default_factory=ArchConfig)

    @classmethod
    def from_dict(cls, data: dict) -> "Config":
        unknown = set(data) - {"sim", "arch"}
        if unknown:
            raise ValueError(f"unknown config sections: {sorted(unknown)}")
        return cls(_from_dict(SimConfig, data.get("sim", {})),
                   _from_dict(ArchConfig, data.get("arch", {})))

    def to_dict(self) -> dict:
        return {"sim": _to_jsonable(self.sim), "arch": _to_jsonable(self.arch)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def sha256(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()


def load_config(path) -> Config:
    with open(path) as fh:
        return Config.from_dict(json.load(fh))


def save_config(cfg: Config, path) -> None:
    FsPath(path).write_text(cfg.to_json())


class Setup:
    """Geometry derived from a :class:`SimConfig`: grid, arrays, walls, tables."""

    def __init__(self, sim: SimConfig):
        self.sim = sim
        self.grid = Grid(sim.n_x, sim.n_z, sim.dx, sim.origin)
        bottom, left = default_boundaries(self.grid)
        if sim.bottom_z is not None:
            bottom = Boundary.bottom(sim.bottom_z)
        if sim.left_x is not None:
            left = Boundary.left(sim.left_x)
        self.bottom, self.left = bottom, left
        self.arrays: dict[View, TransducerArray] = {
            v: build_array(v, sim.n_elem, sim.pitch, self.grid, sim.standoff) for v in View
        }
        self._check_boundaries()
        self.modes: dict[str, ModeSpec] = {m.name: m for m in canonical_modes(bottom, left)}

    def _check_boundaries(self) -> None:
        centers = self.grid.pixel_centers()
        if not (centers[:, 1].max() < self.bottom.position):
            raise ValueError("bottom boundary cuts through the imaging grid")
        if not (centers[:, 0].min() > self.left.position):
            raise ValueError("left boundary cuts through the imaging grid")
        for arr in self.arrays.values():
            if np.any(arr.positions[:, 1] == self.bottom.position) or \
                    np.any(arr.positions[:, 0] == self.left.position):
                raise ValueError("a boundary passes through a transducer element")

    @cached_property
    def tables(self) -> dict[str, TravelTimeTable]:
        return {name: compute_travel_times(self.arrays[m.view], self.grid, m, self.sim.c)
                for name, m in self.modes.items()}

    def view_modes(self, view: View, included=None) -> list[str]:
        included = MODE_NAMES if included is None else included
        return [n for n in MODE_NAMES if n in included and self.modes[n].view is View(view)]

    def check_window(self) -> None:
        """Raise if the latest included arrival plus the pulse tail leaves the record."""
        sim = self.sim
        if not sim.modes_included:
            return
        t_max = max(self.tables[n].times.max() for n in sim.modes_included)
        last = (t_max - sim.t0 + sim.pulse.half_width()) * sim.fs
        if last > sim.n_t - 1:
            raise ValueError(f"n_t={sim.n_t} too short: arrivals reach sample {last:.1f}")
