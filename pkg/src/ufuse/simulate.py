"""Phantoms and a linear point-scatterer arrival model for FMC data.

Each perimeter pixel of a rotated rectangular defect acts as a point
scatterer.  Recorded traces are the superposition of delayed copies of a
zero-phase pulse, one per (mode, scatterer), plus optional white noise.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import Config, Pulse, PulseKind, Setup, SimConfig, save_config
from .das import DataVolume
from .geometry import TransducerArray, View
from .tensorio import write_tensor


@dataclass
class Phantom:
    seg: np.ndarray  # (n_x, n_z) uint8 labels
    scatterers: list[tuple[int, float]]  # (flat pixel index, reflectivity)
    angle: float


def pulse_eval(pulse: Pulse, t):
    """Zero-phase source pulse sampled at times ``t`` (seconds)."""
    t = np.asarray(t, dtype=float)
    f0 = pulse.f0
    if pulse.kind is PulseKind.RICKER:
        a = (np.pi * f0 * t) ** 2
        return (1.0 - 2.0 * a) * np.exp(-a)
    sigma = pulse.n_cycles / (2 * np.pi * f0) * np.pi
    return np.sin(2 * np.pi * f0 * t) * np.exp(-t ** 2 / (2 * sigma ** 2))


def rasterize_rectangle(n_x: int, n_z: int, dx: float, width: float, height: float,
                        angle: float) -> np.ndarray:
    """1 where the pixel center lies inside the rotated, grid-centered rectangle."""
    ox = (np.arange(n_x) - 0.5 * (n_x - 1)) * dx
    oz = (np.arange(n_z) - 0.5 * (n_z - 1)) * dx
    X, Z = np.meshgrid(ox, oz, indexing="ij")
    c, s = np.cos(angle), np.sin(angle)
    u = c * X + s * Z
    v = -s * X + c * Z
    inside = (np.abs(u) <= 0.5 * width) & (np.abs(v) <= 0.5 * height)
    return inside.astype(np.uint8)


def perimeter_mask(seg: np.ndarray) -> np.ndarray:
    """Label-1 pixels with at least one 4-neighbor of label 0 (outside counts as 0)."""
    padded = np.pad(seg.astype(bool), 1, constant_values=False)
    core = padded[1:-1, 1:-1]
    interior = (core & padded[:-2, 1:-1] & padded[2:, 1:-1]
                & padded[1:-1, :-2] & padded[1:-1, 2:])
    return core & ~interior


def make_phantom(cfg: SimConfig, angle: float) -> Phantom:
    half_diag = 0.5 * np.hypot(cfg.defect_width, cfg.defect_height)
    half_extent = 0.5 * min(cfg.n_x, cfg.n_z) * cfg.dx
    if half_diag > half_extent:
        raise ValueError(f"defect half-diagonal {half_diag:g} m does not fit the grid "
                         f"half-extent {half_extent:g} m at every rotation")
    seg = rasterize_rectangle(cfg.n_x, cfg.n_z, cfg.dx, cfg.defect_width,
                              cfg.defect_height, angle)
    idx = np.flatnonzero(perimeter_mask(seg))
    return Phantom(seg, [(int(p), 1.0) for p in idx], float(angle))


def simulate_view(phantom: Phantom, array: TransducerArray, cfg: SimConfig, seed: int | None,
                  setup: Setup | None = None) -> DataVolume:
    """FMC volume for one array position.

    Arrivals are synthesized for every mode in ``cfg.modes_included`` that
    belongs to the array's view.  With ``noise_sigma == 0`` the seed is unused.
    """
    setup = setup or Setup(cfg)
    setup.check_window()
    t = (cfg.t0 + np.arange(cfg.n_t) / cfg.fs)[:, None, None]
    vol = np.zeros((cfg.n_t, array.n_elem, array.n_elem))
    for name in setup.view_modes(array.view, cfg.modes_included):
        times = setup.tables[name].times
        for p, refl in phantom.scatterers:
            vol += refl * pulse_eval(cfg.pulse, t - times[None, :, :, p])
    if cfg.noise_sigma > 0:
        vol += np.random.default_rng(seed).normal(0.0, cfg.noise_sigma, vol.shape)
    return DataVolume(vol, cfg.fs, cfg.t0)


@dataclass
class ManifestEntry:
    scenario_id: str
    split: str
    angle: float


@dataclass
class Manifest:
    entries: list[ManifestEntry] = field(default_factory=list)

    def split(self, name: str) -> list[ManifestEntry]:
        return [e for e in self.entries if e.split == name]

    def to_text(self) -> str:
        return "".join(f"{e.scenario_id} {e.split} {e.angle!r}\n" for e in self.entries)

    @classmethod
    def from_text(cls, text: str) -> "Manifest":
        entries = []
        for line in text.splitlines():
            if line.strip():
                sid, split, angle = line.split()
                entries.append(ManifestEntry(sid, split, float(angle)))
        return cls(entries)


def scenario_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


def _write_scenario(args) -> ManifestEntry:
    cfg, index, seed, split, out_dir = args
    sim = cfg.sim
    rng = scenario_rng(seed, index)
    angle = float(rng.uniform(0.0, 2 * np.pi))
    noise_seeds = rng.integers(0, 2**63, size=2)
    setup = Setup(sim)
    phantom = make_phantom(sim, angle)
    sid = f"scenario_{index:04d}"
    sdir = Path(out_dir) / sid
    sdir.mkdir(parents=True, exist_ok=True)
    for view, nseed in zip((View.TOP, View.RIGHT), noise_seeds):
        vol = simulate_view(phantom, setup.arrays[view], sim, int(nseed), setup)
        write_tensor(sdir / f"{view.value}.tns", vol.values)
    write_tensor(sdir / "seg.tns", phantom.seg)
    (sdir / "meta.txt").write_text(
        f"angle={angle!r}\nseed={seed}\nindex={index}\nconfig_sha256={cfg.sha256()}\n"
        f"n_scatterers={len(phantom.scatterers)}\n")
    return ManifestEntry(sid, split, angle)


def generate_dataset(cfg: Config, n_scenarios: int, split: tuple[int, int], seed: int,
                     out_dir, workers: int = 1) -> Manifest:
    """Write ``n_scenarios`` scenarios plus ``manifest.txt`` and ``config.json``.

    The first ``split[0]`` scenarios form the training split.  Each scenario
    draws from its own ``SeedSequence([seed, index])``, so output does not
    depend on ``workers``.
    """
    if n_scenarios <= 0:
        raise ValueError(f"n_scenarios must be positive, got {n_scenarios}")
    n_train, n_test = split
    if n_train < 0 or n_test < 0 or n_train + n_test != n_scenarios:
        raise ValueError(f"split {split} does not add up to {n_scenarios} scenarios")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise PermissionError(f"dataset directory {out} is not writable")
    Setup(cfg.sim).check_window()

    jobs = [(cfg, i, seed, "train" if i < n_train else "test", out) for i in range(n_scenarios)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            entries = list(pool.map(_write_scenario, jobs))
    else:
        entries = [_write_scenario(j) for j in jobs]
    manifest = Manifest(entries)
    save_config(cfg, out / "config.json")
    (out / "manifest.txt").write_text(manifest.to_text())
    return manifest
