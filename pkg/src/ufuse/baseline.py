"""Traditional fusion: envelope per mode, per-pixel max, global threshold."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .das import ModeImage
from .dsp import hilbert_envelope, minmax_normalize, threshold
from .metrics import cross_entropy

THETA_GRID = np.round(np.arange(1, 20) * 0.05, 2)


@dataclass(frozen=True)
class BaselineConfig:
    modes_used: tuple[str, ...] = ("top0", "right0")
    theta: float = 0.5
    normalize_per_mode: bool = True

    def __post_init__(self):
        if not self.modes_used:
            raise ValueError("baseline needs at least one mode")
        if self.normalize_per_mode and not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [0, 1] with normalization on, got {self.theta}")


def fused_score(mode_images: list[ModeImage], cfg: BaselineConfig) -> np.ndarray:
    """Per-pixel maximum of the (normalized) envelopes of the selected modes."""
    by_name = {m.mode.name: m for m in mode_images}
    missing = [n for n in cfg.modes_used if n not in by_name]
    if missing:
        raise ValueError(f"mode images missing for {missing}")
    shapes = {by_name[n].values.shape for n in cfg.modes_used}
    if len(shapes) != 1:
        raise ValueError(f"mode images differ in shape: {sorted(shapes)}")
    fused = None
    for name in cfg.modes_used:
        env = hilbert_envelope(by_name[name])
        if cfg.normalize_per_mode:
            env = minmax_normalize(env)
        fused = env if fused is None else np.maximum(fused, env)
    return fused


def fuse_baseline(mode_images: list[ModeImage], cfg: BaselineConfig) -> np.ndarray:
    return threshold(fused_score(mode_images, cfg), cfg.theta)


def calibrate_threshold(train_scenarios, cfg: BaselineConfig, grid=THETA_GRID) -> float:
    """Grid-search the threshold minimizing mean clamped training cross entropy.

    ``train_scenarios`` is a sequence of ``(mode_images, seg)`` pairs.  Ties
    (within 1e-12 relative) go to the smallest threshold.
    """
    scores, segs = [], []
    for images, seg in train_scenarios:
        scores.append(fused_score(images, cfg))
        segs.append(np.asarray(seg))
    if not scores:
        raise ValueError("threshold calibration needs at least one training scenario")
    losses = np.array([np.mean([cross_entropy(threshold(s, th), y) for s, y in zip(scores, segs)])
                       for th in grid])
    best = losses.min()
    tied = np.flatnonzero(losses <= best + 1e-12 * abs(best))
    return float(grid[tied[0]])
