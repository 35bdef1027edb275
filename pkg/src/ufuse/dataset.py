"""Reading dataset directories written by :func:`ufuse.simulate.generate_dataset`."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .config import Config, Setup, load_config
from .das import DasOperator, Interp, ModeImage
from .net.train import Sample
from .simulate import Manifest
from .tensorio import read_tensor


class Dataset:
    def __init__(self, root):
        self.root = Path(root)
        self.config: Config = load_config(self.root / "config.json")
        self.manifest = Manifest.from_text((self.root / "manifest.txt").read_text())
        self._setup = None

    @property
    def setup(self) -> Setup:
        if self._setup is None:
            self._setup = Setup(self.config.sim)
        return self._setup

    def ids(self, split: str | None = None) -> list[str]:
        entries = self.manifest.entries if split is None else self.manifest.split(split)
        return [e.scenario_id for e in entries]

    def load(self, scenario_id: str) -> Sample:
        sdir = self.root / scenario_id
        sim = self.config.sim
        top, right = read_tensor(sdir / "top.tns"), read_tensor(sdir / "right.tns")
        seg = read_tensor(sdir / "seg.tns")
        shape = (sim.n_t, sim.n_elem, sim.n_elem)
        if top.shape != shape or right.shape != shape or seg.shape != (sim.n_x, sim.n_z):
            raise ValueError(f"{scenario_id}: tensor shapes do not match the dataset config")
        return Sample(scenario_id, top, right, seg)

    def samples(self, split: str | None = None) -> list[Sample]:
        return [self.load(sid) for sid in self.ids(split)]

    def das_operators(self, interp: Interp | str = Interp.NEAREST) -> dict[str, DasOperator]:
        sim = self.config.sim
        return {name: DasOperator(t, sim.n_t, sim.fs, sim.t0, interp)
                for name, t in self.setup.tables.items()}


def mode_images(sample: Sample, operators: dict[str, DasOperator]) -> list[ModeImage]:
    images = []
    for name, op in operators.items():
        f = sample.f_top if name.startswith("top") else sample.f_right
        images.append(ModeImage(op.forward(np.asarray(f, dtype=float)), op.mode))
    return images
