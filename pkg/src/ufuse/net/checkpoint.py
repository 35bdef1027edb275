"""Checkpoints: one tensor file per parameter and Adam moment, plus a text index.

``index.txt`` lines are ``<kind>:<name> <shape> <dtype> <file>`` with the shape
written as comma-separated dims.  ``adam.txt`` stores the step counter and
hyperparameters; ``config.json`` the setup needed to rebuild the DAS layers.
"""
from __future__ import annotations

from pathlib import Path

from ..config import Config, Setup, load_config, save_config
from ..tensorio import read_tensor, write_tensor
from .adam import AdamState
from .model import Model


def save_checkpoint(model: Model, ckpt_dir) -> None:
    out = Path(ckpt_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = []
    groups = [("param", model.params), ("adam_m", model.adam.m), ("adam_v", model.adam.v)]
    for kind, tensors in groups:
        for name, arr in tensors.items():
            fname = f"{kind}.{name}.tns"
            write_tensor(out / fname, arr, "f64")
            lines.append(f"{kind}:{name} {','.join(map(str, arr.shape))} f64 {fname}\n")
    (out / "index.txt").write_text("".join(lines))
    a = model.adam
    (out / "adam.txt").write_text(f"t={a.t}\nbeta1={a.beta1!r}\nbeta2={a.beta2!r}\neps={a.eps!r}\n")
    save_config(Config(model.setup.sim, model.arch), out / "config.json")


def load_checkpoint(ckpt_dir) -> Model:
    src = Path(ckpt_dir)
    cfg = load_config(src / "config.json")
    tensors = {"param": {}, "adam_m": {}, "adam_v": {}}
    for line in (src / "index.txt").read_text().splitlines():
        key, shape, dtype, fname = line.split()
        kind, name = key.split(":", 1)
        arr = read_tensor(src / fname)
        expected = tuple(int(d) for d in shape.split(",")) if shape else ()
        if arr.shape != expected:
            raise ValueError(f"{fname}: shape {arr.shape} does not match index {expected}")
        tensors[kind][name] = arr
    meta = dict(line.split("=", 1) for line in (src / "adam.txt").read_text().splitlines())
    adam = AdamState(tensors["adam_m"], tensors["adam_v"], int(meta["t"]),
                     float(meta["beta1"]), float(meta["beta2"]), float(meta["eps"]))
    return Model(Setup(cfg.sim), cfg.arch, tensors["param"], adam)
