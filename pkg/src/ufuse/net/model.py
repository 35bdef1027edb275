"""End-to-end fusion network: two 3-D pre-processing nets, four DAS layers, one 2-D net.

Hidden layers are weight-standardized convolutions followed by group norm and
ReLU.  The last layer of each sub-network is a plain convolution.  Each
pre-processing net is residual (volume + branch), and the DAS layers carry no
parameters; their backward pass is the operator transpose.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..config import MODE_NAMES, ArchConfig, Setup
from ..das import DasOperator, DataVolume
from ..geometry import View
from . import layers as L
from .adam import AdamState

VIEW_NETS = {View.TOP: "pre_top", View.RIGHT: "pre_right"}


class NonFiniteError(FloatingPointError):
    pass


@dataclass(frozen=True)
class LayerSpec:
    name: str
    c_in: int
    c_out: int
    kernel: int
    ndim: int
    groups: int
    final: bool


def net_specs(arch: ArchConfig) -> dict[str, list[LayerSpec]]:
    def chain(prefix, n, c_in, c_hid, c_out, k, ndim, groups):
        specs = []
        for i in range(n):
            a = c_in if i == 0 else c_hid
            b = c_out if i == n - 1 else c_hid
            specs.append(LayerSpec(f"{prefix}.{i}", a, b, k, ndim, groups, i == n - 1))
        return specs

    pre = dict(n=arch.pre_layers, c_in=1, c_hid=arch.pre_channels, c_out=1,
               k=arch.pre_kernel, ndim=3, groups=arch.pre_groups)
    return {
        "pre_top": chain("pre_top", **pre),
        "pre_right": chain("pre_right", **pre),
        "post": chain("post", arch.post_layers, len(MODE_NAMES), arch.post_channels, 2,
                      arch.post_kernel, 2, arch.post_groups),
    }


def init_params(arch: ArchConfig, seed: int) -> dict[str, np.ndarray]:
    """Fan-in uniform weights, zero biases, unit gains; seeded and order-stable."""
    rng = np.random.default_rng(seed)
    params = {}
    for net, specs in net_specs(arch).items():
        for s in specs:
            shape = (s.c_out, s.c_in) + (s.kernel,) * s.ndim
            bound = 1.0 / np.sqrt(s.c_in * s.kernel ** s.ndim)
            w = rng.uniform(-bound, bound, shape)
            if s.final and net != "post" and arch.zero_init_residual:
                w[...] = 0.0
            params[f"{s.name}.w"] = w
            params[f"{s.name}.b"] = np.zeros(s.c_out)
            if not s.final:
                params[f"{s.name}.gamma"] = np.ones(s.c_out)
                params[f"{s.name}.beta"] = np.zeros(s.c_out)
    return params


def _net_forward(params, specs, x, trace):
    caches = []
    for s in specs:
        w = params[f"{s.name}.w"]
        if s.final:
            y, cc = L.conv_forward(x, w, params[f"{s.name}.b"])
            caches.append((None, cc, None, None))
        else:
            w_hat, wc = L.weight_standardize(w)
            y, cc = L.conv_forward(x, w_hat, params[f"{s.name}.b"])
            y, gc = L.group_norm_forward(y, params[f"{s.name}.gamma"],
                                         params[f"{s.name}.beta"], s.groups)
            y, mask = L.relu(y)
            caches.append((wc, cc, gc, mask))
        trace.append((s.name, y))
        x = y
    return x, caches


def _net_backward(params, specs, caches, dy, grads, need_dx=True):
    for i, s, (wc, cc, gc, mask) in zip(range(len(specs) - 1, -1, -1), reversed(specs),
                                        reversed(caches)):
        if not s.final:
            dy = L.relu_backward(dy, mask)
            dy, grads[f"{s.name}.gamma"], grads[f"{s.name}.beta"] = L.group_norm_backward(dy, gc)
        dy, dw, grads[f"{s.name}.b"] = L.conv_backward(dy, cc, need_dx or i > 0)
        grads[f"{s.name}.w"] = dw if s.final else L.weight_standardize_backward(dw, wc)
    return dy


def _values(f) -> np.ndarray:
    return np.asarray(f.values if isinstance(f, DataVolume) else f, dtype=np.float64)


class Model:
    """Parameters, fixed DAS layers and optimizer state of the fusion network."""

    def __init__(self, setup: Setup, arch: ArchConfig, params: dict[str, np.ndarray],
                 adam: AdamState | None = None):
        self.setup, self.arch = setup, arch
        self.specs = net_specs(arch)
        self.params = params
        self.adam = adam or AdamState()
        sim = setup.sim
        self.das_layers: dict[str, DasOperator] = {
            name: DasOperator(setup.tables[name], sim.n_t, sim.fs, sim.t0, arch.interp)
            for name in MODE_NAMES
        }
        expected = set(init_params(arch, 0))
        if set(params) != expected:
            raise ValueError(f"parameter names do not match the architecture: "
                             f"{sorted(set(params) ^ expected)}")

    @classmethod
    def create(cls, setup: Setup, arch: ArchConfig | None = None, seed: int = 0) -> "Model":
        arch = arch or ArchConfig()
        return cls(setup, arch, init_params(arch, seed))

    def run(self, f_top, f_right, labels=None):
        """Forward pass; with ``labels`` also the loss and every parameter gradient.

        Returns ``(logits, loss, grads, trace)``; ``trace`` lists named
        intermediate tensors in evaluation order.
        """
        trace: list[tuple[str, np.ndarray]] = []
        pre_caches, images = {}, []
        for view, f in ((View.TOP, f_top), (View.RIGHT, f_right)):
            x = _values(f)
            if x.shape != self.das_layers[f"{view.value}0"].data_shape:
                raise ValueError(f"{view.value} volume shape {x.shape} does not match the model")
            net = VIEW_NETS[view]
            branch, caches = _net_forward(self.params, self.specs[net], x[None], trace)
            processed = x + branch[0]
            trace.append((f"{net}.out", processed))
            pre_caches[view] = caches
            for idx in (0, 1):
                name = f"{view.value}{idx}"
                img = self.das_layers[name].forward(processed)
                trace.append((f"das.{name}", img))
                images.append(img)
        stack = np.stack(images)
        logits, post_caches = _net_forward(self.params, self.specs["post"], stack, trace)
        if labels is None:
            return logits, None, None, trace

        loss, dlogits = L.softmax_cross_entropy(logits, labels)
        grads: dict[str, np.ndarray] = {}
        dstack = _net_backward(self.params, self.specs["post"], post_caches, dlogits, grads)
        for k, view in enumerate((View.TOP, View.RIGHT)):
            dproc = (self.das_layers[f"{view.value}0"].adjoint(dstack[2 * k])
                     + self.das_layers[f"{view.value}1"].adjoint(dstack[2 * k + 1]))
            net = VIEW_NETS[view]
            _net_backward(self.params, self.specs[net], pre_caches[view], dproc[None], grads,
                          need_dx=False)
        return logits, loss, {n: grads[n] for n in self.params}, trace

    def mode_images(self, f_top, f_right) -> np.ndarray:
        """The four intermediate DAS images, stacked as ``(4, n_x, n_z)``."""
        trace = self.run(f_top, f_right)[3]
        named = dict(trace)
        return np.stack([named[f"das.{n}"] for n in MODE_NAMES])

    def copy(self) -> "Model":
        adam = AdamState({k: v.copy() for k, v in self.adam.m.items()},
                         {k: v.copy() for k, v in self.adam.v.items()}, self.adam.t,
                         self.adam.beta1, self.adam.beta2, self.adam.eps)
        return Model(self.setup, self.arch, {k: v.copy() for k, v in self.params.items()}, adam)


def forward_pass(model: Model, f_top, f_right) -> np.ndarray:
    """Class logits ``(2, n_x, n_z)``."""
    return model.run(f_top, f_right)[0]


def predict_proba(model: Model, f_top, f_right) -> np.ndarray:
    """Class-1 probability map."""
    return L.softmax(forward_pass(model, f_top, f_right))[1]


def first_non_finite(named_tensors) -> str | None:
    for name, t in named_tensors:
        if not np.all(np.isfinite(t)):
            return name
    return None
