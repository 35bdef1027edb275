"""Training loop and finite-difference gradient check."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .adam import adam_step
from .model import Model, NonFiniteError, first_non_finite

log = logging.getLogger(__name__)


@dataclass
class Sample:
    scenario_id: str
    f_top: np.ndarray
    f_right: np.ndarray
    seg: np.ndarray


@dataclass
class LossRecord:
    epoch: int
    scenario_id: str
    loss: float


def train(model: Model, samples: list[Sample], epochs: int, lr: float = 1e-3, seed: int = 0,
          max_steps: int | None = None, target_loss: float | None = None):
    """Adam on one sample per step, shuffling the training set every epoch.

    Stops early after ``max_steps`` updates or once a step's loss falls below
    ``target_loss``.  Returns ``(model, loss_log)``; the model is updated in place.
    """
    if not samples:
        raise ValueError("training needs at least one sample")
    rng = np.random.default_rng(seed)
    loss_log: list[LossRecord] = []
    steps = 0
    for epoch in range(epochs):
        for i in rng.permutation(len(samples)):
            s = samples[i]
            _, loss, grads, trace = model.run(s.f_top, s.f_right, s.seg)
            if not np.isfinite(loss):
                bad = first_non_finite(list(model.params.items()) + trace)
                raise NonFiniteError(f"non-finite loss at epoch {epoch}, scenario "
                                     f"{s.scenario_id}; first non-finite tensor: {bad}")
            bad = first_non_finite(grads.items())
            if bad is not None:
                raise NonFiniteError(f"non-finite gradient {bad} at epoch {epoch}, "
                                     f"scenario {s.scenario_id}")
            adam_step(model.params, grads, model.adam, lr)
            loss_log.append(LossRecord(epoch, s.scenario_id, loss))
            steps += 1
            if (max_steps is not None and steps >= max_steps) or \
                    (target_loss is not None and loss < target_loss):
                return model, loss_log
        log.info("epoch %d mean loss %.5f", epoch,
                 np.mean([r.loss for r in loss_log if r.epoch == epoch]))
    return model, loss_log


def sample_parameters(model: Model, n: int, seed: int) -> list[tuple[str, int]]:
    """Seeded ``(name, flat index)`` picks, visiting every tensor before repeating one.

    Pre-processing weights come first so the DAS transpose is always on the path.
    """
    rng = np.random.default_rng(seed)
    names = list(model.params)
    first = [k for k in names if k.startswith("pre_") and k.endswith(".w")]
    rest = [names[i] for i in rng.permutation(len(names)) if names[i] not in first]
    order = first + rest
    picks = []
    for j in range(n):
        name = order[j % len(order)]
        picks.append((name, int(rng.integers(model.params[name].size))))
    return picks


def relative_error(a: float, b: float, floor: float = 1e-8) -> float:
    return abs(a - b) / max(abs(a), abs(b), floor)


def _relu_pattern(model: Model, trace) -> list[np.ndarray]:
    hidden = {s.name for specs in model.specs.values() for s in specs if not s.final}
    return [y > 0 for name, y in trace if name in hidden]


def _same_pattern(a, b) -> bool:
    return all(np.array_equal(x, y) for x, y in zip(a, b))


def grad_check(model: Model, sample: Sample, n_params_sampled: int = 30, h: float = 1e-4,
               seed: int = 0, max_shrink: int = 4) -> float:
    """Worst relative error between backprop and central differences.

    Relative errors use ``max(|analytic|, |numeric|, 1e-8)`` as denominator.
    When the ``+-h`` pair flips any ReLU the quotient straddles a kink, so the
    step is divided by 10 (at most ``max_shrink`` times) until it does not.
    """
    if not h > 0:
        raise ValueError(f"finite-difference step must be positive, got {h}")
    args = (sample.f_top, sample.f_right, sample.seg)
    _, _, grads, trace = model.run(*args)
    base = _relu_pattern(model, trace)
    worst = 0.0
    for name, idx in sample_parameters(model, n_params_sampled, seed):
        p = model.params[name].reshape(-1)
        orig = p[idx]
        step = h
        for attempt in range(max_shrink + 1):
            p[idx] = orig + step
            _, lp, _, tp = model.run(*args)
            p[idx] = orig - step
            _, lm, _, tm = model.run(*args)
            p[idx] = orig
            if _same_pattern(base, _relu_pattern(model, tp)) and \
                    _same_pattern(base, _relu_pattern(model, tm)):
                break
            if attempt < max_shrink:
                step /= 10
        else:
            log.warning("%s[%d]: a ReLU kink lies within %g", name, idx, step)
        numeric = (lp - lm) / (2 * step)
        worst = max(worst, relative_error(grads[name].reshape(-1)[idx], numeric))
    return worst
