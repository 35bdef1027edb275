import dataclasses

import numpy as np
import pytest

from ufuse.config import MODE_NAMES, ArchConfig, Setup
from ufuse.geometry import View
from ufuse.net import (Model, NonFiniteError, Sample, grad_check, load_checkpoint,
                       predict_proba, save_checkpoint, train)
from ufuse.net.model import init_params
from ufuse.simulate import make_phantom, simulate_view

from conftest import tiny_sim

SMALL_ARCH = ArchConfig(post_layers=3, post_channels=4, post_groups=2)


def _sample(sim, setup, angle=0.7, seed=0, sid="s"):
    ph = make_phantom(sim, angle)
    top = simulate_view(ph, setup.arrays[View.TOP], sim, seed, setup).values
    right = simulate_view(ph, setup.arrays[View.RIGHT], sim, seed + 1, setup).values
    return Sample(sid, top, right, ph.seg)


@pytest.fixture
def tiny():
    sim = tiny_sim()
    setup = Setup(sim)
    return setup, _sample(sim, setup)


def test_parameter_layout():
    params = init_params(ArchConfig(), 0)
    assert params["pre_top.0.w"].shape == (2, 1, 3, 3, 3)
    assert params["pre_top.1.w"].shape == (1, 2, 3, 3, 3)
    assert params["post.0.w"].shape == (16, 4, 3, 3)
    assert params["post.7.w"].shape == (2, 16, 3, 3)
    assert "post.7.gamma" not in params and "post.6.gamma" in params
    assert np.all(params["pre_right.1.w"] == 0)
    a, b = init_params(ArchConfig(), 3), init_params(ArchConfig(), 3)
    assert all(np.array_equal(a[k], b[k]) for k in a)


def test_zero_final_layer_predicts_uniform(tiny):
    setup, s = tiny
    model = Model.create(setup, SMALL_ARCH, seed=1)
    model.params["post.2.w"][...] = 0.0
    _, loss, _, _ = model.run(s.f_top, s.f_right, s.seg)
    assert loss == pytest.approx(np.log(2), rel=1e-15)
    np.testing.assert_array_equal(predict_proba(model, s.f_top, s.f_right), 0.5)


def test_zero_residual_branch_gives_plain_das_images(tiny):
    setup, s = tiny
    model = Model.create(setup, SMALL_ARCH, seed=2)
    images = model.mode_images(s.f_top, s.f_right)
    for k, name in enumerate(MODE_NAMES):
        f = s.f_top if name.startswith("top") else s.f_right
        np.testing.assert_array_equal(images[k], model.das_layers[name].forward(f))


def test_end_to_end_gradients(tiny):
    setup, s = tiny
    arch = dataclasses.replace(SMALL_ARCH, zero_init_residual=False)
    model = Model.create(setup, arch, seed=3)
    assert grad_check(model, s, n_params_sampled=30, h=1e-4, seed=0) < 1e-4


def test_default_arch_gradients(tiny):
    setup, s = tiny
    model = Model.create(setup, ArchConfig(zero_init_residual=False), seed=4)
    assert grad_check(model, s, n_params_sampled=30, h=1e-4, seed=1) < 1e-4


def test_corrupted_adjoint_is_detected(tiny):
    setup, s = tiny
    model = Model.create(setup, dataclasses.replace(SMALL_ARCH, zero_init_residual=False), seed=5)
    for op in model.das_layers.values():
        true_adjoint = op.adjoint
        op.adjoint = lambda u, a=true_adjoint: np.roll(a(u), 3, axis=0)
    assert grad_check(model, s, n_params_sampled=30, h=1e-4, seed=0) > 1e-2


def test_bad_step_rejected(tiny):
    setup, s = tiny
    with pytest.raises(ValueError):
        grad_check(Model.create(setup, SMALL_ARCH), s, h=0.0)


def test_zero_epochs_leaves_model_unchanged(tiny):
    setup, s = tiny
    model = Model.create(setup, SMALL_ARCH, seed=6)
    before = {k: v.copy() for k, v in model.params.items()}
    _, log = train(model, [s], epochs=0)
    assert log == []
    assert all(np.array_equal(before[k], model.params[k]) for k in before)


def test_training_is_deterministic_and_reduces_loss():
    sim = tiny_sim()
    setup = Setup(sim)
    samples = [_sample(sim, setup, a, i, f"s{i}") for i, a in enumerate((0.2, 1.4, 2.9))]
    runs = []
    for _ in range(2):
        model = Model.create(setup, SMALL_ARCH, seed=7)
        model, log = train(model, samples, epochs=15, lr=3e-3, seed=1)
        runs.append((model, log))
    (m1, l1), (m2, l2) = runs
    assert [r.loss for r in l1] == [r.loss for r in l2]
    assert [r.scenario_id for r in l1] == [r.scenario_id for r in l2]
    assert all(np.array_equal(m1.params[k], m2.params[k]) for k in m1.params)
    assert np.mean([r.loss for r in l1[-3:]]) < np.mean([r.loss for r in l1[:3]])


def test_max_steps_and_target_loss(tiny):
    setup, s = tiny
    _, log = train(Model.create(setup, SMALL_ARCH), [s], epochs=10, max_steps=4)
    assert len(log) == 4
    _, log = train(Model.create(setup, SMALL_ARCH), [s], epochs=10, target_loss=10.0)
    assert len(log) == 1


def test_checkpoint_round_trip(tiny, tmp_path):
    setup, s = tiny
    model = Model.create(setup, SMALL_ARCH, seed=8)
    train(model, [s], epochs=2, lr=1e-3)
    save_checkpoint(model, tmp_path / "ck")
    back = load_checkpoint(tmp_path / "ck")
    assert back.arch == model.arch and back.adam.t == model.adam.t
    for k in model.params:
        np.testing.assert_array_equal(back.params[k], model.params[k])
        np.testing.assert_array_equal(back.adam.m[k], model.adam.m[k])
        np.testing.assert_array_equal(back.adam.v[k], model.adam.v[k])
    np.testing.assert_array_equal(predict_proba(back, s.f_top, s.f_right),
                                  predict_proba(model, s.f_top, s.f_right))
    # resuming from the checkpoint matches continuing in memory
    train(model, [s], epochs=1, seed=3)
    train(back, [s], epochs=1, seed=3)
    for k in model.params:
        np.testing.assert_array_equal(back.params[k], model.params[k])


def test_nan_input_names_first_bad_tensor(tiny):
    setup, s = tiny
    bad = s.f_top.copy()
    bad[5, 0, 0] = np.nan
    model = Model.create(setup, SMALL_ARCH)
    with pytest.raises(NonFiniteError, match="pre_top.0"):
        train(model, [Sample("x", bad, s.f_right, s.seg)], epochs=1)


def test_model_rejects_bad_shapes_and_params(tiny):
    setup, s = tiny
    model = Model.create(setup, SMALL_ARCH)
    with pytest.raises(ValueError):
        model.run(s.f_top[:-1], s.f_right)
    params = dict(model.params)
    params.pop("post.0.b")
    with pytest.raises(ValueError):
        Model(setup, SMALL_ARCH, params)
