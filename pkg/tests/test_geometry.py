import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from ufuse.geometry import (Boundary, BoundaryKind, Grid, ModeSpec, Path, TransducerArray, View,
                            build_array, compute_travel_times, mirror_position)

finite = st.floats(-1.0, 1.0, allow_nan=False)


def test_single_element_is_centered():
    grid = Grid(4, 4, 1e-4)
    arr = build_array(View.TOP, 1, 2e-4, grid, standoff=0.0)
    np.testing.assert_allclose(arr.positions, [[1.5e-4, 0.0]], rtol=0, atol=1e-18)


def test_two_elements_symmetric():
    grid = Grid(4, 4, 1e-4)
    arr = build_array(View.TOP, 2, 2e-4, grid)
    np.testing.assert_allclose(arr.positions[:, 0], [0.5e-4, 2.5e-4], atol=1e-18)
    assert arr.positions[0, 1] == arr.positions[1, 1]


def test_right_array_layout():
    grid = Grid(32, 32, 1e-4, origin=(1e-3, -2e-3))
    arr = build_array(View.RIGHT, 16, 2e-4, grid, standoff=5e-5)
    x_expected = 1e-3 + 31 * 1e-4 + 5e-5
    assert np.all(arr.positions[:, 0] == x_expected)
    # hand layout: centered on z = origin.z + 15.5 dx, pitch 2 dx
    z_expected = -2e-3 + 15.5e-4 + (np.arange(16) - 7.5) * 2e-4
    np.testing.assert_allclose(arr.positions[:, 1], z_expected, atol=1e-15)
    steps = np.linalg.norm(np.diff(arr.positions, axis=0), axis=1)
    np.testing.assert_allclose(steps, 2e-4, atol=1e-12)
    assert np.all(np.diff(arr.positions[:, 1]) > 0)


def test_top_array_height_and_spacing():
    grid = Grid(32, 32, 1e-4)
    arr = build_array(View.TOP, 16, 2e-4, grid, standoff=1e-4)
    assert np.all(arr.positions[:, 1] == -1e-4)
    np.testing.assert_allclose(np.diff(arr.positions[:, 0]), 2e-4, atol=1e-12)


def test_oversized_aperture_rejected():
    with pytest.raises(ValueError, match="aperture"):
        build_array(View.TOP, 100, 2e-4, Grid(8, 8, 1e-4))
    with pytest.raises(ValueError):
        build_array(View.TOP, 0, 2e-4, Grid(8, 8, 1e-4))
    with pytest.raises(ValueError):
        build_array(View.TOP, 2, 0.0, Grid(8, 8, 1e-4))


def test_grid_rejects_empty():
    with pytest.raises(ValueError):
        Grid(0, 4, 1e-4)
    with pytest.raises(ValueError):
        Grid(4, 4, 0.0)


def test_mirror_examples():
    np.testing.assert_array_equal(mirror_position((0, 0), Boundary.bottom(0.02)), [0, 0.04])
    np.testing.assert_array_equal(mirror_position((0.01, 0.005), Boundary.left(0.0)),
                                  [-0.01, 0.005])


@given(finite, finite, st.floats(-0.5, 0.5), st.sampled_from(list(BoundaryKind)))
def test_mirror_involution(x, z, b, kind):
    # exact for boundary positions and points on a shared binade grid
    b = round(b * 1024) / 1024
    x, z = round(x * 1024) / 1024, round(z * 1024) / 1024
    bd = Boundary(kind, b)
    p = np.array([x, z])
    np.testing.assert_array_equal(mirror_position(mirror_position(p, bd), bd), p)


def _one_point_table(src, rcv, p, mode, c):
    grid = Grid(1, 1, 1e-4, origin=tuple(p))
    arr = TransducerArray(mode.view, 1.0, np.array([src]))
    if not np.allclose(src, rcv):
        arr = TransducerArray(mode.view, 1.0, np.array([src, rcv]))
    return compute_travel_times(arr, grid, mode, c)


def test_pulse_echo_direct():
    mode = ModeSpec(View.TOP, Path.DIRECT)
    tt = _one_point_table((0.0, 0.0), (0.0, 0.0), (0.0, 0.01), mode, 5920.0)
    assert tt.times[0, 0, 0] == pytest.approx(0.02 / 5920, rel=1e-15)
    assert tt.times[0, 0, 0] == pytest.approx(3.3784e-6, rel=1e-4)


def test_pulse_echo_bounce():
    mode = ModeSpec(View.TOP, Path.BOUNCE, Boundary.bottom(0.02))
    tt = _one_point_table((0.0, 0.0), (0.0, 0.0), (0.0, 0.01), mode, 1000.0)
    assert tt.times[0, 0, 0] == pytest.approx(4.0e-5, rel=1e-15)


def test_mode_view_mismatch(tiny_setup):
    arr = tiny_setup.arrays[View.TOP]
    with pytest.raises(ValueError):
        compute_travel_times(arr, tiny_setup.grid, tiny_setup.modes["right0"], 5920.0)
    with pytest.raises(ValueError):
        compute_travel_times(arr, tiny_setup.grid, tiny_setup.modes["top0"], 0.0)


def _reflection_path(src, p, boundary):
    """Shortest source -> wall -> pixel path found by searching the wall coordinate."""
    if boundary.kind is BoundaryKind.BOTTOM:
        point = lambda b: np.array([b, boundary.position])
        lo, hi = min(src[0], p[0]) - 1.0, max(src[0], p[0]) + 1.0
    else:
        point = lambda b: np.array([boundary.position, b])
        lo, hi = min(src[1], p[1]) - 1.0, max(src[1], p[1]) + 1.0
    length = lambda b: np.linalg.norm(src - point(b)) + np.linalg.norm(point(b) - p)
    res = minimize_scalar(length, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-13, "maxiter": 2000})
    return res.fun


def test_tables_match_reflection_search(tiny_setup):
    c = tiny_setup.sim.c
    pixels = tiny_setup.grid.pixel_centers()
    for name, mode in tiny_setup.modes.items():
        arr = tiny_setup.arrays[mode.view]
        tt = tiny_setup.tables[name]
        assert tt.times.shape == (4, 4, 64)
        expected = np.empty_like(tt.times)
        for s, xs in enumerate(arr.positions):
            for r, xr in enumerate(arr.positions):
                for k, p in enumerate(pixels):
                    back = np.linalg.norm(p - xr)
                    if mode.path is Path.DIRECT:
                        out = np.linalg.norm(xs - p)
                    else:
                        out = _reflection_path(xs, p, mode.boundary)
                    expected[s, r, k] = (out + back) / c
        np.testing.assert_allclose(tt.times, expected, rtol=0, atol=1e-12)


def test_table_invariants(desk_setup):
    tables = desk_setup.tables
    for name, tt in tables.items():
        assert np.all(np.isfinite(tt.times)) and np.all(tt.times > 0)
    for view in ("top", "right"):
        direct, bounce = tables[f"{view}0"].times, tables[f"{view}1"].times
        np.testing.assert_array_equal(direct, direct.transpose(1, 0, 2))
        assert np.all(direct <= bounce)


def test_times_scale_inverse_with_c(tiny_setup):
    arr, grid = tiny_setup.arrays[View.TOP], tiny_setup.grid
    for mode in (tiny_setup.modes["top0"], tiny_setup.modes["top1"]):
        t1 = compute_travel_times(arr, grid, mode, 5920.0).times
        t2 = compute_travel_times(arr, grid, mode, 2 * 5920.0).times
        np.testing.assert_array_equal(t2, t1 / 2)


def test_path_length_at_least_straight_line(tiny_setup):
    pixels = tiny_setup.grid.pixel_centers()
    c = tiny_setup.sim.c
    for name, mode in tiny_setup.modes.items():
        pos = tiny_setup.arrays[mode.view].positions
        d = np.linalg.norm(pos[:, None, :] - pixels[None], axis=-1)
        straight = d[:, None, :] + d[None, :, :]
        lengths = tiny_setup.tables[name].times * c
        if mode.path is Path.DIRECT:
            np.testing.assert_allclose(lengths, straight, rtol=1e-14)
        else:
            assert np.all(lengths > straight)
