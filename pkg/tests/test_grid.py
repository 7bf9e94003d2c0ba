import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nashgame.errors import ConfigError, DomainError
from nashgame.grid import Grid, interp_slice, interp_spacetime

coord = st.floats(-2.0, 2.0, allow_nan=False)


@pytest.fixture(scope="module")
def grid():
    return Grid(0.0, 1.0, 10, (-2.0, -1.0), (2.0, 1.0), (9, 5))


def test_geometry(grid):
    assert grid.dt == pytest.approx(0.1)
    np.testing.assert_allclose(grid.dx, [0.5, 0.5])
    assert grid.n_nodes == 45 and grid.nodes.shape == (45, 2)
    assert grid.times[0] == 0.0 and grid.times[-1] == 1.0
    j = grid.nearest_node((0.6, -0.3))
    np.testing.assert_allclose(grid.nodes[j], [0.5, -0.5])
    assert grid.multi_index(grid.flat_index((3, 2))) == (3, 2)


@pytest.mark.parametrize("kw", [
    dict(time_steps=0), dict(lo=(3.0, -1.0)), dict(resolution=(1, 5)), dict(boundary="wrap"), dict(theta0=0.0),
])
def test_invalid_grids_rejected(kw):
    args = dict(t0=0.0, theta0=1.0, time_steps=10, lo=(-2.0, -1.0), hi=(2.0, 1.0), resolution=(9, 5))
    args.update(kw)
    with pytest.raises(ConfigError):
        Grid(**args)


def test_midpoint_of_linear_field_is_mean(grid):
    vals = (2.0 * grid.nodes[:, 0] - grid.nodes[:, 1]).reshape(grid.shape)
    a, b = grid.nodes[3], grid.nodes[4]
    mid = interp_slice(vals, grid, (a + b) / 2)
    assert mid == pytest.approx((vals.flat[3] + vals.flat[4]) / 2)


@given(st.tuples(coord, st.floats(-1.0, 1.0)), st.floats(0.0, 1.0))
@settings(max_examples=50, deadline=None)
def test_linear_fields_interpolate_exactly(grid, x, t):
    slab = 3.0 * grid.nodes[:, 0] - grid.nodes[:, 1] + 0.5
    vals = np.stack([slab + 2.0 * tk for tk in grid.times]).reshape((grid.time_steps + 1,) + grid.shape)
    expect = 3.0 * x[0] - x[1] + 0.5 + 2.0 * t
    assert interp_spacetime(vals, grid, t, np.array(x)) == pytest.approx(expect, abs=1e-9)


@given(st.lists(st.tuples(st.floats(-3, 3), st.floats(-2, 2)), min_size=1, max_size=20))
@settings(max_examples=30, deadline=None)
def test_corner_weights_form_a_partition_of_unity(grid, pts):
    idx, w = grid.cell_corners(np.array(pts))
    assert np.all(w >= -1e-12)
    np.testing.assert_allclose(w.sum(axis=1), 1.0)
    assert idx.min() >= 0 and idx.max() < grid.n_nodes


def test_strict_policy_raises_outside_box(grid):
    vals = np.zeros(grid.shape)
    with pytest.raises(DomainError):
        interp_slice(vals, grid, (2.5, 0.0), boundary="strict")
    assert interp_slice(vals, grid, (2.5, 0.0)) == 0.0
