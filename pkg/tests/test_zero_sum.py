import filecmp
import warnings

import numpy as np
import pytest

from conftest import trusted_mask
from nashgame import oracle
from nashgame.errors import DomainError
from nashgame.game_model import GameSpec, PayoffSpec
from nashgame.grid import Grid
from nashgame.nash_set import default_tol_val
from nashgame.zero_sum import (auto_stride, backward_step, field_from_function, query_value, read_field_csv,
                               solve_cooperative_max, solve_lower_value, write_field_csv)


def exact_slices(grid, fn):
    T = np.repeat(grid.times, grid.n_nodes).reshape(grid.time_steps + 1, grid.n_nodes)
    return fn(T, grid.nodes[:, 0][None], grid.nodes[:, 1][None])


def test_terminal_slices_equal_payoffs(spec, small_grid, small_fields):
    term = spec.payoffs(small_grid.nodes)
    for fld, col in zip(small_fields, (0, 1, 0, 1)):
        np.testing.assert_array_equal(fld.values[-1].reshape(-1), term[:, col])


def test_auto_stride_lands_feet_on_nodes(spec, small_grid):
    assert auto_stride(spec, small_grid) == 2


@pytest.mark.parametrize("idx, fn", [
    (0, oracle.omega1_exact),
    (1, oracle.omega2_exact),
    (2, lambda t, x, y: oracle.c_plus_exact(1, t, x, y)),
    (3, lambda t, x, y: oracle.c_plus_exact(2, t, x, y)),
])
def test_fields_match_closed_forms(spec, small_grid, small_fields, idx, fn):
    mask = trusted_mask(small_grid, spec)
    err = np.abs(small_fields[idx].values.reshape(mask.shape) - exact_slices(small_grid, fn))[mask]
    assert err.max() <= default_tol_val(small_grid)


def test_omega2_query_off_node(small_fields, small_grid):
    assert query_value(small_fields[1], 0.25, (0.3, -0.2)) == pytest.approx(0.55, abs=default_tol_val(small_grid))


def test_midpoint_query_is_mean(small_fields, small_grid):
    fld = small_fields[1]
    a, b = small_grid.nodes[100], small_grid.nodes[101]
    mean = 0.5 * (fld.values[4].flat[100] + fld.values[4].flat[101])
    assert query_value(fld, small_grid.times[4], (a + b) / 2) == pytest.approx(mean)


def test_security_below_cooperative_max(small_fields, small_grid):
    tol = default_tol_val(small_grid)
    assert np.all(small_fields[0].values <= small_fields[2].values + tol)
    assert np.all(small_fields[1].values <= small_fields[3].values + tol)


def test_single_control_collapses_security_and_cooperation(spec, small_grid):
    single = spec.with_controls([[0.5]], [[-0.5]])
    w = solve_lower_value(single, small_grid, 1)
    c = solve_cooperative_max(single, small_grid, 1)
    np.testing.assert_array_equal(w.values, c.values)


def test_solved_slices_are_a_fixed_point_of_the_step(spec, small_grid, small_fields):
    w1 = small_fields[0]
    for k in (0, 7, 18):
        again = backward_step(spec, small_grid, w1.values, k, "lower", 1, w1.stride)
        np.testing.assert_array_equal(again, w1.values[k])


def test_isaacs_violation_warns_but_solves():
    c = [-1.0, 1.0]
    bil = GameSpec("bilinear", (1.0, 0.0), 0, 1, 2, c, c, PayoffSpec("linear", (1, 0, 0)),
                   PayoffSpec("linear", (0, 1, 0)))
    g = Grid(0, 1, 4, (-1, -1), (1, 1), (5, 5))
    with pytest.warns(RuntimeWarning, match="Isaacs gap"):
        fld = solve_lower_value(bil, g, 1)
    assert fld.warnings and np.all(np.isfinite(fld.values))


def test_strict_boundary_raises(spec):
    g = Grid(0, 1, 4, (-1, -1), (1, 1), (5, 5), boundary="strict")
    with pytest.raises(DomainError, match="outside the grid box"):
        solve_lower_value(spec, g, 1)


def test_csv_roundtrip_is_lossless_and_stable(tmp_path, small_fields):
    fld = small_fields[2]
    write_field_csv(fld, tmp_path / "a.csv")
    back = read_field_csv(tmp_path / "a.csv", "c1_plus")
    assert back.grid == fld.grid
    np.testing.assert_array_equal(back.values, fld.values)
    write_field_csv(back, tmp_path / "b.csv")
    assert filecmp.cmp(tmp_path / "a.csv", tmp_path / "b.csv", shallow=False)


def test_field_from_function(small_grid):
    fld = field_from_function(small_grid, lambda t, X: X[:, 0] + t)
    assert fld.values[3].flat[7] == pytest.approx(small_grid.nodes[7, 0] + small_grid.times[3])


def test_no_warning_for_separated_dynamics(spec, small_grid):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert solve_lower_value(spec, Grid(0, 1, 2, (-1, -1), (1, 1), (3, 3)), 2).warnings == ()
