import filecmp

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import affine_games
from nashgame import nash_set as ns
from nashgame import oracle
from nashgame.errors import ConfigError, PreconditionError
from nashgame.grid import Grid
from nashgame.zero_sum import solve_lower_value
from nashgame.nash_set import (PayoffCloud, build_nash_map, check_invariants, dependence_mask, directional_derivative,
                               dist_l1, map_from_clouds, read_map, tangent_velocities, union_maps, verify_map,
                               write_map)

pairs = st.lists(st.tuples(st.floats(-3, 3), st.floats(-3, 3)), min_size=1, max_size=40)

K_MID, X_MID = 10, (-0.5, 0.5)  # interior node at mid-horizon on the small grid


@pytest.fixture(scope="module")
def exact_map(spec, small_grid, small_fields, small_map):
    ex = oracle.exact_nash_map(small_grid, small_map.quantum)
    return with_clouds(ex, clouds_of(ex), small_fields)


def clouds_of(m):
    g = m.grid
    return [[m.cloud_points(k, j) for j in range(g.n_nodes)] for k in range(g.time_steps + 1)]


def with_clouds(m, clouds, fields):
    return map_from_clouds(m.spec, m.grid, clouds, m.quantum, (fields[0], fields[1]))


@pytest.fixture(scope="module")
def perturbed(exact_map, small_fields):
    g = exact_map.grid
    clouds = clouds_of(exact_map)
    j = g.nearest_node(X_MID)
    clouds[K_MID][j] = clouds[K_MID][j] + np.array([0.5, 0.0])
    return with_clouds(exact_map, clouds, small_fields), j


def test_dist_l1_examples():
    assert dist_l1((0.2, 0.3), PayoffCloud(np.array([[0.2, 0.3], [1.0, 1.0]]), 0.1)) == 0.0
    assert dist_l1((0, 0), PayoffCloud(np.array([[1.0, 2.0]]), 0.1)) == 3.0
    assert dist_l1((0, 0), PayoffCloud(np.array([[1.0, 0.0], [0.0, 2.0]]), 0.1)) == 1.0
    with pytest.raises(PreconditionError):
        dist_l1((0, 0), PayoffCloud(np.zeros((0, 2)), 0.1))


@given(pairs, st.floats(0.01, 1.0))
@settings(max_examples=60, deadline=None)
def test_thinning_spacing_and_coverage(pts, q):
    P = np.array(pts)
    cloud = PayoffCloud.from_points(P, q)
    assert cloud.is_deduplicated()
    # every input point stays within q / 2 of the thinned cloud, and kept points are raw inputs
    assert max(dist_l1(p, cloud) for p in P) < q / 2 + 1e-12
    assert all(np.any(np.all(P == c, axis=1)) for c in cloud.points)


def test_built_map_structure(spec, small_grid, small_map):
    rep = small_map.report
    assert rep.empty_nodes == () and rep.stride == 2
    assert small_map.sizes().shape == (small_grid.time_steps + 1, small_grid.n_nodes)
    assert not small_map.points.flags.writeable and not small_map.offsets.flags.writeable
    np.testing.assert_array_equal(small_map.points[small_map.slice_rows(small_grid.time_steps)[0]:],
                                  spec.payoffs(small_grid.nodes))


def test_built_clouds_are_spaced(small_map, small_grid):
    rng = np.random.default_rng(0)
    for k, j in zip(rng.integers(0, small_grid.time_steps, 200), rng.integers(0, small_grid.n_nodes, 200)):
        assert small_map.cloud(k, j).is_deduplicated()


def test_invariants_hold_on_built_map(small_map):
    n1, n2, _ = check_invariants(small_map, mask_nodes=dependence_mask(small_map))
    assert (n1, n2) == (0, 0)


def test_invariant_checker_detects_violations(small_map, small_fields):
    clouds = clouds_of(small_map)
    g = small_map.grid
    j = g.nearest_node((0.0, 0.0))
    clouds[4][j] = clouds[4][j] - np.array([1.0, 0.0])
    clouds[g.time_steps][j] = clouds[g.time_steps][j] + 0.25
    bad = with_clouds(small_map, clouds, small_fields)
    n1, n2, _ = check_invariants(bad, mask_nodes=dependence_mask(bad))
    assert n1 == len(clouds[4][j]) and n2 == 1


def test_builder_monotone_in_tol_inv(spec, small_grid, small_fields, small_map):
    q = small_map.quantum
    tight = build_nash_map(spec, small_grid, small_fields[0], small_fields[1], tol_inv=q / 4)
    loose = build_nash_map(spec, small_grid, small_fields[0], small_fields[1], tol_inv=q)
    # thinning picks representatives, so inclusion holds up to the cloud spacing
    assert ns.contains_map(small_map, tight, q / 2)
    assert ns.contains_map(loose, small_map, q / 2)


def test_seeding_with_own_output_is_a_fixed_point(spec, small_grid, small_fields, small_map):
    again = build_nash_map(spec, small_grid, small_fields[0], small_fields[1], seed_map=small_map)
    assert ns.excess(small_map, again) == 0.0 and ns.excess(again, small_map) == 0.0


def test_verify_passes_built_exact_and_union(small_map, exact_map):
    for m in (small_map, exact_map, union_maps(small_map, exact_map)):
        rep = verify_map(m)
        assert rep.passed, rep.summary(m.grid)
        assert rep.n1_violations == 0 and rep.n2_violations == 0


def test_verify_flags_perturbation(perturbed):
    m, j = perturbed
    rep = verify_map(m)
    assert not rep.passed
    assert rep.worst[:2] == (K_MID, j)
    assert rep.max_residual > 1.0


def test_union_keeps_both_maps(small_map, exact_map):
    u = union_maps(small_map, exact_map)
    assert ns.excess(small_map, u) == 0.0 and ns.excess(exact_map, u) == 0.0
    thin = union_maps(small_map, exact_map, thin=True)
    assert thin.cloud(3, 700).is_deduplicated()


def test_directional_derivative_on_exact_map(exact_map):
    g = exact_map.grid
    t = g.times[K_MID]
    point = np.array([-1.0, 1.0])  # (-|x - y|, y + 1 - t) at (-0.5, 0.5)
    assert directional_derivative(exact_map, t, X_MID, point, (1.0, 1.0)) <= ns.DEFAULT_TOL_DD
    for v in (-1.0, 0.0, 0.5):
        for u in (-1.0, 0.0, 1.0):
            dd = directional_derivative(exact_map, t, X_MID, point, (u, v))
            assert dd >= abs(v - 1.0) - ns.DEFAULT_TOL_DD


def test_directional_derivative_one_stride_before_horizon(spec, exact_map):
    g = exact_map.grid
    x = np.array([0.2, 0.4])
    succ = spec.payoffs(x + 2 * g.dt * np.array([1.0, 1.0]))
    assert directional_derivative(exact_map, g.times[-3], x, succ, (1.0, 1.0)) == pytest.approx(0.0, abs=1e-9)


def test_cloud_distance_on_the_horizon_uses_terminal_payoff(spec, small_map):
    x = np.array([0.123, -0.456])  # not a node
    J = np.array([-0.5, 0.0])
    expected = np.abs(spec.payoffs(x) - J).sum()
    assert ns.cloud_distance(small_map, 1.0, x, J) == pytest.approx(expected, abs=1e-15)


def test_lattice_aligned_affine_game_builds_and_verifies():
    game = affine_games()["swap"]
    g = Grid(0.0, 1.0, 16, (-2.0, -2.0), (2.0, 2.0), (33, 33))
    m = build_nash_map(game, g, solve_lower_value(game, g, 1), solve_lower_value(game, g, 2))
    assert m.report.empty_nodes == ()
    rep = verify_map(m)
    assert rep.passed and rep.unresolved_slices == ()


def test_schedule_validation(exact_map):
    with pytest.raises(PreconditionError):
        directional_derivative(exact_map, 0.0, X_MID, (0, 0), (1, 1), delta_schedule=[0.0])


def test_tangent_velocities(small_grid, small_fields):
    g = small_grid
    t = g.times[K_MID]
    fine = oracle.exact_nash_map(g, 0.1)
    tv = tangent_velocities(fine, t, X_MID, (-1.0, 1.0))
    assert any(np.allclose(w, (1.0, 1.0)) for w in tv)
    # below the diagonal: J1 = -|x - y| + d (1 - t) with d = 1 is carried by w = (1 - d, 1)
    x = (0.5, -0.3)
    tv = tangent_velocities(fine, t, x, (-0.8 + 0.5, 0.2))
    assert any(np.allclose(w, (0.0, 1.0)) for w in tv)


def test_tangent_velocities_empty_at_infeasible_point(perturbed):
    m, j = perturbed
    p = m.cloud_points(K_MID, j)[0]
    assert tangent_velocities(m, m.grid.times[K_MID], X_MID, p) == []


def test_map_file_roundtrip(tmp_path, spec, small_map, small_grid):
    write_map(small_map, tmp_path / "a.txt")
    back = read_map(tmp_path / "a.txt", spec, small_grid)
    np.testing.assert_array_equal(back.points, small_map.points)
    np.testing.assert_array_equal(back.offsets, small_map.offsets)
    assert back.quantum == small_map.quantum
    write_map(back, tmp_path / "b.txt")
    assert filecmp.cmp(tmp_path / "a.txt", tmp_path / "b.txt", shallow=False)


@pytest.mark.parametrize("bad, msg", [
    ("0 0 0 0,1\n", "missing ':'"),
    ("0 0 0 : 1,2,3\n", "malformed"),
    ("0 0.05 0 : 1,2\n", "not a grid node"),
    ("0 0 0 : a,b\n", ":2:"),
])
def test_map_reader_errors(tmp_path, spec, bad, msg):
    g = Grid(0, 1, 1, (0, 0), (1, 1), (2, 2))
    path = tmp_path / "m.txt"
    path.write_text("# nashmap quantum=0.1 time_steps=1\n" + bad)
    with pytest.raises(ConfigError, match=msg):
        read_map(path, spec, g)


def test_map_reader_reports_missing_nodes(tmp_path, spec):
    g = Grid(0, 1, 1, (0, 0), (1, 1), (2, 2))
    path = tmp_path / "m.txt"
    path.write_text("0 0 0 : 0,0\n")
    with pytest.raises(ConfigError, match="7 grid nodes have no record"):
        read_map(path, spec, g)


def test_builder_rejects_foreign_fields(spec, small_fields):
    other = Grid(0, 1, 4, (-1, -1), (1, 1), (5, 5))
    with pytest.raises(PreconditionError):
        build_nash_map(spec, other, small_fields[0], small_fields[1])
