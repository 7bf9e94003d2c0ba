import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nashgame import oracle
from nashgame.errors import ConfigError
from nashgame.grid import Grid
from nashgame.nash_set import map_from_clouds
from nashgame.oracle import (ExactSegment, OracleConfig, c_gamma_exact, c_plus_exact, nash_set_exact, phi_exact,
                             subdifferential_exact, tie_direction_exact)

pos = st.tuples(st.floats(0.0, 1.0), st.floats(-2.0, 2.0), st.floats(-2.0, 2.0))


def test_singleton_above_diagonal():
    seg = nash_set_exact(0.5, 0.0, 1.0)
    assert seg.is_singleton and (seg.j1_lo, seg.j2) == (-1.0, 1.5)


def test_terminal_set_is_payoff():
    seg = nash_set_exact(1.0, 0.7, 0.2)
    assert seg.is_singleton
    assert (seg.j1_lo, seg.j2) == pytest.approx((-0.5, 0.2))


def test_segment_below_diagonal():
    seg = nash_set_exact(0.0, 1.0, 0.0)
    assert (seg.j1_lo, seg.j1_hi, seg.j2) == (-1.0, 0.0, 1.0)


def test_phi_branches():
    assert phi_exact(0.0, 2.0, 0.0)[0] == 0.0
    for t, x in [(0.0, 0.3), (0.6, -1.0)]:
        assert phi_exact(t, x, x)[0] == 0.0
    assert c_gamma_exact(OracleConfig(0.0), 0.0, 2.0, 0.0)[0] == -2.0


def test_subdifferential_tables():
    cfg = OracleConfig(2.0)
    # gradient of x - y in (t, x, y); the published table has the opposite sign
    np.testing.assert_array_equal(subdifferential_exact(cfg, 1, 0.2, 0.0, 1.0).vertices, [[0.0, 1.0, -1.0]])
    np.testing.assert_array_equal(subdifferential_exact(cfg, 1, 0.5, 0.5, 0.2).vertices, [[0.0, 0.0, 0.0]])
    seg = subdifferential_exact(cfg, 1, 0.3, 0.4, 0.4)
    assert seg.distance([0.0, 0.5, -0.5]) == pytest.approx(0.0)
    assert seg.distance([0.0, 0.0, 0.0]) == pytest.approx(0.0)
    assert seg.distance([0.0, -0.5, 0.5]) > 0.5


def test_tie_direction():
    cfg = OracleConfig(2.0)
    np.testing.assert_array_equal(tie_direction_exact(cfg, 0.4, 0.0, 0.5), [1.0, 1.0])
    np.testing.assert_array_equal(tie_direction_exact(cfg, 0.0, 3.0, 0.0), [-1.0, 1.0])
    # at the horizon the constraint defining d is vacuous, so d takes its largest value
    np.testing.assert_array_equal(tie_direction_exact(cfg, 1.0, 0.5, 0.0), [-1.0, 1.0])
    np.testing.assert_allclose(tie_direction_exact(cfg, 0.5, 0.5, 0.0), [0.0, 1.0])


def test_gamma_range_checked():
    with pytest.raises(ConfigError):
        OracleConfig(2.5)


@given(pos)
@settings(max_examples=200, deadline=None)
def test_ordering_of_closed_forms(p):
    t, x, y = p
    w1 = oracle.omega1_exact(t, x, y)
    phi1, phi2 = phi_exact(t, x, y)
    assert w1 <= phi1 + 1e-12 <= c_plus_exact(1, t, x, y) + 2e-12
    assert phi2 == pytest.approx(oracle.omega2_exact(t, x, y))
    seg = nash_set_exact(t, x, y)
    assert seg.j1_lo == pytest.approx(w1) and seg.j1_hi == pytest.approx(phi1)


@given(pos)
@settings(max_examples=100, deadline=None)
def test_cooperative_max_by_brute_force(p):
    # open-loop endpoints fill the box [x +- r] x [y +- r] with r = 1 - t
    t, x, y = p
    r = 1.0 - t
    xs = x + np.linspace(-r, r, 401)
    ys = y + np.linspace(-r, r, 401)
    best = -np.min(np.abs(xs[:, None] - ys[None, :]))
    assert c_plus_exact(1, t, x, y) == pytest.approx(best, abs=r / 200 + 1e-12)
    assert c_plus_exact(2, t, x, y) == pytest.approx(ys.max())


def test_segment_sampling_keeps_endpoints():
    s = ExactSegment(-1.0, 0.0, 2.0).sample(0.3)
    assert s[0, 0] == -1.0 and s[-1, 0] == 0.0 and np.all(s[:, 1] == 2.0)
    assert np.all(np.diff(s[:, 0]) > 0.15 - 1e-12)


def brute_hausdorff(seg, pts):
    s = np.linspace(seg.j1_lo, seg.j1_hi, 20001)
    d = np.abs(s[:, None] - pts[None, :, 0]) + np.abs(pts[None, :, 1] - seg.j2)
    return max(seg.distance(pts).max(), d.min(axis=1).max())


@given(st.floats(-2, 0), st.floats(0, 2), st.lists(st.tuples(st.floats(-3, 1), st.floats(-1, 1)), min_size=1,
                                                   max_size=12))
@settings(max_examples=100, deadline=None)
def test_hausdorff_matches_brute_force(lo, length, pts):
    seg = ExactSegment(lo, lo + length, 0.0)
    P = np.array(pts)
    assert seg.hausdorff(P) == pytest.approx(brute_hausdorff(seg, P), abs=length / 20000 + 1e-9)


def test_map_hausdorff_agrees_with_per_node_evaluation(spec):
    g = Grid(0, 1, 4, (-1, -1), (1, 1), (5, 5))
    rng = np.random.default_rng(3)
    clouds = [[rng.uniform(-2, 2, size=(rng.integers(1, 6), 2)) for _ in range(g.n_nodes)]
              for _ in range(g.time_steps + 1)]
    m = map_from_clouds(spec, g, clouds, 0.1)
    H = oracle.map_hausdorff(m)
    for k, j in itertools.product(range(g.time_steps + 1), range(g.n_nodes)):
        ref = nash_set_exact(g.times[k], *g.nodes[j]).hausdorff(clouds[k][j])
        assert H[k, j] == pytest.approx(ref, abs=1e-12)


def test_exact_map_has_the_closed_form_clouds(small_grid):
    m = oracle.exact_nash_map(small_grid, 0.1)
    # a segment sampled at spacing q is within q / 2 of its samples
    assert np.nanmax(oracle.map_hausdorff(m)) <= 0.05 + 1e-12
    np.testing.assert_allclose(m.cloud_points(small_grid.time_steps, 0), [[0.0, -2.0]])
