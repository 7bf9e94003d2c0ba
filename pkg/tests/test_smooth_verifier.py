import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nashgame import oracle
from nashgame.errors import ConfigError, PreconditionError
from nashgame.oracle import OracleConfig, subdifferential_exact, tie_direction_exact
from nashgame.smooth_verifier import (BANNER, CandidatePair, catalog_pair, check_corollary, check_proposition2,
                                      modulus_derivative, pair_from_fields, subgradient_samples)
from nashgame.zero_sum import field_from_function

TOL_DD = 0.5
pos = st.tuples(st.floats(0.0, 0.95), st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))


@given(pos, st.tuples(st.floats(-1, 1), st.floats(-1, 1)))
@settings(max_examples=30, deadline=None)
def test_constant_pair_has_zero_modulus(p, w):
    assert modulus_derivative(catalog_pair("constant"), p[0], p[1:], w) == 0.0


@given(pos)
@settings(max_examples=50, deadline=None)
def test_phi_is_stationary_along_diagonal_motion(p):
    t, x, y = p
    if y < x:
        x, y = y, x
    assert modulus_derivative(catalog_pair("phi"), t, (x, y), (1.0, 1.0)) <= 1e-9


@given(pos, st.sampled_from([0.0, 1.0, 2.0]))
@settings(max_examples=60, deadline=None)
def test_tie_direction_zeroes_the_modulus(p, gamma):
    t, x, y = p
    if y >= x:
        x, y = y + 0.01, x
    w = tie_direction_exact(OracleConfig(gamma), t, x, y)
    assert modulus_derivative(catalog_pair("c_gamma", gamma), t, (x, y), w) <= TOL_DD


def test_modulus_precondition():
    with pytest.raises(PreconditionError):
        modulus_derivative(catalog_pair("phi"), 0.999, (0.0, 0.0), (1, 1))


@pytest.mark.parametrize("name, gamma", [("phi", 2.0), ("c_gamma", 1.0)])
def test_corollary_passes_example_pairs(spec, small_grid, name, gamma):
    t = np.linspace(0.05, 0.9, 10)
    kinks = np.vstack([np.column_stack([t, t - 0.5, t - 0.5]),
                       np.column_stack([t, -0.3 + gamma * (1 - t), np.full_like(t, -0.3)])])
    rep = check_corollary(catalog_pair(name, gamma), spec, small_grid, points=kinks, n_points=100)
    assert rep.passed, rep.summary()
    assert rep.banner == BANNER and BANNER in rep.summary()


def test_terminal_mismatch_fails(spec, small_grid):
    c1 = field_from_function(small_grid, lambda t, X: oracle.omega1_exact(t, X[:, 0], X[:, 1]) - 1.0)
    c2 = field_from_function(small_grid, lambda t, X: oracle.omega2_exact(t, X[:, 0], X[:, 1]))
    rep = check_corollary(pair_from_fields(c1, c2), spec, small_grid, n_points=20)
    assert not rep.terminal_ok and not rep.passed
    assert rep.max_terminal == pytest.approx(1.0)


def test_proposition_selects_punishing_pair(spec):
    rep = check_proposition2(catalog_pair("phi"), spec, [[0.5, 1.5, 0.0]])
    assert rep.passed and rep.selections[0] == (0, 2)  # u = -1, v = 1


def test_proposition_linear_pair_selects_full_speed_v(spec):
    w2 = catalog_pair("omega")
    pair = CandidatePair(w2.c2, w2.c2, "smooth")
    rep = check_proposition2(pair, spec, [[0.2, 0.1, -0.4], [0.7, -1.0, 1.0]])
    assert all(v == 2 for _, v in rep.selections.values())


def test_proposition_excludes_kinks_and_implies_corollary(spec, small_grid):
    rng = np.random.default_rng(5)
    pts = np.column_stack([rng.uniform(0, 0.9, 40), rng.uniform(-1.5, 1.5, 40), rng.uniform(-1.5, 1.5, 40)])
    kinks = np.array([[0.3, 0.2, 0.2], [0.5, 0.0 + 1.0, 0.0]])  # x = y and x = y + 2 (1 - t)
    pair = catalog_pair("phi")
    rep = check_proposition2(pair, spec, np.vstack([pts, kinks]))
    assert rep.passed
    assert {40, 41} <= set(rep.excluded)
    good = np.vstack([pts, kinks])[sorted(rep.selections)]
    cor = check_corollary(pair, spec, small_grid, points=good, n_points=0)
    assert cor.viscosity_ok and cor.dabs_ok


def test_clarke_samples_cover_the_kink_segment():
    pair = catalog_pair("c_gamma", 1.0)
    seg = subdifferential_exact(OracleConfig(1.0), 1, 0.4, 0.3, 0.3)
    G = subgradient_samples(pair, 1, 0.4, np.array([0.3, 0.3]), 1e-5, (4e-4, 2e-4, 1e-4))
    assert len(G) >= 3
    assert max(seg.distance(g) for g in G) <= 0.05
    # both one-sided gradients show up
    assert min(seg.distance(g) for g in G) <= 1e-3
    assert np.ptp(G[:, 1]) > 0.9


def test_proximal_mode_is_empty_at_concave_kink():
    pair = catalog_pair("phi")
    assert len(subgradient_samples(pair, 1, 0.4, np.array([0.3, 0.3]), 1e-5, (4e-4, 2e-4, 1e-4),
                                   mode="proximal")) == 0
    G = subgradient_samples(pair, 1, 0.4, np.array([0.0, 0.5]), 1e-5, (4e-4, 2e-4, 1e-4), mode="proximal")
    np.testing.assert_allclose(G, [[0.0, 1.0, -1.0]], atol=1e-6)


def test_pair_validation():
    with pytest.raises(ConfigError):
        catalog_pair("nope")
    with pytest.raises(ConfigError):
        CandidatePair(lambda t, X: 0, lambda t, X: 0, "wiggly")
    with pytest.raises(ConfigError):
        subgradient_samples(catalog_pair("phi"), 1, 0.4, np.array([0.0, 0.5]), mode="frechet")
