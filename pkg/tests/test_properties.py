"""Property suites on the planar example and two affine catalog games."""

import filecmp

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from conftest import PROPERTY_GAMES, affine_games
from nashgame import nash_set as ns
from nashgame.game_model import GameSpec, PayoffSpec
from nashgame.grid import Grid
from nashgame.nash_set import build_nash_map, check_invariants, default_tol_val, write_map
from nashgame.simulator import ConstantStrategy, simulate
from nashgame.zero_sum import solve_cooperative_max, solve_lower_value, write_field_csv

AFFINE_GRID = Grid(0.0, 1.0, 16, (-2.0, -2.0), (2.0, 2.0), (33, 33))
# monotonicity slack in payoff quanta; see the notes on off-node feet
MONO_SLACK = {"example": 0.5, "swap": 0.5, "rotation": 2.0}

def game_bundle(name: str, spec=None, grid=None, fields=None, nmap=None):
    """``(game, grid, (w1, w2, c1, c2), built map)`` for a property-suite game."""
    if name != "example":
        spec, grid = affine_games()[name], AFFINE_GRID
    if fields is None:
        fields = tuple(f(spec, grid, i) for f in (solve_lower_value, solve_cooperative_max) for i in (1, 2))
    if nmap is None:
        nmap = build_nash_map(spec, grid, fields[0], fields[1])
    return spec, grid, fields, nmap


def value_order_gap(bundle) -> float:
    """Largest ``omega_i - c_i^+`` over nodes and both players."""
    _, _, (w1, w2, c1, c2), _ = bundle
    return float(max((w1.values - c1.values).max(), (w2.values - c2.values).max()))


def invariant_counts(bundle) -> tuple[int, int]:
    return check_invariants(bundle[3])[:2]


def monotonicity_gaps(bundle, factors=(0.25, 0.5, 1.0)):
    """Excess between builds at increasing ``tol_inv``, plus whether empty counts shrink and sizes grow."""
    g, grid, fields, m = bundle
    maps = [build_nash_map(g, grid, fields[0], fields[1], tol_inv=f * m.quantum) for f in factors]
    gaps = [ns.excess(a, b) for a, b in zip(maps, maps[1:])]
    grows = all(len(b.report.empty_nodes) <= len(a.report.empty_nodes) and len(b.points) >= len(a.points)
                for a, b in zip(maps, maps[1:]))
    return gaps, grows


def euler_errors(game: GameSpec, eps_list=(0.02, 0.01, 0.005)) -> list[float]:
    """Endpoint errors of the step-by-step motion against a tight ODE solve, constant controls."""
    from scipy.integrate import solve_ivp

    x0, u, v = np.array([0.4, -0.2]), np.array([1.0]), np.array([-1.0])
    sol = solve_ivp(lambda t, x: game.f(t, x, u, v), (0.0, 1.0), x0, rtol=1e-12, atol=1e-13)
    errs = []
    for e in eps_list:
        tr = simulate(game, 0.0, x0, ConstantStrategy(1.0), e, ConstantStrategy(-1.0), e)
        errs.append(float(np.linalg.norm(tr.endpoint - sol.y[:, -1])))
    return errs


def convergence_ok(errs) -> bool:
    if max(errs) < 1e-9:
        return True  # constant velocities: the step is exact
    return all(1.5 <= a / b <= 3.0 for a, b in zip(errs, errs[1:]))


def reruns_identical(bundle, tmp_path) -> bool:
    g, grid, fields, m = bundle
    write_map(m, tmp_path / "a.txt")
    write_map(build_nash_map(g, grid, fields[0], fields[1]), tmp_path / "b.txt")
    write_field_csv(fields[0], tmp_path / "w1a.csv")
    write_field_csv(solve_lower_value(g, grid, 1), tmp_path / "w1b.csv")
    return filecmp.cmp(tmp_path / "a.txt", tmp_path / "b.txt", shallow=False) \
        and filecmp.cmp(tmp_path / "w1a.csv", tmp_path / "w1b.csv", shallow=False)


@pytest.fixture(scope="module")
def games(spec, small_grid, small_fields, small_map):
    out = {"example": game_bundle("example", spec, small_grid, small_fields, small_map)}
    out.update({name: game_bundle(name) for name in PROPERTY_GAMES})
    return out


NAMES = ["example", *PROPERTY_GAMES]


@pytest.mark.parametrize("name", NAMES)
def test_lower_value_below_cooperative_max(games, name):
    assert value_order_gap(games[name]) <= default_tol_val(games[name][1])


@pytest.mark.parametrize("name", NAMES)
def test_built_map_invariants(games, name):
    assert invariant_counts(games[name]) == (0, 0)


@pytest.mark.parametrize("name", NAMES)
def test_builder_monotone_in_tol_inv(games, name):
    gaps, grows = monotonicity_gaps(games[name])
    assert grows and max(gaps) <= MONO_SLACK[name] * games[name][3].quantum, gaps


@pytest.mark.parametrize("name", NAMES)
def test_integration_convergence(games, name):
    errs = euler_errors(games[name][0])
    assert convergence_ok(errs), errs


def test_rotation_step_error_is_first_order():
    errs = euler_errors(affine_games()["rotation"])
    assert min(errs) > 1e-6 and convergence_ok(errs)


@pytest.mark.parametrize("name", NAMES)
def test_reruns_are_byte_identical(games, tmp_path, name):
    assert reruns_identical(games[name], tmp_path)


coef = st.floats(-0.6, 0.6, allow_nan=False).map(lambda v: round(v, 2))


@st.composite
def random_affine(draw):
    A = [draw(coef) for _ in range(4)]
    B = [draw(coef) + 0.5, draw(coef)]
    C = [draw(coef), draw(coef) - 0.5]
    pay = st.sampled_from([PayoffSpec("linear", (1.0, -0.5, 0.0)), PayoffSpec("distance", (-1.0, 0.0, 0.0)),
                           PayoffSpec("abs_diff", (-1.0, 0, 1)), PayoffSpec("linear", (0.0, 1.0, 0.2))])
    c = np.linspace(-1.0, 1.0, 3)
    return GameSpec("affine", (*A, *B, *C), 0.0, 1.0, 2, c, c, draw(pay), draw(pay))


TINY = Grid(0.0, 1.0, 6, (-1.0, -1.0), (1.0, 1.0), (9, 9))


@given(random_affine())
@settings(max_examples=15, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
def test_random_affine_games_keep_invariants(game):
    w1, w2 = solve_lower_value(game, TINY, 1), solve_lower_value(game, TINY, 2)
    c1, c2 = solve_cooperative_max(game, TINY, 1), solve_cooperative_max(game, TINY, 2)
    assert np.all(w1.values <= c1.values + 1e-12) and np.all(w2.values <= c2.values + 1e-12)
    m = build_nash_map(game, TINY, w1, w2)
    assert check_invariants(m)[:2] == (0, 0)
