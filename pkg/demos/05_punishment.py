"""Punishment strategies: agree on a payoff pair, punish whoever leaves the agreed path.

Each player follows the agreed control until the state strays more than
eta(eps) from the agreed trajectory, then switches to pushing the opponent
down to its security level.  Deviations from a finite catalog gain at most
tol_nash(eps) = 0.1 + 5 eps.
"""

from nashgame import (Grid, build_nash_map, deviation_experiment, example_game, make_punishment_profile,
                      simulate, solve_cooperative_max, solve_lower_value)
from nashgame.simulator import ConstantStrategy

spec = example_game(3)
grid = Grid(0.0, 1.0, 50, (-2.0, -2.0), (2.0, 2.0), (101, 101))
w1, w2 = solve_lower_value(spec, grid, 1), solve_lower_value(spec, grid, 2)
c1, c2 = solve_cooperative_max(spec, grid, 1), solve_cooperative_max(spec, grid, 2)
nmap = build_nash_map(spec, grid, w1, w2)

x0 = (0.5, -0.3)  # below the diagonal: player I can pick from a segment of payoffs
cloud = nmap.cloud_points(0, grid.nearest_node(x0))
target = cloud[cloud[:, 0].argmax()]  # the best payoff for player I
prof = make_punishment_profile(nmap, w1, w2, 0.0, x0, target)
print(f"target {target.round(3).tolist()}, agreed path ends at {prof.agreed.endpoint.round(3).tolist()} "
      f"with payoffs {tuple(round(p, 3) for p in prof.agreed.payoffs)}")

run = simulate(spec, 0.0, x0, prof.U, 0.01, prof.V, 0.01)
print(f"profile play with eps=0.01: payoffs {tuple(round(p, 3) for p in run.payoffs)}, "
      f"punishment triggered: {bool(run.flags.any())}")

# player II tries to run upward on its own
dev = simulate(spec, 0.0, x0, prof.U, 0.01, ConstantStrategy(1.0), 0.01)
print(f"II plays v=1 throughout: payoffs {tuple(round(p, 3) for p in dev.payoffs)}, "
      f"punishment triggered: {bool(dev.flags.any())}")

for who, coop in ((1, c1), (2, c2)):
    rep = deviation_experiment(spec, prof, who, coop=coop)
    print()
    print(rep.summary())
