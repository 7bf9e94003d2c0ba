"""Check candidate payoff maps through the discrete directional derivative.

The closed-form map passes; raising player I's payoffs by 0.5 at one node
breaks invariance and the verifier points at that node.
"""

import numpy as np

from nashgame import Grid, example_game, solve_lower_value, tangent_velocities, verify_map
from nashgame import nash_set, oracle

spec = example_game(3)
grid = Grid(0.0, 1.0, 40, (-2.0, -2.0), (2.0, 2.0), (81, 81))
w1, w2 = solve_lower_value(spec, grid, 1), solve_lower_value(spec, grid, 2)

exact = oracle.exact_nash_map(grid, 0.05)
clouds = [[exact.cloud_points(k, j) for j in range(grid.n_nodes)] for k in range(grid.time_steps + 1)]
exact = nash_set.map_from_clouds(spec, grid, clouds, 0.05, (w1, w2))
report = verify_map(exact)
print("closed-form map")
print(report.summary(grid))

k, x = 20, (-0.5, 0.5)
j = grid.nearest_node(x)
point = clouds[k][j][0]
tv = tangent_velocities(exact, grid.times[k], x, point)
print(f"\n{len(tv)} sampled velocities keep {point.round(3).tolist()} at t={grid.times[k]}, x={list(x)}, e.g.",
      np.round(tv[:2], 3).tolist())

clouds[k][j] = clouds[k][j] + np.array([0.5, 0.0])
bad = nash_set.map_from_clouds(spec, grid, clouds, 0.05, (w1, w2))
print("\nsame map with J1 + 0.5 at that node")
print(verify_map(bad).summary(grid))
print("velocities keeping the raised point:", len(tangent_velocities(bad, grid.times[k], x, clouds[k][j][0])))
