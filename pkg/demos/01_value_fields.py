"""Security levels and cooperative maxima of the planar example, compared with the closed forms."""

import numpy as np

from nashgame import Grid, example_game, solve_cooperative_max, solve_lower_value
from nashgame import oracle

spec = example_game(3)
grid = Grid(0.0, 1.0, 40, (-2.0, -2.0), (2.0, 2.0), (81, 81))

fields = {
    "omega1": (solve_lower_value(spec, grid, 1), oracle.omega1_exact),
    "omega2": (solve_lower_value(spec, grid, 2), oracle.omega2_exact),
    "c1_plus": (solve_cooperative_max(spec, grid, 1), lambda t, x, y: oracle.c_plus_exact(1, t, x, y)),
    "c2_plus": (solve_cooperative_max(spec, grid, 2), lambda t, x, y: oracle.c_plus_exact(2, t, x, y)),
}
print(f"grid: K={grid.time_steps}, {grid.resolution[0]}x{grid.resolution[1]} nodes, "
      f"DP stride {fields['omega1'][0].stride}")

# nodes whose backward cone stays inside the box are unaffected by clamping
inner = np.all(np.abs(grid.nodes) <= 0.9, axis=1)
T = grid.times[:, None]
X, Y = grid.nodes[inner, 0][None], grid.nodes[inner, 1][None]
for label, (fld, exact) in fields.items():
    approx = fld.values.reshape(grid.time_steps + 1, -1)[:, inner]
    print(f"{label:8s} max |grid - closed form| on [-0.9, 0.9]^2: {np.abs(approx - exact(T, X, Y)).max():.3g}")

x = np.array([0.5, -0.3])
print(f"\nat t=0, x={x.tolist()}:")
for label, (fld, exact) in fields.items():
    print(f"  {label:8s} grid {float(fld(0.0, x)):+.4f}   exact {float(exact(0.0, *x)):+.4f}")
