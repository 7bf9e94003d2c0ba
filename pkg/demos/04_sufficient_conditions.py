"""Sampled checks of the sufficient conditions on closed-form candidate pairs.

The upper Hamilton-Jacobi inequalities, a vanishing modulus derivative and
terminal consistency are tested at random points plus points on the kinks.
The smooth-system check finds a control pair that is a mutual best reply
and keeps both functions stationary wherever the pair is differentiable.
"""

import numpy as np

from nashgame import CandidatePair, Grid, catalog_pair, check_corollary, check_proposition2, example_game
from nashgame import oracle
from nashgame.smooth_verifier import sample_points

spec = example_game(3)
grid = Grid(0.0, 1.0, 100, (-2.0, -2.0), (2.0, 2.0), (201, 201))
box = ((-1.9, -1.9), (1.9, 1.9))
rng = np.random.default_rng(0)
t = rng.uniform(0.0, 0.99, 20)
y = rng.uniform(-1.5, 1.5, 20)
on_diagonal = np.column_stack([t, y, y])

# the security levels shifted down by one break terminal consistency
shifted = CandidatePair(lambda t, X: oracle.omega1_exact(t, X[..., 0], X[..., 1]) - 1.0,
                        lambda t, X: oracle.omega2_exact(t, X[..., 0], X[..., 1]), name="omega1 - 1, omega2")
pairs = [catalog_pair(n, g) for n, g in (("phi", 2.0), ("c_gamma", 0.0), ("c_gamma", 1.0))] + [shifted]
for pair in pairs:
    rep = check_corollary(pair, spec, grid, points=on_diagonal, n_points=100, box=box)
    print(f"--- {pair.name}")
    print(rep.summary())

phi = catalog_pair("phi")
pts = np.vstack([sample_points(grid, 60, 1, t_margin=0.01, box=box), on_diagonal])
prop = check_proposition2(phi, spec, pts)
print("--- smooth system on phi")
print(prop.summary())
u, v = next(iter(prop.selections.values()))
print(f"first selection: u={spec.P_samples[u].tolist()}, v={spec.Q_samples[v].tolist()}")
