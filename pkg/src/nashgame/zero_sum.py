"""Zero-sum value fields by backward semi-Lagrangian dynamic programming.

Each backward step takes one explicit Euler step along every sampled control
pair and interpolates the next slice multilinearly::

    V(t_k, x) = max_a min_b  V~(t_{k+1}, x + dt f(t_k, x, u, v))

``omega1``: player I maximizes sigma1 against player II; ``omega2``: player II
maximizes sigma2 against player I; ``c1_plus``/``c2_plus`` maximize over both.
"""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .game_model import GameSpec, isaacs_check, pair_velocities
from .grid import Grid, interp_slice, interp_spacetime

LABELS = ("omega1", "omega2", "c1_plus", "c2_plus", "candidate")


@dataclass(frozen=True, eq=False)
class ValueField:
    grid: Grid
    values: np.ndarray  # (K + 1, *grid.shape)
    label: str
    warnings: tuple[str, ...] = field(default=())
    stride: int = 1

    def __post_init__(self):
        if self.label not in LABELS:
            raise ConfigError(f"unknown field label {self.label!r}")
        expected = (self.grid.time_steps + 1,) + self.grid.shape
        if self.values.shape != expected:
            raise ValueError(f"values shape {self.values.shape} != {expected}")

    def slice(self, k: int) -> np.ndarray:
        return self.values[k]

    def flat_slice(self, k: int) -> np.ndarray:
        return self.values[k].reshape(-1)

    def __call__(self, t, x, boundary: str | None = None):
        return query_value(self, t, x, boundary)


def _step_operator(mode: str, which: int):
    """Return ``reduce(M)`` with ``M`` of shape ``(N, nP, nQ)``."""
    if mode == "lower" and which == 1:
        return lambda M: M.min(axis=2).max(axis=1)
    if mode == "lower" and which == 2:
        return lambda M: M.min(axis=1).max(axis=1)
    if mode == "coop":
        return lambda M: M.max(axis=(1, 2))
    raise ValueError(f"bad mode/which: {mode}/{which}")


def auto_stride(spec: GameSpec, grid: Grid) -> int:
    """Slices spanned by one DP step so that the fastest Euler foot moves about one cell.

    Feet landing on nodes are interpolated exactly; sub-cell steps smear kinks
    by numerical diffusion that grows with the number of steps.
    """
    vmax = np.abs(pair_velocities(spec, grid.t0, grid.nodes)).max(axis=(0, 1, 2))
    moving = vmax > 0
    if not moving.any():
        return 1
    cfl = np.min(grid.dx[moving] / (grid.dt * vmax[moving]))
    return max(1, int(np.floor(cfl + 1e-9)))


def _resolve_stride(spec: GameSpec, grid: Grid, stride) -> int:
    if stride in (None, "auto"):
        return auto_stride(spec, grid)
    stride = int(stride)
    if stride < 1:
        raise ConfigError("stride must be >= 1")
    return stride


def backward_step(spec: GameSpec, grid: Grid, values: np.ndarray, k: int, mode: str, which: int,
                  stride: int = 1) -> np.ndarray:
    """Recompute slice ``k`` from slice ``min(k + stride, K)`` of ``values``."""
    k2 = min(k + stride, grid.time_steps)
    t = grid.times[k]
    X = grid.nodes
    F = pair_velocities(spec, t, X)  # (N, nP, nQ, n)
    targets = X[:, None, None, :] + (grid.times[k2] - t) * F
    M = interp_slice(values[k2], grid, targets)
    return _step_operator(mode, which)(M).reshape(grid.shape)


def _solve(spec: GameSpec, grid: Grid, which: int, mode: str, label: str, stride, notes=()) -> ValueField:
    stride = _resolve_stride(spec, grid, stride)
    values = np.empty((grid.time_steps + 1,) + grid.shape)
    values[-1] = spec.sigma(which, grid.nodes).reshape(grid.shape)
    for k in range(grid.time_steps - 1, -1, -1):
        values[k] = backward_step(spec, grid, values, k, mode, which, stride)
    return ValueField(grid, values, label, tuple(notes), stride)


def _isaacs_warnings(spec: GameSpec, grid: Grid, isaacs_tol: float) -> list[str]:
    n = grid.ndim
    sub = grid.nodes[:: max(1, grid.n_nodes // 64)]
    S = np.vstack([np.eye(n), -np.eye(n), np.ones((1, n)), -np.ones((1, n))])
    rep = isaacs_check(spec, grid.times[[0, grid.time_steps // 2, grid.time_steps]], sub, S)
    if rep.max_gap > isaacs_tol:
        msg = f"Isaacs gap {rep.max_gap:.3g} exceeds {isaacs_tol:.3g} at t={rep.worst_point[0]}"
        warnings.warn(msg, RuntimeWarning, stacklevel=3)
        return [msg]
    return []


def solve_lower_value(spec: GameSpec, grid: Grid, which: int, isaacs_tol: float = 1e-9,
                      stride="auto") -> ValueField:
    """Value of the zero-sum game in which player ``which`` maximizes ``sigma_which``.

    Player ``which`` commits first in every step (max-min).  When the sampled
    Isaacs gap exceeds ``isaacs_tol`` a ``RuntimeWarning`` is issued and kept
    in ``field.warnings``; the values are still the max-min ones.
    """
    if which not in (1, 2):
        raise ValueError("which must be 1 or 2")
    notes = _isaacs_warnings(spec, grid, isaacs_tol)
    return _solve(spec, grid, which, "lower", f"omega{which}", stride, notes)


def solve_cooperative_max(spec: GameSpec, grid: Grid, which: int, stride="auto") -> ValueField:
    """Largest ``sigma_which`` reachable when both players cooperate."""
    if which not in (1, 2):
        raise ValueError("which must be 1 or 2")
    return _solve(spec, grid, which, "coop", f"c{which}_plus", stride)


def query_value(field: ValueField, t, x, boundary: str | None = None):
    """Space-time multilinear interpolation of a value field."""
    out = interp_spacetime(field.values, field.grid, t, np.asarray(x, float), boundary)
    return float(out) if np.ndim(out) == 0 else out


def field_from_function(grid: Grid, fn, label: str = "candidate") -> ValueField:
    """Sample ``fn(t, X)`` (X of shape ``(N, n)``) on every slice."""
    vals = np.stack([np.asarray(fn(t, grid.nodes), float).reshape(grid.shape) for t in grid.times])
    return ValueField(grid, vals, label)


def write_field_csv(field: ValueField, path) -> None:
    """CSV with header ``t,x1..xn,value``, one row per space-time node."""
    g = field.grid
    n_t, N = g.time_steps + 1, g.n_nodes
    cols = np.empty((n_t * N, g.ndim + 2))
    cols[:, 0] = np.repeat(g.times, N)
    cols[:, 1:-1] = np.tile(g.nodes, (n_t, 1))
    cols[:, -1] = field.values.reshape(-1)
    header = ",".join(["t"] + [f"x{i + 1}" for i in range(g.ndim)] + ["value"])
    buf = io.StringIO()
    np.savetxt(buf, cols, delimiter=",", fmt="%.17g", header=header, comments="")
    with open(path, "w", newline="\n") as fh:
        fh.write(buf.getvalue())


def read_field_csv(path, label: str = "candidate", boundary: str = "clamp") -> ValueField:
    """Inverse of :func:`write_field_csv`; the grid is inferred from the coordinates."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    if header[0] != "t" or header[-1] != "value" or len(header) < 3:
        raise ConfigError(f"{path}: header must be t,x1..xn,value, got {header}")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    n = data.shape[1] - 2
    times = np.unique(data[:, 0])
    axes = [np.unique(data[:, 1 + d]) for d in range(n)]
    grid = Grid(times[0], times[-1], len(times) - 1, [a[0] for a in axes], [a[-1] for a in axes],
                [len(a) for a in axes], boundary)
    if data.shape[0] != len(times) * grid.n_nodes:
        raise ConfigError(f"{path}: expected {len(times) * grid.n_nodes} rows, got {data.shape[0]}")
    kt = np.rint((data[:, 0] - grid.t0) / grid.dt).astype(int)
    idx = [np.rint((data[:, 1 + d] - grid.lo[d]) / grid.dx[d]).astype(int) for d in range(n)]
    values = np.full((len(times),) + grid.shape, np.nan)
    values[(kt, *idx)] = data[:, -1]
    if np.isnan(values).any():
        raise ConfigError(f"{path}: rows do not cover the inferred grid")
    return ValueField(grid, values, label)
