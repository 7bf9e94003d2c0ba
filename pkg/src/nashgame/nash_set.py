"""Multivalued payoff maps on a grid: construction and verification.

A :class:`NashMap` assigns a finite cloud of payoff pairs ``(J1, J2)`` to every
space-time node.  :func:`build_nash_map` computes the largest such map that
starts from the terminal payoffs, dominates the security levels and is weakly
invariant under the (convexified) dynamics.  :func:`verify_map` checks an
arbitrary map through the directional derivative of its distance function.

Clouds are stored CSR style over rows ``k * n_nodes + j``.
"""

from __future__ import annotations

import io
import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ConfigError, PreconditionError
from .game_model import GameSpec, hull_velocities_batch
from .grid import Grid
from .zero_sum import ValueField, _resolve_stride, auto_stride


def default_tol_val(grid: Grid) -> float:
    """Value tolerance ``3 (dt + max dx)`` used for security-level checks."""
    return 3.0 * (grid.dt + float(np.max(grid.dx)))


def default_quantum(grid: Grid) -> float:
    return default_tol_val(grid) / 2.0


# Calibrated on the example game: exact and built maps score below 0.05, a
# payoff moved by 0.5 scores 3 or more, and a wrong second-player velocity v
# scores |v - 1| minus the perturbation radius.
DEFAULT_TOL_DD = 0.5


@dataclass(frozen=True, eq=False)
class PayoffCloud:
    points: np.ndarray  # (m, 2)
    quantum: float

    def __post_init__(self):
        pts = np.asarray(self.points, float).reshape(-1, 2)
        object.__setattr__(self, "points", pts)
        if self.quantum <= 0:
            raise ConfigError("quantum must be positive")

    @classmethod
    def from_points(cls, points, quantum: float) -> "PayoffCloud":
        """Thin ``points`` greedily in input order so no two kept points are closer than ``quantum / 2``.

        Kept points retain their raw values.
        """
        pts = np.asarray(points, float).reshape(-1, 2)
        kept = []
        for p in pts:
            if all(np.abs(p - k).sum() >= quantum / 2 for k in kept):
                kept.append(p)
        return cls(np.array(kept).reshape(-1, 2), quantum)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def is_empty(self) -> bool:
        return len(self.points) == 0

    def diameter(self) -> float:
        if len(self.points) < 2:
            return 0.0
        p = self.points
        return float(np.abs(p[:, None, :] - p[None, :, :]).sum(-1).max())

    def is_deduplicated(self) -> bool:
        p = self.points
        if len(p) < 2:
            return True
        d = np.abs(p[:, None, :] - p[None, :, :]).sum(-1)
        np.fill_diagonal(d, np.inf)
        return bool(d.min() >= self.quantum / 2 - 1e-12)


def dist_l1(point, cloud) -> float:
    """Smallest l1 distance from ``point`` to the points of ``cloud``."""
    pts = cloud.points if isinstance(cloud, PayoffCloud) else np.asarray(cloud, float).reshape(-1, 2)
    if len(pts) == 0:
        raise PreconditionError("distance to an empty payoff cloud is undefined")
    p = np.asarray(point, float)
    return float(np.min(np.abs(pts[:, 0] - p[0]) + np.abs(pts[:, 1] - p[1])))


@dataclass(frozen=True)
class BuildReport:
    empty_nodes: tuple[tuple[int, int], ...]  # (k, j) with an empty cloud
    n_points: int
    max_cloud: int
    seconds: float
    tol_inv: float
    tol_n1: float
    stride: int
    hull_density: int

    def summary(self, timing: bool = True) -> str:
        took = f" in {self.seconds:.1f}s" if timing else ""
        return (f"built {self.n_points} points{took} (largest cloud {self.max_cloud}, "
                f"stride {self.stride}, tol_inv {self.tol_inv:.4g}); {len(self.empty_nodes)} empty nodes")


@dataclass(frozen=True, eq=False)
class NashMap:
    """Payoff clouds on every node of ``grid``; immutable once built."""

    spec: GameSpec
    grid: Grid
    quantum: float
    offsets: np.ndarray  # ((K + 1) * n_nodes + 1,) int64
    points: np.ndarray  # (M, 2)
    omega_ref: tuple[ValueField, ValueField] | None = None
    residuals: np.ndarray | None = None  # builder residual per point, when built
    report: BuildReport | None = None

    def __post_init__(self):
        rows = (self.grid.time_steps + 1) * self.grid.n_nodes
        if self.offsets.shape != (rows + 1,):
            raise ValueError(f"offsets must have length {rows + 1}")
        if self.offsets[-1] != len(self.points):
            raise ValueError("offsets do not match the number of points")
        for a in (self.offsets, self.points):
            a.setflags(write=False)

    def row(self, k: int, j: int) -> int:
        return k * self.grid.n_nodes + j

    def cloud_points(self, k: int, j: int) -> np.ndarray:
        r = self.row(k, j)
        return self.points[self.offsets[r]:self.offsets[r + 1]]

    def cloud(self, k: int, j: int) -> PayoffCloud:
        return PayoffCloud(self.cloud_points(k, j), self.quantum)

    def sizes(self) -> np.ndarray:
        """Cloud sizes, shape ``(K + 1, n_nodes)``."""
        return np.diff(self.offsets).reshape(self.grid.time_steps + 1, self.grid.n_nodes)

    def node_of(self, t: float, x) -> tuple[int, int]:
        """Indices of the space-time node at ``(t, x)``; raises if ``(t, x)`` is not a node."""
        g = self.grid
        kf = g.time_index(t)
        k = int(np.rint(kf))
        j = g.nearest_node(x)
        if abs(kf - k) > 1e-9 or k < 0 or k > g.time_steps or not np.allclose(g.nodes[j], x, atol=1e-9):
            raise PreconditionError(f"({t}, {list(np.ravel(x))}) is not a grid node")
        return k, j

    def slice_rows(self, k: int) -> tuple[int, int]:
        N = self.grid.n_nodes
        return int(self.offsets[k * N]), int(self.offsets[(k + 1) * N])


def _omega_slice(field: ValueField | None, k: int, n: int) -> np.ndarray:
    if field is None:
        return np.full(n, -np.inf)
    return np.ascontiguousarray(field.flat_slice(k), dtype=float)


def _empty_seed(n_nodes: int):
    return np.zeros(n_nodes + 1, dtype=np.int64), np.zeros((0, 2))


def _foot_corners(spec: GameSpec, grid: Grid, k: int, k2: int, hull_density: int, seed: int):
    """Corner indices and weights of every Euler foot from slice ``k`` to ``k2``."""
    t = grid.times[k]
    W = hull_velocities_batch(spec, t, grid.nodes, hull_density, seed)  # (N, nw, n)
    feet = grid.nodes[:, None, :] + (grid.times[k2] - t) * W
    N, nw = W.shape[:2]
    idx, w = grid.cell_corners(feet.reshape(-1, grid.ndim), "clamp")
    C = idx.shape[1]
    return np.ascontiguousarray(idx.reshape(N, nw, C)), np.ascontiguousarray(w.reshape(N, nw, C))


def _terminal_feet(spec: GameSpec, grid: Grid, k: int, hull_density: int, seed: int):
    """Successor data for a step that ends on the horizon.

    The terminal map is known off the grid, so every foot gets its own row
    holding ``sigma(foot)`` and a single corner of weight one.
    """
    t = grid.times[k]
    W = hull_velocities_batch(spec, t, grid.nodes, hull_density, seed)
    N, nw = W.shape[:2]
    feet = np.clip(grid.nodes[:, None, :] + (grid.theta0 - t) * W, grid.lo, grid.hi)
    pts = np.ascontiguousarray(spec.payoffs(feet.reshape(-1, grid.ndim)), dtype=float)
    offs = np.arange(N * nw + 1, dtype=np.int64)
    C = 1 << grid.ndim
    idx = np.zeros((N, nw, C), dtype=np.int64)
    idx[:, :, 0] = np.arange(N * nw).reshape(N, nw)
    w = np.zeros((N, nw, C))
    w[:, :, 0] = 1.0
    return offs, pts, np.zeros(N * nw), idx, w


def build_nash_map(spec: GameSpec, grid: Grid, omega1: ValueField | None, omega2: ValueField | None,
                   hull_density: int = 8, quantum: float | None = None, tol_inv: float | None = None,
                   tol_n1: float | None = None, stride="auto", seed: int = 0,
                   seed_map: NashMap | None = None) -> NashMap:
    """Largest discrete map meeting the terminal, security-level and transport conditions.

    Clouds are computed backward from the terminal payoffs.  A candidate pair
    at node ``(t_k, x_j)`` comes from the clouds at the cells reached by the
    Euler feet ``x_j + tau w`` (``tau`` spans ``stride`` slices, ``w`` ranges
    over raw and ``hull_density`` convex-hull velocities), snapped to the
    payoff lattice.  It carries a transport residual::

        r(J) = min_w  sum_c lambda_c(w) * min_{zeta in cloud(c)} (r_zeta + |zeta - J|_1)

    and is kept when ``r(J) <= tol_inv`` and ``J >= omega(t_k, x_j) - tol_n1``
    componentwise.  Residuals accumulate along a chain, so drift is bounded
    by ``tol_inv`` over the whole horizon instead of growing per step.

    ``seed_map`` adds its clouds as extra candidates at every node.  Empty
    clouds are listed in ``report.empty_nodes``.
    """
    if grid.ndim < 1:
        raise ConfigError("grid must have at least one dimension")
    for fld in (omega1, omega2):
        if fld is not None and fld.grid != grid:
            raise PreconditionError("security-level fields must be solved on the map grid")
    if seed_map is not None and seed_map.grid != grid:
        raise PreconditionError("seed map must live on the same grid")
    quantum = default_quantum(grid) if quantum is None else float(quantum)
    if quantum <= 0:
        raise ConfigError("quantum must be positive")
    tol_inv = quantum / 2.0 if tol_inv is None else float(tol_inv)
    tol_n1 = quantum / 2.0 if tol_n1 is None else float(tol_n1)
    stride = _resolve_stride(spec, grid, stride)

    start = time.perf_counter()
    K, N = grid.time_steps, grid.n_nodes
    offs = [None] * (K + 1)
    pts = [None] * (K + 1)
    res = [None] * (K + 1)
    term = spec.payoffs(grid.nodes)
    offs[K] = np.arange(N + 1, dtype=np.int64)
    pts[K] = np.ascontiguousarray(term, dtype=float)
    res[K] = np.zeros(N)
    empty = []
    for k in range(K - 1, -1, -1):
        k2 = min(k + stride, K)
        if k2 == K:
            n_offs, n_pts, n_res, cidx, cw = _terminal_feet(spec, grid, k, hull_density, seed)
        else:
            n_offs, n_pts, n_res = offs[k2], pts[k2], res[k2]
            cidx, cw = _foot_corners(spec, grid, k, k2, hull_density, seed)
        if seed_map is not None:
            lo, hi = seed_map.slice_rows(k)
            s_offs = seed_map.offsets[k * N:(k + 1) * N + 1] - lo
            s_pts = np.ascontiguousarray(seed_map.points[lo:hi])
        else:
            s_offs, s_pts = _empty_seed(N)
        bound = _kernels.candidate_bound(n_offs, cidx, cw, s_offs)
        start_idx = np.concatenate([[0], np.cumsum(bound)[:-1]]).astype(np.int64)
        total = int(bound.sum())
        o_pts = np.empty((total, 2))
        o_res = np.empty(total)
        cnt = np.zeros(N, dtype=np.int64)
        _kernels.build_slice(n_offs, n_pts, n_res, cidx, cw, s_offs, s_pts,
                             _omega_slice(omega1, k, N), _omega_slice(omega2, k, N),
                             tol_n1, quantum, tol_inv, start_idx, o_pts, o_res, cnt)
        keep = np.repeat(start_idx, cnt) + (np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt))
        offs[k] = np.concatenate([[0], np.cumsum(cnt)]).astype(np.int64)
        pts[k] = o_pts[keep]
        res[k] = o_res[keep]
        empty.extend((k, int(j)) for j in np.flatnonzero(cnt == 0))
        del o_pts, o_res

    sizes = np.concatenate([np.diff(o) for o in offs])
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    points = np.concatenate(pts)
    residuals = np.concatenate(res)
    report = BuildReport(tuple(empty), len(points), int(sizes.max()), time.perf_counter() - start,
                         tol_inv, tol_n1, stride, hull_density)
    omega_ref = (omega1, omega2) if omega1 is not None and omega2 is not None else None
    return NashMap(spec, grid, quantum, offsets, points, omega_ref, residuals, report)


def map_from_clouds(spec: GameSpec, grid: Grid, clouds, quantum: float,
                    omega_ref: tuple[ValueField, ValueField] | None = None) -> NashMap:
    """Assemble a map from ``clouds[k][j]`` arrays of shape ``(m, 2)``."""
    K, N = grid.time_steps, grid.n_nodes
    flat = []
    for k in range(K + 1):
        if len(clouds[k]) != N:
            raise ValueError(f"slice {k}: expected {N} clouds, got {len(clouds[k])}")
        flat.extend(np.asarray(c, float).reshape(-1, 2) for c in clouds[k])
    sizes = np.array([len(c) for c in flat], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    points = np.concatenate(flat) if flat else np.zeros((0, 2))
    return NashMap(spec, grid, quantum, offsets, np.ascontiguousarray(points), omega_ref)


def union_maps(a: NashMap, b: NashMap, thin: bool = False) -> NashMap:
    """Pointwise union of two maps on the same grid.

    Exact duplicates are dropped.  ``thin=True`` additionally removes points
    of ``b`` within ``quantum / 2`` of kept points, which restores the cloud
    spacing but moves the transport residual by up to ``quantum / (2 delta)``.
    """
    if a.grid != b.grid:
        raise PreconditionError("maps live on different grids")
    K, N = a.grid.time_steps, a.grid.n_nodes
    clouds = [[None] * N for _ in range(K + 1)]
    for k in range(K + 1):
        for j in range(N):
            both = np.vstack([a.cloud_points(k, j), b.cloud_points(k, j)])
            if k == K:
                clouds[k][j] = both[:1]
            elif thin:
                clouds[k][j] = PayoffCloud.from_points(both, a.quantum).points
            else:
                _, first = np.unique(both, axis=0, return_index=True)
                clouds[k][j] = both[np.sort(first)]
    return map_from_clouds(a.spec, a.grid, clouds, a.quantum, a.omega_ref)


def contains_map(big: NashMap, small: NashMap, tol: float) -> bool:
    """Whether every point of ``small`` lies within ``tol`` (l1) of ``big``'s cloud at the same node."""
    return excess(small, big) <= tol


def excess(a: NashMap, b: NashMap) -> float:
    """Largest distance from a point of ``a`` to ``b``'s cloud at the same node (inf if that cloud is empty)."""
    if a.grid != b.grid:
        raise PreconditionError("maps live on different grids")
    worst = 0.0
    for r in np.flatnonzero(np.diff(a.offsets)):
        pa = a.points[a.offsets[r]:a.offsets[r + 1]]
        pb = b.points[b.offsets[r]:b.offsets[r + 1]]
        if len(pb) == 0:
            return float("inf")
        d = np.abs(pa[:, None, :] - pb[None, :, :]).sum(-1).min(axis=1).max()
        worst = max(worst, float(d))
    return worst


# ---------------------------------------------------------------------------
# distances off the grid and the directional derivative


def cloud_distance(nmap: NashMap, t: float, x, point, boundary: str | None = None) -> float:
    """l1 distance from ``point`` to the map at ``(t, x)``.

    Node distances are interpolated multilinearly in space and time, which
    coincides with the exact cloud distance at nodes.  On the horizon the
    terminal payoff is known everywhere and is used directly.
    """
    g = nmap.grid
    policy = boundary or g.boundary
    x = np.asarray(x, float)
    kf = g.time_index(t)
    if policy == "strict" and (kf < -1e-9 or kf > g.time_steps + 1e-9):
        raise PreconditionError(f"time {t} outside the grid horizon")
    kf = float(np.clip(kf, 0, g.time_steps))
    if abs(kf - round(kf)) < 1e-9:
        kf = float(round(kf))
    if kf == g.time_steps:
        xc = x if policy == "strict" else np.clip(x, g.lo, g.hi)
        return float(np.abs(nmap.spec.payoffs(xc) - np.asarray(point, float)).sum())
    k0 = min(int(np.floor(kf)), g.time_steps)
    ks = [(k0, 1.0 - (kf - k0))]
    if kf > k0:
        ks.append((k0 + 1, kf - k0))
    idx, w = g.cell_corners(x[None, :], policy)
    total = 0.0
    for k, lam_t in ks:
        for c, lam in zip(idx[0], w[0]):
            if lam * lam_t > 0:
                pts = nmap.cloud_points(k, int(c))
                if len(pts) == 0:
                    return float("inf")
                total += lam * lam_t * dist_l1(point, pts)
    return total


def gamma_samples(n: int, radius: float, n_random: int = 4, seed: int = 0) -> np.ndarray:
    """Deterministic perturbations in the closed ball of ``radius``: axes, diagonals and seeded points."""
    eye = np.eye(n)
    diag = np.array(np.meshgrid(*([[-1.0, 1.0]] * n), indexing="ij")).reshape(n, -1).T / np.sqrt(n)
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(n_random, n))
    g *= (rng.random(n_random) ** (1.0 / n) / np.linalg.norm(g, axis=1))[:, None]
    unit = np.vstack([np.zeros((1, n)), eye, -eye, 0.5 * eye, -0.5 * eye, diag, g])
    return radius * unit


def default_delta_schedule(grid: Grid) -> list[float]:
    return [4 * grid.dt, 2 * grid.dt, grid.dt]


def directional_derivative(nmap: NashMap, t: float, x, point, w, delta_schedule=None,
                           gamma_radius: float = 0.0, n_random: int = 4, seed: int = 0) -> float:
    """Discrete stand-in for the lower directional derivative of the map distance.

    Minimum over ``delta`` in the schedule and perturbations ``gamma`` with
    ``|gamma| <= gamma_radius`` of ``dist(point, cloud(t + delta, x + delta (w + gamma))) / delta``.
    Schedule entries running past the horizon are dropped; perturbed feet
    outside the grid box are skipped under the strict policy and clamped otherwise.
    """
    g = nmap.grid
    sched = default_delta_schedule(g) if delta_schedule is None else [float(d) for d in delta_schedule]
    if not sched or any(d <= 0 for d in sched):
        raise PreconditionError("delta schedule must contain positive values")
    if any(a <= b for a, b in zip(sched, sched[1:])):
        raise PreconditionError("delta schedule must be strictly decreasing")
    sched = [d for d in sched if t + d <= g.theta0 + 1e-12]
    if not sched:
        raise PreconditionError(f"no schedule step fits between t={t} and the horizon {g.theta0}")
    x = np.asarray(x, float)
    w = np.asarray(w, float)
    gam = gamma_samples(g.ndim, gamma_radius, n_random, seed) if gamma_radius > 0 else np.zeros((1, g.ndim))
    best = np.inf
    for d in sched:
        for gm in gam:
            foot = x + d * (w + gm)
            if g.boundary == "strict" and not g.contains(foot):
                continue
            best = min(best, cloud_distance(nmap, t + d, foot, point) / d)
    return float(best)


@dataclass(frozen=True)
class VerifyReport:
    max_residual: float
    worst: tuple[int, int, tuple[float, float]] | None  # (k, node, point)
    passed: bool
    tol_dd: float
    n1_violations: int
    n2_violations: int
    empty_nodes: int
    checked_points: int
    skipped_nodes: int
    unresolved_slices: tuple[int, ...]
    seconds: float
    residual_table: np.ndarray = field(repr=False, default=None)  # rows k, t, x.., J1, J2, residual

    def summary(self, grid: Grid | None = None, timing: bool = True) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        lines = [f"verdict: {verdict}",
                 f"max_residual: {self.max_residual:.6g} (tol_dd {self.tol_dd:.6g})",
                 f"checked points: {self.checked_points}",
                 f"nodes skipped near the boundary: {self.skipped_nodes}",
                 f"slices skipped near the horizon: {list(self.unresolved_slices)}",
                 f"security-level violations: {self.n1_violations}",
                 f"terminal violations: {self.n2_violations}",
                 f"empty clouds: {self.empty_nodes}"]
        if self.worst is not None:
            k, j, p = self.worst
            where = f"k={k}, node={j}"
            if grid is not None:
                where += f", t={grid.times[k]:.6g}, x={np.round(grid.nodes[j], 9).tolist()}"
            lines.append(f"worst: {where}, point=({p[0]:.6g}, {p[1]:.6g})")
        if timing:
            lines.append(f"seconds: {self.seconds:.2f}")
        return "\n".join(lines)

    def write_csv(self, path) -> None:
        tab = self.residual_table
        n = tab.shape[1] - 5
        header = ",".join(["k", "t"] + [f"x{i + 1}" for i in range(n)] + ["J1", "J2", "residual"])
        buf = io.StringIO()
        fmt = ["%d"] + ["%.17g"] * (tab.shape[1] - 1)
        np.savetxt(buf, tab, delimiter=",", fmt=fmt, header=header, comments="")
        with open(path, "w", newline="\n") as fh:
            fh.write(buf.getvalue())


def dependence_mask(nmap: NashMap) -> np.ndarray:
    """Space-time nodes ``(K + 1, n_nodes)`` whose backward cone stays inside the box.

    Security levels computed on a bounded box are only trusted there: elsewhere
    clamping at the box edge has had time to reach the node.
    """
    g = nmap.grid
    vmax = _max_speed(nmap.spec, g)
    reach = (g.theta0 - g.times)[:, None, None] * vmax[None, None, :]
    lo, hi = np.array(g.lo), np.array(g.hi)
    X = g.nodes[None, :, :]
    return np.all((X - reach >= lo - 1e-12) & (X + reach <= hi + 1e-12), axis=2)


def check_invariants(nmap: NashMap, tol_val: float | None = None, mask_nodes: np.ndarray | None = None):
    """Count security-level (N1) and terminal (N2) violations; returns ``(n1, n2, n1_mask)``.

    ``mask_nodes`` (shape ``(K + 1, n_nodes)``) restricts the security-level
    check; by default every node is checked.
    """
    g = nmap.grid
    tol_val = default_tol_val(g) if tol_val is None else tol_val
    K, N = g.time_steps, g.n_nodes
    node_of_point = np.repeat(np.arange((K + 1) * N), np.diff(nmap.offsets))
    mask = np.zeros(len(nmap.points), dtype=bool)
    if nmap.omega_ref is not None:
        for i, fld in enumerate(nmap.omega_ref):
            om = fld.values.reshape(-1)[node_of_point]
            mask |= nmap.points[:, i] < om - tol_val
        if mask_nodes is not None:
            mask &= mask_nodes.reshape(-1)[node_of_point]
    term = nmap.spec.payoffs(g.nodes)
    sizes = nmap.sizes()[K]
    n2 = int(np.sum(sizes != 1))
    ok = sizes == 1
    if ok.any():
        lo = nmap.offsets[K * N]
        tp = nmap.points[lo:][np.cumsum(sizes) - 1][ok]
        n2 += int(np.sum(np.any(tp != term[ok], axis=1)))
    return int(mask.sum()), n2, mask


def _max_speed(spec: GameSpec, grid: Grid) -> np.ndarray:
    W = hull_velocities_batch(spec, grid.t0, grid.nodes, 0)
    return np.abs(W).max(axis=(0, 1))


def boundary_margin_mask(nmap: NashMap, delta_max: float, gamma_radius: float) -> np.ndarray:
    """Nodes whose every schedule foot stays inside the box."""
    g = nmap.grid
    vmax = _max_speed(nmap.spec, g)
    margin = delta_max * (vmax + gamma_radius)
    return np.all((g.nodes - np.array(g.lo) >= margin - 1e-12) & (np.array(g.hi) - g.nodes >= margin - 1e-12), axis=1)


def _terminal_payoffs(nmap: NashMap, k: int, hull: np.ndarray, gammas: np.ndarray) -> np.ndarray:
    """Terminal payoffs at the feet ``x_j + (theta0 - t_k)(w + gamma)``, shape ``(N, nw, G + 1, 2)``."""
    g = nmap.grid
    gam = np.vstack([gammas, np.zeros((1, g.ndim))])
    feet = g.nodes[:, None, None, :] + (g.theta0 - g.times[k]) * (hull[:, :, None, :] + gam[None, None])
    feet = np.clip(feet, g.lo, g.hi)
    return np.ascontiguousarray(nmap.spec.payoffs(feet), dtype=float)


def verify_map(nmap: NashMap, delta_schedule=None, gamma_radius: float | None = None, hull_density: int = 8,
               tol_dd: float = DEFAULT_TOL_DD, tol_val: float | None = None, seed: int = 0,
               n_random: int = 4, slices=None, exhaustive: bool = False) -> VerifyReport:
    """Check the transport condition at every interior node and cloud point.

    The residual of a point is the minimum over hull velocities of the
    discrete directional derivative.  The map passes when the largest
    residual is at most ``tol_dd`` and the security-level and terminal
    conditions hold.  Nodes whose schedule feet could leave the box are
    skipped and counted, and so are slices so close to the horizon that no
    schedule step moves the fastest foot a full cell (interpolation error
    there is of order one) unless a step lands on the horizon, where the
    terminal payoffs are evaluated exactly.  Security levels are only compared where the box
    edge cannot have influenced them.  Unless ``exhaustive`` is set, the search
    for a point stops once its residual drops below ``tol_dd / 4``, so reported
    residuals below that level are upper bounds.
    """
    g = nmap.grid
    start = time.perf_counter()
    sched = np.array(default_delta_schedule(g) if delta_schedule is None else delta_schedule, float)
    steps = np.unique(np.rint(sched / g.dt).astype(np.int64))
    if np.any(steps < 1) or not np.allclose(steps * g.dt, np.sort(sched), rtol=1e-9):
        raise PreconditionError("grid verification needs a schedule of positive multiples of dt")
    gamma_radius = float(np.min(g.dx)) / g.dt / 4 if gamma_radius is None else float(gamma_radius)
    gammas = np.ascontiguousarray(gamma_samples(g.ndim, gamma_radius, n_random, seed))

    n1, n2, n1_mask = check_invariants(nmap, tol_val, dependence_mask(nmap))
    sizes = nmap.sizes()
    K, N = g.time_steps, g.n_nodes
    interior = boundary_margin_mask(nmap, float(steps.max() * g.dt), gamma_radius)
    empty = int(np.sum(sizes[:K][:, interior] == 0))
    resid = np.full(len(nmap.points), np.nan)
    courant = auto_stride(nmap.spec, g)
    wanted = range(K) if slices is None else slices
    unresolved = tuple(k for k in wanted if not np.any(((steps >= courant) & (k + steps <= K)) | (k + steps == K)))
    wanted = [k for k in wanted if k not in unresolved]
    # node-aligned steps first: they settle most points before interpolation is needed
    steps = np.array(sorted(steps, key=lambda m: (m % courant != 0, -m)), dtype=np.int64)
    stop = -1.0 if exhaustive else tol_dd / 4
    no_term = np.zeros((1, 1, 1, 2))
    for k in wanted:
        hull = np.ascontiguousarray(hull_velocities_batch(nmap.spec, g.times[k], g.nodes, hull_density, seed))
        use_term = bool(np.any(k + steps == K))
        term = _terminal_payoffs(nmap, k, hull, gammas) if use_term else no_term
        _kernels.verify_slice(nmap.offsets, nmap.points, k, N, g.nodes, interior,
                              np.array(g.lo), np.array(g.hi), g.dx, np.array(g.resolution, dtype=np.int64),
                              g.strides, g.times, hull, steps, gammas, gamma_radius, stop, term, use_term, resid)
    checked = ~np.isnan(resid)
    if checked.any():
        i = int(np.nanargmax(resid))
        r = int(np.searchsorted(nmap.offsets, i, side="right") - 1)
        worst = (r // N, r % N, (float(nmap.points[i, 0]), float(nmap.points[i, 1])))
        max_res = float(resid[i])
    else:
        worst, max_res = None, 0.0
    rows = np.repeat(np.arange((K + 1) * N), np.diff(nmap.offsets))[checked]
    table = np.column_stack([rows // N, g.times[rows // N], g.nodes[rows % N], nmap.points[checked], resid[checked]])
    passed = max_res <= tol_dd and n1 == 0 and n2 == 0 and empty == 0
    return VerifyReport(max_res, worst, passed, tol_dd, n1, n2, empty, int(checked.sum()),
                        int(np.sum(~interior)), unresolved, time.perf_counter() - start, table)


def tangent_velocities(nmap: NashMap, t: float, x, point, tol_dd: float = DEFAULT_TOL_DD,
                       hull_density: int = 8, delta_schedule=None, gamma_radius: float | None = None,
                       seed: int = 0) -> list[np.ndarray]:
    """Hull velocities along which the directional derivative at ``(t, x, point)`` is at most ``tol_dd``."""
    g = nmap.grid
    gamma_radius = float(np.min(g.dx)) / g.dt / 4 if gamma_radius is None else gamma_radius
    W = hull_velocities_batch(nmap.spec, t, np.asarray(x, float)[None, :], hull_density, seed)[0]
    out = []
    for w in W:
        if directional_derivative(nmap, t, x, point, w, delta_schedule, gamma_radius, seed=seed) <= tol_dd:
            out.append(w.copy())
    return out


# ---------------------------------------------------------------------------
# text export / import


def write_map(nmap: NashMap, path) -> None:
    """One line per node: ``t x1..xn : J1,J2 ; J1,J2 ; ...``."""
    g = nmap.grid
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# nashmap quantum={nmap.quantum!r} time_steps={g.time_steps}\n")
        for k, t in enumerate(g.times):
            for j, xj in enumerate(g.nodes):
                coords = " ".join(f"{v:.17g}" for v in (t, *xj))
                pts = " ; ".join(f"{a:.17g},{b:.17g}" for a, b in nmap.cloud_points(k, j))
                fh.write(f"{coords} : {pts}\n")


def read_map(path, spec: GameSpec, grid: Grid, omega_ref=None) -> NashMap:
    """Inverse of :func:`write_map`; every node of ``grid`` must appear exactly once."""
    K, N = grid.time_steps, grid.n_nodes
    clouds = [[None] * N for _ in range(K + 1)]
    quantum = default_quantum(grid)
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    if tok.startswith("quantum="):
                        quantum = float(tok.split("=", 1)[1])
                continue
            head, sep, body = line.partition(":")
            if not sep:
                raise ConfigError(f"{path}:{lineno}: missing ':' separator")
            try:
                coords = [float(v) for v in head.split()]
                pts = [[float(v) for v in p.split(",")] for p in body.split(";") if p.strip()]
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}") from None
            if len(coords) != grid.ndim + 1 or any(len(p) != 2 for p in pts):
                raise ConfigError(f"{path}:{lineno}: malformed record")
            k = int(np.rint(grid.time_index(coords[0])))
            j = grid.nearest_node(coords[1:])
            if not (0 <= k <= K) or not np.allclose(grid.nodes[j], coords[1:], atol=1e-9) \
                    or abs(grid.times[k] - coords[0]) > 1e-9:
                raise ConfigError(f"{path}:{lineno}: ({coords}) is not a grid node")
            if clouds[k][j] is not None:
                raise ConfigError(f"{path}:{lineno}: duplicate record for node")
            clouds[k][j] = np.array(pts, float).reshape(-1, 2)
    missing = sum(c is None for row in clouds for c in row)
    if missing:
        raise ConfigError(f"{path}: {missing} grid nodes have no record")
    return map_from_clouds(spec, grid, clouds, quantum, omega_ref)
