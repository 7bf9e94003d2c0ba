"""Closed-form solution of the planar example game.

Dynamics ``x' = u, y' = v`` on ``t in [0, 1]``, ``u, v in [-1, 1]``, payoffs
``sigma1 = -|x - y|`` and ``sigma2 = y``.  Everything here is exact and
vectorized over broadcastable ``t, x, y``; the numerical modules are tested
against it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ConfigError

THETA = 1.0


@dataclass(frozen=True)
class OracleConfig:
    gamma: float = 2.0

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 2.0:
            raise ConfigError(f"gamma must lie in [0, 2], got {self.gamma}")


def omega1_exact(t, x, y):
    t, x, y = np.broadcast_arrays(*(np.asarray(a, float) for a in (t, x, y)))
    return -np.abs(x - y)


def omega2_exact(t, x, y):
    return np.asarray(y, float) + (THETA - np.asarray(t, float))


def c_plus_exact(which: int, t, x, y):
    """Cooperative maximum of ``sigma_which`` over all open-loop controls."""
    t, x, y = (np.asarray(a, float) for a in (t, x, y))
    if which == 1:
        return np.minimum(-np.abs(x - y) + 2.0 * (THETA - t), 0.0)
    if which == 2:
        return y + (THETA - t) + 0.0 * x
    raise ValueError("which must be 1 or 2")


@dataclass(frozen=True)
class ExactSegment:
    """Horizontal payoff segment ``[j1_lo, j1_hi] x {j2}`` (a singleton when lo == hi)."""

    j1_lo: float
    j1_hi: float
    j2: float

    @property
    def is_singleton(self) -> bool:
        return self.j1_hi == self.j1_lo

    def sample(self, quantum: float) -> np.ndarray:
        """Points at spacing ``quantum`` from the lower end, exact endpoints kept."""
        length = self.j1_hi - self.j1_lo
        k = int(np.floor(length / quantum + 1e-12))
        j1 = self.j1_lo + quantum * np.arange(k + 1)
        if self.j1_hi - j1[-1] > 1e-12:
            if self.j1_hi - j1[-1] < quantum / 2 and j1.size > 1:
                j1[-1] = self.j1_hi
            else:
                j1 = np.append(j1, self.j1_hi)
        return np.column_stack([j1, np.full(j1.size, self.j2)])

    def distance(self, points) -> np.ndarray:
        """l1 distance from each point ``(m, 2)`` to the segment."""
        p = np.atleast_2d(np.asarray(points, float))
        d1 = np.maximum(0.0, np.maximum(self.j1_lo - p[:, 0], p[:, 0] - self.j1_hi))
        return d1 + np.abs(p[:, 1] - self.j2)

    def hausdorff(self, points) -> float:
        """Exact l1 Hausdorff distance between the finite set ``points`` and the segment."""
        p = np.atleast_2d(np.asarray(points, float))
        if p.size == 0:
            return float("inf")
        one_way = float(self.distance(p).max())
        # sup over the segment of min_i (|s - a_i| + c_i): piecewise linear in s,
        # maximal at an endpoint or where two cones of neighbouring points meet.
        a, c = p[:, 0], np.abs(p[:, 1] - self.j2)
        cand = [self.j1_lo, self.j1_hi]
        cand.extend(((a[:, None] + a[None, :] + c[None, :] - c[:, None]) / 2).ravel())
        s = np.clip(np.array(cand), self.j1_lo, self.j1_hi)
        g = np.min(np.abs(s[:, None] - a[None, :]) + c[None, :], axis=1)
        return max(one_way, float(g.max()))


def nash_set_exact(t, x, y) -> ExactSegment:
    """The set of Nash equilibrium payoffs at one position."""
    t, x, y = float(t), float(x), float(y)
    j2 = y + (THETA - t)
    lo = -abs(x - y)
    if y >= x:
        return ExactSegment(lo, lo, j2)
    return ExactSegment(lo, min(lo + 2.0 * (THETA - t), 0.0), j2)


def phi_exact(t, x, y):
    """Maximal equilibrium payoff pair; a minimax solution of the reduced HJ equation."""
    t, x, y = np.broadcast_arrays(*(np.asarray(a, float) for a in (t, x, y)))
    mid = -x + y + 2.0 * (THETA - t)
    phi1 = np.where(x <= y, x - y, np.where(mid < 0.0, mid, 0.0))
    return phi1, y + (THETA - t)


def c_gamma_exact(cfg: OracleConfig, t, x, y):
    """The one-parameter family of payoff pairs satisfying the sufficient conditions."""
    t, x, y = np.broadcast_arrays(*(np.asarray(a, float) for a in (t, x, y)))
    c1 = np.where(y >= x, -np.abs(x - y), np.minimum(-np.abs(x - y) + cfg.gamma * (THETA - t), 0.0))
    return c1, y + (THETA - t)


@dataclass(frozen=True)
class SubdiffSet:
    """Convex hull of ``vertices`` in ``(a, s_x, s_y)`` space (one or two vertices)."""

    vertices: np.ndarray

    def distance(self, g) -> float:
        g = np.asarray(g, float)
        v = self.vertices
        if len(v) == 1:
            return float(np.linalg.norm(g - v[0]))
        d = v[1] - v[0]
        lam = np.clip(np.dot(g - v[0], d) / np.dot(d, d), 0.0, 1.0)
        return float(np.linalg.norm(g - (v[0] + lam * d)))


def subdifferential_exact(cfg: OracleConfig, which: int, t, x, y, atol: float = 1e-12) -> SubdiffSet:
    """Generalized gradient of ``c_which^gamma`` in ``(t, x, y)`` by region.

    On the kink planes this is the convex hull of the one-sided gradients.
    For ``y > x`` the gradient of ``x - y`` is ``(0, 1, -1)``.
    """
    if which == 2:
        return SubdiffSet(np.array([[-1.0, 0.0, 1.0]]))
    g = cfg.gamma
    t, x, y = float(t), float(x), float(y)
    edge = y + g * (THETA - t)
    up = np.array([0.0, 1.0, -1.0])
    flat = np.zeros(3)
    steep = np.array([-g, -1.0, 1.0])
    if abs(x - y) <= atol and abs(x - edge) <= atol:
        return SubdiffSet(np.array([up, steep]))
    if abs(x - y) <= atol:
        return SubdiffSet(np.array([flat, up]))
    if y > x:
        return SubdiffSet(up[None])
    if abs(x - edge) <= atol:
        return SubdiffSet(np.array([flat, steep]))
    if x < edge:
        return SubdiffSet(flat[None])
    return SubdiffSet(steep[None])


def tie_direction_exact(cfg: OracleConfig, t, x, y) -> np.ndarray:
    """Velocity ``(1 - d, 1)`` along which the modulus derivative of the pair vanishes."""
    t, x, y = float(t), float(x), float(y)
    if y >= x:
        d = 0.0
    elif THETA - t <= 0.0:
        d = cfg.gamma
    else:
        d = min(cfg.gamma, (x - y) / (THETA - t))
    return np.array([1.0 - d, 1.0])


def exact_nash_map(grid, quantum: float | None = None, n_controls: int = 3):
    """The exact equilibrium-payoff map sampled at spacing ``quantum`` on every node of ``grid``."""
    from .game_model import example_game
    from .nash_set import default_quantum, map_from_clouds

    q = default_quantum(grid) if quantum is None else quantum
    clouds = [[nash_set_exact(t, *x).sample(q) for x in grid.nodes] for t in grid.times]
    return map_from_clouds(example_game(n_controls), grid, clouds, q)


@njit(cache=True)
def _segment_hausdorff(offs, pts, lo, hi, j2, rows, out):
    for r in range(rows.size):
        row = rows[r]
        s, e = offs[row], offs[row + 1]
        m = e - s
        if m == 0:
            out[r] = np.inf
            continue
        a, b, c = lo[r], hi[r], j2[r]
        p = pts[s:e, 0].copy()
        err = np.abs(pts[s:e, 1] - c)
        order = np.argsort(p)
        p, err = p[order], err[order]
        worst = 0.0
        for i in range(m):
            worst = max(worst, err[i] + max(0.0, a - p[i], p[i] - b))
        # lower envelope of the cones |s - p_i| + err_i over [a, b]
        pre = np.empty(m)
        suf = np.empty(m)
        acc = np.inf
        for i in range(m):
            acc = min(acc, err[i] - p[i])
            pre[i] = acc
        acc = np.inf
        for i in range(m - 1, -1, -1):
            acc = min(acc, err[i] + p[i])
            suf[i] = acc
        if a < p[0]:
            worst = max(worst, suf[0] - a)
        if b > p[m - 1]:
            worst = max(worst, b + pre[m - 1])
        for i in range(m - 1):
            l, h = max(p[i], a), min(p[i + 1], b)
            if l > h:
                continue
            x = min(max(0.5 * (suf[i + 1] - pre[i]), l), h)
            worst = max(worst, min(x + pre[i], suf[i + 1] - x))
        out[r] = worst


def map_hausdorff(nmap, mask=None) -> np.ndarray:
    """Exact l1 Hausdorff distance of every cloud of ``nmap`` to the closed-form set.

    Returns a ``(K + 1, n_nodes)`` array, ``nan`` outside ``mask`` and ``inf`` at empty clouds.
    """
    g = nmap.grid
    T = np.repeat(g.times, g.n_nodes)
    X = np.tile(g.nodes[:, 0], g.time_steps + 1)
    Y = np.tile(g.nodes[:, 1], g.time_steps + 1)
    rows = np.arange(T.size) if mask is None else np.flatnonzero(np.asarray(mask).reshape(-1))
    t, x, y = T[rows], X[rows], Y[rows]
    lo = -np.abs(x - y)
    hi = np.where(y >= x, lo, np.minimum(lo + 2.0 * (THETA - t), 0.0))
    out = np.full(T.size, np.nan)
    vals = np.empty(rows.size)
    _segment_hausdorff(np.asarray(nmap.offsets), np.asarray(nmap.points), lo, hi, y + (THETA - t),
                       rows.astype(np.int64), vals)
    out[rows] = vals
    return out.reshape(g.time_steps + 1, g.n_nodes)
