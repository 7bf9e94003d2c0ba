"""Sufficient conditions for candidate payoff pairs ``(c1, c2)``.

Two checks are offered:

* :func:`check_corollary` samples points and generalized gradients and tests
  the upper Hamilton-Jacobi inequality ``a + H_i(t, x, s) <= tol_visc`` for
  both functions, the vanishing of the modulus derivative along some
  admissible velocity, and terminal consistency.
* :func:`check_proposition2` looks for a control pair per point that is a best
  reply for both players and makes both functions stationary along the
  motion; it applies where the pair is smooth.

Both are sampled tests: a pass is evidence, not a proof.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, PreconditionError
from .game_model import GameSpec, eval_dynamics, hamiltonian, hull_velocities_batch
from .grid import Grid
from .oracle import OracleConfig, c_gamma_exact, omega1_exact, omega2_exact, phi_exact
from .zero_sum import ValueField, query_value

BANNER = "sampled check: PASS is evidence at the sampled points, not a proof"

Fn = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class CandidatePair:
    """Two scalar functions of ``(t, x)``; each is a callable ``fn(t, X)`` or a :class:`ValueField`.

    ``grad1``/``grad2`` optionally return the full gradient ``(dc/dt, dc/dx...)``
    with shape ``(..., 1 + n)``; otherwise central differences are used.
    """

    c1: Fn | ValueField
    c2: Fn | ValueField
    smoothness_hint: str = "piecewise"
    grad1: Callable | None = None
    grad2: Callable | None = None
    t0: float = 0.0
    theta0: float = 1.0
    name: str = "pair"

    def __post_init__(self):
        if self.smoothness_hint not in ("smooth", "piecewise"):
            raise ConfigError(f"smoothness_hint must be 'smooth' or 'piecewise', got {self.smoothness_hint!r}")
        for c in (self.c1, self.c2):
            if isinstance(c, ValueField):
                object.__setattr__(self, "t0", c.grid.t0)
                object.__setattr__(self, "theta0", c.grid.theta0)

    def value(self, which: int, t, X) -> np.ndarray:
        c = self.c1 if which == 1 else self.c2
        X = np.asarray(X, float)
        if isinstance(c, ValueField):
            return np.asarray(query_value(c, t, X), float)
        t = np.broadcast_to(np.asarray(t, float), X.shape[:-1])
        return np.asarray(c(t, X), float)

    def gradient(self, which: int, t, X, step: float) -> np.ndarray:
        """Gradient ``(a, s)`` at points ``(t, X)``; analytic when supplied."""
        g = self.grad1 if which == 1 else self.grad2
        X = np.atleast_2d(np.asarray(X, float))
        t = np.broadcast_to(np.asarray(t, float), X.shape[:-1])
        if g is not None:
            return np.asarray(g(t, X), float)
        return _central_gradient(lambda tt, XX: self.value(which, tt, XX), t, X, step)


def _central_gradient(fn, t, X, h):
    n = X.shape[-1]
    out = np.empty(X.shape[:-1] + (n + 1,))
    out[..., 0] = (fn(t + h, X) - fn(t - h, X)) / (2 * h)
    for d in range(n):
        e = np.zeros(n)
        e[d] = h
        out[..., d + 1] = (fn(t, X + e) - fn(t, X - e)) / (2 * h)
    return out


def _xy(fn):
    """Adapt an oracle ``fn(t, x, y)`` to the ``fn(t, X)`` convention."""
    return lambda t, X: fn(t, X[..., 0], X[..., 1])


def catalog_pair(name: str, gamma: float = 2.0) -> CandidatePair:
    """Closed-form pairs of the planar example: ``phi``, ``c_gamma``, ``omega``, ``constant``."""
    if name == "phi":
        return CandidatePair(_xy(lambda t, x, y: phi_exact(t, x, y)[0]), _xy(lambda t, x, y: phi_exact(t, x, y)[1]),
                             "piecewise", name="phi")
    if name == "c_gamma":
        cfg = OracleConfig(gamma)
        return CandidatePair(_xy(lambda t, x, y: c_gamma_exact(cfg, t, x, y)[0]),
                             _xy(lambda t, x, y: c_gamma_exact(cfg, t, x, y)[1]),
                             "piecewise", name=f"c_gamma({gamma:g})")
    if name == "omega":
        return CandidatePair(_xy(omega1_exact), _xy(omega2_exact), "piecewise", name="omega")
    if name == "constant":
        return CandidatePair(lambda t, X: np.zeros(X.shape[:-1]), lambda t, X: np.zeros(X.shape[:-1]),
                             "smooth", name="constant")
    raise ConfigError(f"unknown candidate pair {name!r}; known: phi, c_gamma, omega, constant")


def pair_catalog() -> list[str]:
    return ["phi", "c_gamma", "omega", "constant"]


def pair_from_fields(c1: ValueField, c2: ValueField) -> CandidatePair:
    if c1.grid != c2.grid:
        raise PreconditionError("candidate fields live on different grids")
    return CandidatePair(c1, c2, "piecewise", name="fields")


def default_schedule(pair: CandidatePair) -> list[float]:
    """``{4h, 2h, h}``: grid steps for field-backed pairs, ``h = 1e-3`` of the horizon otherwise."""
    for c in (pair.c1, pair.c2):
        if isinstance(c, ValueField):
            h = c.grid.dt
            break
    else:
        h = 1e-3 * (pair.theta0 - pair.t0)
    return [4 * h, 2 * h, h]


def _ball(n: int, radius: float, n_random: int, seed: int) -> np.ndarray:
    eye = np.eye(n)
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(n_random, n))
    g *= (rng.random(n_random) ** (1.0 / n) / np.linalg.norm(g, axis=1))[:, None]
    return radius * np.vstack([np.zeros((1, n)), eye, -eye, g])


def modulus_derivative(pair: CandidatePair, t: float, x, w, delta_schedule=None, gamma_radius: float = 0.0,
                       n_random: int = 4, seed: int = 0) -> float:
    """Smallest rate ``(|dc1| + |dc2|) / delta`` over the schedule and perturbed velocities ``w + gamma``."""
    sched = default_schedule(pair) if delta_schedule is None else [float(d) for d in delta_schedule]
    if not sched or min(sched) <= 0:
        raise PreconditionError("delta schedule must contain positive values")
    if t + max(sched) > pair.theta0 + 1e-12:
        raise PreconditionError(f"t + max delta = {t + max(sched)} exceeds the horizon {pair.theta0}")
    x = np.asarray(x, float)
    w = np.asarray(w, float)
    W = w + _ball(len(x), gamma_radius, n_random, seed) if gamma_radius > 0 else w[None, :]
    base = [float(pair.value(i, t, x[None, :])[0]) for i in (1, 2)]
    best = np.inf
    for d in sched:
        feet = x + d * W
        inc = sum(np.abs(pair.value(i, t + d, feet) - base[i - 1]) for i in (1, 2))
        best = min(best, float(inc.min()) / d)
    return best


def subgradient_samples(pair: CandidatePair, which: int, t: float, x, step: float = 1e-4,
                        radii=(1e-3, 5e-4, 2.5e-4), n_random: int = 6, seed: int = 0,
                        mode: str = "clarke", accept_tol: float = 1e-3) -> np.ndarray:
    """Sampled generalized gradients ``(a, s)`` of ``c_which`` at ``(t, x)``, shape ``(m, 1 + n)``.

    Central-difference gradients are taken at stencil points on shrinking
    balls around ``(t, x)``; ``step`` must be well below the radii.

    ``mode="clarke"`` returns the distinct gradients together with pairwise
    convex combinations, an inner sample of the generalized (Clarke)
    gradient.  It contains the lower subdifferential, so an upper inequality
    checked on it is conservative.  ``mode="proximal"`` keeps only candidates
    ``g`` with ``c(p') >= c(p) + <g, p' - p> - accept_tol * |p' - p|`` on the
    sample ball; at concave kinks this is empty.
    """
    x = np.asarray(x, float)
    n = len(x)
    p = np.concatenate([[t], x])
    pts = [p]
    for k, r in enumerate(radii):
        pts.extend(p + _ball(n + 1, r, n_random, seed + k)[1:])
    pts = np.array(pts)
    # stay inside the time horizon for the central difference in t
    pts[:, 0] = np.clip(pts[:, 0], pair.t0 + step, pair.theta0 - step)
    G = pair.gradient(which, pts[:, 0], pts[:, 1:], step)
    G = np.unique(np.round(G, 9), axis=0)
    if mode == "proximal":
        ball = pts[1:]
        c0 = float(pair.value(which, p[0], p[None, 1:])[0])
        cb = pair.value(which, ball[:, 0], ball[:, 1:])
        diff = ball - np.array([pts[0, 0], *x])
        dist = np.linalg.norm(diff, axis=1)
        ok = [np.all(cb >= c0 + diff @ g - accept_tol * dist - 1e-12) for g in G]
        return G[np.array(ok, dtype=bool)] if len(G) else G
    if mode != "clarke":
        raise ConfigError(f"unknown subgradient mode {mode!r}")
    if len(G) > 1:
        lam = np.array([0.25, 0.5, 0.75])
        i, j = np.triu_indices(len(G), 1)
        mix = (lam[:, None, None] * G[i][None] + (1 - lam[:, None, None]) * G[j][None]).reshape(-1, n + 1)
        G = np.vstack([G, mix])
    return G


@dataclass(frozen=True)
class CorollaryReport:
    viscosity_ok: bool
    dabs_ok: bool
    terminal_ok: bool
    max_viscosity: float
    max_dabs: float
    max_terminal: float
    worst_points: dict
    n_points: int
    table: np.ndarray = field(repr=False, default=None)  # rows: point index, t, x.., test, residual
    banner: str = BANNER

    @property
    def passed(self) -> bool:
        return self.viscosity_ok and self.dabs_ok and self.terminal_ok

    def summary(self) -> str:
        lines = [self.banner, f"verdict: {'PASS' if self.passed else 'FAIL'}",
                 f"points: {self.n_points}",
                 f"viscosity: {'ok' if self.viscosity_ok else 'FAIL'} (max a + H = {self.max_viscosity:.4g})",
                 f"modulus derivative: {'ok' if self.dabs_ok else 'FAIL'} (max = {self.max_dabs:.4g})",
                 f"terminal: {'ok' if self.terminal_ok else 'FAIL'} (max mismatch = {self.max_terminal:.4g})"]
        for k, v in self.worst_points.items():
            lines.append(f"worst {k}: {np.round(v, 6).tolist()}")
        return "\n".join(lines)

    def write_csv(self, path) -> None:
        _write_point_csv(path, self.table, ("viscosity1", "viscosity2", "dabs", "terminal"))


def _write_point_csv(path, table, tests):
    n = table.shape[1] - 4
    header = ",".join(["index", "t"] + [f"x{i + 1}" for i in range(n)] + ["test", "residual"])
    with open(path, "w", newline="\n") as fh:
        fh.write(header + "\n")
        for row in table:
            coords = ",".join(f"{v:.17g}" for v in row[1:-2])
            fh.write(f"{int(row[0])},{coords},{tests[int(row[-2])]},{row[-1]:.17g}\n")


def sample_points(grid: Grid, n_points: int, seed: int = 0, t_margin: float = 0.0, box=None) -> np.ndarray:
    """Seeded uniform samples ``(t, x)`` with ``t`` in ``[t0, theta0 - t_margin]``."""
    rng = np.random.default_rng(seed)
    lo, hi = (np.array(grid.lo), np.array(grid.hi)) if box is None else (np.asarray(box[0]), np.asarray(box[1]))
    t = rng.uniform(grid.t0, grid.theta0 - t_margin, n_points)
    X = rng.uniform(lo, hi, (n_points, grid.ndim))
    return np.column_stack([t, X])


def check_corollary(pair: CandidatePair, spec: GameSpec, grid: Grid, subdiff_samples: int = 6,
                    points=None, n_points: int = 1000, tol_visc: float | None = None, tol_dd: float = 0.5,
                    tol_val: float = 1e-6, fd_step: float = 1e-5, hull_density: int = 32,
                    gamma_radius: float = 0.05, seed: int = 0, box=None) -> CorollaryReport:
    """Upper HJ inequalities, vanishing modulus derivative and terminal consistency at sampled points.

    ``points`` (shape ``(m, 1 + n)``) are checked in addition to
    ``n_points`` seeded random samples from the grid box (or ``box``).
    ``tol_visc`` defaults to ``10 * fd_step`` scaled up to ``1e-6``.
    """
    tol_visc = max(10 * fd_step, 1e-6) if tol_visc is None else tol_visc
    sched = default_schedule(pair)
    P = sample_points(grid, n_points, seed, t_margin=max(sched), box=box)
    if points is not None:
        P = np.vstack([np.asarray(points, float).reshape(-1, grid.ndim + 1), P])
    P = P[P[:, 0] + max(sched) <= pair.theta0 + 1e-12]
    radii = tuple(fd_step * m for m in (40, 20, 10))
    rows = []
    for idx, (t, *x) in enumerate(P):
        x = np.array(x)
        for which in (1, 2):
            G = subgradient_samples(pair, which, t, x, fd_step, radii, subdiff_samples, seed + idx)
            a_plus_h = G[:, 0] + np.array([hamiltonian(spec, which, t, x, g[1:]) for g in G])
            rows.append((idx, t, *x, which - 1, float(a_plus_h.max()) if len(G) else -np.inf))
        W = hull_velocities_batch(spec, t, x[None, :], hull_density, seed)[0]
        dm = min(modulus_derivative(pair, t, x, w, sched, gamma_radius, seed=seed) for w in W)
        rows.append((idx, t, *x, 2, dm))
    nodes = grid.nodes
    term = np.abs(pair.value(1, pair.theta0, nodes) - spec.sigma(1, nodes)) \
        + np.abs(pair.value(2, pair.theta0, nodes) - spec.sigma(2, nodes))
    jt = int(np.argmax(term))
    rows.append((-1, pair.theta0, *nodes[jt], 3, float(term[jt])))
    table = np.array(rows, float)
    res, test = table[:, -1], table[:, -2]
    visc = res[test < 2]
    dabs = res[test == 2]
    worst = {}
    for name, sel in (("viscosity", test < 2), ("dabs", test == 2), ("terminal", test == 3)):
        if sel.any():
            r = table[sel]
            worst[name] = r[np.argmax(r[:, -1]), 1:-2]
    mv = float(visc.max()) if len(visc) else -np.inf
    md = float(dabs.max()) if len(dabs) else 0.0
    return CorollaryReport(mv <= tol_visc, md <= tol_dd, float(term[jt]) <= tol_val, mv, md, float(term[jt]),
                           worst, len(P), table)


@dataclass(frozen=True)
class Prop2Report:
    eq5_ok: bool
    eq6_ok: bool
    eq7_ok: bool
    selections: dict  # point index -> (u index, v index)
    failures: tuple[int, ...]
    excluded: tuple[int, ...]  # points where the pair is not differentiable
    points: np.ndarray = field(repr=False, default=None)
    table: np.ndarray = field(repr=False, default=None)
    banner: str = BANNER

    @property
    def passed(self) -> bool:
        return self.eq5_ok and self.eq6_ok and self.eq7_ok and not self.failures

    def summary(self) -> str:
        return "\n".join([self.banner, f"verdict: {'PASS' if self.passed else 'FAIL'}",
                          f"points checked: {len(self.selections) + len(self.failures)}",
                          f"excluded as nonsmooth: {len(self.excluded)}",
                          f"best reply I: {'ok' if self.eq5_ok else 'FAIL'}",
                          f"best reply II: {'ok' if self.eq6_ok else 'FAIL'}",
                          f"stationarity: {'ok' if self.eq7_ok else 'FAIL'}",
                          f"points without an admissible control pair: {len(self.failures)}"])

    def write_csv(self, path) -> None:
        _write_point_csv(path, self.table, ("best_reply_1", "best_reply_2", "stationary_1", "stationary_2"))


def _is_smooth(pair: CandidatePair, which: int, t: float, x: np.ndarray, h: float, tol: float) -> bool:
    """Forward and backward differences agree in every coordinate."""
    p = np.concatenate([[t], x])
    f0 = float(pair.value(which, t, x[None, :])[0])
    for d in range(len(p)):
        e = np.zeros(len(p))
        e[d] = h
        fp = float(pair.value(which, (p + e)[0], (p + e)[None, 1:])[0])
        fm = float(pair.value(which, (p - e)[0], (p - e)[None, 1:])[0])
        if abs((fp - f0) - (f0 - fm)) > tol * h:
            return False
    return True


def check_proposition2(pair: CandidatePair, spec: GameSpec, sample_points, tol_visc: float | None = None,
                       fd_step: float = 1e-5, smooth_tol: float = 1e-3) -> Prop2Report:
    """Search the control samples for a pair meeting the best-reply and stationarity conditions.

    At each point ``(t, x)`` with gradients ``(a_i, s_i)`` of ``c_i`` a pair
    ``(u_n, v_n)`` qualifies when ``u_n`` maximizes ``<s_1, f(u, v_n)>``,
    ``v_n`` maximizes ``<s_2, f(u_n, v)>`` and ``a_i + <s_i, f(u_n, v_n)> = 0``
    for both ``i`` (all within ``tol_visc``).  The first qualifying pair in
    sample order is recorded.  Points where one-sided differences disagree are
    excluded; with ``smoothness_hint='smooth'`` no exclusion test is made.
    """
    tol_visc = max(10 * fd_step, 1e-6) if tol_visc is None else tol_visc
    P = np.atleast_2d(np.asarray(sample_points, float))
    U, V = spec.P_samples, spec.Q_samples
    sel, fails, excl, rows = {}, [], [], []
    ok5 = ok6 = ok7 = True
    for idx, (t, *x) in enumerate(P):
        x = np.array(x)
        if pair.smoothness_hint != "smooth" and not all(
                _is_smooth(pair, i, t, x, fd_step * 10, smooth_tol) for i in (1, 2)):
            excl.append(idx)
            continue
        g1 = pair.gradient(1, t, x[None, :], fd_step)[0]
        g2 = pair.gradient(2, t, x[None, :], fd_step)[0]
        F = np.array([[eval_dynamics(spec, t, x, u, v) for v in V] for u in U])  # (nP, nQ, n)
        S1 = F @ g1[1:]
        S2 = F @ g2[1:]
        r5 = S1.max(axis=0)[None, :] - S1  # best reply of I to each v
        r6 = S2.max(axis=1)[:, None] - S2
        r7a = np.abs(g1[0] + S1)
        r7b = np.abs(g2[0] + S2)
        good = (r5 <= tol_visc) & (r6 <= tol_visc) & (r7a <= tol_visc) & (r7b <= tol_visc)
        ok5 &= bool((r5 <= tol_visc).any())
        ok6 &= bool((r6 <= tol_visc).any())
        ok7 &= bool(((r7a <= tol_visc) & (r7b <= tol_visc)).any())
        if good.any():
            i, j = map(int, np.argwhere(good)[0])
            sel[idx] = (i, j)
        else:
            fails.append(idx)
            score = np.maximum.reduce([r5, r6, r7a, r7b])
            i, j = map(int, np.unravel_index(np.argmin(score), score.shape))
        for test, r in enumerate((r5, r6, r7a, r7b)):
            rows.append((idx, t, *x, test, float(r[i, j])))
    table = np.array(rows, float) if rows else np.zeros((0, P.shape[1] + 3))
    return Prop2Report(ok5, ok6, ok7, sel, tuple(fails), tuple(excl), P, table)


def write_report_text(report, path) -> None:
    buf = io.StringIO()
    buf.write(report.summary() + "\n")
    with open(path, "w", newline="\n") as fh:
        fh.write(buf.getvalue())
