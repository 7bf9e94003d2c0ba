"""Step-by-step motions under feedback strategies and punishment equilibria.

Each player samples the state at the instants of their own partition and
holds the chosen control until their next instant.  The motion is the
explicit Euler scheme on the merged partition.  A punishment profile follows
an agreed trajectory and switches to the zero-sum punishing feedback once the
state drifts more than ``eta`` away from it.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConstructionError, PreconditionError, StrategyError
from .game_model import GameSpec, pair_velocities
from .nash_set import NashMap, cloud_distance, dist_l1
from .zero_sum import ValueField, _resolve_stride, query_value

PLAYER_I, PLAYER_II = 1, 2


@dataclass(frozen=True)
class Partition:
    instants: np.ndarray

    def __post_init__(self):
        inst = np.asarray(self.instants, float)
        if inst.ndim != 1 or len(inst) < 2 or np.any(np.diff(inst) <= 0):
            raise PreconditionError("partition instants must be strictly increasing with at least two entries")
        inst.setflags(write=False)
        object.__setattr__(self, "instants", inst)

    @property
    def fineness(self) -> float:
        return float(np.diff(self.instants).max())

    @classmethod
    def uniform(cls, t_star: float, theta0: float, eps: float, jitter: float = 0.0, seed: int = 0) -> "Partition":
        """Partition with all gaps below ``eps``; interior instants moved by up to ``jitter`` half-gaps."""
        if eps <= 0:
            raise PreconditionError("eps must be positive")
        if not 0.0 <= jitter < 1.0:
            raise PreconditionError("jitter must lie in [0, 1)")
        length = theta0 - t_star
        n = int(np.floor(length * (1.0 + jitter) / eps)) + 1
        inst = t_star + length * np.arange(n + 1) / n
        if jitter > 0 and n > 1:
            rng = np.random.default_rng(seed)
            inst[1:-1] += rng.uniform(-0.5, 0.5, n - 1) * jitter * length / n
        inst[0], inst[-1] = t_star, theta0
        return cls(inst)


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray  # (m + 1,)
    states: np.ndarray  # (m + 1, n)
    u: np.ndarray  # (m, du), control on [times[i], times[i + 1])
    v: np.ndarray  # (m, dv)
    flags: np.ndarray  # (m,) bit 1: player I punishing, bit 2: player II punishing
    payoffs: tuple[float, float]

    def __post_init__(self):
        for a in (self.times, self.states, self.u, self.v, self.flags):
            a.setflags(write=False)

    @property
    def endpoint(self) -> np.ndarray:
        return self.states[-1]

    def state_at(self, t) -> np.ndarray:
        """The piecewise-linear motion at time ``t`` (clamped to its interval)."""
        t = float(np.clip(t, self.times[0], self.times[-1]))
        return np.array([np.interp(t, self.times, self.states[:, d]) for d in range(self.states.shape[1])])

    def interval_at(self, t) -> int:
        i = int(np.searchsorted(self.times, t, side="right") - 1)
        return int(np.clip(i, 0, len(self.u) - 1))

    def write_csv(self, path) -> None:
        """``t,x1..xn,u..,v..,punishing_flag``; the final row repeats the last interval's controls."""
        n, du, dv = self.states.shape[1], self.u.shape[1], self.v.shape[1]
        last = len(self.u) - 1
        idx = np.minimum(np.arange(len(self.times)), last)
        tab = np.column_stack([self.times, self.states, self.u[idx], self.v[idx], self.flags[idx]])
        header = ",".join(["t"] + [f"x{i + 1}" for i in range(n)] + [f"u{i + 1}" for i in range(du)]
                          + [f"v{i + 1}" for i in range(dv)] + ["punishing_flag"])
        buf = io.StringIO()
        np.savetxt(buf, tab, delimiter=",", fmt=["%.17g"] * (tab.shape[1] - 1) + ["%d"], header=header, comments="")
        with open(path, "w", newline="\n") as fh:
            fh.write(buf.getvalue())


# ---------------------------------------------------------------------------
# strategies


class FeedbackStrategy:
    """Positional control law ``(t, x, eps) -> control``; outputs must be control samples."""

    kind = "custom"

    def __call__(self, t: float, x: np.ndarray, eps: float) -> np.ndarray:
        raise NotImplementedError

    def is_punishing(self, t: float, x: np.ndarray, eps: float) -> bool:
        return False


class ConstantStrategy(FeedbackStrategy):
    kind = "constant"

    def __init__(self, control):
        self.control = np.atleast_1d(np.asarray(control, float))

    def __call__(self, t, x, eps):
        return self.control


class TableStrategy(FeedbackStrategy):
    """Wraps a callable ``fn(t, x, eps)`` returning a control."""

    kind = "table"

    def __init__(self, fn: Callable, name: str = "table"):
        self.fn = fn
        self.name = name

    def __call__(self, t, x, eps):
        return np.atleast_1d(np.asarray(self.fn(t, x, eps), float))


class PunishmentStrategy(FeedbackStrategy):
    """Play the agreed control near the agreed trajectory, punish the opponent otherwise.

    Punishment is memoryless: it is active at every position farther than
    ``eta(eps)`` from the agreed state at the same time.
    """

    kind = "punishment"

    def __init__(self, player: int, agreed: Trajectory, eta: Callable[[float], float], punish: Callable):
        self.player = player
        self.agreed = agreed
        self.eta = eta
        self.punish = punish

    def is_punishing(self, t, x, eps):
        return bool(np.linalg.norm(np.asarray(x) - self.agreed.state_at(t)) > self.eta(eps))

    def __call__(self, t, x, eps):
        if self.is_punishing(t, x, eps):
            return self.punish(t, x, eps)
        i = self.agreed.interval_at(t)
        return self.agreed.u[i] if self.player == PLAYER_I else self.agreed.v[i]


def _check_control(c, samples: np.ndarray, who: str, t: float) -> np.ndarray:
    c = np.atleast_1d(np.asarray(c, float))
    if c.shape != samples.shape[1:] or not np.any(np.all(np.abs(samples - c) <= 1e-12, axis=1)):
        raise StrategyError(f"player {who} returned control {c.tolist()} at t={t:.6g}, not a control sample")
    return c


def simulate(spec: GameSpec, t_star: float, x_star, U: FeedbackStrategy, eps1: float, V: FeedbackStrategy,
             eps2: float, seed: int = 0, jitter: float = 0.0) -> Trajectory:
    """Euler motion on the union of both players' partitions.

    Player I re-evaluates ``U`` only at the instants of their partition (gaps
    below ``eps1``) and player II likewise; with ``eps1 == eps2`` and no
    jitter the partitions coincide and the motion is consistent.
    """
    if eps1 <= 0 or eps2 <= 0:
        raise PreconditionError("eps1 and eps2 must be positive")
    theta0 = spec.theta0
    d1 = Partition.uniform(t_star, theta0, eps1, jitter, seed)
    d2 = Partition.uniform(t_star, theta0, eps2, jitter, seed + 1)
    merged = np.union1d(d1.instants, d2.instants)
    on1 = np.isin(merged, d1.instants)
    on2 = np.isin(merged, d2.instants)
    m = len(merged) - 1
    X = np.empty((m + 1, spec.state_dim))
    X[0] = np.asarray(x_star, float)
    us = np.empty((m, spec.du))
    vs = np.empty((m, spec.dv))
    flags = np.zeros(m, dtype=np.int64)
    u = v = None
    p1 = p2 = False
    for i in range(m):
        t, x = merged[i], X[i]
        if on1[i]:
            u = _check_control(U(t, x, eps1), spec.P_samples, "I", t)
            p1 = U.is_punishing(t, x, eps1)
        if on2[i]:
            v = _check_control(V(t, x, eps2), spec.Q_samples, "II", t)
            p2 = V.is_punishing(t, x, eps2)
        us[i], vs[i] = u, v
        flags[i] = (1 if p1 else 0) | (2 if p2 else 0)
        X[i + 1] = x + (merged[i + 1] - t) * spec.f(t, x, u, v)
    pay = spec.payoffs(X[-1])
    return Trajectory(merged, X, us, vs, flags, (float(pay[0]), float(pay[1])))


# ---------------------------------------------------------------------------
# punishment profile


def _one_step_values(spec: GameSpec, field: ValueField, t: float, x: np.ndarray, h: float) -> np.ndarray:
    """``field(t + h, x + h f(t, x, u, v))`` for all sample pairs, shape ``(nP, nQ)``."""
    F = pair_velocities(spec, t, x)
    t2 = min(t + h, spec.theta0)
    return np.asarray(query_value(field, t2, x + (t2 - t) * F))


def punishing_feedback(spec: GameSpec, player: int, opponent_field: ValueField) -> Callable:
    """Control of ``player`` minimizing the opponent's worst-case security level one step ahead."""
    def punish(t, x, eps):
        M = _one_step_values(spec, opponent_field, t, np.asarray(x, float), eps)
        if player == PLAYER_I:
            return spec.P_samples[int(np.argmin(M.max(axis=1)))]
        return spec.Q_samples[int(np.argmin(M.max(axis=0)))]
    return punish


@dataclass(frozen=True, eq=False)
class PunishmentProfile:
    spec: GameSpec
    U: PunishmentStrategy
    V: PunishmentStrategy
    agreed: Trajectory
    target: tuple[float, float]
    t_star: float
    x_star: np.ndarray
    eta: Callable[[float], float]
    omega: tuple[ValueField, ValueField]
    path_distance: np.ndarray = field(repr=False, default=None)  # dist(target, cloud) along the agreed path


def default_eta(spec: GameSpec, grid) -> Callable[[float], float]:
    """Detection threshold ``eps -> 2 F eps + cell diameter`` with ``F`` the largest speed over the grid."""
    fmax = float(np.linalg.norm(pair_velocities(spec, grid.t0, grid.nodes), axis=-1).max())
    diam = grid.cell_diameter
    return lambda eps: 2.0 * fmax * eps + diam


def make_punishment_profile(nmap: NashMap, omega1: ValueField, omega2: ValueField, t_star: float, x_star,
                            target, eta=None, tol_set: float = 0.1, step=None) -> PunishmentProfile:
    """Agreed trajectory transporting ``target`` plus both players' punishing strategies.

    The agreed path moves in steps of the builder's Courant stride (``step``
    overrides), each time choosing the control pair whose raw velocity keeps
    the target closest to the map's cloud; ties keep the previous pair, then
    the lowest sample index.  A step that leaves the target farther than
    ``quantum + tol_set`` from the cloud raises :class:`ConstructionError`.
    ``eta`` is a number, a function of the partition fineness, or ``None``
    for :func:`default_eta`; ``float('inf')`` disables punishment.
    """
    spec, g = nmap.spec, nmap.grid
    x_star = np.asarray(x_star, float)
    target = np.asarray(target, float)
    k0 = int(np.clip(np.rint(g.time_index(t_star)), 0, g.time_steps))
    j0 = g.nearest_node(x_star)
    pts = nmap.cloud_points(k0, j0)
    limit = nmap.quantum + tol_set
    if len(pts) == 0 or dist_l1(target, pts) > limit:
        raise PreconditionError(f"target {target.tolist()} is not in the cloud at the node nearest to "
                                f"(t={t_star}, x={x_star.tolist()})")
    if eta is None:
        eta = default_eta(spec, g)
    elif not callable(eta):
        eta = (lambda value: lambda eps: value)(float(eta))
    h = (_resolve_stride(spec, g, "auto") * g.dt) if step is None else float(step)
    n_steps = max(1, int(np.ceil((spec.theta0 - t_star) / h - 1e-9)))
    times = np.minimum(t_star + h * np.arange(n_steps + 1), spec.theta0)
    times[-1] = spec.theta0
    nP, nQ = len(spec.P_samples), len(spec.Q_samples)
    X = [x_star]
    us, vs, dists = [], [], [cloud_distance(nmap, t_star, x_star, target)]
    prev = None
    for i in range(n_steps):
        t, x, hh = times[i], X[-1], times[i + 1] - times[i]
        F = pair_velocities(spec, t, x).reshape(nP * nQ, -1)
        d = np.array([cloud_distance(nmap, times[i + 1], x + hh * w, target) for w in F])
        best = d.min()
        ties = np.flatnonzero(d <= best + 1e-12)
        pick = prev if prev in ties else int(ties[0])
        if best > limit:
            raise ConstructionError(f"agreed path step {i} at t={t:.6g}: no control keeps the target within "
                                    f"{limit:.4g} of the map (best {best:.4g})")
        prev = pick
        us.append(spec.P_samples[pick // nQ])
        vs.append(spec.Q_samples[pick % nQ])
        X.append(x + hh * F[pick])
        dists.append(d[pick])
    X = np.array(X)
    pay = spec.payoffs(X[-1])
    agreed = Trajectory(times, X, np.array(us), np.array(vs), np.zeros(n_steps, dtype=np.int64),
                        (float(pay[0]), float(pay[1])))
    U = PunishmentStrategy(PLAYER_I, agreed, eta, punishing_feedback(spec, PLAYER_I, omega2))
    V = PunishmentStrategy(PLAYER_II, agreed, eta, punishing_feedback(spec, PLAYER_II, omega1))
    return PunishmentProfile(spec, U, V, agreed, (float(target[0]), float(target[1])), float(t_star), x_star, eta,
                             (omega1, omega2), np.array(dists))


# ---------------------------------------------------------------------------
# unilateral deviations


def tol_nash(eps: float) -> float:
    return 0.1 + 5.0 * eps


class _Delayed(FeedbackStrategy):
    """Play ``first`` before ``t_switch`` and ``then`` afterwards."""

    kind = "custom"

    def __init__(self, first: FeedbackStrategy, then: FeedbackStrategy, t_switch: float):
        self.first, self.then, self.t_switch = first, then, t_switch

    def __call__(self, t, x, eps):
        return (self.first if t < self.t_switch else self.then)(t, x, eps)


class _RandomPiecewise(FeedbackStrategy):
    """A seeded control sequence on a fixed time grid of ``n_pieces`` intervals."""

    kind = "custom"

    def __init__(self, samples: np.ndarray, t_star: float, theta0: float, n_pieces: int, seed: int):
        self.samples = samples
        self.edges = np.linspace(t_star, theta0, n_pieces + 1)
        self.choice = np.random.default_rng(seed).integers(0, len(samples), n_pieces)

    def __call__(self, t, x, eps):
        i = int(np.clip(np.searchsorted(self.edges, t, side="right") - 1, 0, len(self.choice) - 1))
        return self.samples[self.choice[i]]


def _greedy(spec: GameSpec, player: int, fld: ValueField, opponent: FeedbackStrategy, worst_case: bool):
    """One-step-ahead maximizer of ``fld`` for ``player``.

    ``worst_case=False`` assumes the opponent keeps its strategy's current
    control (selfish play against the agreement); ``True`` maximizes the
    worst case over all opponent samples (security play).
    """
    samples = spec.P_samples if player == PLAYER_I else spec.Q_samples

    def fn(t, x, eps):
        M = _one_step_values(spec, fld, t, np.asarray(x, float), eps)
        if worst_case:
            score = M.min(axis=1) if player == PLAYER_I else M.min(axis=0)
        else:
            c = opponent(t, x, eps)
            other = spec.Q_samples if player == PLAYER_I else spec.P_samples
            k = int(np.argmin(np.abs(other - c).sum(axis=1)))
            score = M[:, k] if player == PLAYER_I else M[k, :]
        return samples[int(np.argmax(score))]
    return fn


def deviation_catalog(profile: PunishmentProfile, deviant: int, coop: ValueField | None = None,
                      seed: int = 0) -> list[tuple[str, FeedbackStrategy]]:
    """The documented finite set of deviations for ``deviant``.

    * one constant strategy per control sample;
    * bang-bang: first/last sample switching at 1/4, 1/2, 3/4 of the remaining horizon, both orders;
    * greedy-selfish: one-step maximizer of the cooperative maximum ``coop`` against the agreed control;
    * greedy-security: one-step maximizer of the own security level against any reply;
    * two seeded random piecewise-constant sequences (8 and 16 pieces);
    * two delayed deviations: follow the agreement for half the horizon, then the
      first constant sample or greedy-selfish play.
    """
    spec = profile.spec
    samples = spec.P_samples if deviant == PLAYER_I else spec.Q_samples
    own = profile.U if deviant == PLAYER_I else profile.V
    opp = profile.V if deviant == PLAYER_I else profile.U
    t0, T = profile.t_star, spec.theta0
    out = [(f"constant[{i}]", ConstantStrategy(s)) for i, s in enumerate(samples)]
    a, b = samples[0], samples[-1]
    for frac in (0.25, 0.5, 0.75):
        ts = t0 + frac * (T - t0)
        out.append((f"bang-bang first->last at {frac:g}", _Delayed(ConstantStrategy(a), ConstantStrategy(b), ts)))
        out.append((f"bang-bang last->first at {frac:g}", _Delayed(ConstantStrategy(b), ConstantStrategy(a), ts)))
    own_omega = profile.omega[deviant - 1]
    selfish = TableStrategy(_greedy(spec, deviant, coop if coop is not None else own_omega, opp, False),
                            "greedy-selfish")
    out.append(("greedy-selfish", selfish))
    out.append(("greedy-security", TableStrategy(_greedy(spec, deviant, own_omega, opp, True), "greedy-security")))
    out.append(("random 8 pieces", _RandomPiecewise(samples, t0, T, 8, seed)))
    out.append(("random 16 pieces", _RandomPiecewise(samples, t0, T, 16, seed + 1)))
    half = t0 + 0.5 * (T - t0)
    out.append(("delayed constant[0]", _Delayed(own, ConstantStrategy(a), half)))
    out.append(("delayed greedy-selfish", _Delayed(own, selfish, half)))
    return out


@dataclass(frozen=True)
class DeviationReport:
    max_gain: float
    passed: bool
    runs: tuple[tuple[str, float, int, float, float], ...]  # (strategy, eps, trial, payoff, gain)
    baseline: dict  # eps -> (payoffs of the profile run)
    deviant: int
    banner: str = "finite deviation catalog: PASS is falsification-style evidence only"

    def summary(self) -> str:
        lines = [self.banner, f"verdict: {'PASS' if self.passed else 'FAIL'}",
                 f"deviant: player {'I' if self.deviant == PLAYER_I else 'II'}",
                 f"max_gain: {self.max_gain:.6g}"]
        for eps, pay in sorted(self.baseline.items()):
            lines.append(f"eps={eps:g}: profile payoffs ({pay[0]:.6g}, {pay[1]:.6g}), tol {tol_nash(eps):.4g}")
        return "\n".join(lines)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write("strategy,eps,trial,payoff,gain\n")
            for name, eps, trial, pay, gain in self.runs:
                fh.write(f"{name},{eps:.17g},{trial},{pay:.17g},{gain:.17g}\n")


def deviation_experiment(spec: GameSpec, profile: PunishmentProfile, deviant: int, catalog=None,
                         eps_schedule=(0.02, 0.01, 0.005), trials: int = 1, seed: int = 0,
                         jitter: float = 0.0, coop: ValueField | None = None) -> DeviationReport:
    """Unilateral deviations from ``profile`` by player ``deviant``.

    Gains are measured against the profile run with the same ``eps`` and
    partitions, so a deviant that plays its profile strategy gains exactly 0.
    ``catalog`` defaults to :func:`deviation_catalog` with ``coop`` as the
    cooperative field of the deviant.
    """
    if deviant not in (PLAYER_I, PLAYER_II):
        raise PreconditionError("deviant must be 1 or 2")
    if catalog is None:
        catalog = deviation_catalog(profile, deviant, coop, seed)
    runs, baseline = [], {}
    worst = -np.inf
    passed = True
    for eps in eps_schedule:
        for trial in range(trials):
            s = seed + 7919 * trial
            base = simulate(spec, profile.t_star, profile.x_star, profile.U, eps, profile.V, eps, s, jitter)
            baseline.setdefault(eps, base.payoffs)
            ref = base.payoffs[deviant - 1]
            for name, strat in catalog:
                U, V = (strat, profile.V) if deviant == PLAYER_I else (profile.U, strat)
                tr = simulate(spec, profile.t_star, profile.x_star, U, eps, V, eps, s, jitter)
                pay = tr.payoffs[deviant - 1]
                gain = pay - ref
                runs.append((name, eps, trial, pay, gain))
                worst = max(worst, gain)
                passed &= gain <= tol_nash(eps)
    return DeviationReport(float(worst), bool(passed), tuple(runs), baseline, deviant)
