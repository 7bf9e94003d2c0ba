"""Game definition: dynamics and payoff catalogs, velocity sets, Hamiltonians.

A game is ``x' = f(t, x, u, v)`` on ``[t0, theta0]`` with terminal payoffs
``sigma1``, ``sigma2``.  Player I picks ``u`` from ``P_samples`` and wants to
maximize ``sigma1``; player II picks ``v`` from ``Q_samples`` and maximizes
``sigma2``.  Dynamics and payoffs come from small closed-form catalogs so that
every run is bit-reproducible; :func:`register_dynamics` and
:func:`register_payoff` are the extension points.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.stats import qmc

from .errors import ConfigError, NumericError
from .grid import Grid  # noqa: F401  (re-exported: Grid belongs to the game model surface)

DynamicsFn = Callable[[float, np.ndarray, np.ndarray, np.ndarray], np.ndarray]
PayoffFn = Callable[[np.ndarray], np.ndarray]

_DYNAMICS: dict[str, Callable[..., DynamicsFn]] = {}
_PAYOFFS: dict[str, Callable[..., PayoffFn]] = {}


def register_dynamics(name: str):
    """Decorator adding a factory ``(params, n, du, dv) -> f(t, x, u, v)`` to the catalog."""

    def deco(factory):
        _DYNAMICS[name] = factory
        return factory

    return deco


def register_payoff(name: str):
    """Decorator adding a factory ``(params, n) -> sigma(x)`` to the payoff catalog."""

    def deco(factory):
        _PAYOFFS[name] = factory
        return factory

    return deco


def dynamics_catalog() -> list[str]:
    return sorted(_DYNAMICS)


def payoff_catalog() -> list[str]:
    return sorted(_PAYOFFS)


@register_dynamics("example")
def _example_dynamics(params, n, du, dv):
    # x' = u, y' = v
    if n != 2 or du != 1 or dv != 1:
        raise ConfigError("dynamics 'example' needs state_dim=2 and scalar controls")

    def f(t, x, u, v):
        x, u, v = np.broadcast_arrays(x[..., :1], u[..., :1], v[..., :1])
        return np.concatenate([u, v], axis=-1).astype(float)

    return f


@register_dynamics("affine")
def _affine_dynamics(params, n, du, dv):
    """f = (A + t A1) x + B u + C v + b; params = A, B, C[, b[, A1]] flattened row-major."""
    p = np.asarray(params, float)
    base = n * n + n * du + n * dv
    if p.size not in (base, base + n, base + n + n * n):
        raise ConfigError(
            f"affine dynamics expects {base}, {base + n} or {base + n + n * n} params, got {p.size}"
        )
    A = p[: n * n].reshape(n, n)
    B = p[n * n : n * n + n * du].reshape(n, du)
    C = p[n * n + n * du : base].reshape(n, dv)
    b = p[base : base + n] if p.size > base else np.zeros(n)
    A1 = p[base + n :].reshape(n, n) if p.size > base + n else np.zeros((n, n))

    def f(t, x, u, v):
        return x @ (A + t * A1).T + u @ B.T + v @ C.T + b

    return f


@register_dynamics("bilinear")
def _bilinear_dynamics(params, n, du, dv):
    """f = k * u * v with scalar controls; the coupled term breaks the Isaacs condition."""
    k = np.asarray(params, float)
    if du != 1 or dv != 1 or k.size != n:
        raise ConfigError("bilinear dynamics needs scalar controls and n params")

    def f(t, x, u, v):
        x, uv = np.broadcast_arrays(x, u[..., :1] * v[..., :1])
        return uv * k

    return f


@register_payoff("linear")
def _linear_payoff(params, n):
    p = np.asarray(params, float)
    if p.size != n + 1:
        raise ConfigError(f"linear payoff expects {n + 1} params (a..., b), got {p.size}")
    a, b = p[:n], p[n]
    return lambda x: x @ a + b


@register_payoff("distance")
def _distance_payoff(params, n):
    p = np.asarray(params, float)
    if p.size != n + 1:
        raise ConfigError(f"distance payoff expects {n + 1} params (scale, c...), got {p.size}")
    scale, c = p[0], p[1:]
    return lambda x: scale * np.linalg.norm(x - c, axis=-1)


@register_payoff("abs_diff")
def _abs_diff_payoff(params, n):
    p = np.asarray(params, float)
    if p.size != 3:
        raise ConfigError("abs_diff payoff expects params (scale, i, j)")
    scale, i, j = p[0], int(p[1]), int(p[2])
    if not (0 <= i < n and 0 <= j < n):
        raise ConfigError(f"abs_diff indices out of range for state_dim={n}")
    return lambda x: scale * np.abs(x[..., i] - x[..., j])


@dataclass(frozen=True)
class PayoffSpec:
    kind: str
    params: tuple[float, ...] = ()

    def build(self, n: int) -> PayoffFn:
        if self.kind not in _PAYOFFS:
            raise ConfigError(f"unknown payoff kind {self.kind!r}; known: {payoff_catalog()}")
        return _PAYOFFS[self.kind](self.params, n)


def _as_samples(samples) -> np.ndarray:
    a = np.asarray(samples, float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2 or a.shape[0] == 0:
        raise ConfigError("control sample list must be a nonempty list of points")
    a = a.copy()
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GameSpec:
    """Full problem statement of a two-player terminal-payoff differential game."""

    dynamics_id: str
    params: tuple[float, ...]
    t0: float
    theta0: float
    state_dim: int
    P_samples: np.ndarray
    Q_samples: np.ndarray
    sigma1: PayoffSpec
    sigma2: PayoffSpec
    _f: DynamicsFn = field(init=False, repr=False)
    _s1: PayoffFn = field(init=False, repr=False)
    _s2: PayoffFn = field(init=False, repr=False)

    def __post_init__(self):
        if not self.t0 < self.theta0:
            raise ConfigError(f"need t0 < theta0, got {self.t0}, {self.theta0}")
        if self.state_dim < 1:
            raise ConfigError("state_dim must be positive")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        object.__setattr__(self, "P_samples", _as_samples(self.P_samples))
        object.__setattr__(self, "Q_samples", _as_samples(self.Q_samples))
        if self.dynamics_id not in _DYNAMICS:
            raise ConfigError(f"unknown dynamics {self.dynamics_id!r}; known: {dynamics_catalog()}")
        f = _DYNAMICS[self.dynamics_id](self.params, self.state_dim, self.du, self.dv)
        object.__setattr__(self, "_f", f)
        object.__setattr__(self, "_s1", self.sigma1.build(self.state_dim))
        object.__setattr__(self, "_s2", self.sigma2.build(self.state_dim))

    @property
    def du(self) -> int:
        return self.P_samples.shape[1]

    @property
    def dv(self) -> int:
        return self.Q_samples.shape[1]

    @property
    def n_pairs(self) -> int:
        return self.P_samples.shape[0] * self.Q_samples.shape[0]

    def f(self, t, x, u, v) -> np.ndarray:
        return self._f(t, np.asarray(x, float), np.asarray(u, float), np.asarray(v, float))

    def sigma(self, which: int, x) -> np.ndarray:
        x = np.asarray(x, float)
        return self._s1(x) if which == 1 else self._s2(x)

    def payoffs(self, x) -> np.ndarray:
        """Terminal payoff pairs ``(..., 2)``."""
        x = np.asarray(x, float)
        return np.stack([self._s1(x), self._s2(x)], axis=-1)

    def with_controls(self, P_samples, Q_samples) -> "GameSpec":
        return GameSpec(
            self.dynamics_id, self.params, self.t0, self.theta0, self.state_dim,
            P_samples, Q_samples, self.sigma1, self.sigma2,
        )


def example_game(n_controls: int = 3) -> GameSpec:
    """The two-dimensional game x' = u, y' = v on [0, 1], sigma1 = -|x - y|, sigma2 = y."""
    c = np.linspace(-1.0, 1.0, n_controls)
    return GameSpec(
        "example", (), 0.0, 1.0, 2, c, c,
        PayoffSpec("abs_diff", (-1.0, 0, 1)), PayoffSpec("linear", (0.0, 1.0, 0.0)),
    )


def eval_dynamics(spec: GameSpec, t: float, x, u, v) -> np.ndarray:
    """Velocity ``f(t, x, u, v)``; raises :class:`NumericError` on non-finite output."""
    out = spec.f(t, x, np.atleast_1d(u), np.atleast_1d(v))
    if not np.all(np.isfinite(out)):
        raise NumericError(f"non-finite velocity at t={t}, x={np.asarray(x).tolist()}, "
                           f"u={np.asarray(u).tolist()}, v={np.asarray(v).tolist()}")
    return out


def pair_velocities(spec: GameSpec, t: float, x) -> np.ndarray:
    """Velocities for every sampled control pair: shape ``(..., nP, nQ, n)``."""
    x = np.asarray(x, float)
    xb = x[..., None, None, :]
    u = spec.P_samples[:, None, :]
    v = spec.Q_samples[None, :, :]
    out = spec.f(t, xb, u, v)
    out = np.broadcast_to(out, x.shape[:-1] + (spec.P_samples.shape[0], spec.Q_samples.shape[0], spec.state_dim))
    if not np.all(np.isfinite(out)):
        raise NumericError(f"non-finite velocity at t={t}")
    return out


def hull_weights(n_raw: int, density: int, seed: int = 0) -> np.ndarray:
    """Convex weights ``(density, n_raw)`` from scrambled Halton points.

    Half of the rows mix two raw velocities (edge samples, so hull edges are
    populated); the rest are spread over the simplex via sorted spacings.
    """
    if density <= 0:
        return np.zeros((0, n_raw))
    if n_raw == 1:
        return np.ones((density, 1))
    W = np.zeros((density, n_raw))
    n_edge = (density + 1) // 2
    h = qmc.Halton(d=3, scramble=True, seed=seed).random(n_edge)
    a = np.minimum((h[:, 0] * n_raw).astype(int), n_raw - 1)
    b = np.minimum((h[:, 1] * (n_raw - 1)).astype(int), n_raw - 2)
    b = b + (b >= a)
    rows = np.arange(n_edge)
    W[rows, a] = h[:, 2]
    W[rows, b] = 1.0 - h[:, 2]
    n_int = density - n_edge
    if n_int:
        u = np.sort(qmc.Halton(d=n_raw - 1, scramble=True, seed=seed + 1).random(n_int), axis=1)
        edges = np.hstack([np.zeros((n_int, 1)), u, np.ones((n_int, 1))])
        W[n_edge:] = np.diff(edges, axis=1)
    return W


@dataclass(frozen=True, eq=False)
class VelocitySet:
    velocities: np.ndarray
    hull_samples: np.ndarray
    pairs: np.ndarray  # (n_raw, 2) indices into P_samples, Q_samples


def velocity_set(spec: GameSpec, t: float, x, hull_density: int = 0, seed: int = 0) -> VelocitySet:
    """Raw velocities over all sampled ``(u, v)`` plus ``hull_density`` convex combinations."""
    if hull_density < 0:
        raise ValueError("hull_density must be >= 0")
    F = pair_velocities(spec, t, np.asarray(x, float))
    nP, nQ = F.shape[-3], F.shape[-2]
    raw = F.reshape(nP * nQ, spec.state_dim)
    W = hull_weights(raw.shape[0], hull_density, seed)
    hull = np.vstack([raw, W @ raw])
    pairs = np.stack(np.meshgrid(np.arange(nP), np.arange(nQ), indexing="ij"), -1).reshape(-1, 2)
    return VelocitySet(raw, hull, pairs)


def hull_velocities_batch(spec: GameSpec, t: float, x: np.ndarray, hull_density: int, seed: int = 0) -> np.ndarray:
    """Hull samples for a batch of states: ``(M, n_raw + hull_density, n)``."""
    F = pair_velocities(spec, t, x)
    raw = F.reshape(F.shape[:-3] + (-1, spec.state_dim))
    W = hull_weights(raw.shape[-2], hull_density, seed)
    return np.concatenate([raw, np.einsum("hr,...rn->...hn", W, raw)], axis=-2)


def hamiltonian(spec: GameSpec, which: int, t: float, x, s) -> np.ndarray:
    """``H1 = max_u min_v <s, f>`` (which=1) or ``H2 = max_v min_u <s, f>`` (which=2) over the samples."""
    x = np.asarray(x, float)
    s = np.asarray(s, float)
    x, s = np.broadcast_arrays(x, s)
    M = np.sum(pair_velocities(spec, t, x) * s[..., None, None, :], axis=-1)
    if which == 1:
        return M.min(axis=-1).max(axis=-1)
    if which == 2:
        return M.min(axis=-2).max(axis=-1)
    raise ValueError("which must be 1 or 2")


@dataclass(frozen=True)
class IsaacsReport:
    max_gap: float
    worst_point: tuple  # (t, x, s)


def isaacs_check(spec: GameSpec, t_samples, x_samples, s_samples) -> IsaacsReport:
    """Largest ``|min_u max_v <s,f> - max_v min_u <s,f>|`` over the sample product."""
    t_samples = np.atleast_1d(np.asarray(t_samples, float))
    X = np.atleast_2d(np.asarray(x_samples, float))
    S = np.atleast_2d(np.asarray(s_samples, float))
    if not (t_samples.size and X.size and S.size):
        raise ValueError("sample lists must be nonempty")
    best = (-1.0, None)
    for t in t_samples:
        F = pair_velocities(spec, t, X)  # (nx, P, Q, n)
        M = np.einsum("xpqn,sn->xspq", F, S)
        upper = M.max(axis=-1).min(axis=-1)  # min_u max_v
        lower = M.min(axis=-2).max(axis=-1)  # max_v min_u
        gap = np.abs(upper - lower)
        i, j = np.unravel_index(np.argmax(gap), gap.shape)
        if gap[i, j] > best[0]:
            best = (float(gap[i, j]), (float(t), X[i].copy(), S[j].copy()))
    return IsaacsReport(*best)
