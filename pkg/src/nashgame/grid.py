"""Space-time grid and multilinear interpolation on it."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import ndimage

from .errors import ConfigError, DomainError

BOUNDARY_POLICIES = ("clamp", "strict")

# fractional indices this close to an integer are snapped so node queries are exact
_SNAP = 1e-9


@dataclass(frozen=True)
class Grid:
    """Uniform discretization of ``[t0, theta0] x box``.

    ``time_steps`` is the number K of intervals, so there are K + 1 time slices.
    ``resolution`` is the node count per spatial dimension.
    """

    t0: float
    theta0: float
    time_steps: int
    lo: tuple[float, ...]
    hi: tuple[float, ...]
    resolution: tuple[int, ...]
    boundary: str = "clamp"

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(v) for v in self.lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in self.hi))
        object.__setattr__(self, "resolution", tuple(int(v) for v in self.resolution))
        if not self.t0 < self.theta0:
            raise ConfigError(f"grid needs t0 < theta0, got {self.t0} and {self.theta0}")
        if self.time_steps < 1:
            raise ConfigError(f"time_steps must be >= 1, got {self.time_steps}")
        if not (len(self.lo) == len(self.hi) == len(self.resolution)) or not self.lo:
            raise ConfigError("lo, hi and resolution must have the same nonzero length")
        for d, (a, b, m) in enumerate(zip(self.lo, self.hi, self.resolution)):
            if not a < b:
                raise ConfigError(f"dimension {d}: lo={a} must be < hi={b}")
            if m < 2:
                raise ConfigError(f"dimension {d}: need at least 2 nodes, got {m}")
        if self.boundary not in BOUNDARY_POLICIES:
            raise ConfigError(f"unknown boundary policy {self.boundary!r}")

    @property
    def ndim(self) -> int:
        return len(self.resolution)

    @property
    def dt(self) -> float:
        return (self.theta0 - self.t0) / self.time_steps

    @cached_property
    def dx(self) -> np.ndarray:
        return (np.array(self.hi) - np.array(self.lo)) / (np.array(self.resolution) - 1)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.resolution

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.resolution))

    @cached_property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.time_steps + 1)

    @cached_property
    def axes(self) -> list[np.ndarray]:
        return [np.linspace(a, b, m) for a, b, m in zip(self.lo, self.hi, self.resolution)]

    @cached_property
    def nodes(self) -> np.ndarray:
        """All spatial nodes, shape ``(n_nodes, ndim)``, C order."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    @cached_property
    def strides(self) -> np.ndarray:
        """Flat-index strides of the spatial C-ordered layout."""
        s = np.ones(self.ndim, dtype=np.int64)
        for d in range(self.ndim - 2, -1, -1):
            s[d] = s[d + 1] * self.resolution[d + 1]
        return s

    @property
    def cell_diameter(self) -> float:
        return float(np.linalg.norm(self.dx))

    def time_index(self, t: float) -> float:
        return (t - self.t0) / self.dt

    def flat_index(self, multi) -> int:
        return int(np.ravel_multi_index(tuple(multi), self.resolution))

    def multi_index(self, flat: int) -> tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(flat, self.resolution))

    def nearest_node(self, x) -> int:
        idx = np.rint((np.asarray(x, float) - np.array(self.lo)) / self.dx).astype(int)
        idx = np.clip(idx, 0, np.array(self.resolution) - 1)
        return self.flat_index(idx)

    def contains(self, x, atol: float = 1e-12) -> np.ndarray:
        x = np.asarray(x, float)
        return np.all((x >= np.array(self.lo) - atol) & (x <= np.array(self.hi) + atol), axis=-1)

    def fractional_index(self, x, boundary: str | None = None) -> np.ndarray:
        """Map points ``(..., ndim)`` to fractional node coordinates, applying the boundary policy."""
        policy = boundary or self.boundary
        x = np.asarray(x, float)
        frac = (x - np.array(self.lo)) / self.dx
        upper = np.array(self.resolution) - 1
        if policy == "strict":
            bad = np.any((frac < -_SNAP) | (frac > upper + _SNAP), axis=-1)
            if np.any(bad):
                where = np.argwhere(np.atleast_1d(bad))[0]
                point = np.atleast_2d(x)[where[0]] if x.ndim > 1 else x
                raise DomainError(f"point {np.round(point, 12).tolist()} lies outside the grid box")
        frac = np.clip(frac, 0.0, upper)
        near = np.rint(frac)
        return np.where(np.abs(frac - near) < _SNAP, near, frac)

    def cell_corners(self, x, boundary: str | None = None):
        """Corner flat indices and multilinear weights for points ``(M, ndim)``.

        Returns ``(idx, w)`` both of shape ``(M, 2**ndim)``; weights sum to one.
        """
        frac = self.fractional_index(np.atleast_2d(x), boundary)
        upper = np.array(self.resolution) - 1
        base = np.minimum(np.floor(frac).astype(np.int64), upper - 1)
        r = frac - base
        n = self.ndim
        m = frac.shape[0]
        idx = np.zeros((m, 2**n), dtype=np.int64)
        w = np.ones((m, 2**n))
        for b in range(2**n):
            for d in range(n):
                bit = (b >> (n - 1 - d)) & 1
                idx[:, b] += (base[:, d] + bit) * self.strides[d]
                w[:, b] *= r[:, d] if bit else 1.0 - r[:, d]
        return idx, w


def interp_slice(values: np.ndarray, grid: Grid, x, boundary: str | None = None) -> np.ndarray:
    """Multilinear interpolation of one spatial slice ``values`` (shape ``grid.shape``) at points ``x``."""
    x = np.asarray(x, float)
    lead = x.shape[:-1]
    frac = grid.fractional_index(x.reshape(-1, grid.ndim), boundary)
    out = ndimage.map_coordinates(values, frac.T, order=1, mode="nearest")
    return out.reshape(lead)


def interp_spacetime(values: np.ndarray, grid: Grid, t, x, boundary: str | None = None) -> np.ndarray:
    """Space-time multilinear interpolation of ``values`` with shape ``(K+1, *grid.shape)``."""
    x = np.asarray(x, float)
    lead = x.shape[:-1]
    pts = x.reshape(-1, grid.ndim)
    t = np.broadcast_to(np.asarray(t, float), lead).reshape(-1)
    kf = grid.time_index(t)
    if (boundary or grid.boundary) == "strict" and np.any((kf < -_SNAP) | (kf > grid.time_steps + _SNAP)):
        raise DomainError(f"time outside [{grid.t0}, {grid.theta0}]")
    kf = np.clip(kf, 0.0, grid.time_steps)
    near = np.rint(kf)
    kf = np.where(np.abs(kf - near) < _SNAP, near, kf)
    frac = grid.fractional_index(pts, boundary)
    coords = np.vstack([kf[None, :], frac.T])
    out = ndimage.map_coordinates(values, coords, order=1, mode="nearest")
    return out.reshape(lead)
