"""Run configuration: INI files with ``[game]``, ``[controls]``, ``[grid]``, ``[tolerances]`` and ``[run]``.

Example::

    [game]
    dynamics = example
    params =
    t0 = 0
    theta0 = 1
    state_dim = 2
    sigma1 = abs_diff -1 0 1
    sigma2 = linear 0 1 0

    [controls]
    P = -1; 0; 1            # points separated by ';', coordinates by ','
    Q = linspace -1 1 3     # or an evenly spaced scalar set

    [grid]
    time_steps = 100
    lo = -2, -2
    hi = 2, 2
    resolution = 201, 201

Missing ``[tolerances]`` entries fall back to grid-derived defaults.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .game_model import GameSpec, PayoffSpec
from .grid import Grid
from .nash_set import DEFAULT_TOL_DD, default_quantum, default_tol_val


@dataclass(frozen=True)
class Tolerances:
    tol_val: float
    tol_set: float = 0.1
    tol_dd: float = DEFAULT_TOL_DD
    tol_visc: float = 1e-4
    tol_nash: float = 0.1  # base of 0.1 + 5 eps
    quantum: float | None = None
    tol_inv: float | None = None

    def __post_init__(self):
        for name in ("tol_val", "tol_set", "tol_dd", "tol_visc", "tol_nash"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"tolerance {name} must be > 0, got {getattr(self, name)}")
        for name in ("quantum", "tol_inv"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ConfigError(f"tolerance {name} must be > 0, got {v}")


@dataclass(frozen=True, eq=False)
class RunConfig:
    spec: GameSpec
    grid: Grid
    tolerances: Tolerances
    seed: int = 0
    out_dir: Path = Path("out")
    hull_density: int = 8
    stride: str | int = "auto"
    options: dict = field(default_factory=dict)
    source: str = "<memory>"

    def with_overrides(self, **kw) -> "RunConfig":
        tol_keys = {k: v for k, v in kw.items() if k in Tolerances.__dataclass_fields__ and v is not None}
        rest = {k: v for k, v in kw.items() if k not in tol_keys and v is not None}
        cfg = replace(self, tolerances=replace(self.tolerances, **tol_keys)) if tol_keys else self
        return replace(cfg, **rest) if rest else cfg

    def ensure_out_dir(self) -> Path:
        out = Path(self.out_dir)
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"cannot create output directory {out}: {exc}") from None
        if not os.access(out, os.W_OK):
            raise ConfigError(f"output directory {out} is not writable")
        return out


def _floats(text: str, where: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"{where}: expected numbers, got {text!r}") from None


def parse_controls(text: str, where: str = "controls") -> np.ndarray:
    """``a; b; c`` (points, coordinates comma separated) or ``linspace lo hi count``."""
    text = text.strip()
    if text.startswith("linspace"):
        parts = _floats(text[len("linspace"):], where)
        if len(parts) != 3 or parts[2] < 1 or parts[2] != int(parts[2]):
            raise ConfigError(f"{where}: linspace needs 'lo hi count'")
        return np.linspace(parts[0], parts[1], int(parts[2]))[:, None]
    pts = [_floats(p, where) for p in text.split(";") if p.strip()]
    if not pts or len({len(p) for p in pts}) != 1:
        raise ConfigError(f"{where}: control points must be nonempty and of equal dimension")
    return np.array(pts, float)


def _payoff(text: str, where: str) -> PayoffSpec:
    parts = text.split()
    if not parts:
        raise ConfigError(f"{where}: empty payoff")
    return PayoffSpec(parts[0], tuple(_floats(" ".join(parts[1:]), where)))


class _Section:
    def __init__(self, parser: configparser.ConfigParser, name: str, source: str):
        if not parser.has_section(name):
            raise ConfigError(f"{source}: missing section [{name}]")
        self.sec, self.name, self.source = parser[name], name, source

    def get(self, key: str, default=None, required: bool = True) -> str:
        if key in self.sec:
            return self.sec[key]
        if default is not None or not required:
            return default
        raise ConfigError(f"{self.source}: missing config key '{key}' in section [{self.name}]")

    def num(self, key: str, default=None, cast=float):
        raw = self.get(key, None if default is None else str(default))
        try:
            return cast(raw)
        except (TypeError, ValueError):
            raise ConfigError(f"{self.source}: [{self.name}] {key} = {raw!r} is not a valid number") from None


def parse_config(text: str, source: str = "<string>", base_dir: Path | None = None) -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        parser.read_string(text, source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    game = _Section(parser, "game", source)
    ctrl = _Section(parser, "controls", source)
    grid_s = _Section(parser, "grid", source)
    n = game.num("state_dim", cast=int)
    spec = GameSpec(
        game.get("dynamics"), tuple(_floats(game.get("params", ""), f"{source} [game] params")),
        game.num("t0", 0.0), game.num("theta0", 1.0), n,
        parse_controls(ctrl.get("P"), f"{source} [controls] P"),
        parse_controls(ctrl.get("Q"), f"{source} [controls] Q"),
        _payoff(game.get("sigma1"), f"{source} [game] sigma1"),
        _payoff(game.get("sigma2"), f"{source} [game] sigma2"),
    )
    grid = Grid(spec.t0, spec.theta0, grid_s.num("time_steps", cast=int),
                _floats(grid_s.get("lo"), f"{source} [grid] lo"), _floats(grid_s.get("hi"), f"{source} [grid] hi"),
                [int(v) for v in _floats(grid_s.get("resolution"), f"{source} [grid] resolution")],
                grid_s.get("boundary", "clamp"))
    if grid.ndim != n:
        raise ConfigError(f"{source}: grid has {grid.ndim} dimensions but state_dim = {n}")
    tol = {"tol_val": default_tol_val(grid)}
    if parser.has_section("tolerances"):
        ts = _Section(parser, "tolerances", source)
        for key in ts.sec:
            if key not in Tolerances.__dataclass_fields__:
                raise ConfigError(f"{source}: unknown tolerance '{key}'")
            tol[key] = ts.num(key)
    tol.setdefault("quantum", default_quantum(grid))
    run = {}
    options = {}
    if parser.has_section("run"):
        rs = _Section(parser, "run", source)
        for key, raw in rs.sec.items():
            if key == "seed":
                run["seed"] = rs.num("seed", cast=int)
            elif key == "out":
                out = Path(raw)
                run["out_dir"] = out if out.is_absolute() or base_dir is None else base_dir / out
            elif key == "hull_density":
                run["hull_density"] = rs.num("hull_density", cast=int)
            elif key == "stride":
                run["stride"] = raw if raw == "auto" else rs.num("stride", cast=int)
            else:
                options[key] = raw
    return RunConfig(spec, grid, Tolerances(**tol), options=options, source=source, **run)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, str(path), path.parent)


EXAMPLE_CONFIG = """\
[game]
dynamics = example
params =
t0 = 0
theta0 = 1
state_dim = 2
sigma1 = abs_diff -1 0 1
sigma2 = linear 0 1 0

[controls]
P = -1; 0; 1
Q = -1; 0; 1

[grid]
time_steps = 100
lo = -2, -2
hi = 2, 2
resolution = 201, 201

[tolerances]
tol_set = 0.1

[run]
seed = 0
out = out
hull_density = 8
"""
