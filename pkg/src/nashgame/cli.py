"""Command-line front end: ``nashgame {solve,nash,verify,check-pair,simulate,oracle}``.

Exit codes: 0 when the produced report passes, 2 when it fails (the report is
still written), 1 for usage, configuration and IO errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import nash_set, oracle, simulator, smooth_verifier, zero_sum
from .config import EXAMPLE_CONFIG, RunConfig, load_config, parse_config
from .errors import NashGameError
from .game_model import pair_velocities
from .grid import Grid

EXIT_PASS, EXIT_ERROR, EXIT_FAIL = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",")]


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="nashgame", description="Nash equilibrium payoffs of two-player differential games on a grid.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="INI config path, or 'example' for the built-in planar game")
    common.add_argument("--out", help="output directory (overrides [run] out)")
    common.add_argument("--seed", type=int)
    for name in ("tol-val", "tol-set", "tol-dd", "tol-visc", "tol-nash", "quantum", "tol-inv"):
        common.add_argument(f"--{name}", type=float)
    common.add_argument("--grid-k", type=int, help="number of time steps")
    common.add_argument("--grid-res", help="nodes per dimension: one integer or a comma list")
    common.add_argument("--hull-density", type=int)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("solve", parents=[common], help="security levels and cooperative maxima")
    sub.add_parser("nash", parents=[common], help="build the equilibrium payoff map")
    v = sub.add_parser("verify", parents=[common], help="check a payoff map by directional derivatives")
    v.add_argument("--map", required=True, help="map file in the nashmap text format")
    v.add_argument("--exhaustive", action="store_true", help="compute every residual exactly")
    c = sub.add_parser("check-pair", parents=[common], help="sufficient conditions for a candidate pair")
    c.add_argument("--pair", default="phi", help="catalog pair: phi, c_gamma, omega, constant")
    c.add_argument("--gamma", type=float, default=2.0)
    c.add_argument("--fields", nargs=2, metavar=("C1_CSV", "C2_CSV"), help="candidate value-field CSVs")
    c.add_argument("--points", type=int, default=1000)
    s = sub.add_parser("simulate", parents=[common], help="punishment profile and deviation experiment")
    s.add_argument("--x0", required=True, help="initial state, comma separated")
    s.add_argument("--t0", type=float, help="initial time (default: grid start)")
    s.add_argument("--target", help="payoff pair J1,J2, written --target=J1,J2 when J1 < 0 (default: first point of the nearest cloud)")
    s.add_argument("--eps", default="0.02,0.01,0.005", help="comma list of partition finenesses")
    s.add_argument("--deviant", choices=["1", "2", "both"], default="both")
    s.add_argument("--map", help="reuse a map file instead of building one")
    sub.add_parser("oracle", parents=[common], help="closed-form fields and map of the planar example")
    return p


def _config(args) -> RunConfig:
    cfg = parse_config(EXAMPLE_CONFIG, "example", Path.cwd()) if args.config == "example" else load_config(args.config)
    g = cfg.grid
    if args.grid_k or args.grid_res:
        res = g.resolution
        if args.grid_res:
            vals = [int(v) for v in args.grid_res.split(",")]
            res = tuple(vals * g.ndim) if len(vals) == 1 else tuple(vals)
        g = Grid(g.t0, g.theta0, args.grid_k or g.time_steps, g.lo, g.hi, res, g.boundary)
        quantum = nash_set.default_quantum(g)
        tol = cfg.tolerances.__class__(**{**cfg.tolerances.__dict__, "tol_val": nash_set.default_tol_val(g),
                                          "quantum": quantum})
        cfg = RunConfig(cfg.spec, g, tol, cfg.seed, cfg.out_dir, cfg.hull_density, cfg.stride, cfg.options,
                        cfg.source)
    over = {k.replace("-", "_"): getattr(args, k.replace("-", "_"))
            for k in ("tol-val", "tol-set", "tol-dd", "tol-visc", "tol-nash", "quantum", "tol-inv")}
    return cfg.with_overrides(**over, seed=args.seed, hull_density=args.hull_density,
                              out_dir=Path(args.out) if args.out else None)


def _write(path: Path, text: str) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(text.rstrip("\n") + "\n")


def _is_example(cfg: RunConfig) -> bool:
    s = cfg.spec
    return (s.dynamics_id == "example" and s.t0 == 0.0 and s.theta0 == 1.0
            and s.sigma1.kind == "abs_diff" and tuple(s.sigma1.params) == (-1.0, 0.0, 1.0)
            and s.sigma2.kind == "linear" and tuple(s.sigma2.params) == (0.0, 1.0, 0.0))


def _trusted(grid: Grid, spec) -> np.ndarray:
    """Space-time nodes whose backward cone stays inside the box, ``(K + 1, n_nodes)``."""
    vmax = np.abs(pair_velocities(spec, grid.t0, grid.nodes)).max(axis=(0, 1, 2))
    reach = (grid.theta0 - grid.times)[:, None, None] * vmax
    X = grid.nodes[None]
    return np.all((X - reach >= np.array(grid.lo) - 1e-12) & (X + reach <= np.array(grid.hi) + 1e-12), axis=2)


def _solve_all(cfg: RunConfig):
    spec, g = cfg.spec, cfg.grid
    return (zero_sum.solve_lower_value(spec, g, 1, stride=cfg.stride),
            zero_sum.solve_lower_value(spec, g, 2, stride=cfg.stride),
            zero_sum.solve_cooperative_max(spec, g, 1, stride=cfg.stride),
            zero_sum.solve_cooperative_max(spec, g, 2, stride=cfg.stride))


def cmd_solve(cfg: RunConfig) -> int:
    out = cfg.ensure_out_dir()
    fields = _solve_all(cfg)
    lines = [f"grid: K={cfg.grid.time_steps}, nodes={list(cfg.grid.resolution)}, stride={fields[0].stride}"]
    for fld in fields:
        zero_sum.write_field_csv(fld, out / f"{fld.label}.csv")
        lines.append(f"{fld.label}: min {fld.values.min() + 0.0:.6g}, max {fld.values.max() + 0.0:.6g}")
        lines.extend(f"  warning: {w}" for w in fld.warnings)
    status = EXIT_PASS
    if _is_example(cfg):
        g = cfg.grid
        T = np.repeat(g.times, g.n_nodes).reshape(g.time_steps + 1, g.n_nodes)
        X, Y = g.nodes[:, 0][None], g.nodes[:, 1][None]
        exact = {"omega1": oracle.omega1_exact(T, X, Y), "omega2": oracle.omega2_exact(T, X, Y),
                 "c1_plus": oracle.c_plus_exact(1, T, X, Y), "c2_plus": oracle.c_plus_exact(2, T, X, Y)}
        trust = _trusted(g, cfg.spec)
        for fld in fields:
            err = float(np.abs(fld.values.reshape(trust.shape) - exact[fld.label])[trust].max())
            ok = err <= cfg.tolerances.tol_val
            status = status if ok else EXIT_FAIL
            lines.append(f"{fld.label} max oracle error (box-independent nodes): {err:.4g} "
                         f"[{'ok' if ok else 'FAIL'} vs tol_val {cfg.tolerances.tol_val:.4g}]")
    _write(out / "solve_summary.txt", "\n".join(lines))
    print("\n".join(lines))
    return status


def _hausdorff_vs_oracle(nmap: nash_set.NashMap, trust: np.ndarray):
    H = oracle.map_hausdorff(nmap, trust)
    if not trust.any():
        return 0.0, None
    flat = int(np.nanargmax(H))
    return float(H.flat[flat]), divmod(flat, nmap.grid.n_nodes)


def cmd_nash(cfg: RunConfig) -> int:
    out = cfg.ensure_out_dir()
    w1, w2, _, _ = _solve_all(cfg)
    tol = cfg.tolerances
    nmap = nash_set.build_nash_map(cfg.spec, cfg.grid, w1, w2, cfg.hull_density, tol.quantum, tol.tol_inv,
                                   stride=cfg.stride, seed=cfg.seed)
    nash_set.write_map(nmap, out / "nashmap.txt")
    rep = nmap.report
    lines = [rep.summary(timing=False)]
    status = EXIT_FAIL if rep.empty_nodes else EXIT_PASS
    n1, n2, _ = nash_set.check_invariants(nmap, tol.tol_val, nash_set.dependence_mask(nmap))
    lines.append(f"security-level violations: {n1}; terminal violations: {n2}")
    if n1 or n2:
        status = EXIT_FAIL
    if _is_example(cfg):
        h, where = _hausdorff_vs_oracle(nmap, _trusted(cfg.grid, cfg.spec))
        ok = h <= tol.tol_set
        status = status if ok else EXIT_FAIL
        at = "" if where is None else f" at k={where[0]}, x={cfg.grid.nodes[where[1]].round(9).tolist()}"
        lines.append(f"Hausdorff distance to the closed-form map: {h:.4g}{at} "
                     f"[{'ok' if ok else 'FAIL'} vs tol_set {tol.tol_set:.4g}]")
    _write(out / "build_report.txt", "\n".join(lines))
    print("\n".join(lines))
    print(f"build time: {rep.seconds:.1f}s")
    return status


def cmd_verify(cfg: RunConfig, map_path: str, exhaustive: bool = False) -> int:
    out = cfg.ensure_out_dir()
    w1 = zero_sum.solve_lower_value(cfg.spec, cfg.grid, 1, stride=cfg.stride)
    w2 = zero_sum.solve_lower_value(cfg.spec, cfg.grid, 2, stride=cfg.stride)
    nmap = nash_set.read_map(map_path, cfg.spec, cfg.grid, (w1, w2))
    tol = cfg.tolerances
    rep = nash_set.verify_map(nmap, hull_density=cfg.hull_density, tol_dd=tol.tol_dd, tol_val=tol.tol_val,
                              seed=cfg.seed, exhaustive=exhaustive)
    text = rep.summary(cfg.grid, timing=False)
    _write(out / "verify_report.txt", text)
    rep.write_csv(out / "verify_residuals.csv")
    print(text)
    print(f"verify time: {rep.seconds:.1f}s")
    return EXIT_PASS if rep.passed else EXIT_FAIL


def cmd_check_pair(cfg: RunConfig, pair_name: str, gamma: float, fields, n_points: int) -> int:
    out = cfg.ensure_out_dir()
    tol = cfg.tolerances
    if fields:
        c1 = zero_sum.read_field_csv(fields[0])
        c2 = zero_sum.read_field_csv(fields[1])
        pair = smooth_verifier.pair_from_fields(c1, c2)
        grid = c1.grid
    else:
        pair = smooth_verifier.catalog_pair(pair_name, gamma)
        grid = cfg.grid
    cor = smooth_verifier.check_corollary(pair, cfg.spec, grid, n_points=n_points, tol_visc=tol.tol_visc,
                                          tol_dd=tol.tol_dd, tol_val=tol.tol_val, seed=cfg.seed)
    pts = smooth_verifier.sample_points(grid, min(n_points, 200), cfg.seed + 1,
                                        t_margin=max(smooth_verifier.default_schedule(pair)))
    prop = smooth_verifier.check_proposition2(pair, cfg.spec, pts, tol_visc=tol.tol_visc)
    text = f"pair: {pair.name}\n[corollary]\n{cor.summary()}\n[proposition]\n{prop.summary()}"
    _write(out / "check_pair_report.txt", text)
    cor.write_csv(out / "corollary_points.csv")
    prop.write_csv(out / "proposition_points.csv")
    print(text)
    # the smooth-system check only applies where it finds no kink; the corollary decides
    return EXIT_PASS if cor.passed else EXIT_FAIL


def cmd_simulate(cfg: RunConfig, x0: str, t0, target, eps: str, deviant: str, map_path) -> int:
    out = cfg.ensure_out_dir()
    w1, w2, c1, c2 = _solve_all(cfg)
    tol = cfg.tolerances
    if map_path:
        nmap = nash_set.read_map(map_path, cfg.spec, cfg.grid, (w1, w2))
    else:
        nmap = nash_set.build_nash_map(cfg.spec, cfg.grid, w1, w2, cfg.hull_density, tol.quantum, tol.tol_inv,
                                       stride=cfg.stride, seed=cfg.seed)
    t_star = cfg.grid.t0 if t0 is None else t0
    x_star = np.array(_floats(x0))
    if target is None:
        k = int(np.rint(cfg.grid.time_index(t_star)))
        pts = nmap.cloud_points(k, cfg.grid.nearest_node(x_star))
        if len(pts) == 0:
            raise NashGameError("the payoff map is empty at the initial position")
        J = pts[0]
    else:
        J = np.array(_floats(target))
    prof = simulator.make_punishment_profile(nmap, w1, w2, t_star, x_star, J, tol_set=tol.tol_set)
    prof.agreed.write_csv(out / "agreed_trajectory.csv")
    eps_list = tuple(_floats(eps))
    lines = [f"target: ({J[0]:.6g}, {J[1]:.6g}); agreed payoffs: {prof.agreed.payoffs}"]
    status = EXIT_PASS
    for dev in ((1, 2) if deviant == "both" else (int(deviant),)):
        rep = simulator.deviation_experiment(cfg.spec, prof, dev, eps_schedule=eps_list, seed=cfg.seed,
                                             coop=c1 if dev == 1 else c2)
        rep.write_csv(out / f"deviation_runs_player{dev}.csv")
        base = simulator.simulate(cfg.spec, t_star, x_star, prof.U, eps_list[-1], prof.V, eps_list[-1], cfg.seed)
        base.write_csv(out / "profile_trajectory.csv")
        lines.append(rep.summary())
        status = status if rep.passed else EXIT_FAIL
    _write(out / "simulate_report.txt", "\n".join(lines))
    print("\n".join(lines))
    return status


def cmd_oracle(cfg: RunConfig) -> int:
    if not _is_example(cfg):
        raise NashGameError("the closed-form oracle only covers the planar example game")
    out = cfg.ensure_out_dir()
    g = cfg.grid
    fns = {"omega1": oracle.omega1_exact, "omega2": oracle.omega2_exact,
           "c1_plus": lambda t, x, y: oracle.c_plus_exact(1, t, x, y),
           "c2_plus": lambda t, x, y: oracle.c_plus_exact(2, t, x, y)}
    for label, fn in fns.items():
        fld = zero_sum.field_from_function(g, lambda t, X, fn=fn: fn(t, X[:, 0], X[:, 1]), label)
        zero_sum.write_field_csv(fld, out / f"{label}_exact.csv")
    nmap = oracle.exact_nash_map(g, cfg.tolerances.quantum)
    nash_set.write_map(nmap, out / "nashmap_exact.txt")
    print(f"wrote closed-form fields and map ({len(nmap.points)} points) to {out}")
    return EXIT_PASS


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config(args)
        if args.command == "solve":
            return cmd_solve(cfg)
        if args.command == "nash":
            return cmd_nash(cfg)
        if args.command == "verify":
            return cmd_verify(cfg, args.map, args.exhaustive)
        if args.command == "check-pair":
            return cmd_check_pair(cfg, args.pair, args.gamma, args.fields, args.points)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.x0, args.t0, args.target, args.eps, args.deviant, args.map)
        return cmd_oracle(cfg)
    except (NashGameError, OSError) as exc:
        print(f"nashgame: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
