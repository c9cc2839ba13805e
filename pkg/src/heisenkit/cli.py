"""Command-line entry point.

Exit codes: 0 when every check passes, 1 when a check or a solver fails,
2 for usage and configuration errors (bad JSON, unknown suite, rejected
inputs such as q <= 0).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .grids import Box3, Box4, GeometryError
from .io import load_grid_binary, save_grid_binary, write_csv, write_json

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class ConfigError(ValueError):
    pass


def _load_config(path) -> dict:
    if path is None:
        return {}
    p = Path(path)
    try:
        cfg = json.loads(p.read_text())
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {p}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"{p}: invalid JSON ({e})") from e
    if not isinstance(cfg, dict):
        raise ConfigError(f"{p}: the top level must be an object")
    cfg.setdefault("_base", str(p.parent))
    return cfg


def _box(d: dict, dim: int):
    try:
        lower, upper, counts = tuple(d["lower"]), tuple(d["upper"]), tuple(int(c) for c in d["counts"])
    except (KeyError, TypeError) as e:
        raise ConfigError(f"box needs lower, upper and counts: {d!r}") from e
    if len(lower) != dim:
        raise ConfigError(f"expected a {dim}-D box")
    return Box4(lower, upper, counts, y_ratio=float(d.get("y_ratio", 1.0))) if dim == 4 else Box3(lower, upper, counts)


def _path(cfg, key):
    p = Path(cfg[key])
    return p if p.is_absolute() else Path(cfg.get("_base", ".")) / p


def _provenance(args, cfg, artifacts) -> dict:
    return {"tool": "heisenkit", "version": __version__, "subcommand": args.command,
            "seed": args.seed, "tol_scale": args.tol_scale,
            "config": {k: v for k, v in cfg.items() if not k.startswith("_")},
            "artifacts": sorted(artifacts)}


def _finish(args, cfg, artifacts, report, ok: bool) -> int:
    out = Path(args.out)
    write_json(out / f"{args.command}.json", report)
    write_json(out / "provenance.json", _provenance(args, cfg, artifacts + [f"{args.command}.json"]))
    print(f"{args.command}: {'pass' if ok else 'FAIL'} -> {out}")
    return EXIT_PASS if ok else EXIT_FAIL


# ----------------------------------------------------------------------------- verify

def cmd_verify(args) -> int:
    from .verify import SUITES, run_suite
    names = sorted(SUITES) if args.suite == "all" else [args.suite]
    if any(n not in SUITES for n in names):
        print(f"unknown suite {args.suite!r}; choose from: all, {', '.join(sorted(SUITES))}", file=sys.stderr)
        return EXIT_USAGE
    cfg = _load_config(args.config)
    user = {k: v for k, v in cfg.items() if not k.startswith("_")}
    out = Path(args.out)
    ok = True
    for n in names:
        sub = user.get(n, user) if args.suite == "all" else user
        rep = run_suite(n, seed=args.seed, tol_scale=args.tol_scale, threads=args.threads, config=sub)
        write_json(out / f"verify_{n}.json", rep.as_dict())
        status = "pass" if rep.passed else "FAIL " + ", ".join(rep.failures())
        print(f"verify {n}: {status}")
        ok &= rep.passed
    return EXIT_PASS if ok else EXIT_FAIL


# ----------------------------------------------------------------------------- kernels

KERNEL_DEFAULTS = {
    "s": 0.5,
    "t": [0.25, 0.5, 1.0],
    "heat_box": {"lower": [-8, -8, -24], "upper": [8, 8, 24], "counts": [48, 48, 96]},
    "poisson_box": {"lower": [-2, -2, -3], "upper": [2, 2, 3], "counts": [9, 9, 9]},
    "y": [0.5, 1.0, 2.0],
}


def cmd_kernels(args) -> int:
    from .kernels import heat_kernel, poisson_table
    cfg = {**KERNEL_DEFAULTS, **_load_config(args.config)}
    out = Path(args.out)
    ts = args.tol_scale
    heat = heat_kernel(cfg["t"], _box(cfg["heat_box"], 3), {"mass_tol": float("inf")})
    pt = poisson_table(float(cfg["s"]), cfg["y"], _box(cfg["poisson_box"], 3))
    arts = []
    g3 = heat.box.grid()
    for k, t in enumerate(heat.t):
        name = f"heat_t{k}.bin"
        save_grid_binary(out / name, heat.values[k], g3)
        arts.append(name)
    gp = pt.box.grid()
    for k, y in enumerate(pt.y):
        name = f"poisson_y{k}.bin"
        save_grid_binary(out / name, pt.values[k].reshape(gp.shape), gp)
        arts.append(name)
    checks = {
        "heat_mass_defect": [float(heat.mass_defect.max()), 1e-3 * ts],
        "heat_homogeneity": [float(max(heat.homogeneity_residual.values())), 1e-2 * ts],
        "poisson_mass_defect": [float(np.max(np.abs(pt.mass - 1))), 1e-2 * ts],
        "poisson_scaling": [float(pt.scaling_residual.max()), 1e-2 * ts],
        "poisson_negative_part": [float(max(0.0, -pt.values.min())), 0.0],
    }
    ok = all(v <= t for v, t in checks.values())
    report = {"eq": ["eq:2-3", "eq:2-4"], "heat": heat.sidecar(), "poisson": pt.sidecar(),
              "checks": {k: {"value": v, "tol": t, "passed": v <= t} for k, (v, t) in checks.items()}}
    return _finish(args, cfg, arts, report, ok)


# ----------------------------------------------------------------------------- solve

def _solve(cfg):
    from .extension import ExtensionProblem, energy_descent, solve_neumann_reaction
    if "problem" not in cfg:
        raise ConfigError("solve needs a 'problem' object")
    prob = ExtensionProblem.from_dict(cfg["problem"])
    method = cfg.get("method", "descent")
    if method == "descent":
        u, info = energy_descent(prob, return_info=True)
    elif method == "newton":
        u, info = solve_neumann_reaction(prob, return_info=True)
    else:
        raise ConfigError(f"unknown method {method!r} (descent or newton)")
    return prob, u, info


def cmd_solve(args) -> int:
    from .svg import line_plot
    cfg = _load_config(args.config)
    prob, u, info = _solve(cfg)
    out = Path(args.out)
    save_grid_binary(out / "solution.bin", u.values, u.grid)
    E = np.array(info.energy_trace)
    write_csv(out / "energy.csv", ["iteration", "energy"], [np.arange(E.size), E])
    arts = ["solution.bin", "energy.csv"]
    if E.size:
        line_plot(out / "energy.svg", [(np.arange(E.size), E, "energy")], "discrete energy", "iteration", "E")
        arts.append("energy.svg")
    report = {"eq": ["eq:1-2", "eq:1-3"], "problem": prob.to_dict(), "method": info.method,
              "iterations": info.iterations, "residual": info.residual,
              "energy_final": float(E[-1]) if E.size else None,
              "energy_monotone": bool(np.all(np.diff(E) <= 1e-12 * max(1.0, np.abs(E).max()))) if E.size else True,
              "solution": {"min": float(u.values.min()), "max": float(u.values.max()), "shape": list(u.values.shape)}}
    return _finish(args, cfg, arts, report, True)


# ----------------------------------------------------------------------------- rigidity

def _stored_solution(cfg):
    from .fields import GridField
    if "solution" in cfg:
        vals, grid = load_grid_binary(_path(cfg, "solution"))
        if grid.dim != 4:
            raise ConfigError("rigidity needs a 4-D solution grid")
        return GridField(vals, grid), float(cfg.get("a", 0.0))
    if "problem" in cfg:
        prob, u, _ = _solve(cfg)
        return u, prob.a
    raise ConfigError("rigidity needs 'solution' (a grid file) or 'problem'")


def cmd_rigidity(args) -> int:
    from .extension import CompactBump
    from .rigidity import BallRule, geometric_inequality_report, growth_criterion, weighted_energy
    from .svg import line_plot
    cfg = _load_config(args.config)
    u, a = _stored_solution(cfg)
    lo, hi = u.grid.lower, u.grid.upper
    ph = cfg.get("phi", {})
    center = ph.get("center", [0.5 * (l + h) for l, h in zip(lo[:3], hi[:3])] + [0.0])
    radii = ph.get("radii", [0.3 * (h - l) for l, h in zip(lo, hi)][:3] + [0.6 * hi[3]])
    phi = CompactBump(center, radii, k=int(ph.get("k", 4)))
    rep = geometric_inequality_report(u, phi, a, cfg.get("eps_grad"))
    tol = 1e-3 * args.tol_scale
    ok = rep.holds(tol)
    out = Path(args.out)
    arts = []
    max_tau = BallRule(u.grid, a).max_tau
    tau = np.asarray(cfg.get("tau", np.geomspace(0.05 * max_tau, max_tau, 24)), float)
    prof = weighted_energy(u, a, tau)
    write_csv(out / "energy_profile.csv", ["tau", "eta"], [prof.tau, prof.eta])
    arts.append("energy_profile.csv")
    default_R = np.geomspace(1.05, max_tau, 6) if max_tau > 1.05 else []
    Rs = np.asarray(cfg.get("R", [R for R in default_R if np.sqrt(R) >= tau[0]]), float)
    crit = None
    if Rs.size and Rs.max() > 1:
        Rs = Rs[Rs > 1]
        crit = growth_criterion(prof, Rs)
        write_csv(out / "criterion.csv", ["R", "quotient"], [crit.R, crit.quotient])
        arts.append("criterion.csv")
    line_plot(out / "energy_profile.svg", [(prof.tau, prof.eta, "eta")], "weighted energy", "tau", "eta",
              logx=True, logy=True)
    arts.append("energy_profile.svg")
    report = {"eq": "eq:1-7", "inequality": rep.as_dict(), "tolerance": {"margin_over_scale_min": -tol},
              "holds": ok, "a": a,
              "phi": {"center": list(map(float, center)), "radii": list(map(float, radii)), "k": phi.k},
              "energy_profile": {"eq": "eq:1-8", "tau": prof.tau, "eta": prof.eta, "monotone": prof.monotone},
              "grid": {"lower": lo, "upper": hi, "shape": list(u.grid.shape)}}
    if crit is not None:
        report["criterion"] = {"eq": "eq:1-10", "R": crit.R, "quotient": crit.quotient,
                               "sup_eta_over_R4": crit.sup_eta_over_R4, "trend": crit.trend, "note": crit.note}
    return _finish(args, cfg, arts, report, ok)


# ----------------------------------------------------------------------------- curvature

def cmd_curvature(args) -> int:
    from .fields import GridField, SymbolicField
    from .levelset import default_eps_grad, export_frames_csv, regular_points
    cfg = _load_config(args.config)
    out = Path(args.out)
    if "u" in cfg:
        box = _box(cfg.get("box", {"lower": [-1, -1, -1], "upper": [1, 1, 1], "counts": [9, 9, 9]}),
                   len(cfg.get("box", {}).get("lower", [0, 0, 0])))
        u = SymbolicField(cfg["u"], box.ndim)
        grid = box.grid()
    elif "solution" in cfg:
        vals, grid = load_grid_binary(_path(cfg, "solution"))
        u = GridField(vals, grid)
        # frames need second differences, so keep two nodes away from every face
        sl = tuple(slice(2, n - 2) if k < 3 else slice(1, n - 2) for k, n in enumerate(grid.shape))
        from .grids import TensorGrid
        grid = TensorGrid(tuple(ax[s] for ax, s in zip(grid.axes, sl)))
    else:
        raise ConfigError("curvature needs 'u' (expression) or 'solution' (grid file)")
    eps = cfg.get("eps_grad", default_eps_grad(u))
    export_frames_csv(out / "frames.csv", u, grid, eps)
    mask, fr = regular_points(u, grid.points().reshape(-1, grid.dim), eps)
    report = {"eq": ["eq:1-6", "lemma4"], "eps_grad": eps, "n_nodes": int(mask.size), "n_regular": int(mask.sum())}
    if mask.any():
        report.update(h={"min": float(np.min(fr.h)), "max": float(np.max(fr.h))},
                      p={"min": float(np.min(fr.p)), "max": float(np.max(fr.p))})
    return _finish(args, cfg, ["frames.csv"], report, True)


# ----------------------------------------------------------------------------- entry

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--out", default="heisenkit-out", help="output directory (default: heisenkit-out)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    common.add_argument("--tol-scale", type=float, default=1.0, dest="tol_scale",
                        help="multiply every tolerance by this factor")
    p = argparse.ArgumentParser(prog="heisenkit", description="Numerical calculus and checks on the Heisenberg group.")
    p.add_argument("--version", action="version", version=f"heisenkit {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    v = sub.add_parser("verify", parents=[common], help="run a verification suite")
    v.add_argument("suite", help="suite name or 'all'")
    for name, hlp in (("kernels", "build heat and Poisson kernel tables"),
                      ("solve", "solve an extension problem"),
                      ("rigidity", "evaluate the geometric inequality on a stored solution"),
                      ("curvature", "export level-set frames and curvatures")):
        sub.add_parser(name, parents=[common], help=hlp)
    return p


COMMANDS = {"verify": cmd_verify, "kernels": cmd_kernels, "solve": cmd_solve, "rigidity": cmd_rigidity,
            "curvature": cmd_curvature}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else EXIT_PASS
    if args.tol_scale <= 0 or args.threads < 1:
        print("--tol-scale must be positive and --threads at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, GeometryError, KeyError, TypeError, ValueError) as e:
        print(f"heisenkit {args.command}: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (RuntimeError, ArithmeticError) as e:
        print(f"heisenkit {args.command}: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
