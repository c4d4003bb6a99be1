"""Command-line front end.

Every run prints one JSON record per line (to stdout, or to stderr when the
data payload itself goes to stdout).  Exit codes: 0 pass, 1 violation found,
2 usage or execution error.

Vectors are comma-separated; write ``--x0=-0.1,0.2`` when the first entry is
negative so the value is not mistaken for a flag.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .c_exp import CExpError, c_exp, c_segment
from .config import KEYS, ConfigError, digest, load_config, parse_value
from .cost_model import (BUILTIN_NAMES, CostError, DomainBox, builtin_cost,
                         default_domains, verify_a1a2)

EXIT_PASS, EXIT_VIOLATION, EXIT_ERROR = 0, 1, 2


class UsageError(ValueError):
    pass


# -- records -----------------------------------------------------------------

def _plain(v):
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, np.ndarray):
        return _plain(v.tolist())
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if np.isfinite(v) else repr(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def make_record(command: str, cfg: dict, results: dict, verdict: str, seconds: float) -> dict:
    return {
        "command": command,
        "config": _plain(cfg),
        "config_digest": digest(_plain(cfg)),
        "results": _plain(results),
        "verdict": verdict,
        "version": __version__,
        "timing": {"seconds": round(seconds, 6)},
    }


# -- configuration -----------------------------------------------------------

def resolve_config(args: argparse.Namespace) -> dict:
    cfg = {}
    if getattr(args, "config", None):
        cfg.update(load_config(args.config))
    for key in KEYS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = parse_value(key, val) if isinstance(val, str) else val
    return cfg


def need(cfg: dict, *keys):
    missing = [k for k in keys if k not in cfg]
    if missing:
        raise UsageError("missing required setting(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))
    return [cfg[k] for k in keys]


def cost_from(cfg: dict):
    name = cfg.get("cost", "quadratic")
    params = cfg.get("params")
    if "eps" in cfg:
        params = [cfg["eps"]]
    if "power" in cfg:
        params = [cfg["power"]]
    c = builtin_cost(name, dim=cfg.get("dim", 2), params=params or (),
                     excluded_diagonal_radius=cfg.get("excluded_radius"))
    om, om_s = default_domains(c)
    if "omega_lower" in cfg or "omega_upper" in cfg:
        om = DomainBox(cfg.get("omega_lower", om.lower), cfg.get("omega_upper", om.upper),
                       om.excluded_diagonal_radius)
    if "omega_star_lower" in cfg or "omega_star_upper" in cfg:
        om_s = DomainBox(cfg.get("omega_star_lower", om_s.lower), cfg.get("omega_star_upper", om_s.upper),
                         om_s.excluded_diagonal_radius)
    return c, om, om_s


def vec(cfg, key):
    return np.asarray(cfg[key], float)


# -- commands ----------------------------------------------------------------

def cmd_costs(args, cfg):
    rows = []
    for name in BUILTIN_NAMES:
        c = builtin_cost(name)
        om, om_s = default_domains(c)
        rows.append({"name": name, "params": list(c.params), "omega": om.to_dict(), "omega_star": om_s.to_dict(),
                     "excluded_diagonal_radius": c.excluded_diagonal_radius})
    return {"costs": rows}, "pass"


def cmd_check(args, cfg):
    c, om, om_s = cost_from(cfg)
    seed = cfg.get("seed", 0)
    if args.what == "a1a2":
        rep = verify_a1a2(c, om, om_s, samples=cfg.get("samples", 1000), seed=seed)
        return rep.to_dict(), "pass" if rep.ok else "violation"
    from .mtw import check_duality_invariance, scan

    method = cfg.get("method", "a3v")
    budget = cfg.get("budget", 10_000)
    if args.what == "mtw":
        rep = scan(c, om, om_s, method, budget, seed, tol=cfg.get("tol"))
        return rep.to_dict(), "pass" if rep.passed else "violation"
    rep = check_duality_invariance(c, om, om_s, method, budget, seed)
    res = {"primal": rep.primal.to_dict(), "dual": rep.dual.to_dict(), "agree": rep.agree}
    return res, "pass" if rep.agree else "violation"


def cmd_cexp(args, cfg):
    c, om, om_s = cost_from(cfg)
    x, p = need(cfg, "x", "p")
    r = c_exp(c, x, p, y_init=cfg.get("y_init"), box=om_s)
    return {"y": r.y, "iterations": r.iterations, "residual": r.residual, "converged": r.converged}, "pass"


def cmd_segment(args, cfg):
    c, om, om_s = cost_from(cfg)
    need(cfg, "x0", "y0", "y1")
    thetas = cfg.get("thetas", list(np.linspace(0, 1, 11)))
    seg = c_segment(c, vec(cfg, "x0"), vec(cfg, "y0"), vec(cfg, "y1"), thetas, box=om_s)
    return {"thetas": seg.thetas, "ys": seg.ys, "residuals": seg.residuals, "p0": seg.p0, "p1": seg.p1}, "pass"


def _payload(args, cfg, text: str) -> bool:
    """Write a data payload; returns True when it went to stdout."""
    if "out" in cfg:
        Path(cfg["out"]).write_text(text)
        return False
    sys.stdout.write(text)
    return True


def cmd_section(args, cfg):
    from . import sections as S

    c, om, om_s = cost_from(cfg)
    mode = args.what
    res_n = cfg.get("resolution", 128 if mode != "converge" else 256)
    if mode == "trace":
        need(cfg, "x0", "y0", "y1", "theta")
        spec = S.SectionSpec(vec(cfg, "x0"), vec(cfg, "y0"), vec(cfg, "y1"), cfg["theta"])
        mesh = S.section_boundary(c, spec, res_n, om, om_s)
        args._stdout_used = _payload(args, cfg, mesh.to_csv())
        res = {"vertices": int(mesh.points.shape[0]), "polylines": len(mesh.polylines), "empty": mesh.empty,
               "max_abs_h": mesh.max_abs_h}
        return res, "pass" if mesh.max_abs_h <= S.MESH_TOL else "violation"
    if mode == "converge":
        need(cfg, "x0", "y0", "y1")
        thetas = cfg.get("thetas", [0.2, 0.1, 0.05, 0.025])
        radius = cfg.get("ball_radius", 0.25 * om.diagonal)
        rep = S.hausdorff_convergence(c, vec(cfg, "x0"), vec(cfg, "y0"), vec(cfg, "y1"), thetas, radius,
                                      res_n, om, om_s)
        args._stdout_used = _payload(args, cfg, rep.to_csv())
        res = {"thetas": rep.thetas, "distances": rep.distances, "ratios": rep.ratios,
               "ball_radius": rep.ball_radius, "clipped": rep.clipped, "monotone": rep.monotone}
        return res, "pass" if rep.monotone else "violation"
    if mode == "sff":
        if "x0" in cfg:
            need(cfg, "y0", "y1")
            thetas = cfg.get("thetas", list(S.SFF_THETAS))
            r = S.sff_monotonicity_test(c, vec(cfg, "x0"), vec(cfg, "y0"), vec(cfg, "y1"), thetas, box=om_s)
            tol = cfg.get("tol", S.SFF_TOL)
            return ({"thetas": r.thetas, "values": r.values, "margins": r.margins, "worst": r.worst,
                     "tolerance": tol}, "pass" if r.worst >= -tol else "violation")
        rep = S.sff_scan(c, om, om_s, cfg.get("configs", 1000), cfg.get("seed", 0), tol=cfg.get("tol", S.SFF_TOL))
        return rep.to_dict(), "pass" if rep.passed else "violation"
    # nest
    if "x0" in cfg:
        need(cfg, "y0", "y1")
        th = cfg.get("thetas", [0.25, 0.5, 1.0])
        pairs = list(zip(th[:-1], th[1:]))
        r = S.section_nesting_test(c, vec(cfg, "x0"), vec(cfg, "y0"), vec(cfg, "y1"), pairs, res_n, om, om_s,
                                   tol=cfg.get("tol"))
        return ({"pairs": r.pairs, "violations": r.violations, "total": r.total, "tolerance": r.tolerance},
                "pass" if r.total == 0 else "violation")
    rep = S.nesting_scan(c, om, om_s, cfg.get("configs", 100), cfg.get("seed", 0), resolution=res_n)
    return rep.to_dict(), "pass" if rep.passed else "violation"


def _load_phi(cfg):
    from .transform import GridPotential

    (path,) = need(cfg, "phi")
    return GridPotential.load(path)


def cmd_transform(args, cfg):
    from .transform import Grid, c_star_transform, c_transform

    c, om, om_s = cost_from(cfg)
    phi = _load_phi(cfg)
    (out,) = need(cfg, "out")
    star = cfg.get("star", False)
    target_box = om if star else om_s
    target = Grid(target_box, cfg.get("resolution", phi.resolution))
    res = (c_star_transform if star else c_transform)(phi, c, target)
    res.save(out, binary=cfg.get("binary", False))
    return {"out": out, "resolution": target.resolution, "min": res.values.min(), "max": res.values.max()}, "pass"


def cmd_contact(args, cfg):
    from .transform import contact_set

    c, om, om_s = cost_from(cfg)
    phi = _load_phi(cfg)
    (y,) = need(cfg, "y")
    cs = contact_set(phi, None, c, np.asarray(y, float), tol=cfg.get("tol"))
    res = {"y": cs.y, "size": int(cs.mask.sum()), "component_count": cs.component_count,
           "tolerance": cs.tolerance, "empty": cs.empty}
    return res, "pass" if cs.component_count <= 1 else "violation"


def cmd_potential(args, cfg):
    from .transform import Grid, random_c_affine_max, random_smooth_c_convex

    c, om, om_s = cost_from(cfg)
    (out,) = need(cfg, "out")
    rng = np.random.default_rng(cfg.get("seed", 0))
    grid = Grid(om, cfg.get("resolution", 64))
    kind = cfg.get("kind", "affine")
    if kind == "affine":
        phi, _ = random_c_affine_max(c, grid, om_s.sample(rng, 5), rng)
    elif kind == "smooth":
        phi, _, _ = random_smooth_c_convex(c, grid, om_s, rng)
    else:
        raise UsageError(f"unknown potential kind {kind!r}")
    phi.save(out, binary=cfg.get("binary", False))
    return {"out": out, "kind": kind, "resolution": grid.resolution}, "pass"


def cmd_localglobal(args, cfg):
    from .transform import Grid, GridPotential, local_global_experiment, random_smooth_c_convex

    c, om, om_s = cost_from(cfg)
    if "phi" in cfg:
        pots = [GridPotential.load(cfg["phi"])]
    else:
        rng = np.random.default_rng(cfg.get("seed", 0))
        grid = Grid(om, cfg.get("resolution", 64))
        pots = [random_smooth_c_convex(c, grid, om_s, rng)[0] for _ in range(cfg.get("potentials", 10))]
    summaries = []
    for phi in pots:
        rep = local_global_experiment(phi, c, r_local=cfg.get("r_local"), tol=cfg.get("tol"), omega_star=om_s)
        summaries.append(rep.summary())
    bad = sum(s["locally_not_globally"] for s in summaries)
    return {"potentials": summaries, "locally_not_globally": bad}, "pass" if bad == 0 else "violation"


# -- parser ------------------------------------------------------------------

def _add_keys(p: argparse.ArgumentParser, keys):
    for k in keys:
        p.add_argument("--" + k.replace("_", "-"), dest=k, default=None, metavar="V", help=KEYS[k][1])


COMMON = ["cost", "params", "eps", "power", "dim", "excluded_radius", "omega_lower", "omega_upper",
          "omega_star_lower", "omega_star_upper", "seed", "tol", "record"]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mtwgeom", description="Geometry of the weak MTW condition for transport costs.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def command(name, func, keys, what=None, **kw):
        p = sub.add_parser(name, **kw)
        if what:
            p.add_argument("what", choices=what)
        p.add_argument("--config", default=None, help="plain-text key = value configuration file")
        _add_keys(p, COMMON + [k for k in keys if k not in COMMON])
        p.set_defaults(func=func)
        return p

    command("costs", cmd_costs, [], what=["list"], help="list built-in costs")
    command("check", cmd_check, ["method", "budget", "samples"], what=["a1a2", "mtw", "duality"],
            help="A1/A2, MTW scan or duality check")
    command("cexp", cmd_cexp, ["x", "p", "y_init"], help="evaluate the c-exponential")
    command("segment", cmd_segment, ["x0", "y0", "y1", "thetas"], help="sample a c-segment")
    command("section", cmd_section, ["x0", "y0", "y1", "theta", "thetas", "resolution", "ball_radius", "configs",
                                     "out"], what=["trace", "converge", "sff", "nest"], help="section geometry")
    command("transform", cmd_transform, ["phi", "out", "resolution", "binary", "star"], help="c- or c*-transform")
    command("contact", cmd_contact, ["phi", "y"], help="contact set at y")
    command("potential", cmd_potential, ["out", "resolution", "kind", "binary"], help="random c-convex potential")
    command("localglobal", cmd_localglobal, ["phi", "resolution", "potentials", "r_local"],
            help="local versus global support experiment")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_ERROR
    command = args.command + (" " + args.what if hasattr(args, "what") else "")
    args._stdout_used = False
    t0 = time.perf_counter()
    cfg = {}
    try:
        cfg = resolve_config(args)
        results, verdict = args.func(args, cfg)
        code = EXIT_PASS if verdict == "pass" else EXIT_VIOLATION
    except (ConfigError, UsageError, CostError, CExpError, ValueError, ArithmeticError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        results, verdict, code = {"error": f"{type(exc).__name__}: {exc}"}, "error", EXIT_ERROR
    rec = make_record(command, cfg, results, verdict, time.perf_counter() - t0)
    line = json.dumps(rec, sort_keys=True)
    if "record" in cfg:
        with open(cfg["record"], "a") as fh:
            fh.write(line + "\n")
    else:
        print(line, file=sys.stderr if args._stdout_used else sys.stdout)
    return code


if __name__ == "__main__":
    sys.exit(main())
