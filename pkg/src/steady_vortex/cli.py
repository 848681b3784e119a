"""Command-line entry point: ``steady-vortex <subcommand> [--config FILE] [--set key=value ...]``.

Configuration is flat ``key = value`` text with dotted sections, for example::

    geometry.kind = disc
    solver.epsilon = 0.05
    profile.p = 1

Unknown keys are rejected. Every artifact goes under ``--out`` and every
float is written with 17 significant digits, so identical inputs give
byte-identical files.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import asymptotics, landscape, pointvortex, profiles, solver
from .domain import (
    CustomMask,
    Disc,
    DomainError,
    GreenOperator,
    GreenSolveError,
    Rectangle,
    StreamField,
    VorticityField,
    build_domain,
    dump_grid_csv,
)

log = logging.getLogger("steady_vortex")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3


class ConfigKeyError(ValueError):
    pass


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]


def _point(text: str) -> tuple[float, float]:
    v = _floats(text)
    if len(v) != 2:
        raise ValueError(f"expected 'x,y', got {text!r}")
    return (v[0], v[1])


def _points(text: str) -> list[tuple[float, float]]:
    return [_point(p) for p in text.split(";") if p.strip()]


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _optional_point(text: str):
    return None if text.strip().lower() in ("", "none", "auto") else _point(text)


def _resolution(text: str):
    return "auto" if text.strip().lower() == "auto" else int(text)


# key -> (parser, default)
SCHEMA = {
    "geometry.kind": (str, "disc"),
    "geometry.center": (_point, (0.0, 0.0)),
    "geometry.radius": (float, 1.0),
    "geometry.width": (float, 2.0),
    "geometry.height": (float, 1.0),
    "geometry.corner": (_point, (0.0, 0.0)),
    "geometry.mask_file": (str, ""),
    "geometry.spacing": (float, 0.0),
    "geometry.origin": (_point, (0.0, 0.0)),
    "grid.resolution": (_resolution, 128),
    "grid.rule": (str, "pow2"),
    "green.backend": (str, "finite-difference"),
    "green.rtol": (float, 1e-9),
    "profile.name": (str, "power"),
    "profile.p": (float, 1.0),
    "profile.kappa": (float, 1.0),
    "profile.samples": (int, 4001),
    "hypotheses.s_max": (float, 100.0),
    "hypotheses.n": (int, 200),
    "hypotheses.tau": (_floats, [0.5, 1.0, 2.0]),
    "solver.epsilon": (float, 0.05),
    "solver.Lambda": (float, 50.0),
    "solver.kappa": (float, 1.0),
    "solver.tol_fixed_point": (float, 1e-10),
    "solver.tol_mu": (float, 1e-12),
    "solver.max_iter": (int, 5000),
    "solver.damping": (float, 1.0),
    "solver.center": (_optional_point, None),
    "solver.escalations": (int, 4),
    "sweep.epsilons": (_floats, [0.2, 0.1, 0.05, 0.025]),
    "sweep.profile_l2": (_bool, True),
    "vortices.points": (_points, [(0.0, 0.0)]),
    "vortices.strengths": (_floats, [1.0]),
    "vortices.radius": (float, 0.1),
    "robin.point": (_point, (0.5, 0.0)),
    "kr.init": (str, "multistart"),
    "kr.tol": (float, 1e-9),
    "kr.starts": (int, 32),
    "kr.max_iter": (int, 20000),
    "kr.confine": (_bool, False),
    "pv.dt": (float, 1e-3),
    "pv.T": (float, 1.0),
    "pv.sample_every": (int, 10),
    "pv.self_test": (_bool, True),
    "output.dump_fields": (_bool, True),
    "seed": (int, 0),
}


def parse_config(lines, overrides=()) -> dict:
    """Parse ``key = value`` lines (``#`` starts a comment) plus ``key=value`` overrides."""
    raw: dict[str, str] = {}
    for n, line in enumerate(list(lines) + list(overrides), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigKeyError(f"line {n}: expected 'key = value', got {line!r}")
        k, v = (s.strip() for s in line.split("=", 1))
        if k not in SCHEMA:
            raise ConfigKeyError(f"unknown config key {k!r}")
        raw[k] = v
    cfg = {}
    for k, (parse, default) in SCHEMA.items():
        if k in raw:
            try:
                cfg[k] = parse(raw[k])
            except ValueError as exc:
                raise ConfigKeyError(f"config key {k!r}: {exc}") from None
        else:
            cfg[k] = default
    return cfg


# --------------------------------------------------------------------------
# output


def _fmt_json(obj, indent=0) -> str:
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{pad}"{k}": {_fmt_json(obj[k], indent + 1)}' for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        vals = [_fmt_json(v, indent + 1) for v in obj]
        if not vals:
            return "[]"
        return "[" + ", ".join(vals) + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return f"{v:.17g}" if math.isfinite(v) else "null"
    if obj is None:
        return "null"
    s = str(obj).replace("\\", "\\\\").replace('"', '\\"')
    return f'"{s}"'


def write_json(path: Path, obj) -> None:
    path.write_text(_fmt_json(obj) + "\n")


def _setup_logging(verbose: bool) -> None:
    color = not os.environ.get("VORTEX_NO_COLOR") and sys.stderr.isatty()
    fmt = "\033[2m%(levelname)s\033[0m %(message)s" if color else "%(levelname)s %(message)s"
    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter(fmt))
    log.handlers[:] = [handler]
    log.setLevel(logging.INFO if verbose else logging.WARNING)
    log.propagate = False


# --------------------------------------------------------------------------
# builders


def make_geometry(cfg: dict):
    kind = cfg["geometry.kind"]
    if kind == "disc":
        return Disc(cfg["geometry.center"], cfg["geometry.radius"])
    if kind == "rectangle":
        return Rectangle(cfg["geometry.width"], cfg["geometry.height"], cfg["geometry.corner"])
    if kind == "mask":
        if not cfg["geometry.mask_file"]:
            raise ConfigKeyError("geometry.kind = mask needs geometry.mask_file (a .npy boolean array)")
        mask = np.load(cfg["geometry.mask_file"]).astype(bool)
        return CustomMask(mask, cfg["geometry.spacing"], cfg["geometry.origin"])
    raise ConfigKeyError(f"geometry.kind must be disc, rectangle or mask, got {kind!r}")


def make_profile(cfg: dict) -> profiles.ProfileFunction:
    if cfg["profile.name"] != "power":
        raise ConfigKeyError(f"profile.name must be 'power', got {cfg['profile.name']!r}")
    return profiles.power_profile(cfg["profile.p"])


def _resolution_for(cfg, geometry, kappa_min):
    res = cfg["grid.resolution"]
    if res == "auto":
        return asymptotics.adequate_resolution(geometry, cfg["solver.epsilon"], kappa_min, cfg["grid.rule"])
    return res


def make_operator(cfg: dict, geometry, resolution) -> GreenOperator:
    return GreenOperator(build_domain(geometry, resolution), cfg["green.backend"], cfg["green.rtol"])


def make_solver_config(cfg: dict) -> solver.SolverConfig:
    return solver.SolverConfig(
        epsilon=cfg["solver.epsilon"], Lambda=cfg["solver.Lambda"], kappa=cfg["solver.kappa"],
        profile=make_profile(cfg), tol_fixed_point=cfg["solver.tol_fixed_point"],
        tol_mu=cfg["solver.tol_mu"], max_iter=cfg["solver.max_iter"], damping=cfg["solver.damping"],
        center=cfg["solver.center"], escalations=cfg["solver.escalations"],
    )


def make_spec(cfg: dict) -> solver.MultiVortexSpec:
    pts, ks = cfg["vortices.points"], cfg["vortices.strengths"]
    if len(pts) != len(ks):
        raise ConfigKeyError("vortices.points and vortices.strengths differ in length")
    return solver.spec_from_configuration(pts, ks, cfg["vortices.radius"], make_profile(cfg))


def _echo(cfg: dict) -> dict:
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in cfg.items()}


# --------------------------------------------------------------------------
# subcommands


def cmd_robin(cfg, out: Path, args) -> dict:
    geom = make_geometry(cfg)
    op = make_operator(cfg, geom, _resolution_for(cfg, geom, 1.0))
    p = cfg["robin.point"]
    rep = landscape.kr_minimize(op, [1.0], tol=cfg["kr.tol"], n_starts=cfg["kr.starts"],
                                max_iter=cfg["kr.max_iter"], seed=cfg["seed"])
    rec = {
        "config": _echo(cfg),
        "point": list(p),
        "value": op.robin(p),
        "gradient": op.robin_grad(p).tolist(),
        "minimum_point": rep.configuration.points[0].tolist(),
        "minimum_value": rep.value,
        "backend": op.backend,
    }
    write_json(out / "robin.json", rec)
    return rec


def cmd_kr_min(cfg, out: Path, args) -> dict:
    geom = make_geometry(cfg)
    op = make_operator(cfg, geom, _resolution_for(cfg, geom, 1.0))
    ks = cfg["vortices.strengths"]
    balls = None
    if cfg["kr.confine"]:
        balls = [(p, cfg["vortices.radius"]) for p in cfg["vortices.points"]]
    init = cfg["kr.init"]
    if init != "multistart":
        if init != "points":
            raise ConfigKeyError("kr.init must be 'multistart' or 'points'")
        init = cfg["vortices.points"]
    rep = landscape.kr_minimize(op, ks, init=init, r_balls=balls, tol=cfg["kr.tol"],
                                max_iter=cfg["kr.max_iter"], n_starts=cfg["kr.starts"], seed=cfg["seed"])
    rec = rep.to_record()
    write_json(out / "kr_min.json", rec)
    return rec


def cmd_profile(cfg, out: Path, args) -> dict:
    lim = profiles.limiting_profile(make_profile(cfg), cfg["profile.kappa"], n_samples=cfg["profile.samples"])
    lim.to_csv(out / "profile.csv")
    rec = {"config": _echo(cfg), "kappa": lim.kappa, "peak": lim.peak, "support_radius": lim.support_radius,
           "flux_mass": lim.flux_mass, "monotone_shooting": lim.monotone_shooting}
    write_json(out / "profile.json", rec)
    return rec


def cmd_check_hypotheses(cfg, out: Path, args) -> dict:
    rep = profiles.check_hypotheses(make_profile(cfg), cfg["hypotheses.s_max"], cfg["hypotheses.n"],
                                    cfg["hypotheses.tau"])
    rec = {"config": _echo(cfg), "all_passed": rep.all_passed,
           "checks": {k: {"passed": c.passed, "counterexample": c.counterexample, "detail": c.detail}
                      for k, c in rep.checks.items()}}
    write_json(out / "hypotheses.json", rec)
    return rec


def _dump(out: Path, res, op) -> None:
    dump_grid_csv(out / "omega.csv", VorticityField(res.omega.values, op.domain))
    comps = res.components if isinstance(res, solver.MultiSolveResult) else [res]
    if len(comps) == 1:
        dump_grid_csv(out / "psi.csv", comps[0].psi)
    else:
        for i, c in enumerate(comps, 1):
            dump_grid_csv(out / f"psi_{i}.csv", StreamField(c.psi.values, op.domain))


def cmd_solve(cfg, out: Path, args) -> dict:
    geom = make_geometry(cfg)
    scfg = make_solver_config(cfg)
    op = make_operator(cfg, geom, _resolution_for(cfg, geom, abs(scfg.kappa)))
    res = solver.solve(op, scfg)
    rec = res.record()
    rec["config"] = _echo(cfg)
    rec["grid"] = op.domain.describe()
    rec["escalations"] = res.escalations
    rec["first_order_violation"] = res.first_order_violation()
    write_json(out / "run.json", rec)
    if cfg["output.dump_fields"]:
        _dump(out, res, op)
    return rec


def cmd_multi_solve(cfg, out: Path, args) -> dict:
    geom = make_geometry(cfg)
    scfg = make_solver_config(cfg)
    spec = make_spec(cfg)
    kmin = min(abs(c.kappa) for c in spec.components)
    op = make_operator(cfg, geom, _resolution_for(cfg, geom, kmin))
    res = solver.multi_solve(op, spec, scfg)
    rec = res.record()
    rec["config"] = _echo(cfg)
    rec["grid"] = op.domain.describe()
    rec["escalations"] = res.escalations
    write_json(out / "run.json", rec)
    if cfg["output.dump_fields"]:
        _dump(out, res, op)
    return rec


def cmd_sweep(cfg, out: Path, args) -> dict:
    geom = make_geometry(cfg)
    scfg = make_solver_config(cfg)
    multi = len(cfg["vortices.strengths"]) > 1
    spec = make_spec(cfg) if multi else None
    lim = None
    if cfg["sweep.profile_l2"] and not multi:
        lim = profiles.limiting_profile(scfg.profile, abs(scfg.kappa))
    target = geom
    if cfg["grid.resolution"] != "auto":
        target = make_operator(cfg, geom, cfg["grid.resolution"])
    try:
        rep = asymptotics.epsilon_sweep(target, scfg, cfg["sweep.epsilons"], spec=spec, rule=cfg["grid.rule"],
                                        warm=not args.cold, jobs=args.jobs, limit=lim)
    except asymptotics.SweepError as exc:
        exc.report.to_csv(out / "sweep.csv")
        raise
    rep.to_csv(out / "sweep.csv")
    fits = dict(rep.fits)
    fits["config"] = _echo(cfg)
    fits["resolutions"] = [r.resolution for r in rep.records]
    fits["Lambda"] = [r.Lambda for r in rep.records]
    write_json(out / "sweep_fits.json", fits)
    return fits


def cmd_pv_sim(cfg, out: Path, args) -> dict:
    geom = make_geometry(cfg)
    op = make_operator(cfg, geom, _resolution_for(cfg, geom, 1.0))
    st = pointvortex.PointVortexState.from_arrays(cfg["vortices.points"], cfg["vortices.strengths"])
    rec = {"config": _echo(cfg)}
    if cfg["pv.self_test"]:
        rec["self_test"] = pointvortex.self_test(op, seed=cfg["seed"])
    try:
        tr = pointvortex.pv_integrate(op, st, cfg["pv.dt"], cfg["pv.T"], cfg["pv.sample_every"])
    except pointvortex.IntegrationError as exc:
        exc.trajectory.to_csv(out / "trajectory.csv")
        raise
    tr.to_csv(out / "trajectory.csv")
    rec["W_drift"] = tr.drift()
    rec["equilibrium_residual"] = pointvortex.equilibrium_residual(op, st)
    write_json(out / "pv.json", rec)
    return rec


COMMANDS = {
    "robin": cmd_robin,
    "kr-min": cmd_kr_min,
    "profile": cmd_profile,
    "check-hypotheses": cmd_check_hypotheses,
    "solve": cmd_solve,
    "multi-solve": cmd_multi_solve,
    "sweep": cmd_sweep,
    "pv-sim": cmd_pv_sim,
}

CONFIG_ERRORS = (ConfigKeyError, solver.ConfigError, DomainError, profiles.ProfileError, ValueError,
                 OSError)
SOLVER_ERRORS = (solver.ConvergenceError, solver.MuSolveError, GreenSolveError, landscape.LandscapeError,
                 pointvortex.IntegrationError, pointvortex.CollisionError, asymptotics.SweepError,
                 RuntimeError)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="steady-vortex", description="Concentrated steady vortices in planar domains.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", type=Path, help="flat key = value config file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key (repeatable)")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory (default: .)")
    p.add_argument("--jobs", type=int, default=1, help="worker cap for concurrent cold sweeps")
    p.add_argument("--cold", action="store_true", help="sweep: no warm starts, run each epsilon independently")
    p.add_argument("--seed", type=int, help="shorthand for --set seed=N")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args.verbose)
    try:
        lines = args.config.read_text().splitlines() if args.config else []
        overrides = list(args.overrides) + ([f"seed={args.seed}"] if args.seed is not None else [])
        cfg = parse_config(lines, overrides)
        if args.jobs < 1:
            raise ConfigKeyError("--jobs must be at least 1")
        args.out.mkdir(parents=True, exist_ok=True)
        if not os.access(args.out, os.W_OK):
            raise ConfigKeyError(f"output directory {args.out} is not writable")
        log.info("running %s", args.command)
        COMMANDS[args.command](cfg, args.out, args)
    except CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SOLVER_ERRORS as exc:
        if isinstance(exc.__cause__, CONFIG_ERRORS):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
