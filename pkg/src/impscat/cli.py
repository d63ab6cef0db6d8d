"""Config-driven batch driver.

Subcommands: onebody, manybody, medium, convergence, scaling. Each takes
a JSON config (--config), writes CSV tables plus a report.json into the
output directory, and exits 0 on success, 2 on a configuration error,
3 on a solver failure. The full config schema is documented in the
repository README.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .errors import ConfigError, SolverError
from .fields import Medium, PlaneWave
from .geometry import (
    Ellipsoid,
    Sphere,
    compute_shape_matrices,
    load_trimesh,
)
from .io import write_field_csv, write_report
from .manybody import (
    Box,
    assemble_las,
    effective_field,
    generate_cloud,
    solve_las,
    write_cloud,
)
from .medium import CubeGrid, dispersion_check, refraction_shift, solve_limit_equation
from .onebody import Impedance, far_field, solve_one_body
from .studies import convergence_study, scaling_study

__all__ = ["main"]


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------

def _get(cfg: dict, path: str, kind=None, default=None, required=True):
    node = cfg
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            if not required:
                return default
            raise ConfigError(f"config key '{path}' is missing")
        node = node[part]
    if kind is not None:
        try:
            if kind is float and isinstance(node, bool):
                raise TypeError
            node = kind(node)
        except (TypeError, ValueError):
            raise ConfigError(f"config key '{path}': expected {kind.__name__}, got {node!r}")
    return node


def _complex_pair(cfg, path, default=None, required=True):
    raw = _get(cfg, path, required=required, default=default)
    if raw is None:
        return None
    if isinstance(raw, (int, float)):
        return complex(raw)
    if isinstance(raw, (list, tuple)) and len(raw) == 2:
        return complex(float(raw[0]), float(raw[1]))
    raise ConfigError(f"config key '{path}': expected a number or [re, im] pair")


def _medium(cfg) -> Medium:
    try:
        return Medium(
            epsilon0=_get(cfg, "medium.epsilon0", float),
            mu0=_get(cfg, "medium.mu0", float),
            omega=_get(cfg, "medium.omega", float),
        )
    except ValueError as exc:
        raise ConfigError(f"medium: {exc}")


def _incident(cfg) -> PlaneWave:
    amp_re = np.asarray(_get(cfg, "incident.amplitude", list), dtype=float)
    amp_im = _get(cfg, "incident.amplitude_im", list, required=False)
    amp = amp_re + (1j * np.asarray(amp_im, dtype=float) if amp_im is not None else 0.0)
    try:
        return PlaneWave(amplitude=amp, direction=np.asarray(_get(cfg, "incident.direction", list), dtype=float))
    except ValueError as exc:
        raise ConfigError(f"incident: {exc}")


def _impedance(cfg) -> Impedance:
    try:
        return Impedance(h=_complex_pair(cfg, "impedance.h"), kappa=_get(cfg, "impedance.kappa", float))
    except ValueError as exc:
        raise ConfigError(f"impedance: {exc}")


def _shape(cfg, default_radius=None):
    kind = _get(cfg, "shape.kind", str, default="sphere", required=False)
    try:
        if kind == "sphere":
            r = _get(cfg, "shape.radius", float, required=False, default=default_radius)
            if r is None:
                raise ConfigError("config key 'shape.radius' is missing (and no particle size set)")
            return Sphere(radius=r)
        if kind == "ellipsoid":
            return Ellipsoid(semi_axes=tuple(_get(cfg, "shape.semi_axes", list)))
        if kind == "trimesh":
            return load_trimesh(_get(cfg, "shape.path", str))
        raise ConfigError(f"shape.kind: unknown kind {kind!r}")
    except (ValueError, OSError) as exc:
        raise ConfigError(f"shape: {exc}")


def _box(cfg, path) -> Box:
    raw = _get(cfg, path, list)
    try:
        return Box(lo=np.asarray(raw[0], dtype=float), hi=np.asarray(raw[1], dtype=float))
    except (ValueError, IndexError, TypeError) as exc:
        raise ConfigError(f"config key '{path}': expected [[lo3],[hi3]], got {raw!r} ({exc})")


def _load_config(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}")


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------

def _fib_directions(n):
    i = np.arange(n)
    ga = np.pi * (3.0 - np.sqrt(5.0))
    z = 1.0 - (2.0 * i + 1.0) / n
    rho = np.sqrt(1.0 - z * z)
    return np.stack([rho * np.cos(ga * i), rho * np.sin(ga * i), z], axis=1)


def run_onebody(cfg, out: Path, threads: int) -> dict:
    med = _medium(cfg)
    pw = _incident(cfg)
    imp = _impedance(cfg)
    a = _get(cfg, "a", float)
    if a <= 0:
        raise ConfigError("config key 'a': particle size must be positive")
    shape = _shape(cfg, default_radius=a)
    order = _get(cfg, "quadrature_order", int, default=64, required=False)
    sm = compute_shape_matrices(shape, order=order)
    sol = solve_one_body(sm, imp, med, pw, a=a)

    n_dir = _get(cfg, "observation.n_directions", int, default=64, required=False)
    r = _get(cfg, "observation.radius", float, default=100.0 / med.k, required=False)
    if med.k * r < 10.0:
        raise ConfigError(f"observation.radius: kr = {med.k * r:.3g} < 10 is not in the far zone")
    dirs = _fib_directions(n_dir)
    ff = np.array([far_field(sol, med, d, r) for d in dirs])
    write_field_csv(out / "farfield.csv", dirs * r, kind="farfield", E=ff)
    return {
        "abs_Q": float(np.linalg.norm(sol.Q)),
        "Q": sol.Q,
        "c_s": sm.c_s,
        "surface_area": sm.surface_area,
        "beta_spread": sm.beta_spread,
        "ka": med.k * a,
        "far_field_radius": r,
        "outputs": {"farfield": "farfield.csv"},
    }


def _default_eval_points(box: Box, n: int) -> np.ndarray:
    fr = (np.arange(n) + 0.37) / n
    axes = [box.lo[i] + fr * (box.hi[i] - box.lo[i]) for i in range(3)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)


def run_manybody(cfg, out: Path, threads: int) -> dict:
    med = _medium(cfg)
    pw = _incident(cfg)
    imp = _impedance(cfg)
    a = _get(cfg, "cloud.a", float)
    box = _box(cfg, "cloud.box")
    shape = _shape(cfg, default_radius=a)
    sm = compute_shape_matrices(shape, order=_get(cfg, "quadrature_order", int, default=64, required=False))
    try:
        cloud = generate_cloud(
            box,
            a,
            imp.kappa,
            _get(cfg, "cloud.density", float),
            imp.h,
            seed=_get(cfg, "seed", int, default=0, required=False),
            shape_matrices=sm,
            c_d=_get(cfg, "cloud.c_d", float, default=1.0, required=False),
        )
    except ValueError as exc:
        raise ConfigError(f"cloud: {exc}")
    las = assemble_las(cloud, med, pw, threads=threads)
    stats: dict = {}
    a_curls = solve_las(
        las,
        method=_get(cfg, "solver.method", str, default="direct", required=False),
        tol=_get(cfg, "solver.tol", float, default=1e-10, required=False),
        dense_limit=_get(cfg, "solver.dense_limit", int, default=1500, required=False),
        stats=stats,
    )
    pts = cfg.get("eval_points")
    if pts is None:
        pts = _default_eval_points(box, _get(cfg, "eval_grid_n", int, default=3, required=False))
    else:
        pts = np.asarray(pts, dtype=float).reshape(-1, 3)
    dmin = np.sqrt(((pts[:, None, :] - cloud.positions[None, :, :]) ** 2).sum(-1).min(axis=1))
    keep = dmin >= 3.0 * cloud.a
    sample = effective_field(cloud, a_curls, med, pw, pts[keep], compute_h=True, threads=threads)
    write_cloud(out / "cloud.txt", cloud)
    write_field_csv(out / "fields.csv", sample.position, kind="field", E=sample.E, H=sample.H)
    return {
        "m_particles": len(cloud),
        "spacing": cloud.spacing,
        "solver": stats,
        "eval_points_dropped": int((~keep).sum()),
        "outputs": {"cloud": "cloud.txt", "fields": "fields.csv"},
    }


def run_medium(cfg, out: Path, threads: int) -> dict:
    med = _medium(cfg)
    pw = _incident(cfg)
    imp = _impedance(cfg)
    box = _box(cfg, "grid.box")
    n = _get(cfg, "grid.n", int)
    density = _get(cfg, "density", float)
    shape = _shape(cfg, default_radius=1.0)
    sm = compute_shape_matrices(shape, order=_get(cfg, "quadrature_order", int, default=64, required=False))
    try:
        grid = CubeGrid.build(box, n, density, imp.h)
        sol = solve_limit_equation(
            grid, med, pw, sm,
            tol=_get(cfg, "solver.tol", float, default=1e-10, required=False),
            method=_get(cfg, "solver.method", str, default="auto", required=False),
            threads=threads,
        )
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}")
    write_field_csv(out / "grid.csv", grid.centers, kind="grid", E=sol.E, A=sol.A)
    report = {
        "cells": grid.n_cells,
        "ell": grid.ell,
        "ie_residual": sol.residual,
        "iterations": sol.iterations,
        "outputs": {"grid": "grid.csv"},
    }
    try:
        hom = refraction_shift(sm, med, density, imp.h)
    except ValueError as exc:
        report["refraction_shift"] = {"not_applicable": str(exc)}
    else:
        report["refraction_shift"] = {
            "c1": hom.c1,
            "c2": hom.c2,
            "k_squared": hom.k_squared,
            "k1_squared": hom.k1_squared,
            "xi_scalar": hom.xi_scalar,
        }
        if min(grid.dims) >= 6:
            report["dispersion"] = dispersion_check(hom, sol)
    return report


def run_convergence(cfg, out: Path, threads: int) -> dict:
    med = _medium(cfg)
    pw = _incident(cfg)
    imp = _impedance(cfg)
    box = _box(cfg, "box")
    a_levels = _get(cfg, "a_levels", list)
    if not isinstance(a_levels, list) or len(a_levels) < 2:
        raise ConfigError("config key 'a_levels': need at least two sizes")
    shape = _shape(cfg, default_radius=float(a_levels[0]))
    sm = compute_shape_matrices(shape, order=_get(cfg, "quadrature_order", int, default=32, required=False))
    try:
        study = convergence_study(
            box,
            [float(a) for a in a_levels],
            imp.kappa,
            _get(cfg, "density", float),
            imp.h,
            med,
            pw,
            sm,
            grid_dims=_get(cfg, "grid_dims", list, required=False),
            seed=_get(cfg, "seed", int, default=0, required=False),
            c_d=_get(cfg, "c_d", float, default=1.0, required=False),
            tol=_get(cfg, "solver.tol", float, default=1e-8, required=False),
            dense_limit=_get(cfg, "solver.dense_limit", int, default=1200, required=False),
            threads=threads,
        )
    except ValueError as exc:
        raise ConfigError(f"convergence: {exc}")
    for i, level in enumerate(study["levels"]):
        write_field_csv(
            out / f"level{i}.csv",
            level.pop("centers"),
            kind="convergence",
            Elas=level.pop("avg_las"),
            Eie=level.pop("avg_ie"),
        )
    study["outputs"] = {f"level{i}": f"level{i}.csv" for i in range(len(a_levels))}
    return study


def run_scaling(cfg, out: Path, threads: int) -> dict:
    med = _medium(cfg)
    pw = _incident(cfg)
    imp = _impedance(cfg)
    a_list = _get(cfg, "a_list", list)
    shape = _shape(cfg, default_radius=float(max(a_list)))
    sm = compute_shape_matrices(shape, order=_get(cfg, "quadrature_order", int, default=64, required=False))
    x_obs = np.asarray(
        _get(cfg, "observation_point", list, default=[0.0, 0.0, 1.0], required=False),
        dtype=float,
    )
    result = scaling_study(sm, imp.kappa, imp.h, med, pw, x_obs, a_list)
    with open(out / "scaling.csv", "w") as fh:
        fh.write("# impscat-csv v1 kind=scaling\n")
        fh.write("a,magnitude\n")
        for a, v in zip(result["a"], result["magnitude"]):
            fh.write(f"{a:.17g},{v:.17g}\n")
    result["outputs"] = {"scaling": "scaling.csv"}
    return result


_SCENARIOS = {
    "onebody": run_onebody,
    "manybody": run_manybody,
    "medium": run_medium,
    "convergence": run_convergence,
    "scaling": run_scaling,
}


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="impscat",
        description="Electromagnetic scattering by small impedance particles: batch scenarios",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _SCENARIOS:
        p = sub.add_parser(name, help=f"run a {name} scenario from a JSON config")
        p.add_argument("--config", required=True, help="path to the JSON scenario config")
        p.add_argument("--out", default=".", help="output directory (created if missing)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--tol", type=float, default=None, help="override the solver tolerance")
        p.add_argument("--threads", type=int, default=1, help="worker threads for assembly/matvec")
    args = parser.parse_args(argv)

    t0 = time.perf_counter()
    try:
        cfg = _load_config(args.config)
        declared = cfg.get("scenario", args.command)
        if declared != args.command:
            raise ConfigError(
                f"config declares scenario '{declared}' but subcommand is '{args.command}'"
            )
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.tol is not None:
            cfg.setdefault("solver", {})["tol"] = args.tol
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        headline = _SCENARIOS[args.command](cfg, out, max(1, args.threads))
    except ConfigError as exc:
        print(f"impscat: config error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        res = f" (residual {exc.residual:.3e})" if exc.residual is not None else ""
        print(f"impscat: solver failure: {exc}{res}", file=sys.stderr)
        return 3

    report = {
        "scenario": args.command,
        "config": cfg,
        "wall_time_s": time.perf_counter() - t0,
        "headline": headline,
    }
    write_report(out / "report.json", report)
    print(f"impscat {args.command}: ok ({report['wall_time_s']:.2f} s), report in {out / 'report.json'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
