"""Config-driven command line front end.

Subcommands: ``mesh``, ``spectrum``, ``gramian``, ``control``, ``sweep``,
``check``.  Each run materializes one experiment directory named
``<command>-<experiment_id>`` under the output base, containing the canonical
config echo, a ``meta.json`` with the run timestamp (the only place a
timestamp appears), deterministic ``results.csv``/``results.json``, and any
command-specific artifacts.  Reruns of an existing experiment refuse to touch
the directory unless ``--force`` is given.

Exit codes: 0 success; 2 configuration error (bad keys, bad values, bad
preconditions such as an empty region descriptor); 3 numerical failure
(non-observable Gramian, eigensolver failure, guard trips); 4 I/O failure
(unreadable paths, refusing to overwrite an existing experiment).
"""

from __future__ import annotations

import argparse
import json
import sys
import time as _time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, canonical_text, load_config, validate
from .errors import (AliasedGrid, ConfigError, ConvergenceFailure,
                     DegenerateTriangle, EmptyRegion, InvalidResolution,
                     NotObservable, SpilloverGuard, TooManyModes,
                     UnresolvedScale)
from .evolve import evolution_samples, schrodinger_propagate, time_grid
from .hum import (default_synthesis_grid, save_control,
                  save_control_diagnostics, synthesize_control, verify_control)
from .observability import (gramian, observability_constant,
                            restricted_constant, result_row, save_results_csv,
                            save_results_json, jsonable,
                            wave_windowed_constant, windowed_constants)
from .spectral import (dyadic_partition_check, eigensolve, load_eigenbasis,
                       random_state, save_eigenbasis, weyl_ratio)
from .surface import (build_bolza, chart_triangle_areas, euler_characteristic,
                      fmt_float, rasterize_region, save_mesh, save_region)

_CONFIG_ERRORS = (ConfigError, InvalidResolution, EmptyRegion)
_NUMERICAL_ERRORS = (NotObservable, ConvergenceFailure, TooManyModes,
                     SpilloverGuard, AliasedGrid, UnresolvedScale,
                     DegenerateTriangle)


def _say(args, message: str) -> None:
    if not args.quiet:
        print(message)


def _plain_row(quantity, value, surface="", region="", T="", N="", h_or_k="",
               certificate_norm="", **extra) -> dict:
    row = dict(quantity=quantity, surface=surface, region=region, T=T, N=N,
               h_or_k=h_or_k, value=float(value),
               certificate_norm=certificate_norm)
    row.update(extra)
    return row


def _prepare_dir(args, cfg: ExperimentConfig, command: str) -> Path:
    base = Path(args.out) if args.out else Path(cfg["output.directory"])
    outdir = base / f"{command}-{cfg.experiment_id}"
    if outdir.exists() and not args.force:
        raise OSError(
            f"experiment directory {outdir} already exists; outputs are "
            "append-only per experiment, rerun with --force to overwrite")
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "config.txt", "w") as fh:
        fh.write(canonical_text(cfg.given))
    meta = {
        "command": command,
        "experiment_id": cfg.experiment_id,
        "config_hash": cfg.experiment_id,
        "seed": cfg.seed,
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "unix_time": _time.time(),
        "effective_config": {k: jsonable(v) for k, v in cfg.values.items()},
    }
    with open(outdir / "meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return outdir


def _write_results(outdir: Path, cfg: ExperimentConfig, rows: list) -> None:
    formats = cfg["output.formats"]
    if "csv" in formats:
        save_results_csv(outdir / "results.csv", rows)
    if "json" in formats:
        save_results_json(outdir / "results.json", rows,
                          {"experiment_id": cfg.experiment_id, "seed": cfg.seed})


def _load(args) -> ExperimentConfig:
    if args.config is None:
        return validate({}, seed=args.seed)
    return load_config(args.config, seed=args.seed)


# ---------------------------------------------------------------------------
# subcommands

def cmd_mesh(args) -> int:
    cfg = _load(args)
    mesh = cfg.build_mesh()
    outdir = _prepare_dir(args, cfg, "mesh")
    save_mesh(outdir / "mesh.txt", mesh)
    chi = euler_characteristic(mesh)
    kind = mesh.surface_kind
    rows = [
        _plain_row("area", mesh.area, surface=kind),
        _plain_row("euler_characteristic", chi, surface=kind),
        _plain_row("n_vertices", mesh.n_vertices, surface=kind),
        _plain_row("n_triangles", mesh.n_triangles, surface=kind),
        _plain_row("n_quotient", mesh.n_quotient, surface=kind),
        _plain_row("min_chart_area", chart_triangle_areas(mesh).min(), surface=kind),
    ]
    _write_results(outdir, cfg, rows)
    _say(args, f"surface={kind} vertices={mesh.n_vertices} "
               f"triangles={mesh.n_triangles} quotient={mesh.n_quotient}")
    _say(args, f"area={fmt_float(mesh.area)} euler_characteristic={chi}")
    _say(args, f"wrote {outdir}")
    return 0


def _solve(cfg: ExperimentConfig, mesh):
    return eigensolve(mesh, cfg["spectrum.n_modes"], tol=cfg["spectrum.tol"])


def cmd_spectrum(args) -> int:
    cfg = _load(args)
    mesh = cfg.build_mesh()
    basis = _solve(cfg, mesh)
    outdir = _prepare_dir(args, cfg, "spectrum")
    save_eigenbasis(outdir / "basis.txt", basis)
    kind = mesh.surface_kind
    defect = basis.orthonormality_defect()
    rows = [_plain_row("lambda", lam, surface=kind, N=basis.n_modes, h_or_k=j)
            for j, lam in enumerate(basis.lambdas)]
    rows.append(_plain_row("weyl_ratio", weyl_ratio(basis), surface=kind,
                           N=basis.n_modes))
    rows.append(_plain_row("orthonormality_defect", defect, surface=kind,
                           N=basis.n_modes))
    rows.append(_plain_row("residual_max", basis.residuals.max(), surface=kind,
                           N=basis.n_modes))
    head = ", ".join(fmt_float(v) for v in basis.lambdas[:5])
    _say(args, f"first eigenvalues: {head}")
    _say(args, f"weyl_ratio={fmt_float(weyl_ratio(basis))} "
               f"orthonormality_defect={defect:.3e} "
               f"residual_max={basis.residuals.max():.3e}")
    if kind == "bolza" and cfg["surface.refine"] >= 3:
        # one coarser solve for a Richardson error bar on lambda_1
        coarse = eigensolve(build_bolza(cfg["surface.refine"] - 1), 2)
        lam1, lam1c = basis.lambdas[1], coarse.lambdas[1]
        extrap = lam1 + (lam1 - lam1c) / 3.0
        err = abs(lam1 - lam1c) / 3.0
        rows.append(_plain_row("lambda1_extrapolated", extrap, surface=kind,
                               N=basis.n_modes))
        rows.append(_plain_row("lambda1_error_bar", err, surface=kind,
                               N=basis.n_modes))
        _say(args, f"lambda1={fmt_float(lam1)} extrapolated "
                   f"{extrap:.4f} +- {err:.4f}")
    _write_results(outdir, cfg, rows)
    _say(args, f"wrote {outdir}")
    return 0


def cmd_gramian(args) -> int:
    cfg = _load(args)
    mesh = cfg.build_mesh()
    basis = _solve(cfg, mesh)
    region = rasterize_region(mesh, cfg.region_spec())
    outdir = _prepare_dir(args, cfg, "gramian")
    save_region(outdir / "region.txt", region)
    kind = cfg["windows.kind"]
    rows = []
    for T in cfg["time.T"]:
        rep = observability_constant(gramian(basis, region, T, kind=kind))
        if rep.not_observable:
            raise NotObservable(
                f"Gramian numerically singular: region={region.spec.label()} "
                f"T={fmt_float(T)} lambda_min={rep.lambda_min:.3e}")
        rows.append(result_row("K", basis, region, T, "", rep.K,
                               certificate_norm=1.0, kind=kind))
        rows.append(result_row("lambda_min", basis, region, T, "",
                               rep.lambda_min, kind=kind))
        _say(args, f"T={fmt_float(T)} K={fmt_float(rep.K)} "
                   f"lambda_min={fmt_float(rep.lambda_min)}")
    if cfg["windows.k"] is not None:
        k_lo, k_hi = cfg["windows.k"]
        for T in cfg["time.T"]:
            for line in windowed_constants(basis, region, T,
                                           range(k_lo, k_hi + 1), kind=kind):
                rows.append(result_row("K_k", basis, region, T, line["k"],
                                       line["K"], n_modes=line["n_modes"],
                                       kind=kind))
    _write_results(outdir, cfg, rows)
    _say(args, f"wrote {outdir}")
    return 0


def cmd_control(args) -> int:
    cfg = _load(args)
    if len(cfg["time.T"]) != 1:
        raise ConfigError("config key time.T: control runs use a single horizon")
    T = cfg["time.T"][0]
    mesh = cfg.build_mesh()
    basis = _solve(cfg, mesh)
    region = rasterize_region(mesh, cfg.region_spec())
    u0 = random_state(basis, np.random.default_rng(cfg.seed))
    if cfg["time.n_steps"] > 0:
        grid = time_grid(0.0, T, cfg["time.n_steps"], kind=cfg["time.kind"])
    else:
        grid = default_synthesis_grid(basis, T)
    signal, diag = synthesize_control(basis, region, u0, T,
                                      epsilon=cfg["hum.epsilon"], grid=grid)
    if diag["not_observable"]:
        raise NotObservable(
            f"Gramian numerically singular: region={region.spec.label()} "
            f"T={fmt_float(T)}; cannot synthesize a control")
    ver = verify_control(basis, region, u0, signal)
    outdir = _prepare_dir(args, cfg, "control")
    save_region(outdir / "region.txt", region)
    save_control(outdir / "control.csv", signal)
    save_control_diagnostics(outdir / "control_diagnostics.json", {**diag, **ver})
    rel = ver["residual_T_rel"]
    rows = [
        result_row("residual_T", basis, region, T, "", ver["residual_T"]),
        result_row("residual_T_rel", basis, region, T, "", rel),
        result_row("control_norm_sq", basis, region, T, "", diag["norm_f_sq"]),
        result_row("K", basis, region, T, "", diag["K"]),
        result_row("lambda_min", basis, region, T, "", diag["lambda_min"]),
        result_row("spillover_residual", basis, region, T, "",
                   ver["spillover_residual"]),
        result_row("energy_defect", basis, region, T, "", diag["energy_defect"]),
    ]
    _write_results(outdir, cfg, rows)
    bound = diag["K"] * u0.norm() ** 2
    ok = "ok" if diag["optimality_ok"] else "VIOLATED"
    _say(args, f"terminal residual {ver['residual_T']:.3e} "
               f"(relative {rel:.3e}) over {diag['n_steps']} steps")
    _say(args, f"control energy {diag['norm_f_sq']:.6f} <= "
               f"K*|u0|^2 = {bound:.6f}: {ok}")
    _say(args, f"wrote {outdir}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _load(args)
    mesh = cfg.build_mesh()
    basis = _solve(cfg, mesh)
    region = rasterize_region(mesh, cfg.region_spec())
    rows = []
    if cfg["windows.k"] is not None:
        k_lo, k_hi = cfg["windows.k"]
        for T in cfg["time.T"]:
            for line in windowed_constants(basis, region, T,
                                           range(k_lo, k_hi + 1),
                                           kind=cfg["windows.kind"]):
                rows.append(result_row("K_k", basis, region, T, line["k"],
                                       line["K"], n_modes=line["n_modes"],
                                       kind=cfg["windows.kind"]))
    for h in cfg["windows.h"]:
        line = wave_windowed_constant(basis, region, h,
                                      C_horizon=cfg["windows.C_horizon"])
        rows.append(result_row("K_wave", basis, region, line["T"], h,
                               line["K_wave"], n_modes=line["n_modes"],
                               C_horizon=cfg["windows.C_horizon"]))
    if not rows:
        raise ConfigError(
            "sweep grid is empty: set windows.k and/or windows.h")
    outdir = _prepare_dir(args, cfg, "sweep")
    save_region(outdir / "region.txt", region)
    _write_results(outdir, cfg, rows)
    for row in rows:
        _say(args, f"{row['quantity']} h_or_k={row['h_or_k']} "
                   f"T={fmt_float(row['T'])} value={fmt_float(row['value'])}")
    _say(args, f"wrote {outdir}")
    return 0


def _run_checks(cfg: ExperimentConfig, args) -> list:
    """Run every module's invariant list on the configured experiment."""
    checks = []

    def check(name, ok, value, threshold):
        checks.append((name, bool(ok), float(value), float(threshold)))

    mesh = cfg.build_mesh()
    areas = chart_triangle_areas(mesh)
    check("mesh.positive_chart_areas", areas.min() > 0, areas.min(), 0.0)
    chi_want = 0 if mesh.surface_kind == "torus" else -2
    chi = euler_characteristic(mesh)
    check("mesh.euler_characteristic", chi == chi_want, chi, chi_want)
    check("mesh.conformal_weight_positive", mesh.conformal_weight.min() > 0,
          mesh.conformal_weight.min(), 0.0)
    if mesh.surface_kind == "bolza":
        radius = np.hypot(mesh.vertices[:, 0], mesh.vertices[:, 1]).max()
        check("mesh.chart_inside_disk", radius < 1.0, radius, 1.0)

    region = rasterize_region(mesh, cfg.region_spec())
    w = region.weights
    check("region.weight_range", (w.min() >= 0) and (w.max() <= 1 + 1e-15)
          and np.isclose(w.max(), 1.0), w.max(), 1.0)
    # monotonicity is checked at a fixed transition band: the proportional
    # default band moves the near-edge ramp when the descriptor grows
    spec = cfg.region_spec()
    grown = None
    if spec.kind == "ball":
        band = 0.2 * spec.radius if spec.band is None else spec.band
        grown = (type(spec).ball(spec.center, spec.radius, band=band),
                 type(spec).ball(spec.center, spec.radius * 1.1, band=band))
    elif spec.kind == "strip":
        band = 0.1 * spec.width if spec.band is None else spec.band
        grown = (type(spec).strip(spec.axis, spec.start, spec.width, band=band),
                 type(spec).strip(spec.axis, spec.start, spec.width * 1.1,
                                  band=band))
    if grown is not None:
        w_base = rasterize_region(mesh, grown[0]).weights
        w_grown = rasterize_region(mesh, grown[1]).weights
        drop = float((w_base - w_grown).max())
        check("region.monotone_in_descriptor", drop <= 1e-12, drop, 0.0)

    if cfg["check.basis_file"]:
        basis = load_eigenbasis(cfg["check.basis_file"], mesh)
    else:
        basis = _solve(cfg, mesh)
    lams = basis.lambdas
    check("spectrum.zero_mode", lams[0] <= 1e-8 * max(lams[-1], 1.0), lams[0],
          1e-8 * max(lams[-1], 1.0))
    check("spectrum.sorted", np.all(np.diff(lams) >= -1e-12 * max(lams[-1], 1)),
          np.diff(lams).min() if len(lams) > 1 else 0.0, 0.0)
    check("spectrum.residuals", basis.residuals.max() <= max(cfg["spectrum.tol"], 1e-6),
          basis.residuals.max(), max(cfg["spectrum.tol"], 1e-6))
    defect = basis.orthonormality_defect()
    check("spectrum.orthonormality", defect <= 1e-8, defect, 1e-8)
    wr = weyl_ratio(basis)
    check("spectrum.weyl_ratio", 0.5 <= wr <= 1.6, wr, 1.6)
    k_max = int(np.ceil(np.log2(max(lams[-1], 4.0)))) + 1
    pdef = dyadic_partition_check(lams, k_max)
    check("spectral.partition_of_unity", pdef <= 1e-12, pdef, 1e-12)

    T = cfg["time.T"][0]
    state = random_state(basis, np.random.default_rng(cfg.seed))
    moved = schrodinger_propagate(state, 0.7 * T)
    drift = abs(np.linalg.norm(moved.coeffs) - np.linalg.norm(state.coeffs))
    check("evolve.unitarity", drift <= 1e-12, drift, 1e-12)
    two_leg = schrodinger_propagate(schrodinger_propagate(state, 0.3 * T), 0.4 * T)
    gap = np.linalg.norm(two_leg.coeffs - moved.coeffs)
    check("evolve.group_property", gap <= 1e-12, gap, 1e-12)
    grid = time_grid(0.0, T, 16, kind="simpson")
    quad = float(grid.weights @ grid.t ** 3)
    qerr = abs(quad - T ** 4 / 4) / (T ** 4 / 4)
    check("evolve.simpson_cubic_exact", qerr <= 1e-13, qerr, 1e-13)

    gram_T = gramian(basis, region, T)
    rep = observability_constant(gram_T)
    check("observability.lambda_min_positive", (rep.lambda_min > 0)
          and not rep.not_observable, rep.lambda_min, 0.0)
    rep2 = observability_constant(gramian(basis, region, 2 * T))
    check("observability.K_nonincreasing", rep2.K <= rep.K * (1 + 1e-10),
          rep2.K / rep.K, 1.0)
    sub = restricted_constant(gram_T, np.arange(basis.n_modes // 2))
    check("observability.restriction_lower_bound",
          sub.lambda_min >= rep.lambda_min * (1 - 1e-10),
          sub.lambda_min / rep.lambda_min, 1.0)

    signal, diag = synthesize_control(basis, region, state, T,
                                      epsilon=cfg["hum.epsilon"])
    ver = verify_control(basis, region, state, signal)
    rel = ver["residual_T_rel"]
    check("hum.terminal_residual", rel <= 1e-6, rel, 1e-6)
    edef = diag["energy_defect"]
    check("hum.energy_identity", edef <= 1e-8, edef, 1e-8)
    check("hum.optimality_bound", diag["optimality_ok"],
          diag["norm_f_sq"] / max(diag["K"] * state.norm() ** 2, 1e-300), 1.0)

    took = evolution_samples(state, default_synthesis_grid(basis, T))
    par = np.abs(np.linalg.norm(took[0]) - state.norm())
    check("evolve.sample_consistency", par <= 1e-12, par, 1e-12)
    return checks


def cmd_check(args) -> int:
    cfg = _load(args)
    checks = _run_checks(cfg, args)
    outdir = _prepare_dir(args, cfg, "check")
    rows = []
    n_pass = 0
    for name, ok, value, threshold in checks:
        n_pass += ok
        rows.append(_plain_row(f"check.{name}", value,
                               surface=cfg["surface.kind"],
                               certificate_norm=threshold, passed=ok))
        _say(args, f"check {name}: {'pass' if ok else 'FAIL'} "
                   f"(value {value:.6g}, threshold {threshold:.6g})")
    _write_results(outdir, cfg, rows)
    _say(args, f"checks passed: {n_pass}/{len(checks)}")
    _say(args, f"wrote {outdir}")
    if n_pass != len(checks):
        failed = [name for name, ok, _, _ in checks if not ok]
        print(f"failed checks: {', '.join(failed)}", file=sys.stderr)
        return 3
    return 0


# ---------------------------------------------------------------------------
# entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="obslab",
        description="Observability and control experiments on surface meshes.")
    sub = parser.add_subparsers(dest="command", required=True)
    handlers = {
        "mesh": cmd_mesh,
        "spectrum": cmd_spectrum,
        "gramian": cmd_gramian,
        "control": cmd_control,
        "sweep": cmd_sweep,
        "check": cmd_check,
    }
    for name, func in handlers.items():
        p = sub.add_parser(name, help=f"run the {name} command")
        p.add_argument("--config", default=None, help="config file path")
        p.add_argument("--out", default=None, help="output base directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override hum.seed")
        p.add_argument("--force", action="store_true",
                       help="overwrite an existing experiment directory")
        p.add_argument("--quiet", action="store_true",
                       help="suppress the stdout summary")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
