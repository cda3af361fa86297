"""Command-line orchestration: run experiments, emit CSV/JSON artifacts.

Subcommands: kernels | verify | solve | harnack | holder, each driven by a
JSON config (see configs/ for examples).  Results land in a directory with a
manifest.json carrying the config hash, seed and package version; numeric CSV
content is deterministic for a fixed config and seed (repr round-trip floats,
fixed iteration order).  Exit codes: 0 success, 2 when a hard inequality
certificate is violated, 1 on runtime errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig, config_hash, parse_config
from .measure import gamma_bar
from . import kernels as _kernels
from . import volterra as _volterra
from . import geometry as _geometry
from . import solver as _solver
from . import harnack as _harnack

__all__ = ["main", "run"]

SONINE_TOLERANCE = 1e-3


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\r\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\r\n")


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_manifest(out: Path, config: ExperimentConfig, seed: int,
                    extra: dict) -> None:
    manifest = {
        "config_hash": config_hash(config),
        "version": __version__,
        "seed": seed,
        "experiment": config.experiment,
        "config": config.to_dict(),
    }
    manifest.update(extra)
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=_json_safe)


def _json_safe(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj)}")


# ---------------------------------------------------------------------------
# experiment runners


def _run_kernels(config: ExperimentConfig, out: Path, seed: int) -> int:
    spec = config.measure
    step = config.horizon / config.n_steps
    theta = float(config.params["theta"])
    kinds = [
        (_kernels.KernelKind.K_KERNEL, "kernel_k.csv", 0.0),
        (_kernels.KernelKind.K1, "kernel_k1.csv", 0.0),
        (_kernels.KernelKind.ONE_STAR_K, "kernel_one_star_k.csv", 0.0),
        (_kernels.KernelKind.L_KERNEL, "kernel_l.csv", 0.0),
        (_kernels.KernelKind.R_THETA, "kernel_r_theta.csv", theta),
    ]
    files = []
    for kind, name, th in kinds:
        grid = _kernels.sample_kernel(spec, kind, step, config.n_steps, theta=th)
        grid.to_csv(out / name)
        files.append(name)
    _write_manifest(out, config, seed, {"files": files, "theta": theta})
    return 0


def _run_verify(config: ExperimentConfig, out: Path, seed: int) -> int:
    spec = config.measure
    n = config.n_steps
    step = config.horizon / n
    gb = gamma_bar(spec)

    certs = _kernels.bound_certificates(spec, step, n,
                                        r=float(config.params["r"]))
    certs.to_csv(out / "certificates.csv")

    l_kernel = _volterra.sample_l(spec, step, n)
    k_kernel = _volterra.sample_k(spec, step, n)
    sonine = _volterra.conv(k_kernel, l_kernel)
    window = slice(9, None)  # t >= 10 * step
    sonine_residual = float(np.max(np.abs(sonine.values[window] - 1.0)))

    r_grid = np.logspace(-3, math.log10(0.45), 8)
    lam_grid = np.linspace(0.1, 1.0, 7)
    phi_lam = _geometry.phi_lambda_check(spec, r_grid, lam_grid)
    phi_low = _geometry.phi_lower_bound_check(
        spec, np.clip(r_grid, 1e-3, 0.999))
    p_default = 0.5 * (1.0 + 1.0 / (1.0 - gb))
    p = float(config.params.get("p_scaling") or p_default)
    scaling = _geometry.scaling_certificate(spec, p, r_grid)
    scaling.to_csv(out / "scaling.csv")

    violations = (certs.hard_violations + phi_lam.violations
                  + phi_low.violations
                  + (1 if sonine_residual > SONINE_TOLERANCE else 0))
    report = {
        "gamma_bar": gb,
        "bound_certificates": certs.summary(),
        "sonine_residual": sonine_residual,
        "sonine_tolerance": SONINE_TOLERANCE,
        "phi_lambda": {"worst_rel_slack": phi_lam.worst_rel_slack,
                       "violations": phi_lam.violations},
        "phi_lower_bound": {"c_mu": phi_low.c_mu,
                            "worst_rel_slack": phi_low.worst_rel_slack,
                            "violations": phi_low.violations},
        "scaling": {"p": scaling.p, "c_emp": scaling.c_emp,
                    "r_admissible": scaling.r_admissible},
        "hard_violations": violations,
    }
    with open(out / "report.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True, default=_json_safe)
    _write_manifest(out, config, seed, {
        "files": ["certificates.csv", "scaling.csv", "report.json"]})
    return 2 if violations else 0


def _initial_data(desc: dict, grid: _solver.SpatialGrid, seed: int):
    kind = desc.get("kind", "constant")
    if kind == "constant":
        return float(desc.get("value", 1.0))
    if grid.dim == 0:
        return float(desc.get("value", 1.0))
    x = grid.axis_centers(0)
    if kind == "sine":
        amp = float(desc.get("amplitude", 1.0))
        field_1d = amp * np.sin(math.pi * (x - grid.extents[0][0])
                                / (grid.extents[0][1] - grid.extents[0][0]))
    elif kind == "fourier":
        rng = np.random.default_rng(np.random.SeedSequence(
            [seed, int(desc.get("member", 0))]))
        field_1d = _harnack.random_fourier_profile(rng)(x)
    else:
        raise ConfigError([("/params/u0/kind", f"unknown kind {kind!r}")])
    if grid.dim == 1:
        return field_1d
    y = grid.axis_centers(1)
    return np.outer(field_1d, np.sin(math.pi * (y - grid.extents[1][0])
                                     / (grid.extents[1][1] - grid.extents[1][0])))


def _run_solve(config: ExperimentConfig, out: Path, seed: int) -> int:
    spec = config.measure
    grid = config.grid()
    params = config.params
    u0 = _initial_data(params.get("u0", {"kind": "constant"}), grid, seed)
    f_desc = params.get("f", {"kind": "constant", "value": 0.0})
    f_val = float(f_desc.get("value", 0.0)) if f_desc.get("kind") == "constant" \
        else 0.0
    kernel_cumulative = None
    if params.get("use_yosida"):
        n_yos = int(params["n_yosida"])
        step = config.horizon / config.n_steps
        yos = _volterra.yosida_kernels(spec, n_yos, step, config.n_steps)
        cum = np.concatenate(([0.0],
                              np.cumsum(yos.k_n.masses())))
        kernel_cumulative = cum
    coeffs = config.coefficients(grid) if grid.dim else None
    reaction = float(params["ode_lambda"]) if grid.dim == 0 else 0.0
    field = _solver.solve(spec, grid, coeffs, u0, f_val, config.horizon,
                          config.n_steps, reaction=reaction,
                          kernel_cumulative=kernel_cumulative)

    rows = []
    if grid.dim == 0:
        for m, t in enumerate(field.times):
            rows.append((t, 0, field.values[m, 0]))
        header = ["t", "i", "value"]
    elif grid.dim == 1:
        for m, t in enumerate(field.times):
            for i in range(grid.n_cells[0]):
                rows.append((t, i, field.values[m, i]))
        header = ["t", "i", "value"]
    else:
        for m, t in enumerate(field.times):
            for i in range(grid.n_cells[0]):
                for j in range(grid.n_cells[1]):
                    rows.append((t, i, j, field.values[m, i, j]))
        header = ["t", "i", "j", "value"]
    _write_csv(out / "solution.csv", header, rows)
    _write_manifest(out, config, seed, {
        "files": ["solution.csv"],
        "wall_time": field.wall_time,
        "max_step_residual": float(np.max(field.residuals))
        if field.residuals.size else 0.0,
    })
    return 0


def _run_harnack(config: ExperimentConfig, out: Path, seed: int) -> int:
    spec = config.measure
    params = config.params
    grid = config.grid() if config.grid_spec else None
    n_cells = grid.n_cells[0] if grid is not None and grid.dim else 64
    report = _harnack.harnack_ensemble(
        spec, n_members=int(params["n_members"]), seed=seed,
        n_cells=n_cells, n_steps=config.n_steps, r=float(params["r"]),
        x0=float(params["x0"]), delta=float(params["delta"]),
        tau=float(params["tau"]), p=float(params["p"]),
        t0=float(params["t0"]))
    mhash = config_hash(config)[:16]
    rows = [(seed, i, r, report.p, report.n_cells, mhash)
            for i, r in enumerate(report.ratios)]
    _write_csv(out / "harnack.csv",
               ["seed", "member", "ratio", "p", "n_cells", "measure_hash"],
               rows)
    summary = {
        "max_ratio": report.max_ratio,
        "median_ratio": report.median_ratio,
        "all_finite": report.all_finite,
        "statuses": list(report.statuses),
    }
    with open(out / "report.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, default=_json_safe)
    _write_manifest(out, config, seed,
                    {"files": ["harnack.csv", "report.json"]})
    return 0


def _run_holder(config: ExperimentConfig, out: Path, seed: int) -> int:
    spec = config.measure
    params = config.params
    r = float(params["r"])
    eta = float(params["eta"])
    theta = float(params["theta"])
    height = _geometry.phi_bar(spec, r)
    horizon = 2.0 * eta * height
    if config.grid_spec:
        grid = config.grid()
    else:
        bc = _solver.BoundaryCondition.dirichlet(0.0)
        grid = _solver.SpatialGrid(extents=((0.0, 1.0),), n_cells=(256,),
                                   boundary=((bc, bc),))
    coeffs = config.coefficients(grid)
    u0 = _initial_data(params.get("u0", {"kind": "sine"}), grid, seed)
    field = _solver.solve(spec, grid, coeffs, u0, 0.0, horizon, config.n_steps)
    t1 = float(params["t1"]) if params.get("t1") else 1.5 * eta * height
    profile = _harnack.oscillation_profile(
        field, spec, t1=t1, x1=float(params["x1"]), theta=theta,
        levels=params["levels"], r=r)
    _write_csv(out / "oscillation.csv", ["level", "radius", "osc"],
               list(zip(profile.levels, profile.radii, profile.osc)))
    summary = {
        "kappa": profile.kappa,
        "fit_residual": profile.fit_residual,
        "status": profile.status,
        "t1": t1,
        "r": r,
    }
    with open(out / "report.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, default=_json_safe)
    _write_manifest(out, config, seed,
                    {"files": ["oscillation.csv", "report.json"]})
    return 0


_RUNNERS = {
    "kernels": _run_kernels,
    "verify": _run_verify,
    "solve": _run_solve,
    "harnack": _run_harnack,
    "holder": _run_holder,
}


def run(config: ExperimentConfig, out_dir, *, seed: int | None = None,
        n_steps: int | None = None) -> int:
    """Execute one experiment; returns the process exit code."""
    if n_steps is not None:
        config = ExperimentConfig(
            experiment=config.experiment, measure=config.measure,
            horizon=config.horizon, n_steps=int(n_steps),
            grid_spec=config.grid_spec,
            coefficients_spec=config.coefficients_spec, params=config.params)
    seed = int(config.params["seed"]) if seed is None else int(seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return _RUNNERS[config.experiment](config, out, seed)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="memkern",
        description="memory-kernel calculus experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _RUNNERS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to a JSON config")
        p.add_argument("--out", default="results", help="output directory")
        p.add_argument("--steps", type=int, default=None,
                       help="override n_steps")
        p.add_argument("--seed", type=int, default=None, help="override seed")
    args = parser.parse_args(argv)
    try:
        config = parse_config(args.config)
        if config.experiment != args.command:
            config = ExperimentConfig(
                experiment=args.command, measure=config.measure,
                horizon=config.horizon, n_steps=config.n_steps,
                grid_spec=config.grid_spec,
                coefficients_spec=config.coefficients_spec,
                params=config.params)
        return run(config, args.out, seed=args.seed, n_steps=args.steps)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports and exits
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
