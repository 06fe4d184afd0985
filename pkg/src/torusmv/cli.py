"""Command line interface.

Subcommands: solve, simulate, generate, infer, diagnose, and
``experiment <name>`` for the batch runners. Every run reads a JSON config
(defaults apply for missing keys, unknown keys are rejected) and writes its
artifacts plus a manifest into the output directory.

Exit codes: 0 success, 2 when a mathematical invariant was violated
(instability, failed inequality check, non-identifiable setup), 1 for any
other error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import calibration, diagnostics
from .errors import ConfigError, InvariantError
from .experiments import (
    RUNNERS,
    _chain_cfg,
    _grid,
    _prior_spec,
    _solver_cfg,
    merge_config,
    write_manifest,
    write_table_csv,
)
from .inference import posterior_mean, run_chain, write_chain_csv, write_chain_summary
from .models import initial_from_id, kuramoto_potential, periodized_laplace, potential_from_id
from .observation import generate_observations, read_observations_csv, write_observations_csv
from .particles import bin_histogram, simulate, write_histogram_csv, write_snapshots_csv
from .solver import solve_mckean_vlasov, write_trajectory_csv


def _load_config(args) -> dict:
    user = {}
    if args.config:
        with open(args.config) as fh:
            user = json.load(fh)
    cfg = merge_config(user)
    if args.seed is not None:
        cfg["seed"] = args.seed
    return cfg


def _out_dir(args) -> Path:
    out = Path(args.out or "runs")
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_solve(args) -> int:
    cfg = _load_config(args)
    cfg["experiment"] = "solve"
    out = _out_dir(args)
    grid = _grid(cfg)
    W = potential_from_id(cfg["potential"], grid)
    phi = initial_from_id(cfg["initial"], grid)
    rho = solve_mckean_vlasov(W, phi, _solver_cfg(cfg))
    write_trajectory_csv(rho, out / "trajectory.csv")
    masses = rho.masses()
    invariants = {
        "mass_max_abs_error": float(np.max(np.abs(masses - 1.0))),
        "min_density": rho.min_value(),
        "strictly_positive": bool(rho.min_value() > 0.0),
    }
    write_manifest(cfg, {"trajectory_csv": "trajectory.csv"}, invariants, out)
    return 0


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    cfg["experiment"] = "simulate"
    out = _out_dir(args)
    grid = _grid(cfg)
    W = potential_from_id(cfg["potential"], grid)
    phi = initial_from_id(cfg["initial"], grid)
    p = cfg["particles"]
    scfg = _solver_cfg(cfg)
    snaps = simulate(
        W, phi, p["n"], scfg.T, p["steps"], p["snapshot_every"], cfg["seed"],
        drift_mode=p["drift_mode"],
    )
    hist = bin_histogram(snaps, cfg["histogram"]["time_bins"], cfg["histogram"]["space_bins"], T=scfg.T)
    write_snapshots_csv(snaps, out / "snapshots.csv")
    write_histogram_csv(hist, out / "histogram.csv")
    invariants = {
        "snapshots": len(snaps),
        "count_total": int(hist.counts.sum()),
        "count_expected": len(snaps) * p["n"],
    }
    write_manifest(cfg, {"snapshots_csv": "snapshots.csv", "histogram_csv": "histogram.csv"}, invariants, out)
    return 0


def cmd_generate(args) -> int:
    cfg = _load_config(args)
    cfg["experiment"] = "generate"
    out = _out_dir(args)
    grid = _grid(cfg)
    W = potential_from_id(cfg["potential"], grid)
    phi = initial_from_id(cfg["initial"], grid)
    rho = solve_mckean_vlasov(W, phi, _solver_cfg(cfg))
    data = generate_observations(rho, cfg["n_obs"], cfg["sigma"], cfg["seed"])
    write_observations_csv(
        data,
        out / "observations.csv",
        meta={"potential": cfg["potential"], "initial": cfg["initial"], "grid_n": grid.n},
    )
    invariants = {"count": len(data), "sigma": data.sigma}
    write_manifest(cfg, {"observations_csv": "observations.csv"}, invariants, out)
    return 0


def cmd_infer(args) -> int:
    cfg = _load_config(args)
    cfg["experiment"] = "infer"
    out = _out_dir(args)
    grid = _grid(cfg)
    phi = initial_from_id(cfg["initial"], grid)
    scfg = _solver_cfg(cfg)
    if cfg["data_path"]:
        data = read_observations_csv(cfg["data_path"])
        # only claim a truth curve if the data records its source potential
        with open(str(cfg["data_path"]) + ".meta.json") as fh:
            truth_id = json.load(fh).get("potential")
    else:
        truth_id = cfg["potential"]
        W0 = potential_from_id(truth_id, grid)
        rho0 = solve_mckean_vlasov(W0, phi, scfg)
        data = generate_observations(rho0, cfg["n_obs"], cfg["sigma"], cfg["seed"])
    spec = _prior_spec(cfg, n_obs=len(data))
    samples, diag = run_chain(spec, data, phi, scfg, _chain_cfg(cfg, cfg["seed"]))
    mean, wbar = posterior_mean(samples, grid)
    write_chain_csv(diag, out / "chain.csv")
    write_chain_summary(diag, mean, out / "summary.json")
    _write_posterior_band(truth_id, grid, samples, mean, out)
    invariants = {
        "acceptance_rate": diag["acceptance_rate"],
        "solve_count": diag["solve_count"],
        "samples": len(samples),
        "warnings": diag["warnings"],
    }
    outputs = {
        "chain_csv": "chain.csv",
        "summary_json": "summary.json",
        "posterior_band_csv": "posterior_band.csv",
    }
    write_manifest(cfg, outputs, invariants, out)
    return 0


def _write_posterior_band(truth_id, grid, samples, mean, out: Path) -> None:
    basis = samples[0].basis
    curves = np.stack([basis.synthesize(s.values, grid).repr.values.reshape(-1) for s in samples])
    rows = []
    mean_vals = basis.synthesize(mean.values, grid).repr.values.reshape(-1)
    truth_vals = None
    if truth_id:
        truth_vals = potential_from_id(truth_id, grid).repr.values.reshape(-1)
    lo = np.quantile(curves, 0.05, axis=0)
    hi = np.quantile(curves, 0.95, axis=0)
    coords = [c.reshape(-1) for c in grid.node_coords()]
    for i in range(mean_vals.size):
        row = {"x1": coords[0][i]}
        if grid.dim == 2:
            row["x2"] = coords[1][i]
        row.update(
            {"posterior_mean": mean_vals[i], "q05": lo[i], "q95": hi[i]}
        )
        if truth_vals is not None:
            row["truth"] = truth_vals[i]
        rows.append(row)
    columns = ["x1"] + (["x2"] if grid.dim == 2 else []) + ["posterior_mean", "q05", "q95"]
    if truth_vals is not None:
        columns.append("truth")
    write_table_csv(rows, columns, out / "posterior_band.csv")


def cmd_diagnose(args) -> int:
    """Inequality suite on the reference family; exit 2 if anything fails."""
    cfg = _load_config(args)
    cfg["experiment"] = "solve"
    out = _out_dir(args)
    grid = _grid(cfg)
    scfg = _solver_cfg(cfg)
    log = out / "diagnostics.jsonl"
    log.unlink(missing_ok=True)
    reports = []
    kur = kuramoto_potential(grid) if grid.dim == 1 else potential_from_id("kuramoto", grid)
    from .calibration import _scaled

    half = _scaled(kur, 0.5, grid)
    for m in (1, 2):
        phi = periodized_laplace(m, grid)
        reports.append(diagnostics.check_entropy_stability(kur, half, phi, scfg))
        reports.append(diagnostics.check_forward_lipschitz(kur, half, phi, 4, scfg))
    rng = np.random.default_rng(cfg["seed"])
    for _ in range(20):
        p, q = _random_density_pair(grid, rng)
        h2 = diagnostics.hellinger_sq(p, q)
        kl = diagnostics.relative_entropy(p, q)
        reports.append(diagnostics.InequalityReport("hellinger_le_kl", h2, kl))
    for r in reports:
        diagnostics.append_report(r, log)
    ok = all(r.holds for r in reports)
    invariants = {"reports": len(reports), "all_hold": ok, "constants": calibration.FROZEN}
    write_manifest(cfg, {"diagnostics_jsonl": "diagnostics.jsonl"}, invariants, out)
    if not ok:
        raise InvariantError("an inequality check failed; see diagnostics.jsonl")
    return 0


def _random_density_pair(grid, rng):
    from .spectral import GridFunction

    def one():
        vals = np.ones(grid.shape)
        for _ in range(3):
            k = rng.integers(1, 5, size=grid.dim)
            amp = rng.uniform(-0.2, 0.2)
            phase = rng.uniform(0, 2 * np.pi)
            mesh = grid.node_coords()
            arg = sum(2 * np.pi * int(ki) * m for ki, m in zip(k, mesh))
            vals = vals + amp * np.cos(arg + phase)
        vals = np.clip(vals, 0.05, None)
        return GridFunction(grid, vals / vals.mean())

    return one(), one()


def cmd_experiment(args) -> int:
    cfg = _load_config(args)
    cfg["experiment"] = args.name
    runner = RUNNERS.get(args.name)
    if runner is None:
        raise ConfigError(f"unknown experiment {args.name!r}")
    out = _out_dir(args)
    runner(cfg, out_dir=out, workers=args.threads)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="torusmv", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=str, default=None, help="JSON config path")
        p.add_argument("--out", type=str, default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--threads", type=int, default=1, help="parallel workers")

    for name, fn in [
        ("solve", cmd_solve),
        ("simulate", cmd_simulate),
        ("generate", cmd_generate),
        ("infer", cmd_infer),
        ("diagnose", cmd_diagnose),
    ]:
        p = sub.add_parser(name)
        common(p)
        p.set_defaults(fn=fn)
    p = sub.add_parser("experiment")
    p.add_argument("name", type=str, help="forward_rate | inverse_rate | chaos_trend | stability_profile")
    common(p)
    p.set_defaults(fn=cmd_experiment)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except InvariantError as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
