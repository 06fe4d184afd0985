"""Render run artifacts to figures.

Supported kinds:

    solve_heatmap      density over the time-space cylinder (solve runs)
    potential_overlay  truth vs posterior mean with a sample envelope (infer)
    rate               log-log error-vs-N table with its theoretical guide
                       (forward_rate / inverse_rate runs)
    chaos_trend        particle-vs-PDE L1 gap against the particle count
    stability_profile  stability constant against time, one curve per band

Figures are a pure function of the CSV bodies: deterministic style, fixed
SVG hash salt, no timestamps, so reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

KINDS = ("solve_heatmap", "potential_overlay", "rate", "chaos_trend", "stability_profile")

_STYLE = {
    "figure.figsize": (6.0, 4.0),
    "figure.dpi": 130,
    "savefig.dpi": 130,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "mvfigures",
}


class SchemaError(ValueError):
    """An input file does not match the documented artifact schema."""


@dataclass(frozen=True)
class FigureJob:
    manifest_path: Path
    kind: str
    out_path: Path

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r}; expected one of {KINDS}")


def _load_manifest(path: Path) -> dict:
    if not path.exists():
        raise SchemaError(f"manifest {path} does not exist")
    with open(path) as fh:
        return json.load(fh)


def _read_table(path: Path, required: list) -> dict:
    """CSV to column arrays; missing columns are reported by name."""
    if not path.exists():
        raise SchemaError(f"input table {path} does not exist")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError(f"{path.name}: empty file")
    header = rows[0]
    for col in required:
        if col not in header:
            raise SchemaError(f"{path.name}: missing required column {col!r}")
    body = rows[1:]
    if not body:
        raise SchemaError(f"{path.name}: table has no data rows")
    out = {}
    for j, name in enumerate(header):
        vals = [r[j] for r in body]
        try:
            out[name] = np.array([float(v) for v in vals])
        except ValueError:
            out[name] = np.array(vals)
    return out


def _artifact(manifest: dict, manifest_path: Path, key: str) -> Path:
    outputs = manifest.get("outputs", {})
    if key not in outputs:
        raise SchemaError(f"manifest lacks output {key!r}")
    return manifest_path.parent / outputs[key]


def render(job: FigureJob) -> list:
    """Render one job; returns the paths written ([png, svg])."""
    manifest = _load_manifest(Path(job.manifest_path))
    with plt.rc_context(_STYLE):
        fig = _FIGURES[job.kind](manifest, Path(job.manifest_path))
        try:
            base = Path(job.out_path)
            if base.suffix in (".png", ".svg"):
                base = base.with_suffix("")
            base.parent.mkdir(parents=True, exist_ok=True)
            paths = [base.with_suffix(".png"), base.with_suffix(".svg")]
            fig.savefig(paths[0])
            fig.savefig(paths[1], metadata={"Date": None})
        finally:
            plt.close(fig)
    return paths


def _fig_solve_heatmap(manifest: dict, mpath: Path):
    table = _read_table(_artifact(manifest, mpath, "trajectory_csv"), ["t", "x1", "rho"])
    if "x2" in table:
        raise SchemaError("solve_heatmap renders d=1 trajectories only")
    t = np.unique(table["t"])
    x = np.unique(table["x1"])
    grid = table["rho"].reshape(len(t), len(x))
    fig, ax = plt.subplots()
    im = ax.pcolormesh(t, x, grid.T, shading="nearest", cmap="viridis")
    fig.colorbar(im, ax=ax, label="density")
    ax.set_xlabel("t")
    ax.set_ylabel("x")
    ax.set_title("density over the cylinder")
    return fig


def _fig_potential_overlay(manifest: dict, mpath: Path):
    table = _read_table(
        _artifact(manifest, mpath, "posterior_band_csv"),
        ["x1", "posterior_mean", "q05", "q95"],
    )
    x = table["x1"]
    fig, ax = plt.subplots()
    ax.fill_between(x, table["q05"], table["q95"], alpha=0.3, label="posterior 5-95%")
    ax.plot(x, table["posterior_mean"], lw=2, label="posterior mean")
    if "truth" in table:
        ax.plot(x, table["truth"], "k--", lw=1.5, label="truth")
    ax.set_xlabel("x")
    ax.set_ylabel("W(x)")
    ax.set_title("interaction potential recovery")
    ax.legend()
    return fig


def _fig_rate(manifest: dict, mpath: Path):
    table = _read_table(_artifact(manifest, mpath, "table"), ["n_obs", "error"])
    med = _read_table(_artifact(manifest, mpath, "medians"), ["n_obs", "error"])
    fig, ax = plt.subplots()
    ax.loglog(table["n_obs"], table["error"], "o", ms=4, alpha=0.5, label="cells")
    ax.loglog(med["n_obs"], med["error"], "s-", lw=2, label="median")
    n_ref = np.array(sorted(set(table["n_obs"])))
    if "theta" in table:
        theta = float(table["theta"][0])
        guide = med["error"][0] * (n_ref / n_ref[0]) ** (-theta)
        ax.loglog(n_ref, guide, "r--", label=f"n^(-theta), theta={theta:.6g}")
    elif "rate_theory" in table:
        order = np.argsort(table["n_obs"])
        n_sorted = table["n_obs"][order]
        rate_sorted = table["rate_theory"][order]
        scale = med["error"][0] / rate_sorted[0]
        ax.loglog(n_sorted, scale * rate_sorted, "r--", label="theoretical rate (scaled)")
    ax.set_xlabel("N")
    ax.set_ylabel("error")
    ax.set_title(f"{manifest.get('experiment', 'rate')} table")
    ax.legend()
    return fig


def _fig_chaos_trend(manifest: dict, mpath: Path):
    table = _read_table(_artifact(manifest, mpath, "table"), ["n_particles", "l1_distance"])
    med = _read_table(_artifact(manifest, mpath, "medians"), ["n_particles", "l1_distance"])
    fig, ax = plt.subplots()
    ax.loglog(table["n_particles"], table["l1_distance"], "o", ms=4, alpha=0.5, label="cells")
    ax.loglog(med["n_particles"], med["l1_distance"], "s-", lw=2, label="median")
    ax.set_xlabel("particles")
    ax.set_ylabel("cylinder L1 gap")
    ax.set_title("convergence to the mean-field density")
    ax.legend()
    return fig


def _fig_stability_profile(manifest: dict, mpath: Path):
    table = _read_table(_artifact(manifest, mpath, "table"), ["K", "t", "iota"])
    if not np.isfinite(table["iota"]).any():
        raise SchemaError("stability table contains no finite entries to draw")
    fig, ax = plt.subplots()
    for K in sorted(set(table["K"])):
        sel = table["K"] == K
        t = table["t"][sel]
        iota = table["iota"][sel]
        finite = np.isfinite(iota)
        ax.semilogy(t[finite], iota[finite], "o-", label=f"K={int(K)}")
    ax.set_xlabel("t")
    ax.set_ylabel("stability constant")
    ax.set_title("deconvolution stability over time")
    ax.legend()
    return fig


_FIGURES = {
    "solve_heatmap": _fig_solve_heatmap,
    "potential_overlay": _fig_potential_overlay,
    "rate": _fig_rate,
    "chaos_trend": _fig_chaos_trend,
    "stability_profile": _fig_stability_profile,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="mvfigures", description=__doc__)
    parser.add_argument("--manifest", required=True, help="run manifest JSON")
    parser.add_argument("--kind", required=True, help=" | ".join(KINDS))
    parser.add_argument("--out", required=True, help="output path (extension ignored)")
    args = parser.parse_args(argv)
    try:
        paths = render(FigureJob(Path(args.manifest), args.kind, Path(args.out)))
    except (SchemaError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
