"""Synthetic regression data on the time-space cylinder and its likelihood.

Records (t_i, X_i, Y_i) realize Y_i = rho(t_i, X_i) + sigma * eps_i with
(t_i, X_i) uniform on [0, T] x torus and standard normal noise. The Gaussian
log-likelihood of a candidate potential is

    l(W) = -(1 / (2 sigma^2)) * sum_i (Y_i - rho_W(t_i, X_i))^2,

which for sigma = 1 is the unnormalized log posterior weight. Space-time
norms reported for data follow the uniform probability measure on the
cylinder (time integrals divided by T).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .models import InitialCondition, Potential
from .solver import DensityTrajectory, SolverConfig, evaluate_trajectory, solve_mckean_vlasov


@dataclass(frozen=True)
class ObservationSet:
    times: np.ndarray  # (N,)
    points: np.ndarray  # (N, d)
    values: np.ndarray  # (N,)
    sigma: float
    T: float
    seed: int

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        x = np.asarray(self.points, dtype=np.float64)
        y = np.asarray(self.values, dtype=np.float64)
        if t.ndim != 1 or x.ndim != 2 or x.shape[0] != t.size or y.shape != t.shape:
            raise ValueError("inconsistent record arrays")
        if t.size and (t.min() < 0 or t.max() > self.T + 1e-12):
            raise ValueError("t outside [0, T]")
        if t.size and (x.min() <= 0.0 or x.max() > 1.0):
            raise ValueError("X outside (0, 1]")
        if not np.all(np.isfinite(y)):
            raise ValueError("Y must be finite")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        for arr in (t, x, y):
            arr.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "points", x)
        object.__setattr__(self, "values", y)

    def __len__(self) -> int:
        return self.times.size

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def subset(self, n: int) -> "ObservationSet":
        """First n records (used for nested designs in rate tables)."""
        return ObservationSet(
            times=self.times[:n],
            points=self.points[:n],
            values=self.values[:n],
            sigma=self.sigma,
            T=self.T,
            seed=self.seed,
        )


def generate_observations(
    rho: DensityTrajectory, N: int, sigma: float, seed: int
) -> ObservationSet:
    """Draw N design points uniformly on the cylinder and add Gaussian noise."""
    if N < 1:
        raise ValueError("N must be >= 1")
    rng = np.random.default_rng(seed)
    t = rng.random(N) * rho.T
    x = 1.0 - rng.random((N, rho.grid.dim))  # in (0, 1]
    clean = evaluate_trajectory(rho, t, x)
    y = clean + sigma * rng.standard_normal(N)
    return ObservationSet(times=t, points=x, values=y, sigma=float(sigma), T=rho.T, seed=int(seed))


def log_likelihood(
    W: Potential,
    data: ObservationSet,
    phi: InitialCondition,
    cfg: SolverConfig,
) -> float:
    """Solve the forward PDE once for W and score the data.

    With sigma = 0 the value is 0 when every residual vanishes and -inf
    otherwise (the noiseless limit).
    """
    value, _ = log_likelihood_with_trajectory(W, data, phi, cfg)
    return value


def log_likelihood_with_trajectory(
    W: Potential,
    data: ObservationSet,
    phi: InitialCondition,
    cfg: SolverConfig,
    trajectory: Optional[DensityTrajectory] = None,
) -> tuple:
    """As :func:`log_likelihood` but also returns the solved trajectory so a
    sampler can cache it. Empty data scores 0 without solving."""
    if len(data) == 0:
        return 0.0, trajectory
    if trajectory is None:
        trajectory = solve_mckean_vlasov(W, phi, cfg)
    predicted = evaluate_trajectory(trajectory, data.times, data.points)
    return _gaussian_score(data.values - predicted, data.sigma), trajectory


def _gaussian_score(residuals: np.ndarray, sigma: float) -> float:
    ss = float(np.sum(residuals**2))
    if sigma == 0.0:
        return 0.0 if ss == 0.0 else float("-inf")
    return -0.5 * ss / sigma**2


def write_observations_csv(data: ObservationSet, path, meta: Optional[dict] = None) -> None:
    """Rows ``t,x1[,x2],y`` plus a JSON sidecar at ``<path>.meta.json``."""
    header = ["t"] + [f"x{i + 1}" for i in range(data.dim)] + ["y"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(len(data)):
            row = [repr(float(data.times[i]))]
            row += [repr(float(v)) for v in data.points[i]]
            row.append(repr(float(data.values[i])))
            w.writerow(row)
    sidecar = {
        "sigma": data.sigma,
        "seed": data.seed,
        "T": data.T,
        "dim": data.dim,
        "count": len(data),
        "norm_convention": "uniform probability measure on the cylinder",
    }
    if meta:
        sidecar.update(meta)
    with open(str(path) + ".meta.json", "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_observations_csv(path) -> ObservationSet:
    with open(str(path) + ".meta.json") as fh:
        meta = json.load(fh)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    dim = len(rows[0]) - 2
    data = np.asarray([[float(v) for v in r] for r in rows[1:]])
    return ObservationSet(
        times=data[:, 0],
        points=data[:, 1 : 1 + dim],
        values=data[:, 1 + dim],
        sigma=float(meta["sigma"]),
        T=float(meta["T"]),
        seed=int(meta["seed"]),
    )
