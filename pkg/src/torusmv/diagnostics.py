"""Empirical checks of the stability and regularity estimates.

Each check evaluates both sides of an analytic inequality on solver output
and reports the ratio. The inequalities hold with unspecified constants, so
the constants used here were calibrated once on a documented reference family
(Kuramoto-type potentials with periodized-Laplace initial densities, T = 0.25,
grid 128) and frozen in :mod:`torusmv.calibration`; subsequent runs act as
regression tests against those constants.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import calibration
from .errors import GridMismatchError
from .models import InitialCondition, Potential
from .solver import DensityTrajectory, SolverConfig, solve_mckean_vlasov
from .spectral import (
    GridFunction,
    convolve,
    gradient,
    sobolev_norm,
    sobolev_norm_coeffs,
    to_fourier,
    _ksq,
)

HOLDS_SLACK = 1e-8
MODE_FLOOR = 1e-14


@dataclass(frozen=True)
class InequalityReport:
    name: str
    lhs: float
    rhs: float
    context: dict = field(default_factory=dict)

    @property
    def ratio(self) -> float:
        if self.rhs == 0.0:
            return 0.0 if self.lhs == 0.0 else float("inf")
        return self.lhs / self.rhs

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs * (1.0 + HOLDS_SLACK)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "ratio": self.ratio,
            "holds": self.holds,
            "context": self.context,
        }


def append_report(report: InequalityReport, path) -> None:
    """Append one JSON object per report to a JSON-lines log."""
    with open(path, "a") as fh:
        json.dump(report.to_json(), fh, sort_keys=True)
        fh.write("\n")


def relative_entropy(p: GridFunction, q: GridFunction) -> float:
    """KL divergence integral p log(p/q) dx by quadrature on the grid.

    Requires strictly positive inputs; tiny negative quadrature values for
    p close to q are clamped at zero.
    """
    if p.grid != q.grid:
        raise GridMismatchError("densities on different grids")
    if p.min() <= 0.0 or q.min() <= 0.0:
        raise ValueError("relative entropy needs strictly positive densities")
    val = float(np.mean(p.values * np.log(p.values / q.values)))
    return max(val, 0.0)


def hellinger_sq(p: GridFunction, q: GridFunction) -> float:
    """Squared Hellinger distance integral (sqrt p - sqrt q)^2 dx."""
    if p.grid != q.grid:
        raise GridMismatchError("densities on different grids")
    if p.min() < 0.0 or q.min() < 0.0:
        raise ValueError("hellinger needs nonnegative densities")
    return float(np.mean((np.sqrt(p.values) - np.sqrt(q.values)) ** 2))


def _entropy_sides(
    rho1: DensityTrajectory, rho2: DensityTrajectory, W1: Potential, W2: Potential
) -> tuple:
    """Time-trapezoid integrals of H(rho1(t) | rho2(t)) and of
    |grad(W1 - W2) conv rho2(t)|_L2^2."""
    ent = np.array(
        [relative_entropy(rho1.frame(m), rho2.frame(m)) for m in range(len(rho1.times))]
    )
    diff_vals = W1.repr.values - W2.repr.values
    diff = GridFunction(W1.grid, diff_vals)
    grad_diff = gradient(diff)
    drive = np.empty(len(rho2.times))
    for m in range(len(rho2.times)):
        frame = rho2.frame(m)
        drive[m] = sum(convolve(g, frame).l2() ** 2 for g in grad_diff)
    lhs = float(np.trapezoid(ent, rho1.times))
    raw_rhs = float(np.trapezoid(drive, rho2.times))
    return lhs, raw_rhs


def check_entropy_stability(
    W1: Potential, W2: Potential, phi: InitialCondition, cfg: SolverConfig
) -> InequalityReport:
    """Entropy stability: int_0^T H(rho1 | rho2) <= C int_0^T |grad(W1-W2) conv rho2|^2."""
    rho1 = solve_mckean_vlasov(W1, phi, cfg)
    rho2 = solve_mckean_vlasov(W2, phi, cfg)
    lhs, raw = _entropy_sides(rho1, rho2, W1, W2)
    C = calibration.FROZEN["entropy_stability_C"]
    return InequalityReport(
        name="entropy_stability",
        lhs=lhs,
        rhs=C * raw,
        context={"C": C, "T": cfg.T, "grid_n": phi.grid.n, "dim": phi.grid.dim},
    )


def check_forward_lipschitz(
    W1: Potential,
    W2: Potential,
    phi: InitialCondition,
    beta: int,
    cfg: SolverConfig,
) -> InequalityReport:
    """Forward Lipschitz bound |rho1 - rho2|_L2(cylinder) <= C |W1 - W2|_{H^-beta}."""
    from .solver import space_time_l2_distance

    if beta % 2 != 0:
        raise ValueError("beta must be an even integer")
    diff = GridFunction(W1.grid, W1.repr.values - W2.repr.values)
    weak_norm = sobolev_norm(diff, -float(beta))
    if weak_norm == 0.0:
        return InequalityReport(
            name="forward_lipschitz",
            lhs=0.0,
            rhs=0.0,
            context={"C": calibration.FROZEN["forward_lipschitz_C"], "beta": beta, "degenerate": True},
        )
    rho1 = solve_mckean_vlasov(W1, phi, cfg)
    rho2 = solve_mckean_vlasov(W2, phi, cfg)
    lhs = space_time_l2_distance(rho1, rho2)
    C = calibration.FROZEN["forward_lipschitz_C"]
    return InequalityReport(
        name="forward_lipschitz",
        lhs=lhs,
        rhs=C * weak_norm,
        context={"C": C, "beta": beta, "T": cfg.T, "grid_n": phi.grid.n, "dim": phi.grid.dim},
    )


def stability_constant(rho: DensityTrajectory, K: int, t: float) -> float:
    """sup over 0 < |k| <= K of 1 / |rhohat(t, k)|^2; +inf when a retained
    mode magnitude falls below 1e-14."""
    if K > rho.grid.nyquist:
        raise ValueError("K beyond the grid Nyquist")
    m = int(round(t / rho.h))
    if not math.isclose(rho.times[m], t, rel_tol=0, abs_tol=1e-10 * max(1.0, rho.T)):
        raise ValueError("t is not on the trajectory mesh")
    chat = to_fourier(rho.frame(m)).coeffs
    ksq = _ksq(rho.grid.dim, rho.grid.n)
    band = (ksq > 0) & (ksq <= K * K + 1e-9)
    mags = np.abs(chat[band])
    if mags.min() < MODE_FLOOR:
        return float("inf")
    return float(np.max(1.0 / mags**2))


def time_lipschitz_constant(rho: DensityTrajectory, phi: InitialCondition) -> float:
    """Empirical constant C with |rho(t) - phi|_L1 <= C t on the mesh."""
    ratios = [
        GridFunction(rho.grid, rho.frames[m] - phi.repr.values).l1() / rho.times[m]
        for m in range(1, len(rho.times))
    ]
    return float(max(ratios))


def short_time_threshold(phi: InitialCondition, c_lip: float, K: int) -> float:
    """t0 = c / (2 C) * K^(-zeta), the horizon where every mode up to K keeps
    at least half its initial magnitude."""
    if phi.decon_params is None:
        raise ValueError("initial condition carries no spectral lower bound")
    c, zeta = phi.decon_params
    return c / (2.0 * c_lip) * float(K) ** (-zeta)


def mode_persistence_report(
    rho: DensityTrajectory, phi: InitialCondition, K: int
) -> dict:
    """Check |rhohat(t,k)| >= |phihat(k)| - C_lip t for t <= t0, 0 < |k| <= K.

    Returns the empirical constant, the threshold t0 and the worst margin.
    """
    c_lip = time_lipschitz_constant(rho, phi)
    t0 = short_time_threshold(phi, c_lip, K)
    phihat = to_fourier(phi.repr).coeffs
    ksq = _ksq(rho.grid.dim, rho.grid.n)
    band = (ksq > 0) & (ksq <= K * K + 1e-9)
    worst = float("inf")
    checked = 0
    for m, t in enumerate(rho.times):
        if t > t0:
            break
        chat = to_fourier(rho.frame(m)).coeffs
        margin = np.abs(chat[band]) - (np.abs(phihat[band]) - c_lip * t)
        worst = min(worst, float(margin.min()))
        checked += 1
    return {"c_lip": c_lip, "t0": t0, "worst_margin": worst, "frames_checked": checked,
            "holds": worst >= -1e-12}


def _bochner_profile(diff_frames: np.ndarray, grid, times: np.ndarray, s: float) -> np.ndarray:
    axes = tuple(range(1, diff_frames.ndim))
    coeffs = np.fft.fftn(diff_frames, axes=axes) / grid.total
    return np.array([sobolev_norm_coeffs(c, grid, s) for c in coeffs])


def _time_derivative(frames: np.ndarray, h: float) -> np.ndarray:
    """Central differences inside, one-sided at the endpoints."""
    out = np.empty_like(frames)
    out[1:-1] = (frames[2:] - frames[:-2]) / (2.0 * h)
    out[0] = (frames[1] - frames[0]) / h
    out[-1] = (frames[-1] - frames[-2]) / h
    return out


def short_time_recovery_bound(
    W: Potential,
    W0: Potential,
    rho_W: DensityTrajectory,
    rho_W0: DensityTrajectory,
    K: int,
    t0: float,
    alpha: float,
    zeta: float,
) -> InequalityReport:
    """Band-limited recovery estimate

    |W - W0|_L2^2 <= C (K^(-2 alpha - 2)
        + t0^(-1) K^(2 zeta) (|drho|^2_{H1([0,t0],H^-1)} + |drho|^2_{L2([0,t0],H1)})),

    with drho = rho_W - rho_W0 and the H1-in-time norm via finite differences
    of the frames.
    """
    if W.band_limit is None or W.band_limit > K:
        raise ValueError("W must be band-limited by K")
    if rho_W.frames.shape != rho_W0.frames.shape:
        raise GridMismatchError("trajectories on different meshes")
    diff = GridFunction(W.grid, W.repr.values - W0.repr.values)
    if abs(diff.mean()) > 1e-10:
        raise ValueError("W - W0 must have mean zero")
    lhs = diff.l2() ** 2
    h = rho_W.h
    upto = int(np.floor(t0 / h + 1e-9)) + 1
    upto = max(upto, 2)
    dframes = rho_W.frames[:upto] - rho_W0.frames[:upto]
    times = rho_W.times[:upto]
    grid = rho_W.grid
    prof_h1 = _bochner_profile(dframes, grid, times, 1.0)
    prof_hm1 = _bochner_profile(dframes, grid, times, -1.0)
    dt_frames = _time_derivative(dframes, h)
    prof_dt_hm1 = _bochner_profile(dt_frames, grid, times, -1.0)
    l2_h1_sq = float(np.trapezoid(prof_h1**2, times))
    h1_hm1_sq = float(np.trapezoid(prof_hm1**2 + prof_dt_hm1**2, times))
    C = calibration.FROZEN["short_time_C"]
    rhs = C * (
        float(K) ** (-2.0 * alpha - 2.0)
        + (h1_hm1_sq + l2_h1_sq) * float(K) ** (2.0 * zeta) / t0
    )
    return InequalityReport(
        name="short_time_recovery",
        lhs=lhs,
        rhs=rhs,
        context={
            "C": C,
            "K": K,
            "t0": t0,
            "alpha": alpha,
            "zeta": zeta,
            "frames_used": upto,
        },
    )
