"""Time integration of the mean-field Fokker-Planck dynamics on the torus.

The nonlinear equation

    d rho / dt = Lap rho + div( rho * grad(W conv rho) ),   rho(0) = phi,

is marched with an IMEX splitting: diffusion is integrated implicitly (it is
diagonal in Fourier space), the transport term pseudo-spectrally and
explicitly, with the 2/3 dealiasing rule applied after the pointwise product.
``imex1`` is first order (implicit Euler diffusion), ``imex2`` a two-stage
predictor-corrector that reduces to Crank-Nicolson on the pure heat flow.

The divergence form of the transport term has exactly zero mean, so the total
mass is conserved to rounding error at every step. A linearized march with a
frozen drift source and the Picard fixed-point iteration built on it are also
provided; the converged fixed point satisfies the same discrete equations as
the direct nonlinear march.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError, GridMismatchError, PicardNonConvergenceError, SolverInstabilityError
from .models import InitialCondition, Potential
from .spectral import (
    FourierCoeffs,
    GridFunction,
    TorusGrid,
    _axis_freqs,
    _dealias_mask,
    _diff_factors,
    _ksq,
    from_fourier,
    sobolev_norm_coeffs,
)

MASS_TOL = 1e-8
NEGATIVITY_TOL = -1e-8
TRANSPORT_CAP = 0.1


@dataclass(frozen=True)
class SolverConfig:
    T: float = 0.25
    steps: int = 256
    picard_tol: float = 1e-8
    picard_max_iter: int = 25
    scheme: str = "imex1"

    def __post_init__(self):
        if self.T <= 0 or self.steps < 1:
            raise ConfigError("need T > 0 and steps >= 1")
        if self.scheme not in ("imex1", "imex2"):
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.picard_tol <= 0 or self.picard_max_iter < 1:
            raise ConfigError("picard_tol and picard_max_iter must be positive")

    @property
    def h(self) -> float:
        return self.T / self.steps


@dataclass(frozen=True)
class DensityTrajectory:
    """Uniformly time-sampled density frames rho(t_m, .) on [0, T].

    Every frame has unit mass (checked to 1e-8). Frames are emitted by the
    solver unmodified; values may carry rounding-level negative undershoot no
    worse than -1e-8, anything below that is rejected as an instability
    upstream. On the smooth instances used throughout, frames are strictly
    positive.
    """

    grid: TorusGrid
    times: np.ndarray
    frames: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        fr = np.asarray(self.frames, dtype=np.float64)
        if fr.shape != (t.size,) + self.grid.shape:
            raise ValueError("frames shape does not match times and grid")
        h = t[1] - t[0]
        if t[0] != 0.0 or not np.allclose(np.diff(t), h, rtol=0, atol=1e-12 * max(1.0, t[-1])):
            raise ValueError("times must start at 0 and be uniform")
        axes = tuple(range(1, fr.ndim))
        masses = fr.mean(axis=axes)
        if np.max(np.abs(masses - 1.0)) > MASS_TOL:
            raise ValueError("a frame lost mass beyond tolerance")
        if fr.min() < NEGATIVITY_TOL:
            raise ValueError("a frame is negative beyond the instability tolerance")
        t.setflags(write=False)
        fr.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "frames", fr)

    @property
    def h(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def T(self) -> float:
        return float(self.times[-1])

    def frame(self, m: int) -> GridFunction:
        return GridFunction(self.grid, self.frames[m])

    def min_value(self) -> float:
        return float(self.frames.min())

    def masses(self) -> np.ndarray:
        axes = tuple(range(1, self.frames.ndim))
        return self.frames.mean(axis=axes)

    def coeff_frames(self) -> np.ndarray:
        """Normalized Fourier coefficients of every frame, shape (M+1, ...)."""
        axes = tuple(range(1, self.frames.ndim))
        return np.fft.fftn(self.frames, axes=axes) / self.grid.total


def clipped_renormalized(frame: GridFunction) -> GridFunction:
    """Display-only cleanup: clip tiny negatives at 0 and restore unit mass."""
    v = np.clip(frame.values, 0.0, None)
    return GridFunction(frame.grid, v / v.mean())


class _March:
    """Workspace for one solve; holds the precomputed spectral factors."""

    def __init__(self, W: Potential, phi: InitialCondition, cfg: SolverConfig):
        if W.grid != phi.grid:
            raise GridMismatchError("potential and initial condition on different grids")
        grid = phi.grid
        self.grid = grid
        self.cfg = cfg
        h = cfg.h
        ksq = _ksq(grid.dim, grid.n)
        A = 4.0 * np.pi**2 * ksq
        self.inv_full = 1.0 / (1.0 + h * A)
        self.cn_num = 1.0 - 0.5 * h * A
        self.inv_half = 1.0 / (1.0 + 0.5 * h * A)
        diff = _diff_factors(grid.dim, grid.n)
        mask = _dealias_mask(grid.dim, grid.n)
        what = W.fourier.coeffs
        self.grad_w = [d * what for d in diff]
        self.div_factors = [d * mask for d in diff]
        self._fft = np.fft.fft if grid.dim == 1 else np.fft.fft2
        self._ifft = np.fft.ifft if grid.dim == 1 else np.fft.ifft2
        self.transport_off = all(np.max(np.abs(g)) == 0.0 for g in self.grad_w)
        if not self.transport_off:
            grad_max = max(
                float(np.max(np.abs(np.fft.ifftn(g).real * grid.total))) for g in self.grad_w
            )
            if h * grad_max > TRANSPORT_CAP:
                raise ConfigError(
                    f"time step h={h:.3g} too large for transport accuracy "
                    f"(h * |grad W|_inf = {h * grad_max:.3g} > {TRANSPORT_CAP})"
                )
        self.phi_hat = np.fft.fftn(phi.repr.values) / grid.total

    def rhs(self, rho_hat: np.ndarray, src_hat: np.ndarray) -> np.ndarray:
        """Fourier coefficients of div(rho * (grad W conv src)), dealiased."""
        total = self.grid.total
        rho = self._ifft(rho_hat).real
        out = None
        for g, d in zip(self.grad_w, self.div_factors):
            b = self._ifft(g * src_hat).real
            term = d * self._fft(rho * b)
            out = term if out is None else out + term
        return out * total

    def run(self, source: Optional[np.ndarray]) -> np.ndarray:
        """March steps; ``source`` is an (M+1, ...) array of frozen drift
        coefficient frames, or None for the self-consistent nonlinear march.
        Returns the coefficient frames."""
        cfg = self.cfg
        h = cfg.h
        out = np.empty((cfg.steps + 1,) + self.grid.shape, dtype=np.complex128)
        out[0] = self.phi_hat
        rho = self.phi_hat
        if self.transport_off:
            for m in range(cfg.steps):
                if cfg.scheme == "imex1":
                    rho = rho * self.inv_full
                else:
                    rho = rho * self.cn_num * self.inv_half
                out[m + 1] = rho
            return out
        for m in range(cfg.steps):
            src_m = rho if source is None else source[m]
            f1 = self.rhs(rho, src_m)
            if cfg.scheme == "imex1":
                rho = (rho + h * f1) * self.inv_full
            else:
                pred = (rho + h * f1) * self.inv_full
                src_next = pred if source is None else source[m + 1]
                f2 = self.rhs(pred, src_next)
                rho = (rho * self.cn_num + 0.5 * h * (f1 + f2)) * self.inv_half
            out[m + 1] = rho
        return out


def _materialize(march: _March, coeff_frames: np.ndarray) -> DensityTrajectory:
    cfg = march.cfg
    axes = tuple(range(1, coeff_frames.ndim))
    frames = np.fft.ifftn(coeff_frames, axes=axes).real * march.grid.total
    if frames.min() < NEGATIVITY_TOL:
        raise SolverInstabilityError(
            f"density reached {frames.min():.3e}; use a smaller time step or a finer grid"
        )
    times = np.arange(cfg.steps + 1) * cfg.h
    return DensityTrajectory(grid=march.grid, times=times, frames=frames)


def solve_mckean_vlasov(W: Potential, phi: InitialCondition, cfg: SolverConfig) -> DensityTrajectory:
    """Direct nonlinear march; the drift uses the current density frame."""
    march = _March(W, phi, cfg)
    return _materialize(march, march.run(source=None))


def solve_linear_fp(
    W: Potential,
    drift_source: DensityTrajectory,
    phi: InitialCondition,
    cfg: SolverConfig,
) -> DensityTrajectory:
    """Linear Fokker-Planck march with drift frozen at grad W conv source(t)."""
    march = _March(W, phi, cfg)
    if drift_source.grid != phi.grid:
        raise GridMismatchError("drift source on a different grid")
    if drift_source.frames.shape[0] != cfg.steps + 1 or abs(drift_source.T - cfg.T) > 1e-12:
        raise GridMismatchError("drift source on a different time mesh")
    return _materialize(march, march.run(source=drift_source.coeff_frames()))


def heat_smoothed(phi: InitialCondition, tau: float) -> GridFunction:
    """Initial density mollified by the heat semigroup at time tau."""
    grid = phi.grid
    chat = np.fft.fftn(phi.repr.values) / grid.total
    chat = chat * np.exp(-4.0 * np.pi**2 * _ksq(grid.dim, grid.n) * tau)
    return from_fourier(FourierCoeffs(grid, chat))


def solve_picard(
    W: Potential,
    phi: InitialCondition,
    rho0_init: Optional[GridFunction],
    cfg: SolverConfig,
) -> tuple:
    """Fixed-point iteration over linearized solves.

    The iteration starts from the time-constant source ``rho0_init`` (default:
    phi smoothed by the heat semigroup at time 0.01) and repeats linear solves
    with the previous iterate as drift source until the sup-over-time L2
    residual drops below ``picard_tol``. Returns ``(trajectory, iterations,
    residuals)``.
    """
    march = _March(W, phi, cfg)
    grid = phi.grid
    if rho0_init is None:
        rho0_init = heat_smoothed(phi, 0.01)
    if rho0_init.min() <= 0 or abs(rho0_init.mean() - 1.0) > 1e-8:
        raise ValueError("rho0_init must be strictly positive with unit mass")
    init_hat = np.fft.fftn(rho0_init.values) / grid.total
    source = np.broadcast_to(init_hat, (cfg.steps + 1,) + grid.shape)
    residuals = []
    if march.transport_off:
        # The drift vanishes identically, so the linear solve does not depend
        # on its source: a single pass is the fixed point.
        coeffs = march.run(source=None)
        prev = source
        residuals.append(_sup_l2(coeffs, prev))
        return _materialize(march, coeffs), 1, residuals
    prev = source
    for it in range(1, cfg.picard_max_iter + 1):
        coeffs = march.run(source=np.ascontiguousarray(prev))
        residuals.append(_sup_l2(coeffs, prev))
        prev = coeffs
        if residuals[-1] < cfg.picard_tol:
            return _materialize(march, coeffs), it, residuals
    raise PicardNonConvergenceError(
        f"no fixed point after {cfg.picard_max_iter} iterations "
        f"(last residual {residuals[-1]:.3e})",
        residuals,
    )


def _sup_l2(a: np.ndarray, b: np.ndarray) -> float:
    diff = np.abs(a - b) ** 2
    axes = tuple(range(1, diff.ndim))
    return float(np.sqrt(diff.sum(axis=axes).max()))


def trajectory_regularity_report(rho: DensityTrajectory, s_max: int) -> dict:
    """Sobolev regularity profile of a trajectory.

    For each integer s in 0..s_max reports ``sup_space`` = sup over time of
    the H^s norm of the frame and ``l2_time_space`` = the L2-in-time norm of
    the H^(s+1) norms (plain dt integral, trapezoid on the frame mesh).
    """
    coeffs = rho.coeff_frames()
    grid = rho.grid
    out = {}
    for s in range(0, int(s_max) + 1):
        norms_s = np.array([sobolev_norm_coeffs(c, grid, float(s)) for c in coeffs])
        norms_s1 = np.array([sobolev_norm_coeffs(c, grid, float(s + 1)) for c in coeffs])
        out[s] = {
            "sup_space": float(norms_s.max()),
            "l2_time_space": float(np.sqrt(np.trapezoid(norms_s1**2, rho.times))),
        }
    return out


def evaluate_trajectory(rho: DensityTrajectory, t, x) -> np.ndarray:
    """rho(t, x) off the mesh: linear in time between frames, spectral in space."""
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    x = np.asarray(x, dtype=np.float64)
    if rho.grid.dim == 1:
        x = x.reshape(-1)
    else:
        x = x.reshape(-1, 2)
    if t.size != x.shape[0]:
        raise ValueError("t and x must have matching lengths")
    if t.min() < -1e-12 or t.max() > rho.T + 1e-12:
        raise ValueError("t outside the trajectory horizon")
    h = rho.h
    m = np.clip((t / h).astype(np.int64), 0, len(rho.times) - 2)
    w = t / h - m
    coeffs = rho.coeff_frames()
    n = rho.grid.n
    k = _axis_freqs(n).astype(np.float64)
    out = np.empty(t.size)
    chunk = max(1, 2**21 // rho.grid.total)
    for lo in range(0, t.size, chunk):
        hi = min(lo + chunk, t.size)
        gathered = (1.0 - w[lo:hi, None]) * coeffs[m[lo:hi]].reshape(hi - lo, -1) + w[
            lo:hi, None
        ] * coeffs[m[lo:hi] + 1].reshape(hi - lo, -1)
        if rho.grid.dim == 1:
            phases = np.exp(2j * np.pi * np.outer(x[lo:hi], k))
            out[lo:hi] = np.einsum("ck,ck->c", phases, gathered).real
        else:
            p1 = np.exp(2j * np.pi * np.outer(x[lo:hi, 0], k))
            p2 = np.exp(2j * np.pi * np.outer(x[lo:hi, 1], k))
            g = gathered.reshape(hi - lo, n, n)
            out[lo:hi] = np.einsum("ck,ckl,cl->c", p1, g, p2).real
    return out


def space_time_l2_distance(a: DensityTrajectory, b: DensityTrajectory) -> float:
    """L2 distance over the cylinder for the uniform probability measure
    (time integral divided by T)."""
    if a.grid != b.grid or a.frames.shape != b.frames.shape:
        raise GridMismatchError("trajectories on different meshes")
    diff = a.frames - b.frames
    axes = tuple(range(1, diff.ndim))
    sq = (diff**2).mean(axis=axes)
    return float(np.sqrt(np.trapezoid(sq, a.times) / a.T))


def write_trajectory_csv(rho: DensityTrajectory, path) -> None:
    """Rows ``t,x1[,x2],rho`` over frames, nodes in row-major order."""
    coords = [c.reshape(-1) for c in rho.grid.node_coords()]
    header = ["t", "x1", "rho"] if rho.grid.dim == 1 else ["t", "x1", "x2", "rho"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for m, t in enumerate(rho.times):
            flat = rho.frames[m].reshape(-1)
            for i in range(flat.size):
                row = [repr(float(t))]
                row += [repr(float(c[i])) for c in coords]
                row.append(repr(float(flat[i])))
                w.writerow(row)
