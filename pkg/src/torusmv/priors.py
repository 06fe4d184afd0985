"""Gaussian process priors on mean-zero interaction potentials.

A prior draw is a real coefficient vector over an orthonormal trigonometric
basis (sqrt(2) cos(2 pi k.x) and sqrt(2) sin(2 pi k.x) per retained frequency
k, constants excluded, sines dropped in symmetric mode). Three covariance
families are supported:

  * ``matern``             coefficient std (1 + 4 pi^2 |k|^2)^(-(alpha+1)/2)
                           over every grid frequency below Nyquist,
  * ``truncated_fourier``  the same decay truncated at a band limit K,
  * ``exp_series``         coefficient std exp(-r |k|_1 / 2).

An optional rescaling divides the draw by sqrt(N) * delta_N (the theoretical
contraction-rate schedule) or by log N. The Sobolev weight convention
(1 + 4 pi^2 |k|^2) matches the rest of the package; it differs from the bare
(1 + |k|^2) weight only by a bounded constant factor per mode.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .models import Potential, potential_from_coeffs
from .spectral import FourierCoeffs, TorusGrid

RESCALE_MODES = ("none", "sqrtN_deltaN", "logN")
PRIOR_KINDS = ("matern", "truncated_fourier", "exp_series")


def contraction_rate(alpha: float, beta: float, d: int, n_obs: int) -> float:
    """Theoretical posterior contraction rate N^(-(alpha+1+beta)/(2(alpha+1)+2 beta+d))."""
    if n_obs < 1:
        raise ValueError("n_obs must be >= 1")
    expo = (alpha + 1.0 + beta) / (2.0 * (alpha + 1.0) + 2.0 * beta + d)
    return float(n_obs) ** (-expo)


def recovery_exponent(alpha: float, beta: float, d: int, zeta: float) -> float:
    """Exponent theta of the N^(-theta) potential-recovery rate.

    theta = ((alpha+1+beta)(beta-2)/beta - 3 zeta/2) / (2(alpha+1) + 2 beta + d);
    a negative value signals that no polynomial rate is guaranteed.
    """
    if beta <= 2:
        raise ValueError("beta must exceed 2")
    num = (alpha + 1.0 + beta) * (beta - 2.0) / beta - 1.5 * zeta
    return num / (2.0 * (alpha + 1.0) + 2.0 * beta + d)


def default_band_limit(alpha: float, beta: float, d: int, n_obs: int) -> int:
    """Truncation schedule K_N = ceil(N^(1/(2(alpha+1)+2 beta+d)))."""
    return math.ceil(float(n_obs) ** (1.0 / (2.0 * (alpha + 1.0) + 2.0 * beta + d)))


@dataclass(frozen=True)
class PriorSpec:
    kind: str
    alpha: float = 2.0
    r: float = 1.0
    K: Optional[int] = None
    rescale: str = "none"
    N_for_rescale: int = 1
    beta_nominal: int = 4
    symmetric_only: bool = False

    def __post_init__(self):
        if self.kind not in PRIOR_KINDS:
            raise ValueError(f"unknown prior kind {self.kind!r}")
        if self.rescale not in RESCALE_MODES:
            raise ValueError(f"unknown rescale mode {self.rescale!r}")
        if self.kind == "exp_series" and self.r <= 0:
            raise ValueError("exp_series needs r > 0")
        if self.beta_nominal % 2 != 0:
            raise ValueError("beta_nominal must be an even integer")
        if self.rescale != "none" and self.N_for_rescale < 2:
            raise ValueError("rescaling needs N_for_rescale >= 2")

    def band_limit(self, grid: TorusGrid) -> int:
        if self.K is not None:
            K = self.K
        elif self.kind == "truncated_fourier":
            K = default_band_limit(self.alpha, self.beta_nominal, grid.dim, self.N_for_rescale)
        else:
            K = grid.nyquist - 1
        if K >= grid.nyquist:
            raise ValueError("band limit must stay below the grid Nyquist frequency")
        return K

    def rescale_factor(self, d: int) -> float:
        if self.rescale == "none":
            return 1.0
        if self.rescale == "logN":
            return 1.0 / math.log(self.N_for_rescale)
        delta = contraction_rate(self.alpha, float(self.beta_nominal), d, self.N_for_rescale)
        return 1.0 / (math.sqrt(self.N_for_rescale) * delta)

    def validate_for(self, grid: TorusGrid) -> None:
        if self.kind != "exp_series" and self.alpha <= grid.dim / 2 + 1:
            raise ValueError("alpha must exceed d/2 + 1")
        self.band_limit(grid)


@lru_cache(maxsize=None)
def _basis_elements(dim: int, K: int, symmetric_only: bool) -> tuple:
    """Ordered (frequency, kind) pairs over a conjugate half-space.

    d=1 keeps k = 1..K; d=2 keeps 0 < |k| <= K with k1 > 0 or (k1 = 0, k2 > 0).
    """
    elems = []
    if dim == 1:
        freqs = [(k,) for k in range(1, K + 1)]
    else:
        freqs = []
        for k1 in range(0, K + 1):
            for k2 in range(-K, K + 1):
                if k1 == 0 and k2 <= 0:
                    continue
                if k1 * k1 + k2 * k2 <= K * K:
                    freqs.append((k1, k2))
        freqs.sort()
    for k in freqs:
        elems.append((k, "cos"))
        if not symmetric_only:
            elems.append((k, "sin"))
    return tuple(elems)


@dataclass(frozen=True)
class PriorBasis:
    """Real trigonometric basis attached to a prior spec and dimension."""

    dim: int
    K: int
    symmetric_only: bool

    @property
    def elements(self) -> tuple:
        return _basis_elements(self.dim, self.K, self.symmetric_only)

    @property
    def size(self) -> int:
        return len(self.elements)

    def element_ids(self) -> list:
        return [f"{kind}:{'_'.join(str(v) for v in k)}" for k, kind in self.elements]

    def synthesize(self, values: np.ndarray, grid: TorusGrid) -> Potential:
        """Potential sum_b c_b phi_b with unit-L2-norm basis functions."""
        if grid.dim != self.dim:
            raise ValueError("grid dimension does not match the basis")
        coeffs = np.zeros(grid.shape, dtype=np.complex128)
        inv_sqrt2 = 1.0 / math.sqrt(2.0)
        for c, (k, kind) in zip(values, self.elements):
            pos = tuple(v % grid.n for v in k)
            neg = tuple(-v % grid.n for v in k)
            if kind == "cos":
                coeffs[pos] += c * inv_sqrt2
                coeffs[neg] += c * inv_sqrt2
            else:
                coeffs[pos] += -1j * c * inv_sqrt2
                coeffs[neg] += 1j * c * inv_sqrt2
        return potential_from_coeffs(FourierCoeffs(grid, coeffs), band_limit=self.K)

    def analyze(self, potential: Potential) -> np.ndarray:
        """Coefficients of a potential in this basis (projection)."""
        out = np.empty(self.size)
        sqrt2 = math.sqrt(2.0)
        for i, (k, kind) in enumerate(self.elements):
            c = potential.fourier.at(k if self.dim == 2 else k[0])
            out[i] = sqrt2 * c.real if kind == "cos" else -sqrt2 * c.imag
        return out


@dataclass(frozen=True)
class CoefficientVector:
    basis: PriorBasis
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.basis.size,):
            raise ValueError("coefficient count does not match the basis")
        if not np.all(np.isfinite(v)):
            raise ValueError("coefficients must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


def basis_for(spec: PriorSpec, grid: TorusGrid) -> PriorBasis:
    spec.validate_for(grid)
    return PriorBasis(dim=grid.dim, K=spec.band_limit(grid), symmetric_only=spec.symmetric_only)


def mode_std(spec: PriorSpec, k) -> float:
    """Unrescaled prior standard deviation of the coefficient at frequency k."""
    kvec = np.atleast_1d(np.asarray(k, dtype=np.float64))
    if spec.kind == "exp_series":
        return math.exp(-spec.r * float(np.sum(np.abs(kvec))) / 2.0)
    ksq = float(np.sum(kvec**2))
    return (1.0 + 4.0 * math.pi**2 * ksq) ** (-(spec.alpha + 1.0) / 2.0)


def _stds(spec: PriorSpec, basis: PriorBasis) -> np.ndarray:
    return np.array([mode_std(spec, k) for k, _ in basis.elements])


def draw_coefficients(spec: PriorSpec, basis: PriorBasis, rng: np.random.Generator) -> CoefficientVector:
    g = rng.standard_normal(basis.size)
    values = _stds(spec, basis) * g * spec.rescale_factor(basis.dim)
    return CoefficientVector(basis=basis, values=values)


def sample_prior(spec: PriorSpec, seed: int, grid: TorusGrid) -> tuple:
    """Seeded prior draw; returns (CoefficientVector, Potential)."""
    basis = basis_for(spec, grid)
    coeffs = draw_coefficients(spec, basis, np.random.default_rng(seed))
    return coeffs, basis.synthesize(coeffs.values, grid)


def rkhs_norm(spec: PriorSpec, v: CoefficientVector) -> float:
    """Norm of the unrescaled covariance kernel's Hilbert space.

    Sobolev weight (1 + 4 pi^2 |k|^2)^(alpha+1) for matern/truncated kinds,
    exponential weight exp(r |k|_1) for exp_series.
    """
    if spec.symmetric_only != v.basis.symmetric_only or (
        spec.K is not None and spec.K != v.basis.K
    ):
        raise ValueError("coefficient vector does not match the spec's basis")
    w = 1.0 / _stds(spec, v.basis)
    return float(np.sqrt(np.sum((w * v.values) ** 2)))


def write_coefficients_csv(v: CoefficientVector, path) -> None:
    """Rows ``basis_id,value``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["basis_id", "value"])
        for bid, val in zip(v.basis.element_ids(), v.values):
            w.writerow([bid, repr(float(val))])
