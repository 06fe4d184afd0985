"""Periodic grids, Fourier transforms and Sobolev norms on the unit torus.

Everything in the package represents functions on the torus (0,1]^d
(d = 1 or 2) by their values on a uniform grid with ``n`` points per axis.
Fourier coefficients follow the analysis convention

    fhat(k) = integral of f(x) exp(-2 pi i k.x) dx,

so ``fhat(0)`` is the mean of the function and the basis functions
``exp(2 pi i k.x)`` are orthonormal for the Lebesgue probability measure.
Integer frequencies run over (-n/2, n/2] per axis; the slot numpy labels
``-n/2`` is relabelled ``+n/2`` so that the retained band matches that
half-open convention.

All containers are immutable; the operations are pure functions.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import GridMismatchError

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class TorusGrid:
    """Uniform grid on the unit torus (0,1]^d.

    Attributes:
        dim: spatial dimension, 1 or 2.
        n: points per axis; an even power of two, at least 4.
    """

    dim: int
    n: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if self.n < 4 or self.n % 2 != 0:
            raise ValueError(f"n must be an even integer >= 4, got {self.n}")
        if self.n & (self.n - 1) != 0:
            raise ValueError(f"n must be a power of two, got {self.n}")

    @property
    def spacing(self) -> float:
        return 1.0 / self.n

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.dim

    @property
    def total(self) -> int:
        return self.n**self.dim

    @property
    def nyquist(self) -> int:
        return self.n // 2

    def axis_coords(self) -> np.ndarray:
        """Node coordinates along one axis: j / n for j = 0..n-1."""
        return np.arange(self.n) / self.n

    def node_coords(self) -> list:
        """Meshgrid of node coordinates, one array per axis."""
        x = self.axis_coords()
        if self.dim == 1:
            return [x]
        return list(np.meshgrid(x, x, indexing="ij"))

    def freq_grids(self) -> list:
        """Integer frequency of every coefficient slot, one array per axis."""
        return [a.copy() for a in _freq_grids(self.dim, self.n)]

    def ksq(self) -> np.ndarray:
        """|k|^2 on the coefficient layout."""
        return _ksq(self.dim, self.n).copy()


@lru_cache(maxsize=None)
def _axis_freqs(n: int) -> np.ndarray:
    k = np.fft.fftfreq(n, d=1.0 / n).astype(np.int64)
    k[n // 2] = n // 2  # label the shared Nyquist slot +n/2
    k.setflags(write=False)
    return k


@lru_cache(maxsize=None)
def _freq_grids(dim: int, n: int) -> tuple:
    k = _axis_freqs(n)
    if dim == 1:
        grids = (k,)
    else:
        k1, k2 = np.meshgrid(k, k, indexing="ij")
        grids = (k1, k2)
    for g in grids:
        g.setflags(write=False)
    return grids


@lru_cache(maxsize=None)
def _ksq(dim: int, n: int) -> np.ndarray:
    out = sum(g.astype(np.float64) ** 2 for g in _freq_grids(dim, n))
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def _diff_factors(dim: int, n: int) -> tuple:
    """2 pi i k_j per axis, with the Nyquist slot zeroed.

    Zeroing the Nyquist keeps odd derivatives of real data real; band-limited
    inputs (|k| < n/2) are differentiated exactly.
    """
    factors = []
    for g in _freq_grids(dim, n):
        f = TWO_PI * 1j * g.astype(np.float64)
        f[np.abs(g) == n // 2] = 0.0
        f.setflags(write=False)
        factors.append(f)
    return tuple(factors)


@lru_cache(maxsize=None)
def _dealias_mask(dim: int, n: int) -> np.ndarray:
    """2/3-rule mask: keep |k_j| <= n/3 on every axis."""
    mask = np.ones((n,) * dim, dtype=bool)
    for g in _freq_grids(dim, n):
        mask &= np.abs(g) <= n // 3
    mask.setflags(write=False)
    return mask


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class GridFunction:
    """Real-valued function sampled at the grid nodes x_j = j * spacing."""

    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("values must be finite")
        object.__setattr__(self, "values", _freeze(v))

    def mean(self) -> float:
        return float(self.values.mean())

    def min(self) -> float:
        return float(self.values.min())

    def max(self) -> float:
        return float(self.values.max())

    def l2(self) -> float:
        """L^2 norm for the probability measure dx (quadrature on nodes)."""
        return float(np.sqrt(np.mean(self.values**2)))

    def l1(self) -> float:
        return float(np.mean(np.abs(self.values)))

    def __add__(self, other):
        return GridFunction(self.grid, self.values + _values_on(self.grid, other))

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - _values_on(self.grid, other))

    def __mul__(self, c):
        return GridFunction(self.grid, self.values * float(c))

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(self.grid, -self.values)


def _values_on(grid: TorusGrid, other) -> np.ndarray:
    if isinstance(other, GridFunction):
        if other.grid != grid:
            raise GridMismatchError("operands live on different grids")
        return other.values
    return np.full(grid.shape, float(other))


@dataclass(frozen=True)
class FourierCoeffs:
    """Complex coefficients on the full DFT layout of a grid."""

    grid: TorusGrid
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.shape != self.grid.shape:
            raise ValueError(f"coeffs shape {c.shape} != grid shape {self.grid.shape}")
        object.__setattr__(self, "coeffs", _freeze(c))

    def at(self, k) -> complex:
        """Coefficient at integer frequency k (scalar for d=1, pair for d=2)."""
        if self.grid.dim == 1:
            idx = int(k) % self.grid.n
            return complex(self.coeffs[idx])
        k1, k2 = k
        return complex(self.coeffs[int(k1) % self.grid.n, int(k2) % self.grid.n])


def constant_function(grid: TorusGrid, value: float = 1.0) -> GridFunction:
    return GridFunction(grid, np.full(grid.shape, float(value)))


def from_node_values(grid: TorusGrid, values) -> GridFunction:
    return GridFunction(grid, np.asarray(values, dtype=np.float64))


def to_fourier(f: GridFunction) -> FourierCoeffs:
    """Discrete Fourier coefficients, normalized so fhat(0) = mean(f)."""
    return FourierCoeffs(f.grid, np.fft.fftn(f.values) / f.grid.total)


def from_fourier(c: FourierCoeffs) -> GridFunction:
    """Inverse transform; the imaginary part (roundoff) is discarded."""
    return GridFunction(c.grid, np.fft.ifftn(c.coeffs * c.grid.total).real)


def convolve(f: GridFunction, g: GridFunction) -> GridFunction:
    """Periodic convolution (f * g)(x) = integral f(x-y) g(y) dy."""
    if f.grid != g.grid:
        raise GridMismatchError("convolution operands on incompatible discretizations")
    fh = np.fft.fftn(f.values) / f.grid.total
    gh = np.fft.fftn(g.values) / g.grid.total
    return GridFunction(f.grid, np.fft.ifftn(fh * gh * f.grid.total).real)


def gradient(f: GridFunction) -> list:
    """Spectral gradient, one GridFunction per axis; exact on band-limited input."""
    fh = np.fft.fftn(f.values)
    out = []
    for factor in _diff_factors(f.grid.dim, f.grid.n):
        out.append(GridFunction(f.grid, np.fft.ifftn(factor * fh).real))
    return out


def sobolev_norm(f: GridFunction, s: float) -> float:
    """Sobolev norm with weight (1 + 4 pi^2 |k|^2)^(s/2) over retained modes.

    Negative s gives the Fourier-weight surrogate of the dual norm, which is
    exact for the periodic Hilbert scale at the discrete level.
    """
    return sobolev_norm_coeffs(np.fft.fftn(f.values) / f.grid.total, f.grid, s)


def sobolev_norm_coeffs(chat: np.ndarray, grid: TorusGrid, s: float) -> float:
    w = (1.0 + 4.0 * np.pi**2 * _ksq(grid.dim, grid.n)) ** s
    return float(np.sqrt(np.sum(w * np.abs(chat) ** 2)))


def eval_at_points(f: GridFunction, x) -> np.ndarray:
    """Trigonometric interpolation of f at arbitrary torus points.

    ``x`` has shape (m, d) (or (m,) for d=1); returns shape (m,). Exact at
    grid nodes and for band-limited functions.
    """
    return eval_fourier_at(to_fourier(f), x)


def eval_at_point(f: GridFunction, x) -> float:
    """Scalar version of :func:`eval_at_points`."""
    pts = np.atleast_2d(np.asarray(x, dtype=np.float64).reshape(1, -1))
    return float(eval_fourier_at(to_fourier(f), pts)[0])


def eval_fourier_at(c: FourierCoeffs, x) -> np.ndarray:
    grid = c.grid
    x = np.asarray(x, dtype=np.float64)
    if grid.dim == 1:
        x = x.reshape(-1)
        k = _axis_freqs(grid.n).astype(np.float64)
        phases = np.exp(TWO_PI * 1j * np.outer(x, k))
        return (phases @ c.coeffs).real
    x = x.reshape(-1, 2)
    k = _axis_freqs(grid.n).astype(np.float64)
    out = np.empty(x.shape[0])
    chunk = max(1, 2**22 // (grid.n * grid.n))
    for lo in range(0, x.shape[0], chunk):
        hi = min(lo + chunk, x.shape[0])
        p1 = np.exp(TWO_PI * 1j * np.outer(x[lo:hi, 0], k))
        p2 = np.exp(TWO_PI * 1j * np.outer(x[lo:hi, 1], k))
        out[lo:hi] = np.einsum("ck,kl,cl->c", p1, c.coeffs, p2).real
    return out


def dealias(chat: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Zero frequencies above n/3 (2/3-rule, applied after pointwise products)."""
    return chat * _dealias_mask(grid.dim, grid.n)


def dealiased_product(f: GridFunction, g: GridFunction) -> GridFunction:
    if f.grid != g.grid:
        raise GridMismatchError("product operands on incompatible discretizations")
    grid = f.grid
    ph = dealias(np.fft.fftn(f.values * g.values), grid)
    return GridFunction(grid, np.fft.ifftn(ph).real)


# ---------------------------------------------------------------------------
# CSV serialization
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def write_grid_function_csv(f: GridFunction, path) -> None:
    """Rows ``x1[,x2],value`` over nodes in row-major order."""
    coords = f.grid.node_coords()
    header = ["x1", "value"] if f.grid.dim == 1 else ["x1", "x2", "value"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        flat = [c.reshape(-1) for c in coords] + [f.values.reshape(-1)]
        for row in zip(*flat):
            w.writerow([_fmt(v) for v in row])


def read_grid_function_csv(path) -> GridFunction:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    dim = len(header) - 1
    data = np.asarray([[float(v) for v in r] for r in rows[1:]])
    n = round(len(data) ** (1.0 / dim))
    grid = TorusGrid(dim, n)
    expected = np.stack([c.reshape(-1) for c in grid.node_coords()], axis=1)
    if not np.allclose(data[:, :dim], expected, atol=1e-12):
        raise ValueError("node coordinates do not match a row-major uniform grid")
    return GridFunction(grid, data[:, dim].reshape(grid.shape))


def write_fourier_csv(c: FourierCoeffs, path) -> None:
    """Rows ``k1[,k2],re,im`` over every retained frequency slot."""
    grids = _freq_grids(c.grid.dim, c.grid.n)
    header = (["k1"] if c.grid.dim == 1 else ["k1", "k2"]) + ["re", "im"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        flat_k = [g.reshape(-1) for g in grids]
        flat_c = c.coeffs.reshape(-1)
        for i in range(flat_c.size):
            row = [str(int(g[i])) for g in flat_k]
            w.writerow(row + [_fmt(flat_c[i].real), _fmt(flat_c[i].imag)])


def read_fourier_csv(path) -> FourierCoeffs:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    dim = len(header) - 2
    ks = np.asarray([[int(v) for v in r[:dim]] for r in rows[1:]])
    vals = np.asarray([complex(float(r[dim]), float(r[dim + 1])) for r in rows[1:]])
    n = round(len(vals) ** (1.0 / dim))
    grid = TorusGrid(dim, n)
    coeffs = np.zeros(grid.shape, dtype=np.complex128)
    if dim == 1:
        coeffs[ks[:, 0] % n] = vals
    else:
        coeffs[ks[:, 0] % n, ks[:, 1] % n] = vals
    return FourierCoeffs(grid, coeffs)
