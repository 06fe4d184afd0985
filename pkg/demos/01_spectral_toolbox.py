"""Tour of the periodic spectral toolbox: transforms, convolution, norms.

Run:  python demos/01_spectral_toolbox.py
"""

import numpy as np

from torusmv import (
    GridFunction,
    TorusGrid,
    convolve,
    eval_at_point,
    from_fourier,
    gradient,
    sobolev_norm,
    to_fourier,
)

grid = TorusGrid(dim=1, n=128)
x = grid.axis_coords()

f = GridFunction(grid, 1.0 + 0.5 * np.cos(2 * np.pi * x))
coeffs = to_fourier(f)
print("mean via coefficient at k=0:", coeffs.at(0).real)
print("coefficient at k=1 (expect 0.25):", coeffs.at(1).real)

back = from_fourier(coeffs)
print("round-trip max error:", np.max(np.abs(back.values - f.values)))

# convolution smooths: convolving the cosine bump with itself halves the
# oscillation and squares the coefficient
h = convolve(f, f)
print("conv coefficient at k=1 (expect 0.0625):", to_fourier(h).at(1).real)

(df,) = gradient(f)
print("gradient max (expect pi):", df.max())

print("H^0 norm:", sobolev_norm(f, 0.0))
print("H^2 norm:", sobolev_norm(f, 2.0))
print("H^-2 norm:", sobolev_norm(f, -2.0))

print("spectral interpolation at x=1/3:", eval_at_point(f, 1 / 3))
print("exact value:", 1.0 + 0.5 * np.cos(2 * np.pi / 3))
