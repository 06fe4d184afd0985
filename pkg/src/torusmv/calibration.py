"""Frozen constants for the diagnostic inequality checks.

The analytic estimates hold with unspecified constants. Each constant below
was measured once on the reference family

    potentials:  s * Kuramoto for s in {0, 0.25, 0.5, 0.75, 1} (both orderings)
    initials:    periodized Laplace, m in {1, 2}
    solver:      T = 0.25, 256 steps, imex1, grid n = 128, d = 1

as the maximum observed lhs/raw-rhs ratio, then doubled for headroom and
frozen. Diagnostic checks against these values are regression tests: they do
not certify the analytic constants, they flag behavioural drift.

``calibrate_reference_constants`` reproduces the measurement.
"""

from __future__ import annotations

FROZEN = {
    # int_0^T H(rho1|rho2) dt <= C * int_0^T |grad(W1-W2) conv rho2|_L2^2 dt
    "entropy_stability_C": 0.046,
    # |rho1 - rho2|_L2(cylinder, uniform) <= C * |W1 - W2|_{H^-4}
    "forward_lipschitz_C": 61.2,
    # |W - W0|_L2^2 <= C * (K^(-2a-2) + t0^-1 K^(2 zeta) (Bochner terms))
    "short_time_C": 0.281,
    # cylinder L1 gap between binned particle density and the PDE solution,
    # Kuramoto / laplace(1), n = 1e4 particles, 8 x 16 bins, 33 snapshots,
    # 1.5x the maximum over calibration seeds 1..5
    "chaos_l1_n1e4_bound": 0.0329,
}


def calibrate_reference_constants(verbose: bool = False) -> dict:
    """Re-measure the reference-family ratios behind ``FROZEN``."""
    import numpy as np

    from .diagnostics import (
        _bochner_profile,
        _entropy_sides,
        _time_derivative,
        short_time_threshold,
        time_lipschitz_constant,
    )
    from .models import kuramoto_potential, periodized_laplace, zero_potential
    from .solver import SolverConfig, solve_mckean_vlasov, space_time_l2_distance
    from .spectral import GridFunction, TorusGrid, sobolev_norm

    grid = TorusGrid(1, 128)
    cfg = SolverConfig(T=0.25, steps=256, scheme="imex1")
    kur = kuramoto_potential(grid)
    scales = [0.0, 0.25, 0.5, 0.75, 1.0]
    pots = {s: (kur if s == 1.0 else _scaled(kur, s, grid)) for s in scales}
    out = {}

    ent_ratios, lip_ratios = [], []
    for m in (1, 2):
        phi = periodized_laplace(m, grid)
        trajs = {s: solve_mckean_vlasov(pots[s], phi, cfg) for s in scales}
        for s1 in scales:
            for s2 in scales:
                if s1 == s2:
                    continue
                lhs, raw = _entropy_sides(trajs[s1], trajs[s2], pots[s1], pots[s2])
                if raw > 0:
                    ent_ratios.append(lhs / raw)
                diff = GridFunction(grid, pots[s1].repr.values - pots[s2].repr.values)
                weak = sobolev_norm(diff, -4.0)
                lip_ratios.append(space_time_l2_distance(trajs[s1], trajs[s2]) / weak)
    out["entropy_stability_C"] = 2.0 * max(ent_ratios)
    out["forward_lipschitz_C"] = 2.0 * max(lip_ratios)

    st_ratios = []
    K = 3
    for m in (1, 2):
        phi = periodized_laplace(m, grid)
        rho0 = solve_mckean_vlasov(zero_potential(grid), phi, cfg)
        c_lip = time_lipschitz_constant(rho0, phi)
        t0 = min(short_time_threshold(phi, c_lip, K), cfg.T)
        traj_t = solve_mckean_vlasov(kur, phi, cfg)
        for s in (0.0, 0.5):
            W = pots[s]
            rho_w = solve_mckean_vlasov(W, phi, cfg)
            diff = GridFunction(grid, W.repr.values - kur.repr.values)
            lhs = diff.l2() ** 2
            h = rho_w.h
            upto = max(int(np.floor(t0 / h + 1e-9)) + 1, 2)
            d = rho_w.frames[:upto] - traj_t.frames[:upto]
            tt = rho_w.times[:upto]
            p1 = _bochner_profile(d, grid, tt, 1.0)
            pm1 = _bochner_profile(d, grid, tt, -1.0)
            pdt = _bochner_profile(_time_derivative(d, h), grid, tt, -1.0)
            raw = (
                float(K) ** (-2.0 * 2.0 - 2.0)
                + (
                    float(np.trapezoid(pm1**2 + pdt**2, tt))
                    + float(np.trapezoid(p1**2, tt))
                )
                * float(K) ** (2.0 * (2.0 * m))
                / t0
            )
            st_ratios.append(lhs / raw)
    out["short_time_C"] = 2.0 * max(st_ratios)

    if verbose:
        for k, v in out.items():
            print(f"{k}: measured* 2 = {v:.6g} (frozen {FROZEN[k]})")
    return out


def _scaled(pot, s, grid):
    from .models import potential_from_coeffs
    from .spectral import FourierCoeffs

    return potential_from_coeffs(
        FourierCoeffs(grid, pot.fourier.coeffs * s), band_limit=pot.band_limit
    )
