import numpy as np
import pytest
from scipy import stats

from torusmv.models import kuramoto_potential, periodized_laplace, uniform_density, zero_potential
from torusmv.particles import (
    bin_histogram,
    drift_binned,
    drift_discrepancy_bound,
    drift_exact,
    em_step,
    sample_initial,
    simulate,
)
from torusmv.solver import SolverConfig, solve_mckean_vlasov
from torusmv.spectral import TorusGrid, eval_at_points


def pairwise_oracle(W, positions):
    """Literal O(n^2) pairwise drift via spectral evaluation of grad W."""
    from torusmv.spectral import from_fourier, gradient

    n, d = positions.shape
    gradw = gradient(from_fourier(W.fourier))
    out = np.zeros_like(positions)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            diff = np.mod(positions[i] - positions[j], 1.0)
            for a in range(d):
                out[i, a] -= eval_at_points(gradw[a], diff.reshape(1, d))[0]
    return out / n


class TestSampleInitial:
    def test_uniform_mean(self):
        g = TorusGrid(1, 64)
        n = 40_000
        ens = sample_initial(uniform_density(g), n, seed=1)
        assert abs(ens.positions.mean() - 0.5) <= 4 / np.sqrt(n)

    def test_deterministic(self):
        g = TorusGrid(1, 64)
        phi = periodized_laplace(1, g)
        a = sample_initial(phi, 500, seed=3)
        b = sample_initial(phi, 500, seed=3)
        assert np.array_equal(a.positions, b.positions)

    def test_kolmogorov_smirnov_against_fourier_cdf(self):
        # oracle: analytic CDF from the Fourier series, independent of the
        # sampler's grid cumulative sums
        g = TorusGrid(1, 128)
        phi = periodized_laplace(1, g)
        n = 100_000
        ens = sample_initial(phi, n, seed=11)
        ks = np.arange(1, g.n // 2)
        coeffs = 1.0 / (1.0 + 2.0 * np.pi**2 * ks**2)

        def cdf(x):
            x = np.asarray(x)
            tail = np.sum(
                coeffs[None, :]
                * np.sin(2 * np.pi * ks[None, :] * x[:, None])
                / (np.pi * ks[None, :]),
                axis=1,
            )
            return x + tail

        xs = np.sort(ens.positions[:, 0])
        emp_hi = np.arange(1, n + 1) / n
        emp_lo = np.arange(0, n) / n
        theo = cdf(xs)
        dist = max(np.max(np.abs(emp_hi - theo)), np.max(np.abs(emp_lo - theo)))
        assert dist <= 1.63 / np.sqrt(n)

    def test_2d_rejection_sampling_marginals(self):
        g = TorusGrid(2, 32)
        phi = periodized_laplace(1, g)
        n = 20_000
        ens = sample_initial(phi, n, seed=5)
        assert ens.positions.shape == (n, 2)
        dens = eval_at_points(phi.repr, ens.positions)
        assert dens.min() > 0


class TestEmStep:
    def test_pure_brownian_increment_variance(self):
        g = TorusGrid(1, 64)
        phi = uniform_density(g)
        n, h = 1_000_000, 1e-4
        ens = sample_initial(phi, n, seed=2)
        stepped = em_step(ens, zero_potential(g), h)
        delta = stepped.positions - ens.positions
        delta = np.mod(delta + 0.5, 1.0) - 0.5  # unwrap
        assert abs(delta.var() - 2 * h) <= 0.05 * 2 * h

    def test_two_particles_same_position_even_potential(self):
        g = TorusGrid(1, 64)
        W = kuramoto_potential(g)
        pos = np.array([[0.3], [0.3]])
        assert np.max(np.abs(drift_exact(W, pos))) < 1e-12

    def test_mean_drift_vanishes_for_uniform_cloud(self):
        g = TorusGrid(1, 64)
        W = kuramoto_potential(g)
        n = 50_000
        ens = sample_initial(uniform_density(g), n, seed=7)
        drift = drift_exact(W, ens.positions)
        assert np.abs(drift.mean()) <= 5 / np.sqrt(n)

    @pytest.mark.parametrize("dim,n_side", [(1, 64), (2, 16)])
    def test_exact_path_matches_pairwise_oracle(self, dim, n_side):
        g = TorusGrid(dim, n_side)
        W = (
            kuramoto_potential(g)
            if dim == 1
            else kuramoto_potential(g)
        )
        rng = np.random.default_rng(0)
        pos = 1.0 - rng.random((40, dim))
        fast = drift_exact(W, pos)
        slow = pairwise_oracle(W, pos)
        assert np.max(np.abs(fast - slow)) < 1e-10

    def test_binned_path_within_reported_bound(self):
        g = TorusGrid(1, 128)
        W = kuramoto_potential(g)
        rng = np.random.default_rng(1)
        pos = 1.0 - rng.random((3000, 1))
        bound = drift_discrepancy_bound(W, g)
        gap = np.max(np.abs(drift_binned(W, pos) - drift_exact(W, pos)))
        assert gap <= bound

    def test_positions_stay_in_unit_interval(self):
        g = TorusGrid(1, 64)
        phi = uniform_density(g)
        ens = sample_initial(phi, 200, seed=9)
        for _ in range(20):
            ens = em_step(ens, kuramoto_potential(g), 1e-3)
            assert ens.positions.min() > 0.0
            assert ens.positions.max() <= 1.0


class TestSimulate:
    def test_snapshot_count(self):
        g = TorusGrid(1, 64)
        snaps = simulate(zero_potential(g), uniform_density(g), 50, 0.1, steps=37, snapshot_every=5, seed=0)
        assert len(snaps) == 37 // 5 + 1
        assert snaps[0][0] == 0.0

    def test_determinism_bit_for_bit(self):
        g = TorusGrid(1, 64)
        W = kuramoto_potential(g)
        phi = periodized_laplace(1, g)
        a = simulate(W, phi, 300, 0.1, steps=50, snapshot_every=10, seed=21)
        b = simulate(W, phi, 300, 0.1, steps=50, snapshot_every=10, seed=21)
        for (ta, pa), (tb, pb) in zip(a, b):
            assert ta == tb
            assert np.array_equal(pa, pb)

    def test_uniform_law_chi_squared(self):
        g = TorusGrid(1, 64)
        n = 100_000
        snaps = simulate(zero_potential(g), uniform_density(g), n, 0.1, steps=32, snapshot_every=32, seed=13)
        bins = 16
        counts, _ = np.histogram(snaps[-1][1][:, 0], bins=bins, range=(0, 1))
        expected = n / bins
        chi2 = np.sum((counts - expected) ** 2 / expected)
        assert chi2 <= stats.chi2.ppf(0.99, bins - 1)

    def test_label_permutation_leaves_histogram_invariant(self):
        g = TorusGrid(1, 64)
        W = kuramoto_potential(g)
        phi = periodized_laplace(1, g)
        n, steps = 400, 40
        h = 0.1 / steps
        ens = sample_initial(phi, n, seed=17)
        perm = np.random.default_rng(0).permutation(n)
        ens_p = ens.permuted(perm)
        for _ in range(steps):
            ens = em_step(ens, W, h)
            ens_p = em_step(ens_p, W, h)
        assert np.allclose(np.sort(ens.positions[:, 0]), np.sort(ens_p.positions[:, 0]))
        ca, _ = np.histogram(ens.positions[:, 0], bins=8, range=(0, 1))
        cb, _ = np.histogram(ens_p.positions[:, 0], bins=8, range=(0, 1))
        assert np.array_equal(ca, cb)


class TestBinHistogram:
    def test_single_particle_single_snapshot(self):
        snaps = [(0.0, np.array([[0.1]]))]
        hist = bin_histogram(snaps, time_bins=1, space_bins=4, T=1.0)
        assert hist.counts[0, 0] == 1
        assert hist.counts.sum() == 1

    def test_uniform_density_estimates(self):
        g = TorusGrid(1, 64)
        n = 100_000
        snaps = simulate(zero_potential(g), uniform_density(g), n, 0.1, steps=8, snapshot_every=4, seed=3)
        hist = bin_histogram(snaps, time_bins=3, space_bins=8, T=0.1)
        dens = hist.density()
        per_bin = n / 8
        assert np.max(np.abs(dens - 1.0)) <= 4 / np.sqrt(per_bin)

    def test_counts_sum_invariant(self):
        g = TorusGrid(1, 64)
        snaps = simulate(zero_potential(g), uniform_density(g), 777, 0.1, steps=10, snapshot_every=2, seed=4)
        hist = bin_histogram(snaps, time_bins=2, space_bins=4, T=0.1)
        assert hist.counts.sum() == len(snaps) * 777

    def test_empty_time_bin_rejected(self):
        snaps = [(0.0, np.array([[0.5]]))]
        with pytest.raises(ValueError):
            bin_histogram(snaps, time_bins=2, space_bins=4, T=1.0)

    def test_histogram_against_pde_oracle(self):
        # binned particle density vs the PDE density averaged over the same
        # bins: mean absolute gap within 3x the binomial standard error
        g = TorusGrid(1, 128)
        W = kuramoto_potential(g)
        phi = periodized_laplace(1, g)
        cfg = SolverConfig(T=0.25, steps=256)
        rho = solve_mckean_vlasov(W, phi, cfg)
        n = 10_000
        snaps = simulate(W, phi, n, cfg.T, steps=256, snapshot_every=8, seed=29)
        tb, sb = 4, 16
        hist = bin_histogram(snaps, time_bins=tb, space_bins=sb, T=cfg.T)
        from torusmv.experiments import cylinder_l1_distance

        l1 = cylinder_l1_distance(hist, rho)
        snaps_per_bin = len(snaps) // tb
        p = 1.0 / sb
        se_density = np.sqrt(p * (1 - p) / (snaps_per_bin * n)) / p
        assert l1 <= 3 * se_density
