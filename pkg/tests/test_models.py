import numpy as np
import pytest

from torusmv.errors import ResolutionError
from torusmv.models import (
    builtin_initial_ids,
    builtin_potential_ids,
    cosine_potential,
    initial_from_id,
    kuramoto_potential,
    periodized_laplace,
    potential_from_fourier_csv,
    potential_from_id,
    sobolev_random_potential,
    uniform_density,
    verify_decon,
    zero_potential,
)
from torusmv.spectral import TorusGrid, convolve, sobolev_norm, to_fourier, write_fourier_csv


class TestPeriodizedLaplace:
    def test_m1_first_coefficient(self):
        g = TorusGrid(1, 64)
        phi = periodized_laplace(1, g)
        c = to_fourier(phi.repr)
        assert c.at(1) == pytest.approx(1.0 / (1.0 + 2.0 * np.pi**2), abs=1e-13)

    @pytest.mark.parametrize("m", [1, 2, 3])
    def test_unit_mass(self, m):
        g = TorusGrid(1, 64)
        phi = periodized_laplace(m, g)
        assert to_fourier(phi.repr).at(0) == pytest.approx(1.0, abs=1e-12)

    def test_m2_equals_self_convolution(self):
        g = TorusGrid(1, 64)
        phi1 = periodized_laplace(1, g)
        phi2 = periodized_laplace(2, g)
        conv = to_fourier(convolve(phi1.repr, phi1.repr))
        assert conv.at(1) == pytest.approx((1.0 + 2.0 * np.pi**2) ** -2, abs=1e-13)
        assert np.max(np.abs(conv.coeffs - to_fourier(phi2.repr).coeffs)) < 1e-12

    @pytest.mark.parametrize("dim", [1, 2])
    @pytest.mark.parametrize("n", [16, 32, 64])
    @pytest.mark.parametrize("m", [1, 2, 4])
    def test_strictly_positive(self, dim, n, m):
        if dim == 2 and n == 64:
            n = 32  # keep the matrix cheap; 64 is covered in d=1
        phi = periodized_laplace(m, TorusGrid(dim, n))
        assert phi.repr.min() > 0

    def test_decon_params_recorded(self):
        g = TorusGrid(1, 64)
        phi = periodized_laplace(2, g)
        c, zeta = phi.decon_params
        assert zeta == 4.0
        assert c > 0


class TestCosinePotential:
    def test_kuramoto(self):
        g = TorusGrid(1, 64)
        W = kuramoto_potential(g)
        x = g.axis_coords()
        assert np.max(np.abs(W.repr.values + np.cos(2 * np.pi * x))) < 1e-12
        assert W.band_limit == 1

    def test_empty_sum_is_zero(self):
        g = TorusGrid(1, 32)
        W = cosine_potential({}, g)
        assert np.max(np.abs(W.repr.values)) == 0.0

    def test_coefficients(self):
        g = TorusGrid(1, 64)
        W = cosine_potential({1: 1.0, 3: 0.2}, g)
        c = W.fourier
        assert c.at(1) == pytest.approx(0.5, abs=1e-14)
        assert c.at(-1) == pytest.approx(0.5, abs=1e-14)
        assert c.at(3) == pytest.approx(0.1, abs=1e-14)
        assert c.at(-3) == pytest.approx(0.1, abs=1e-14)

    def test_zero_frequency_rejected(self):
        g = TorusGrid(1, 32)
        with pytest.raises(ValueError):
            cosine_potential({0: 1.0}, g)
        g2 = TorusGrid(2, 16)
        with pytest.raises(ValueError):
            cosine_potential({(0, 0): 1.0}, g2)

    def test_2d_kuramoto_mean_zero(self):
        g = TorusGrid(2, 16)
        W = kuramoto_potential(g)
        assert abs(W.repr.mean()) < 1e-12


class TestSobolevRandomPotential:
    def test_deterministic_in_seed(self):
        g = TorusGrid(1, 64)
        a = sobolev_random_potential(2.0, 8, 7, g)
        b = sobolev_random_potential(2.0, 8, 7, g)
        assert np.array_equal(a.repr.values, b.repr.values)

    def test_zero_band(self):
        g = TorusGrid(1, 64)
        W = sobolev_random_potential(2.0, 0, 3, g)
        assert np.max(np.abs(W.repr.values)) == 0.0

    def test_band_beyond_nyquist_rejected(self):
        g = TorusGrid(1, 32)
        with pytest.raises(ResolutionError):
            sobolev_random_potential(2.0, 16, 3, g)

    def test_alpha_hypothesis_enforced(self):
        with pytest.raises(ValueError):
            sobolev_random_potential(1.2, 4, 0, TorusGrid(1, 32))
        with pytest.raises(ValueError):
            sobolev_random_potential(1.8, 4, 0, TorusGrid(2, 16))

    def test_monte_carlo_expected_squared_norm(self):
        # E |W|_{H^{alpha+1}}^2 = number of retained modes (both half-spaces)
        g = TorusGrid(1, 64)
        alpha, K = 2.0, 6
        draws = 10_000
        vals = np.empty(draws)
        for s in range(draws):
            W = sobolev_random_potential(alpha, K, s, g)
            vals[s] = sobolev_norm(W.repr, alpha + 1.0) ** 2
        expected = 2 * K
        se = vals.std(ddof=1) / np.sqrt(draws)
        assert abs(vals.mean() - expected) <= 3 * se

    def test_real_and_mean_zero(self):
        g = TorusGrid(2, 16)
        W = sobolev_random_potential(2.5, 4, 11, g)
        assert abs(W.repr.mean()) < 1e-12
        sym_err = np.max(np.abs(W.fourier.coeffs - np.conj(
            W.fourier.coeffs[np.ix_((-np.arange(g.n)) % g.n, (-np.arange(g.n)) % g.n)]
        )))
        assert sym_err < 1e-14


class TestVerifyDecon:
    def test_uniform_fails(self):
        g = TorusGrid(1, 64)
        holds, best_c = verify_decon(uniform_density(g), 2.0)
        assert not holds
        assert best_c < 1e-14

    @pytest.mark.parametrize("dim,n", [(1, 32), (1, 64), (1, 128), (2, 32), (2, 64)])
    @pytest.mark.parametrize("m", [1, 2, 3])
    def test_laplace_holds_at_its_exponent(self, dim, n, m):
        phi = periodized_laplace(m, TorusGrid(dim, n))
        holds, best_c = verify_decon(phi, 2.0 * m)
        assert holds
        # the minimizer is k = e_1: best_c = (1 + 2 pi^2)^(-m)
        assert best_c == pytest.approx((1.0 + 2.0 * np.pi**2) ** (-m), rel=1e-10)

    def test_mismatched_exponent_direct_minimization(self):
        g = TorusGrid(1, 128)
        phi = periodized_laplace(1, g)
        _, best_c = verify_decon(phi, 1.0)
        k = np.abs(np.fft.fftfreq(g.n, 1.0 / g.n))
        mask = k > 0
        oracle = np.min((1.0 + 2.0 * np.pi**2 * k[mask] ** 2) ** -1.0 * k[mask])
        assert best_c == pytest.approx(oracle, rel=1e-10)


class TestRegistry:
    def test_builtin_ids_resolve_both_dims(self):
        for dim, n in [(1, 64), (2, 32)]:
            g = TorusGrid(dim, n)
            for pid in builtin_potential_ids():
                W = potential_from_id(pid, g)
                assert abs(W.repr.mean()) < 1e-12
            for iid in builtin_initial_ids():
                phi = initial_from_id(iid, g)
                assert phi.repr.min() > 0

    def test_id_parsing(self):
        g = TorusGrid(1, 64)
        W = potential_from_id("sobolev:alpha=2,K=8,seed=7", g)
        assert W.band_limit == 8
        assert np.array_equal(W.repr.values, sobolev_random_potential(2.0, 8, 7, g).repr.values)
        phi = initial_from_id("laplace:m=2", g)
        assert phi.decon_params[1] == 4.0

    def test_unknown_ids(self):
        g = TorusGrid(1, 32)
        with pytest.raises(ValueError):
            potential_from_id("gaussian", g)
        with pytest.raises(ValueError):
            initial_from_id("cauchy:m=1", g)

    def test_potential_loadable_from_fourier_csv(self, tmp_path):
        g = TorusGrid(1, 64)
        W = kuramoto_potential(g)
        path = tmp_path / "w.csv"
        write_fourier_csv(W.fourier, path)
        back = potential_from_fourier_csv(path, band_limit=1)
        assert np.max(np.abs(back.repr.values - W.repr.values)) < 1e-14

    def test_zero_potential(self):
        g = TorusGrid(2, 16)
        W = zero_potential(g)
        assert np.max(np.abs(W.repr.values)) == 0.0
