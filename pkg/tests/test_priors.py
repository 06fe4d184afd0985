import math

import numpy as np
import pytest
from scipy import stats

from torusmv.priors import (
    CoefficientVector,
    PriorSpec,
    basis_for,
    contraction_rate,
    default_band_limit,
    draw_coefficients,
    mode_std,
    recovery_exponent,
    rkhs_norm,
    sample_prior,
    write_coefficients_csv,
)
from torusmv.spectral import TorusGrid, sobolev_norm


class TestContractionRate:
    def test_exponent_alpha2_beta4_d1(self):
        # (alpha+1+beta) / (2(alpha+1) + 2 beta + d) = 7/15
        n = 1234
        assert contraction_rate(2.0, 4.0, 1, n) == pytest.approx(n ** (-7.0 / 15.0), rel=1e-14)

    def test_one_observation(self):
        assert contraction_rate(3.0, 6.0, 2, 1) == 1.0

    def test_power_law_squaring(self):
        n = 57
        assert contraction_rate(2.0, 4.0, 1, n**2) == pytest.approx(
            contraction_rate(2.0, 4.0, 1, n) ** 2, rel=1e-12
        )


class TestRecoveryExponent:
    def test_reference_value(self):
        # ((alpha+1+beta)(beta-2)/beta - 3 zeta/2) / (2(alpha+1)+2 beta+d)
        # = (15 * 1/2 - 6.9) / 31 = 0.6 / 31
        assert recovery_exponent(10.0, 4.0, 1, 4.6) == pytest.approx(0.6 / 31.0, rel=1e-12)

    def test_zero_of_numerator(self):
        alpha, beta, d = 3.0, 6.0, 2
        zeta = (2.0 / 3.0) * (alpha + 1 + beta) * (beta - 2) / beta
        assert recovery_exponent(alpha, beta, d, zeta) == pytest.approx(0.0, abs=1e-14)

    def test_monotone_in_alpha_when_positive(self):
        beta, d, zeta = 4.0, 1, 1.0
        alphas = np.linspace(2.0, 12.0, 21)
        vals = [recovery_exponent(a, beta, d, zeta) for a in alphas]
        assert all(v > 0 for v in vals)
        assert all(b > a for a, b in zip(vals, vals[1:]))

    def test_beta_hypothesis(self):
        with pytest.raises(ValueError):
            recovery_exponent(2.0, 2.0, 1, 1.0)

    def test_band_limit_schedule(self):
        assert default_band_limit(2.0, 4.0, 1, 2000) == math.ceil(2000 ** (1.0 / 15.0))


class TestSamplePrior:
    def test_mean_zero(self):
        g = TorusGrid(1, 64)
        for kind in ("matern", "truncated_fourier", "exp_series"):
            spec = PriorSpec(kind=kind, alpha=2.0, r=1.0, K=5)
            _, W = sample_prior(spec, seed=3, grid=g)
            assert abs(W.repr.mean()) <= 1e-12

    def test_band_limit_respected(self):
        g = TorusGrid(1, 64)
        spec = PriorSpec(kind="truncated_fourier", alpha=2.0, K=4)
        _, W = sample_prior(spec, seed=1, grid=g)
        assert W.band_limit == 4
        k = np.fft.fftfreq(g.n, 1.0 / g.n)
        assert np.max(np.abs(W.fourier.coeffs[np.abs(k) > 4])) == 0.0

    def test_beyond_nyquist_rejected(self):
        g = TorusGrid(1, 32)
        with pytest.raises(ValueError):
            sample_prior(PriorSpec(kind="truncated_fourier", alpha=2.0, K=16), 0, g)

    def test_exp_series_mode_std_monte_carlo(self):
        # prior std of the mode-k coefficient is exp(-r |k|_1 / 2)
        g = TorusGrid(1, 32)
        r, K, draws = 0.8, 3, 10_000
        spec = PriorSpec(kind="exp_series", r=r, K=K)
        basis = basis_for(spec, g)
        rng = np.random.default_rng(0)
        samples = np.stack([draw_coefficients(spec, basis, rng).values for _ in range(draws)])
        for i, (k, _) in enumerate(basis.elements):
            target_var = math.exp(-r * abs(k[0]))
            var = samples[:, i].var(ddof=1)
            se = target_var * math.sqrt(2.0 / (draws - 1))
            assert abs(var - target_var) <= 3 * se

    def test_truncated_rescaled_variance_monte_carlo(self):
        g = TorusGrid(1, 64)
        alpha, beta, N, K, draws = 2.0, 4, 400, 3, 10_000
        spec = PriorSpec(
            kind="truncated_fourier",
            alpha=alpha,
            K=K,
            rescale="sqrtN_deltaN",
            N_for_rescale=N,
            beta_nominal=beta,
        )
        basis = basis_for(spec, g)
        rng = np.random.default_rng(1)
        samples = np.stack([draw_coefficients(spec, basis, rng).values for _ in range(draws)])
        delta = contraction_rate(alpha, float(beta), 1, N)
        for i, (k, _) in enumerate(basis.elements):
            target_var = (1 + 4 * np.pi**2 * k[0] ** 2) ** (-(alpha + 1.0)) / (N * delta**2)
            var = samples[:, i].var(ddof=1)
            se = target_var * math.sqrt(2.0 / (draws - 1))
            assert abs(var - target_var) <= 3 * se

    def test_mode_normality_anderson_darling(self):
        g = TorusGrid(1, 32)
        spec = PriorSpec(kind="matern", alpha=2.0, K=4)
        basis = basis_for(spec, g)
        rng = np.random.default_rng(2)
        samples = np.stack([draw_coefficients(spec, basis, rng).values for _ in range(10_000)])
        for i, (k, _) in enumerate(basis.elements):
            std = mode_std(spec, k)
            res = stats.anderson(samples[:, i] / std, dist="norm")
            crit_1pct = res.critical_values[list(res.significance_level).index(1.0)]
            assert res.statistic < crit_1pct

    def test_symmetric_mode_yields_even_functions(self):
        for dim, n in [(1, 64), (2, 16)]:
            g = TorusGrid(dim, n)
            spec = PriorSpec(kind="matern", alpha=2.5, K=4, symmetric_only=True)
            _, W = sample_prior(spec, seed=5, grid=g)
            idx = (-np.arange(g.n)) % g.n
            mirrored = W.repr.values[idx] if dim == 1 else W.repr.values[np.ix_(idx, idx)]
            assert np.max(np.abs(W.repr.values - mirrored)) <= 1e-12

    def test_rescale_consistency_seed_matched(self):
        g = TorusGrid(1, 64)
        N, alpha, beta = 1000, 2.0, 4
        base = PriorSpec(kind="truncated_fourier", alpha=alpha, K=3, beta_nominal=beta)
        scaled = PriorSpec(
            kind="truncated_fourier",
            alpha=alpha,
            K=3,
            rescale="sqrtN_deltaN",
            N_for_rescale=N,
            beta_nominal=beta,
        )
        v0, _ = sample_prior(base, seed=9, grid=g)
        v1, _ = sample_prior(scaled, seed=9, grid=g)
        factor = math.sqrt(N) * contraction_rate(alpha, float(beta), 1, N)
        assert np.array_equal(v1.values, v0.values / factor)

    def test_determinism(self):
        g = TorusGrid(2, 16)
        spec = PriorSpec(kind="exp_series", r=1.0, K=3)
        a, Wa = sample_prior(spec, seed=4, grid=g)
        b, Wb = sample_prior(spec, seed=4, grid=g)
        assert np.array_equal(a.values, b.values)
        assert np.array_equal(Wa.repr.values, Wb.repr.values)

    def test_linearity_of_synthesis(self):
        g = TorusGrid(1, 64)
        spec = PriorSpec(kind="matern", alpha=2.0, K=5)
        basis = basis_for(spec, g)
        rng = np.random.default_rng(6)
        u = rng.standard_normal(basis.size)
        v = rng.standard_normal(basis.size)
        lhs = basis.synthesize(2.0 * u + 3.0 * v, g).repr.values
        rhs = 2.0 * basis.synthesize(u, g).repr.values + 3.0 * basis.synthesize(v, g).repr.values
        assert np.max(np.abs(lhs - rhs)) < 1e-12

    def test_analyze_inverts_synthesize(self):
        g = TorusGrid(2, 16)
        spec = PriorSpec(kind="matern", alpha=2.5, K=3)
        basis = basis_for(spec, g)
        rng = np.random.default_rng(7)
        vals = rng.standard_normal(basis.size)
        W = basis.synthesize(vals, g)
        assert np.max(np.abs(basis.analyze(W) - vals)) < 1e-12

    def test_coefficient_l2_matches_potential_l2(self):
        # orthonormal basis: |W|_{L2} equals the euclidean coefficient norm
        g = TorusGrid(1, 64)
        spec = PriorSpec(kind="matern", alpha=2.0, K=6)
        v, W = sample_prior(spec, seed=8, grid=g)
        assert W.repr.l2() == pytest.approx(np.linalg.norm(v.values), rel=1e-10)


class TestRkhsNorm:
    def test_zero(self):
        g = TorusGrid(1, 32)
        spec = PriorSpec(kind="matern", alpha=2.0, K=4)
        basis = basis_for(spec, g)
        v = CoefficientVector(basis=basis, values=np.zeros(basis.size))
        assert rkhs_norm(spec, v) == 0.0

    def test_exp_series_unit_coefficient(self):
        g = TorusGrid(1, 32)
        r = 1.3
        spec = PriorSpec(kind="exp_series", r=r, K=4)
        basis = basis_for(spec, g)
        for i, (k, _) in enumerate(basis.elements):
            vals = np.zeros(basis.size)
            vals[i] = 1.0
            v = CoefficientVector(basis=basis, values=vals)
            assert rkhs_norm(spec, v) == pytest.approx(math.exp(r * abs(k[0]) / 2), rel=1e-12)

    def test_norm_axioms(self):
        g = TorusGrid(1, 32)
        spec = PriorSpec(kind="matern", alpha=2.0, K=4)
        basis = basis_for(spec, g)
        rng = np.random.default_rng(10)
        for _ in range(25):
            a = CoefficientVector(basis=basis, values=rng.standard_normal(basis.size))
            b = CoefficientVector(basis=basis, values=rng.standard_normal(basis.size))
            c = rng.uniform(-3, 3)
            sum_v = CoefficientVector(basis=basis, values=a.values + b.values)
            scaled = CoefficientVector(basis=basis, values=c * a.values)
            assert rkhs_norm(spec, sum_v) <= rkhs_norm(spec, a) + rkhs_norm(spec, b) + 1e-12
            assert rkhs_norm(spec, scaled) == pytest.approx(abs(c) * rkhs_norm(spec, a), rel=1e-12)

    def test_dimension_mismatch(self):
        g = TorusGrid(1, 32)
        spec4 = PriorSpec(kind="matern", alpha=2.0, K=4)
        spec5 = PriorSpec(kind="matern", alpha=2.0, K=5)
        v = CoefficientVector(basis=basis_for(spec4, g), values=np.zeros(8))
        with pytest.raises(ValueError):
            rkhs_norm(spec5, v)

    def test_matern_weight_matches_sobolev_norm(self):
        # H^{alpha+1} weight: rkhs norm of a draw equals the sobolev norm of
        # the synthesized potential
        g = TorusGrid(1, 64)
        spec = PriorSpec(kind="matern", alpha=2.0, K=6)
        v, W = sample_prior(spec, seed=11, grid=g)
        assert rkhs_norm(spec, v) == pytest.approx(sobolev_norm(W.repr, 3.0), rel=1e-10)


class TestSerialization:
    def test_coefficient_csv(self, tmp_path):
        g = TorusGrid(2, 16)
        spec = PriorSpec(kind="exp_series", r=1.0, K=2, symmetric_only=True)
        v, _ = sample_prior(spec, seed=12, grid=g)
        path = tmp_path / "coeffs.csv"
        write_coefficients_csv(v, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "basis_id,value"
        assert len(lines) == 1 + v.basis.size
        assert lines[1].startswith("cos:0_1,")
