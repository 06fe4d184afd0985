import numpy as np
import pytest

from torusmv.models import InitialCondition, kuramoto_potential, periodized_laplace, uniform_density, zero_potential
from torusmv.observation import (
    ObservationSet,
    generate_observations,
    log_likelihood,
    log_likelihood_with_trajectory,
    read_observations_csv,
    write_observations_csv,
)
from torusmv.solver import SolverConfig, evaluate_trajectory, solve_mckean_vlasov
from torusmv.spectral import GridFunction, TorusGrid


@pytest.fixture(scope="module")
def heat_setup():
    g = TorusGrid(1, 64)
    x = g.axis_coords()
    f = GridFunction(g, 1.0 + 0.3 * np.cos(2 * np.pi * x))
    phi = InitialCondition(repr=f, phi_min=f.min())
    cfg = SolverConfig(T=0.25, steps=128)
    rho = solve_mckean_vlasov(zero_potential(g), phi, cfg)
    return g, phi, cfg, rho


class TestGenerate:
    def test_noiseless_residuals_vanish(self, heat_setup):
        _, _, _, rho = heat_setup
        data = generate_observations(rho, 500, sigma=0.0, seed=1)
        clean = evaluate_trajectory(rho, data.times, data.points)
        assert np.array_equal(data.values, clean)

    def test_unit_density_gaussian_location(self):
        g = TorusGrid(1, 32)
        cfg = SolverConfig(T=0.25, steps=32)
        rho = solve_mckean_vlasov(zero_potential(g), uniform_density(g), cfg)
        N = 100_000
        data = generate_observations(rho, N, sigma=1.0, seed=2)
        assert abs(data.values.mean() - 1.0) <= 4 / np.sqrt(N)

    def test_noise_variance(self, heat_setup):
        _, _, _, rho = heat_setup
        N, sigma = 100_000, 0.7
        data = generate_observations(rho, N, sigma=sigma, seed=3)
        resid = data.values - evaluate_trajectory(rho, data.times, data.points)
        assert abs(resid.var() - sigma**2) <= 0.05 * sigma**2

    def test_deterministic(self, heat_setup):
        _, _, _, rho = heat_setup
        a = generate_observations(rho, 100, 0.1, seed=5)
        b = generate_observations(rho, 100, 0.1, seed=5)
        assert np.array_equal(a.values, b.values)
        assert np.array_equal(a.points, b.points)

    def test_design_in_cylinder(self, heat_setup):
        _, _, _, rho = heat_setup
        data = generate_observations(rho, 1000, 0.1, seed=6)
        assert data.times.min() >= 0 and data.times.max() <= rho.T
        assert data.points.min() > 0 and data.points.max() <= 1.0


class TestLogLikelihood:
    def test_empty_data_scores_zero(self, heat_setup):
        g, phi, cfg, _ = heat_setup
        empty = ObservationSet(
            times=np.empty(0),
            points=np.empty((0, 1)),
            values=np.empty(0),
            sigma=1.0,
            T=cfg.T,
            seed=0,
        )
        assert log_likelihood(zero_potential(g), empty, phi, cfg) == 0.0

    def test_noiseless_self_consistency(self, heat_setup):
        g, phi, cfg, rho = heat_setup
        data = generate_observations(rho, 200, sigma=0.0, seed=7)
        val = log_likelihood(zero_potential(g), data, phi, cfg)
        assert val == 0.0

    def test_single_unit_residual(self, heat_setup):
        g, phi, cfg, rho = heat_setup
        t = np.array([rho.times[3]])
        x = np.array([[0.5]])
        y = evaluate_trajectory(rho, t, x) + 1.0
        data = ObservationSet(times=t, points=x, values=y, sigma=1.0, T=cfg.T, seed=0)
        assert log_likelihood(zero_potential(g), data, phi, cfg) == pytest.approx(-0.5, abs=1e-10)

    def test_sigma_weighting(self, heat_setup):
        g, phi, cfg, rho = heat_setup
        t = np.array([rho.times[3]])
        x = np.array([[0.5]])
        y = evaluate_trajectory(rho, t, x) + 1.0
        data = ObservationSet(times=t, points=x, values=y, sigma=0.5, T=cfg.T, seed=0)
        assert log_likelihood(zero_potential(g), data, phi, cfg) == pytest.approx(-2.0, abs=1e-9)

    def test_permutation_invariance(self, heat_setup):
        g, phi, cfg, rho = heat_setup
        data = generate_observations(rho, 300, 0.2, seed=8)
        perm = np.random.default_rng(0).permutation(len(data))
        permuted = ObservationSet(
            times=data.times[perm],
            points=data.points[perm],
            values=data.values[perm],
            sigma=data.sigma,
            T=data.T,
            seed=data.seed,
        )
        a = log_likelihood(zero_potential(g), data, phi, cfg)
        b = log_likelihood(zero_potential(g), permuted, phi, cfg)
        assert a == pytest.approx(b, rel=1e-12)

    def test_depends_only_on_trajectory(self, heat_setup):
        # two potential objects with identical coefficient arrays must score
        # identically
        g, phi, cfg, rho = heat_setup
        data = generate_observations(rho, 100, 0.2, seed=9)
        from torusmv.models import cosine_potential

        W1 = cosine_potential({1: -1.0}, g)
        W2 = cosine_potential({1: -0.5}, g)
        W3 = cosine_potential({1: -0.5}, g)
        a = log_likelihood(W2, data, phi, cfg)
        b = log_likelihood(W3, data, phi, cfg)
        c = log_likelihood(W1, data, phi, cfg)
        assert a == b
        assert a != c

    def test_noise_inflation_lowers_expected_loglik(self):
        # under the unit-variance score (the sigma used for tempering held
        # fixed at 1), noisier data drags the truth's expected score down;
        # with the 1/sigma^2 weight the expectation is -N/2 for every sigma,
        # so the monotonicity is only visible in this form
        g = TorusGrid(1, 64)
        phi = periodized_laplace(1, g)
        cfg = SolverConfig(T=0.25, steps=128)
        W = kuramoto_potential(g)
        rho = solve_mckean_vlasov(W, phi, cfg)
        vals = {}
        for sigma in (0.1, 0.4):
            scores = []
            for seed in range(8):
                data = generate_observations(rho, 400, sigma, seed=seed)
                unit = ObservationSet(
                    times=data.times,
                    points=data.points,
                    values=data.values,
                    sigma=1.0,
                    T=data.T,
                    seed=data.seed,
                )
                scores.append(log_likelihood(W, unit, phi, cfg))
            vals[sigma] = np.mean(scores)
        assert vals[0.4] < vals[0.1]

    def test_trajectory_cache_returned(self, heat_setup):
        g, phi, cfg, rho = heat_setup
        data = generate_observations(rho, 50, 0.1, seed=10)
        val, traj = log_likelihood_with_trajectory(zero_potential(g), data, phi, cfg)
        assert traj is not None
        assert np.array_equal(traj.frames, rho.frames)


class Test2D:
    def test_generate_and_score_2d(self):
        g = TorusGrid(2, 16)
        x1, x2 = g.node_coords()
        f = GridFunction(g, 1.0 + 0.2 * np.cos(2 * np.pi * x1) * np.cos(2 * np.pi * x2))
        phi = InitialCondition(repr=f, phi_min=f.min())
        cfg = SolverConfig(T=0.1, steps=32)
        rho = solve_mckean_vlasov(zero_potential(g), phi, cfg)
        data = generate_observations(rho, 200, sigma=0.0, seed=4)
        assert data.points.shape == (200, 2)
        clean = evaluate_trajectory(rho, data.times, data.points)
        assert np.array_equal(data.values, clean)
        assert log_likelihood(zero_potential(g), data, phi, cfg) == 0.0


class TestSerialization:
    def test_round_trip(self, heat_setup, tmp_path):
        _, _, _, rho = heat_setup
        data = generate_observations(rho, 64, 0.3, seed=12)
        path = tmp_path / "observations.csv"
        write_observations_csv(data, path, meta={"potential": "zero"})
        back = read_observations_csv(path)
        assert np.array_equal(back.values, data.values)
        assert np.array_equal(back.points, data.points)
        assert back.sigma == data.sigma
        assert back.T == data.T
