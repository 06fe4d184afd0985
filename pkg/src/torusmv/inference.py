"""Preconditioned Crank-Nicolson sampling of the potential posterior.

The chain moves over prior coefficient vectors with the prior-reversible
proposal v' = sqrt(1 - beta^2) v + beta xi, xi a fresh prior draw, accepted
with probability min(1, exp(l(v') - l(v))). Each proposal costs one forward
PDE solve; the solved trajectory is cached on the accepted state. With an
empty data set the likelihood is identically zero and the chain samples the
prior exactly.

During burn-in the proposal scale is adapted toward an acceptance rate in
[0.15, 0.4] and then frozen, so the retained portion of the chain is a fixed
Markov kernel.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError, SolverInstabilityError
from .models import InitialCondition, Potential
from .observation import ObservationSet, _gaussian_score
from .priors import CoefficientVector, PriorBasis, PriorSpec, basis_for, draw_coefficients
from .solver import DensityTrajectory, SolverConfig, _March, _materialize
from .spectral import TorusGrid, _axis_freqs

ACCEPT_WINDOW = (0.15, 0.4)
ADAPT_INTERVAL = 50
LOW_ACCEPTANCE_WARNING = 0.01


@dataclass(frozen=True)
class ChainConfig:
    pcn_beta: float = 0.1
    iterations: int = 5000
    burn_in: int = 1000
    thin: int = 5
    seed: int = 0
    adapt: bool = True

    def __post_init__(self):
        if not 0.0 < self.pcn_beta <= 1.0:
            raise ConfigError("pcn_beta must lie in (0, 1]")
        if self.burn_in >= self.iterations:
            raise ConfigError("burn_in must be smaller than iterations")
        if self.thin < 1:
            raise ConfigError("thin must be >= 1")


@dataclass(frozen=True)
class ChainState:
    coeffs: CoefficientVector
    loglik: float
    trajectory_cache: Optional[DensityTrajectory] = None


class LikelihoodEvaluator:
    """One forward solve plus a precomputed design-matrix evaluation.

    The interpolation weights of the fixed data set are assembled once, so a
    likelihood evaluation is a solve followed by a couple of matrix products.
    """

    def __init__(self, data: ObservationSet, phi: InitialCondition, cfg: SolverConfig):
        self.data = data
        self.phi = phi
        self.cfg = cfg
        self.grid = phi.grid
        self.solves = 0
        if len(data) == 0:
            return
        h = cfg.h
        t = data.times
        self._m = np.clip((t / h).astype(np.int64), 0, cfg.steps - 1)
        self._w = t / h - self._m
        n = self.grid.n
        k = _axis_freqs(n).astype(np.float64)
        if self.grid.dim == 1:
            self._p1 = np.exp(2j * np.pi * np.outer(data.points[:, 0], k))
            self._p2 = None
        else:
            self._p1 = np.exp(2j * np.pi * np.outer(data.points[:, 0], k))
            self._p2 = np.exp(2j * np.pi * np.outer(data.points[:, 1], k))

    def __call__(self, W: Potential) -> tuple:
        """Returns (loglik, trajectory); trajectory is None when data is empty."""
        if len(self.data) == 0:
            return 0.0, None
        march = _March(W, self.phi, self.cfg)
        coeffs = march.run(source=None)
        trajectory = _materialize(march, coeffs)
        self.solves += 1
        gathered = (1.0 - self._w[:, None]) * coeffs[self._m].reshape(len(self.data), -1) + self._w[
            :, None
        ] * coeffs[self._m + 1].reshape(len(self.data), -1)
        if self.grid.dim == 1:
            predicted = np.einsum("ck,ck->c", self._p1, gathered).real
        else:
            n = self.grid.n
            g = gathered.reshape(len(self.data), n, n)
            predicted = np.einsum("ck,ckl,cl->c", self._p1, g, self._p2).real
        return _gaussian_score(self.data.values - predicted, self.data.sigma), trajectory


def _propose(
    state: ChainState,
    spec: PriorSpec,
    basis: PriorBasis,
    pcn_beta: float,
    rng: np.random.Generator,
) -> CoefficientVector:
    xi = draw_coefficients(spec, basis, rng)
    mixed = np.sqrt(1.0 - pcn_beta**2) * state.coeffs.values + pcn_beta * xi.values
    return CoefficientVector(basis=basis, values=mixed)


def _step(
    state: ChainState,
    spec: PriorSpec,
    basis: PriorBasis,
    evaluator: LikelihoodEvaluator,
    grid: TorusGrid,
    pcn_beta: float,
    rng: np.random.Generator,
    failures: Optional[list] = None,
) -> tuple:
    proposal = _propose(state, spec, basis, pcn_beta, rng)
    try:
        potential = basis.synthesize(proposal.values, grid)
        loglik, trajectory = evaluator(potential)
    except (SolverInstabilityError, ConfigError) as exc:
        if failures is not None:
            failures.append(str(exc))
        else:
            logging.getLogger(__name__).warning("proposal rejected, solver failed: %s", exc)
        return state, False
    log_ratio = loglik - state.loglik
    if np.log(rng.random()) < log_ratio:
        return ChainState(coeffs=proposal, loglik=loglik, trajectory_cache=trajectory), True
    return state, False


def pcn_step(
    state: ChainState,
    spec: PriorSpec,
    data: ObservationSet,
    phi: InitialCondition,
    cfg_solver: SolverConfig,
    pcn_beta: float,
    rng: np.random.Generator,
) -> tuple:
    """One pCN update; returns (new_state, accepted).

    A solver failure on the proposal rejects it and the chain continues.
    ``pcn_beta`` may be 0 here (degenerate identity proposal), unlike in
    ChainConfig.
    """
    basis = state.coeffs.basis
    evaluator = LikelihoodEvaluator(data, phi, cfg_solver)
    return _step(state, spec, basis, evaluator, phi.grid, pcn_beta, rng)


def initial_state(
    spec: PriorSpec,
    data: ObservationSet,
    phi: InitialCondition,
    cfg_solver: SolverConfig,
) -> ChainState:
    """Chain start at the prior mean (the zero potential)."""
    basis = basis_for(spec, phi.grid)
    coeffs = CoefficientVector(basis=basis, values=np.zeros(basis.size))
    evaluator = LikelihoodEvaluator(data, phi, cfg_solver)
    loglik, trajectory = evaluator(basis.synthesize(coeffs.values, phi.grid))
    return ChainState(coeffs=coeffs, loglik=loglik, trajectory_cache=trajectory)


def run_chain(
    spec: PriorSpec,
    data: ObservationSet,
    phi: InitialCondition,
    cfg_solver: SolverConfig,
    cfg_chain: ChainConfig,
) -> tuple:
    """Run the sampler; returns (samples, diagnostics).

    ``samples`` are the post-burn-in coefficient vectors thinned by
    ``cfg_chain.thin``; diagnostics carry the acceptance rate, log-likelihood
    trace, solve count, adaptation result and any solver failures.
    """
    start = time.perf_counter()
    grid = phi.grid
    basis = basis_for(spec, grid)
    rng = np.random.default_rng(cfg_chain.seed)
    evaluator = LikelihoodEvaluator(data, phi, cfg_solver)
    state = ChainState(
        coeffs=CoefficientVector(basis=basis, values=np.zeros(basis.size)),
        loglik=evaluator(basis.synthesize(np.zeros(basis.size), grid))[0],
        trajectory_cache=None,
    )
    beta = cfg_chain.pcn_beta
    samples = []
    loglik_trace = np.empty(cfg_chain.iterations)
    accept_trace = np.zeros(cfg_chain.iterations, dtype=bool)
    coeff_trace = np.empty((cfg_chain.iterations, basis.size))
    # coefficient-sum bound on the C^2 norm of each state, logged rather than
    # enforced (no rejection on smoothness balls by default)
    c2_weights = np.array(
        [np.sqrt(2.0) * max(1.0, (2.0 * np.pi * np.linalg.norm(k)) ** 2) for k, _ in basis.elements]
    )
    c2_trace = np.empty(cfg_chain.iterations)
    failures = []
    window_accepts = 0
    for it in range(cfg_chain.iterations):
        state, accepted = _step(state, spec, basis, evaluator, grid, beta, rng, failures)
        loglik_trace[it] = state.loglik
        accept_trace[it] = accepted
        coeff_trace[it] = state.coeffs.values
        c2_trace[it] = float(np.abs(state.coeffs.values) @ c2_weights)
        window_accepts += accepted
        if cfg_chain.adapt and it < cfg_chain.burn_in and (it + 1) % ADAPT_INTERVAL == 0:
            rate = window_accepts / ADAPT_INTERVAL
            if rate < ACCEPT_WINDOW[0]:
                beta = max(beta * 0.7, 1e-3)
            elif rate > ACCEPT_WINDOW[1]:
                beta = min(beta * 1.3, 1.0)
            window_accepts = 0
        if it >= cfg_chain.burn_in and (it - cfg_chain.burn_in) % cfg_chain.thin == 0:
            samples.append(state.coeffs)
    post = accept_trace[cfg_chain.burn_in :]
    acceptance_rate = float(post.mean()) if post.size else 0.0
    warnings = []
    if acceptance_rate < LOW_ACCEPTANCE_WARNING:
        warnings.append(f"acceptance rate {acceptance_rate:.4f} below {LOW_ACCEPTANCE_WARNING}")
    diagnostics = {
        "acceptance_rate": acceptance_rate,
        "loglik_trace": loglik_trace,
        "accept_trace": accept_trace,
        "coeff_trace": coeff_trace,
        "c2_upper_trace": c2_trace,
        "solve_count": evaluator.solves,
        "pcn_beta_final": beta,
        "solver_failures": failures,
        "warnings": warnings,
        "wall_time_s": time.perf_counter() - start,
    }
    return samples, diagnostics


def posterior_mean(samples: list, grid: TorusGrid) -> tuple:
    """Coordinatewise average of the samples, realized as a Potential."""
    if not samples:
        raise ValueError("need at least one sample")
    basis = samples[0].basis
    acc = np.zeros(basis.size)
    for s in samples:
        if s.basis != basis:
            raise ValueError("samples drawn from different bases")
        acc += s.values
    mean = CoefficientVector(basis=basis, values=acc / len(samples))
    return mean, basis.synthesize(mean.values, grid)


def plugin_density(
    wbar: Potential, phi: InitialCondition, cfg: SolverConfig
) -> DensityTrajectory:
    """Forward solve at the posterior-mean potential."""
    from .solver import solve_mckean_vlasov

    return solve_mckean_vlasov(wbar, phi, cfg)


def verify_state(
    state: ChainState,
    data: ObservationSet,
    phi: InitialCondition,
    cfg_solver: SolverConfig,
) -> float:
    """Recompute the log-likelihood of a state from scratch (cache audit)."""
    evaluator = LikelihoodEvaluator(data, phi, cfg_solver)
    loglik, _ = evaluator(state.coeffs.basis.synthesize(state.coeffs.values, phi.grid))
    return loglik


def write_chain_csv(diag: dict, path) -> None:
    """Rows ``iter,accepted,loglik,coeff_0,...`` from run_chain diagnostics."""
    coeffs = diag["coeff_trace"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "accepted", "loglik"] + [f"coeff_{i}" for i in range(coeffs.shape[1])])
        for i in range(coeffs.shape[0]):
            row = [str(i), str(int(diag["accept_trace"][i])), repr(float(diag["loglik_trace"][i]))]
            row += [repr(float(v)) for v in coeffs[i]]
            w.writerow(row)


def write_chain_summary(diag: dict, mean: CoefficientVector, path) -> None:
    payload = {
        "acceptance_rate": diag["acceptance_rate"],
        "solve_count": diag["solve_count"],
        "pcn_beta_final": diag["pcn_beta_final"],
        "wall_time_s": diag["wall_time_s"],
        "warnings": diag["warnings"],
        "posterior_mean_coefficients": [float(v) for v in mean.values],
        "basis_ids": mean.basis.element_ids(),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
