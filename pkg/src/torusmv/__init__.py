"""Mean-field McKean-Vlasov dynamics on the torus.

Spectral solvers for the nonlinear Fokker-Planck equation, interacting
particle simulation, synthetic regression data, Gaussian-process priors on
interaction potentials, pCN posterior sampling, and diagnostics that check
the stability and regularity estimates the method relies on.
"""

from .spectral import (
    TorusGrid,
    GridFunction,
    FourierCoeffs,
    to_fourier,
    from_fourier,
    convolve,
    gradient,
    sobolev_norm,
    eval_at_point,
    eval_at_points,
)
from .models import (
    Potential,
    InitialCondition,
    periodized_laplace,
    cosine_potential,
    kuramoto_potential,
    sobolev_random_potential,
    zero_potential,
    uniform_density,
    verify_decon,
    potential_from_id,
    initial_from_id,
)
from .solver import (
    SolverConfig,
    DensityTrajectory,
    solve_mckean_vlasov,
    solve_linear_fp,
    solve_picard,
    trajectory_regularity_report,
    evaluate_trajectory,
    space_time_l2_distance,
)
from .observation import ObservationSet, generate_observations, log_likelihood
from .priors import (
    PriorSpec,
    PriorBasis,
    CoefficientVector,
    contraction_rate,
    recovery_exponent,
    sample_prior,
    rkhs_norm,
)
from .inference import (
    ChainConfig,
    ChainState,
    pcn_step,
    run_chain,
    posterior_mean,
    plugin_density,
)
from .particles import ParticleEnsemble, HistogramData, sample_initial, em_step, simulate, bin_histogram
from . import diagnostics, experiments

__version__ = "0.1.0"
