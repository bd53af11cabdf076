"""Method-of-moments estimation for stationary Gaussian processes observed on a grid.

The fractional Ornstein-Uhlenbeck (fOU) process is the worked model: its
parameters (H, lambda, sigma) are recovered from squared outputs of
vanishing-moment filters.
"""
from .covmodel import (CovarianceModel, EstimationBox, FouModel, FouParams, fou_rho_closed,
                       fou_rho_spectral, fou_rho_tail, fou_var0, rho)
from .errors import (DomainError, FouGmmError, IntegrationError, NonConvergence, NonConvergentTail,
                     NotPositiveDefinite, RankDeficient)
from .filters import FilterBank, FilterKind, build_bank, daubechies_filter, finite_difference_filter
from .gmm import (GmmFit, Identity, MomentSpec, OptimizerConfig, OracleEfficient, Trajectory, TwoStep,
                  estimate, g_hat, omega, v_theta)
from .montecarlo import Scenario, ScenarioReport, run_scenario, run_table
from .sampler import SeedPlan, factorize, sample_path

__version__ = "0.1.0"
