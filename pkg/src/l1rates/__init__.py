"""Convergence-rate certification for l1-regularized linear inverse problems."""
from .errors import (
    CapacityError,
    DegenerateInputError,
    ExhaustedGridError,
    InvalidInputError,
    InvalidParameterError,
)
from .experiments import ExperimentReport, power_decay, run_beta1_demo, run_rate_sweep, simulate_data
from .operators import (
    BidiagonalOperator,
    DiagonalOperator,
    HaarIntegrationOperator,
    MatrixOperator,
    OperatorModel,
    from_spec,
)
from .piecewise import PiecewisePoly, haar_analysis, haar_synthesis
from .rates import RateProfile, beta_of_c, build_rate_profile, negative_witness, profile_for, vie_margin
from .sequences import SeqVec
from .solver import SolverConfig, discrepancy_select, solve_l1_tikhonov
from .source_sets import (
    HAAR_C,
    SourceCandidate,
    construct_bidiagonal_candidate,
    construct_haar_candidate,
    haar_candidate_for,
    verify_candidate,
)

__version__ = "0.1.0"
