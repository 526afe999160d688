"""Two-stage group testing: pool designs, closure decoding, simulation and bounds."""

from ._validation import CapacityError, NumericalError
from .bounds import (
    BoundReport,
    b_k_estimate,
    entropy_bound,
    expected_unresolved_random,
    greedy_dual_bound,
    lower_threshold_pools,
    poisson_upper,
    recommend_design,
    tail_lower_bound,
    threshold_table,
    two_stage_lower,
)
from .combinatorics import PositiveModel, falling_factorial, log_binomial, s_of_i
from .decode import ScreenOutcome, candidate_positives, positive_pools, screen
from .design import PoolDesign, design_stats, generate_bernoulli_design, singleton_design
from .estimator import ClosureScreen
from .lp import (
    DualCertificate,
    LinearProgram,
    brute_force_min_design,
    build_dual,
    build_primal,
    check_certificate,
    greedy_dual_certificate,
    solve_small,
)
from .simulate import (
    CampaignStats,
    Estimate,
    bisection_baseline,
    estimate_expected_unresolved,
    expected_unresolved_exact,
    run_campaign,
    sample_positives,
)

__version__ = "0.1.0"
