"""Joint activity, delay and channel estimation for asynchronous grant-free access.

Group-LASSO formulation over shifted preambles, solved by cyclic block
coordinate descent with closed-form block updates, plus a penalty
continuation loop and a Monte Carlo harness.
"""
from .continuation import (
    ContinuationOptions,
    DetectionResult,
    check_group_constraint,
    read_out,
    solve_with_continuation,
    threshold_blocks,
)
from .dictionary import ExtendedDictionary, effective_preamble, matched_filter
from .metrics import AggregateScore, TrialScore, aggregate, score_trial
from .model import (
    GroundTruth,
    PreambleBook,
    SystemConfig,
    generate_ground_truth,
    generate_preambles,
    path_loss,
    realize,
    simulate_received_signal,
)
from .solver import SolverOptions, SolverState, bcd_solve, block_update, objective

__version__ = "0.1.0"
