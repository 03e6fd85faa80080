"""Friend-based targeting with leave-one-out HodgeRank scores."""

__version__ = "0.1.0"

from .hodge import HodgeResult, ScoreVector, SolverError, UndefinedCycleRatio, cycle_ratio, edge_residuals, hodge_rank, laplacian_divergence, solve_scores
from .mechanism import (
    LeaveOneOut,
    MechanismConfig,
    TargetingOutcome,
    audit_coalition,
    audit_unilateral,
    leave_one_out_scores,
    run_mechanism,
    target_quota,
    target_threshold,
)
from .ranking import (
    Comparison,
    RankingGraph,
    Report,
    SocialNetwork,
    ValidationError,
    build_ranking_graph,
    infer_network,
    pairwise_from_ranking,
)
