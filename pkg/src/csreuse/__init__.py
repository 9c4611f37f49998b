"""Measure and repair the reusability of conversational-search test collections."""

__version__ = "0.1.0"

from .collection import (
    Conversation,
    JudgmentSet,
    RunRecord,
    SystemRun,
    Turn,
    extract_depth,
    map_teams,
    parse_qrels,
    parse_run,
    parse_topics,
)
from .metrics import SystemRanking, cohen_kappa, kendall_tau, ndcg_at_k, rank_distance, rank_systems
from .pooling import HoleSet, PoolConfig, build_pool, hole_report, make_hole_pool, unique_contributions, unjudged_at_k

__all__ = [
    "Conversation",
    "HoleSet",
    "JudgmentSet",
    "PoolConfig",
    "RunRecord",
    "SystemRanking",
    "SystemRun",
    "Turn",
    "build_pool",
    "cohen_kappa",
    "extract_depth",
    "hole_report",
    "kendall_tau",
    "make_hole_pool",
    "map_teams",
    "ndcg_at_k",
    "parse_qrels",
    "parse_run",
    "parse_topics",
    "rank_distance",
    "rank_systems",
    "unique_contributions",
    "unjudged_at_k",
]
