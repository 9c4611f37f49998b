"""Top-k pooling, uniquely contributed documents and judgment-hole statistics."""

from __future__ import annotations

import csv
import statistics
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .collection import MAX_GRADE, JudgmentSet, Pair, SystemRun
from .errors import MissingDepth, UnknownSystem


@dataclass(frozen=True)
class PoolConfig:
    """Pooling depth, evaluation depth for Unjudged@k and the relevance cut.

    ``k_pool`` has no campaign default on purpose; pass it explicitly.
    """

    k_pool: int
    k_eval: int = 10
    relevant_threshold: int = 2

    def __post_init__(self):
        if self.k_pool < 1 or self.k_eval < 1:
            raise ValueError("k_pool and k_eval must be >= 1")
        if not 0 <= self.relevant_threshold <= MAX_GRADE:
            raise ValueError("relevant_threshold must be in 0..4")


@dataclass(frozen=True)
class HoleSet:
    removed: frozenset[Pair]
    base_size: int

    def __len__(self) -> int:
        return len(self.removed)


@dataclass(frozen=True)
class DepthStats:
    mean_phi: float
    sd_phi: float
    mean_phi_plus: float
    sd_phi_plus: float
    n: int


@dataclass
class HoleReport:
    group_id: str
    per_query: dict[str, tuple[int, int]]  # query_id -> (phi, phi_plus)
    depths: dict[str, int]
    per_depth: dict[int, DepthStats] = field(default_factory=dict)

    @property
    def mean_phi(self) -> float:
        return statistics.fmean(p for p, _ in self.per_query.values()) if self.per_query else 0.0


def _pairs_top_k(run: SystemRun, k: int) -> set[Pair]:
    return {(qid, doc) for qid, docs in run.rankings.items() for doc in docs[:k]}


def build_pool(runs: Iterable[SystemRun], cfg: PoolConfig) -> set[Pair]:
    pool: set[Pair] = set()
    for run in runs:
        pool |= _pairs_top_k(run, cfg.k_pool)
    return pool


def _check_group(runs: Mapping[str, SystemRun], group: Iterable[str]) -> frozenset[str]:
    group = frozenset(group)
    for sid in group:
        if sid not in runs:
            raise UnknownSystem(sid)
    return group


def unique_contributions(runs: Mapping[str, SystemRun], group: Iterable[str], cfg: PoolConfig) -> set[Pair]:
    """Top-k pairs retrieved by some member of ``group`` and by no other system."""
    group = _check_group(runs, group)
    inside = build_pool((runs[s] for s in group), cfg)
    outside = build_pool((r for s, r in runs.items() if s not in group), cfg)
    return inside - outside


def make_hole_pool(
    P: JudgmentSet, runs: Mapping[str, SystemRun], group: Iterable[str], cfg: PoolConfig
) -> tuple[JudgmentSet, HoleSet]:
    unique = unique_contributions(runs, group, cfg)
    removed = frozenset(k for k in unique if k in P)
    return P.without(removed), HoleSet(removed, len(P))


def _stats(values: list[float]) -> tuple[float, float]:
    if not values:
        return 0.0, 0.0
    return statistics.fmean(values), statistics.pstdev(values)


def _aggregate_depths(per_query: Mapping[str, tuple[float, float]], depths: Mapping[str, int]) -> dict[int, DepthStats]:
    buckets: dict[int, list[tuple[float, float]]] = defaultdict(list)
    for qid in sorted(per_query):
        buckets[depths[qid]].append(per_query[qid])
    out = {}
    for depth in sorted(buckets):
        phis = [p for p, _ in buckets[depth]]
        plus = [p for _, p in buckets[depth]]
        m, s = _stats(phis)
        mp, sp = _stats(plus)
        out[depth] = DepthStats(m, s, mp, sp, len(phis))
    return out


def query_universe(runs: Mapping[str, SystemRun]) -> list[str]:
    return sorted({qid for run in runs.values() for qid in run.rankings})


def hole_report(
    P: JudgmentSet,
    runs: Mapping[str, SystemRun],
    group: Iterable[str],
    cfg: PoolConfig,
    depths: Mapping[str, int],
    group_id: str | None = None,
) -> HoleReport:
    """Per-query phi / phi+ for one held-out group, aggregated by depth.

    phi counts every uniquely contributed top-k pair, judged or not; phi+
    counts those a human graded at or above the relevance threshold.
    """
    group = _check_group(runs, group)
    queries = query_universe(runs)
    for qid in queries:
        if qid not in depths:
            raise MissingDepth(qid)
    unique = unique_contributions(runs, group, cfg)
    per_query = {qid: [0, 0] for qid in queries}
    for qid, doc in unique:
        per_query[qid][0] += 1
        grade = P.get((qid, doc))
        if grade is not None and grade >= cfg.relevant_threshold:
            per_query[qid][1] += 1
    per_query_t = {q: (v[0], v[1]) for q, v in per_query.items()}
    gid = group_id if group_id is not None else "+".join(sorted(group))
    return HoleReport(gid, per_query_t, {q: depths[q] for q in queries}, _aggregate_depths(per_query_t, depths))


def groups_for(runs: Mapping[str, SystemRun], mode: str) -> dict[str, list[str]]:
    """Held-out groups: one per system (``model``) or one per team (``team``)."""
    if mode == "model":
        return {sid: [sid] for sid in sorted(runs)}
    if mode == "team":
        groups: dict[str, list[str]] = defaultdict(list)
        for sid in sorted(runs):
            team = runs[sid].team_id
            if not team:
                raise ValueError(f"system {sid!r} has no team; call map_teams first")
            groups[team].append(sid)
        return dict(sorted(groups.items()))
    raise ValueError(f"unknown mode {mode!r}")


def hole_sweep(
    P: JudgmentSet, runs: Mapping[str, SystemRun], mode: str, cfg: PoolConfig, depths: Mapping[str, int]
) -> list[HoleReport]:
    return [hole_report(P, runs, members, cfg, depths, gid) for gid, members in groups_for(runs, mode).items()]


def aggregate_sweep(reports: list[HoleReport]) -> dict[int, DepthStats]:
    """Average each query's phi / phi+ across groups, then mean and sd per depth."""
    if not reports:
        return {}
    depths: dict[str, int] = {}
    sums: dict[str, list[float]] = defaultdict(lambda: [0.0, 0.0])
    counts: dict[str, int] = defaultdict(int)
    for rep in reports:
        depths.update(rep.depths)
        for qid, (phi, plus) in rep.per_query.items():
            sums[qid][0] += phi
            sums[qid][1] += plus
            counts[qid] += 1
    averaged = {q: (sums[q][0] / counts[q], sums[q][1] / counts[q]) for q in sums}
    return _aggregate_depths(averaged, depths)


def overall_mean_phi(reports: list[HoleReport]) -> float:
    values = [phi for rep in reports for phi, _ in rep.per_query.values()]
    return statistics.fmean(values) if values else 0.0


def unjudged_at_k(run: SystemRun, P: Mapping[Pair, int], cfg: PoolConfig) -> tuple[dict[str, float], float]:
    """Fraction of each query's top-k_eval documents with no judgment in ``P``."""
    per_query = {}
    for qid in sorted(run.rankings):
        top = run.rankings[qid][: cfg.k_eval]
        if not top:
            continue
        per_query[qid] = sum(1 for d in top if (qid, d) not in P) / len(top)
    mean = statistics.fmean(per_query.values()) if per_query else 0.0
    return per_query, mean


def write_hole_csv(reports: list[HoleReport], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["group", "query_id", "depth", "phi", "phi_plus"])
        for rep in reports:
            for qid in sorted(rep.per_query):
                phi, plus = rep.per_query[qid]
                w.writerow([rep.group_id, qid, rep.depths[qid], phi, plus])


def write_depth_csv(per_depth: Mapping[int, DepthStats], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["depth", "mean_phi", "sd_phi", "mean_phi_plus", "sd_phi_plus"])
        for depth in sorted(per_depth):
            s = per_depth[depth]
            w.writerow([depth, f"{s.mean_phi:.6f}", f"{s.sd_phi:.6f}", f"{s.mean_phi_plus:.6f}", f"{s.sd_phi_plus:.6f}"])
