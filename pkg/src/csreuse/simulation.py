"""Leave-one-out experiments, pool comparisons, agreement and train/test splits."""

from __future__ import annotations

import csv
import logging
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .assessor.core import Assessor, FillResult, fill_holes
from .assessor.prompts import AssessmentRequest
from .collection import JudgmentSet, Pair, SystemRun
from .errors import EmptyIntersection, MissingDepth
from .metrics import (
    ComparisonReport,
    SystemRanking,
    cohen_kappa,
    compare_rankings,
    kendall_tau,
    rank_distance,
    rank_systems,
)
from .pooling import PoolConfig, groups_for, make_hole_pool, unjudged_at_k

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str
    pool_cfg: PoolConfig
    backend_id: str = "mock"
    metric_k: int = 5
    gain: str = "linear"
    depths: tuple[int, ...] | None = None
    rng_seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        if self.mode not in ("model", "team"):
            raise ValueError("mode must be 'model' or 'team'")


@dataclass
class GroupResult:
    group_id: str
    members: list[str]
    n_holes: int
    unjudged: dict[str, float]
    d_hole: dict[str, int]
    d_filled: dict[str, int]
    tau_hole: float
    tau_filled: float
    fill: FillResult
    P_hole: JudgmentSet = field(repr=False)

    @property
    def P_filled(self) -> JudgmentSet:
        return self.fill.judgments

    @property
    def filled_fraction(self) -> float:
        return self.fill.filled_fraction

    @property
    def partial(self) -> bool:
        return bool(self.fill.failed)

    @property
    def mean_d_hole(self) -> float:
        return sum(self.d_hole.values()) / len(self.d_hole)

    @property
    def mean_d_filled(self) -> float:
        return sum(self.d_filled.values()) / len(self.d_filled)


@dataclass
class DepthRow:
    depth: int
    n_queries: int
    tau_hole: float
    tau_filled: float
    d_hole: float
    d_filled: float


@dataclass
class LeaveOneOutResult:
    mode: str
    reference: SystemRanking
    groups: list[GroupResult]
    depth_rows: list[DepthRow] = field(default_factory=list)


def run_leave_one_out(
    runs: Mapping[str, SystemRun],
    P: JudgmentSet,
    assessor: Assessor,
    requests: Mapping[Pair, AssessmentRequest],
    cfg: ExperimentConfig,
    depths: Mapping[str, int] | None = None,
) -> LeaveOneOutResult:
    """Hold out each system (or team), excise its unique judgments, refill, re-rank.

    Every system is ranked by nDCG@k under P, P_hole and P_filled over the
    query universe of P; unjudged documents count as grade 0.
    """
    universe = P.queries()
    k, gain = cfg.metric_k, cfg.gain
    reference = rank_systems(runs, P, k, gain, universe)
    results = []
    for gid, members in groups_for(runs, cfg.mode).items():
        P_hole, holes = make_hole_pool(P, runs, members, cfg.pool_cfg)
        unjudged = {sid: unjudged_at_k(runs[sid], P_hole, cfg.pool_cfg)[1] for sid in members}
        fill = fill_holes(P_hole, holes, assessor.with_exemplar_pool(P_hole), requests, cfg.jobs)
        if fill.failed:
            log.warning("group %s: %d of %d holes could not be filled", gid, len(fill.failed), len(holes))
        rank_hole = rank_systems(runs, P_hole, k, gain, universe)
        rank_filled = rank_systems(runs, fill.judgments, k, gain, universe)
        results.append(
            GroupResult(
                group_id=gid,
                members=list(members),
                n_holes=len(holes),
                unjudged=unjudged,
                d_hole={s: rank_distance(s, reference, rank_hole) for s in members},
                d_filled={s: rank_distance(s, reference, rank_filled) for s in members},
                tau_hole=kendall_tau(reference, rank_hole),
                tau_filled=kendall_tau(reference, rank_filled),
                fill=fill,
                P_hole=P_hole,
            )
        )
    out = LeaveOneOutResult(cfg.mode, reference, results)
    if depths is not None:
        out.depth_rows = depth_sweep(runs, P, results, depths, k, gain, cfg.depths)
    return out


def depth_sweep(
    runs: Mapping[str, SystemRun],
    P: JudgmentSet,
    groups: Sequence[GroupResult],
    depths: Mapping[str, int],
    k: int = 5,
    gain: str = "linear",
    only: Iterable[int] | None = None,
) -> list[DepthRow]:
    """Tau and mean D per conversation depth, averaged over held-out groups.

    Rankings at depth d are computed from the queries of P at that depth only.
    """
    by_depth: dict[int, list[str]] = {}
    for qid in P.queries():
        if qid not in depths:
            raise MissingDepth(qid)
        by_depth.setdefault(depths[qid], []).append(qid)
    wanted = sorted(by_depth) if only is None else sorted(set(only) & set(by_depth))
    rows = []
    for d in wanted:
        queries = by_depth[d]
        reference = rank_systems(runs, P, k, gain, queries)
        taus_h, taus_f, ds_h, ds_f = [], [], [], []
        for g in groups:
            rh = rank_systems(runs, g.P_hole, k, gain, queries)
            rf = rank_systems(runs, g.P_filled, k, gain, queries)
            taus_h.append(kendall_tau(reference, rh))
            taus_f.append(kendall_tau(reference, rf))
            ds_h.append(sum(rank_distance(s, reference, rh) for s in g.members) / len(g.members))
            ds_f.append(sum(rank_distance(s, reference, rf) for s in g.members) / len(g.members))
        n = len(groups)
        rows.append(
            DepthRow(
                d,
                len(queries),
                math.fsum(taus_h) / n if n else float("nan"),
                math.fsum(taus_f) / n if n else float("nan"),
                math.fsum(ds_h) / n if n else float("nan"),
                math.fsum(ds_f) / n if n else float("nan"),
            )
        )
    return rows


def compare_pools(
    runs: Mapping[str, SystemRun], P_a: JudgmentSet, P_b: JudgmentSet, k: int = 5, gain: str = "linear"
) -> ComparisonReport:
    """Rank systems under both pools (over their joint query set) and compare."""
    universe = sorted(set(P_a.queries()) | set(P_b.queries()))
    return compare_rankings(rank_systems(runs, P_a, k, gain, universe), rank_systems(runs, P_b, k, gain, universe))


@dataclass(frozen=True)
class AgreementReport:
    kappa_binary: float
    kappa_graded: float
    n_shared: int
    n_only_a: int
    n_only_b: int


def agreement_report(P_human: Mapping[Pair, int], P_auto: Mapping[Pair, int], threshold: int = 2) -> AgreementReport:
    shared = set(P_human) & set(P_auto)
    if not shared:
        raise EmptyIntersection("label sets share no (query_id, doc_id) pairs")
    only_a = len(set(P_human) - shared)
    only_b = len(set(P_auto) - shared)
    if only_a or only_b:
        log.warning("agreement restricted to %d shared pairs (%d/%d unmatched)", len(shared), only_a, only_b)
    a = {key: P_human[key] for key in shared}
    b = {key: P_auto[key] for key in shared}
    return AgreementReport(
        cohen_kappa(a, b, "binary", threshold), cohen_kappa(a, b, "graded"), len(shared), only_a, only_b
    )


# --- splits -------------------------------------------------------------------


@dataclass(frozen=True)
class SplitSpec:
    ratios: tuple[float, float, float] = (0.70, 0.15, 0.15)
    relevant_threshold: int = 2
    rng_seed: int = 0

    def __post_init__(self):
        if len(self.ratios) != 3 or any(r < 0 for r in self.ratios):
            raise ValueError("ratios must be three non-negative numbers")
        if sum(Fraction(str(r)) for r in self.ratios) != 1:
            raise ValueError("split ratios must sum to 1")
        if not 0 <= self.relevant_threshold <= 4:
            raise ValueError("relevant_threshold must be in 0..4")


@dataclass
class SplitResult:
    train: JudgmentSet
    test: JudgmentSet
    validation: JudgmentSet
    balanced: JudgmentSet
    unbalanceable: list[str]


def apportion(n: int, ratios: Sequence[float], rng: random.Random) -> list[int]:
    """Largest-remainder apportionment of ``n`` items; ties broken by ``rng``."""
    quotas = [Fraction(str(r)) * n for r in ratios]
    counts = [math.floor(q) for q in quotas]
    order = sorted(range(len(ratios)), key=lambda i: (-(quotas[i] - counts[i]), rng.random()))
    for i in order[: n - sum(counts)]:
        counts[i] += 1
    return counts


def make_split(P: JudgmentSet, spec: SplitSpec) -> SplitResult:
    """Balance relevant/irrelevant per query, then split each query 70/15/15.

    Balancing randomly drops irrelevant judgments until they number no more
    than the relevant ones. Each query's relevant and irrelevant documents are
    then apportioned separately, so every query keeps at least one of each in
    train. Queries lacking either class are skipped and listed.
    """
    parts: list[dict[Pair, int]] = [{}, {}, {}]
    balanced: dict[Pair, int] = {}
    unbalanceable = []
    for qid in P.queries():
        grades = P.grades_for(qid)
        rng = random.Random(f"split:{spec.rng_seed}:{qid}")
        rel = sorted(d for d, g in grades.items() if g >= spec.relevant_threshold)
        irr = sorted(d for d, g in grades.items() if g < spec.relevant_threshold)
        if not rel or not irr:
            unbalanceable.append(qid)
            continue
        if len(irr) > len(rel):
            irr = sorted(rng.sample(irr, len(rel)))
        for docs in (rel, irr):
            docs = list(docs)
            rng.shuffle(docs)
            counts = apportion(len(docs), spec.ratios, rng)
            if counts[0] == 0:
                donor = max((1, 2), key=lambda i: counts[i])
                counts[donor] -= 1
                counts[0] += 1
            start = 0
            for part, c in zip(parts, counts):
                for d in docs[start : start + c]:
                    part[(qid, d)] = grades[d]
                    balanced[(qid, d)] = grades[d]
                start += c
    return SplitResult(JudgmentSet(parts[0]), JudgmentSet(parts[1]), JudgmentSet(parts[2]), JudgmentSet(balanced), unbalanceable)


# --- report writers -----------------------------------------------------------


def _f(x: float) -> str:
    return "nan" if math.isnan(x) else f"{x:.6f}"


def write_system_csv(result: LeaveOneOutResult, path: str | Path) -> None:
    """One row per held-out system: Unjudged@k against P_hole vs rank distance."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["group", "system_id", "unjudged_at_k", "d_hole", "d_filled"])
        for g in result.groups:
            for sid in g.members:
                w.writerow([g.group_id, sid, _f(g.unjudged[sid]), g.d_hole[sid], g.d_filled[sid]])


def write_group_csv(result: LeaveOneOutResult, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["group", "n_systems", "n_holes", "tau_hole", "tau_filled", "mean_d_hole", "mean_d_filled", "filled_fraction", "failed"])
        for g in result.groups:
            w.writerow([
                g.group_id, len(g.members), g.n_holes, _f(g.tau_hole), _f(g.tau_filled),
                _f(g.mean_d_hole), _f(g.mean_d_filled), _f(g.filled_fraction), len(g.fill.failed),
            ])


def write_depth_rows(rows: Sequence[DepthRow], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["depth", "n_queries", "tau_hole", "tau_filled", "mean_d_hole", "mean_d_filled"])
        for r in rows:
            w.writerow([r.depth, r.n_queries, _f(r.tau_hole), _f(r.tau_filled), _f(r.d_hole), _f(r.d_filled)])


def write_curve_csv(curve: Mapping[int, float], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["K", "tau"])
        for k in sorted(curve):
            w.writerow([k, _f(curve[k])])
