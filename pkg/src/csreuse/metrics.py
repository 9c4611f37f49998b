"""nDCG, system rankings, Kendall's tau-b, Cohen's kappa and rank distance."""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .collection import Pair, SystemRun
from .errors import EmptyInput, KeySetMismatch, SystemSetMismatch, UnknownSystem

TIE_POLICY = "score desc, system_id asc"


def gain(grade: int, kind: str = "linear") -> float:
    if kind == "linear":
        return float(grade)
    if kind == "exponential":
        return float(2**grade - 1)
    raise ValueError(f"unknown gain {kind!r}")


def _dcg(grades: Sequence[int], kind: str) -> float:
    return sum(gain(g, kind) / math.log2(i + 2) for i, g in enumerate(grades))


def ndcg_at_k(
    run: SystemRun,
    P: "Mapping[Pair, int]",
    k: int = 5,
    gain_kind: str = "linear",
    queries: Iterable[str] | None = None,
) -> tuple[dict[str, float], float]:
    """Per-query nDCG@k and its mean.

    Unjudged documents score grade 0. The mean runs over ``queries``, which
    defaults to every query judged in ``P``; a query the run does not answer
    scores 0 and a query whose ideal DCG is 0 also scores 0.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    by_query: dict[str, dict[str, int]] = {}
    if hasattr(P, "by_query"):
        by_query = P.by_query()
    else:
        for (q, d), g in P.items():
            by_query.setdefault(q, {})[d] = g
    qids = sorted(by_query) if queries is None else sorted(set(queries))
    per_query = {}
    for qid in qids:
        judged = by_query.get(qid, {})
        ideal = _dcg(sorted(judged.values(), reverse=True)[:k], gain_kind)
        if ideal == 0:
            per_query[qid] = 0.0
            continue
        top = run.rankings.get(qid, ())[:k]
        per_query[qid] = _dcg([judged.get(d, 0) for d in top], gain_kind) / ideal
    mean = sum(per_query[q] for q in qids) / len(qids) if qids else 0.0
    return per_query, mean


@dataclass(frozen=True)
class SystemRanking:
    entries: tuple[tuple[str, float], ...]
    metric_id: str = "ndcg@5"
    tie_policy: str = TIE_POLICY

    @classmethod
    def from_scores(cls, scores: Mapping[str, float], metric_id: str = "ndcg@5") -> SystemRanking:
        ordered = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
        return cls(tuple(ordered), metric_id)

    @property
    def systems(self) -> list[str]:
        return [s for s, _ in self.entries]

    def scores(self) -> dict[str, float]:
        return dict(self.entries)

    def position(self, system_id: str) -> int:
        for i, (s, _) in enumerate(self.entries, start=1):
            if s == system_id:
                return i
        raise UnknownSystem(system_id)

    def restricted(self, system_ids: Iterable[str]) -> SystemRanking:
        keep = set(system_ids)
        return SystemRanking(tuple(e for e in self.entries if e[0] in keep), self.metric_id, self.tie_policy)

    def __len__(self) -> int:
        return len(self.entries)


def rank_systems(
    runs: Mapping[str, SystemRun] | Iterable[SystemRun],
    P: Mapping[Pair, int],
    k: int = 5,
    gain_kind: str = "linear",
    queries: Iterable[str] | None = None,
) -> SystemRanking:
    """Rank systems by mean nDCG@k; ties go to the smaller system id."""
    run_list = list(runs.values()) if isinstance(runs, Mapping) else list(runs)
    if not run_list:
        raise EmptyInput("no runs to rank")
    if queries is not None:
        queries = sorted(set(queries))
    means = {run.system_id: ndcg_at_k(run, P, k, gain_kind, queries)[1] for run in run_list}
    return SystemRanking.from_scores(means, f"ndcg@{k}")


def _sign(x: float) -> int:
    return (x > 0) - (x < 0)


def kendall_tau(a: SystemRanking, b: SystemRanking) -> float:
    """Kendall's tau-b between the score orderings of two rankings.

    With fewer than two systems, or when both rankings tie every pair,
    the orderings are trivially identical and 1.0 is returned. If only one
    side ties every pair the coefficient is undefined and NaN is returned.
    """
    sa, sb = a.scores(), b.scores()
    if set(sa) != set(sb) or len(sa) != len(a) or len(sb) != len(b):
        raise SystemSetMismatch("rankings cover different systems")
    systems = sorted(sa)
    concordant = discordant = tied_a_only = tied_b_only = 0
    for i in range(len(systems)):
        for j in range(i + 1, len(systems)):
            da = _sign(sa[systems[i]] - sa[systems[j]])
            db = _sign(sb[systems[i]] - sb[systems[j]])
            if da == 0 and db == 0:
                continue
            if da == 0:
                tied_a_only += 1
            elif db == 0:
                tied_b_only += 1
            elif da == db:
                concordant += 1
            else:
                discordant += 1
    n_a = concordant + discordant + tied_b_only
    n_b = concordant + discordant + tied_a_only
    if n_a == 0 and n_b == 0:
        return 1.0
    if n_a == 0 or n_b == 0:
        return float("nan")
    return (concordant - discordant) / math.sqrt(n_a * n_b)


def rank_distance(system_id: str, a: SystemRanking, b: SystemRanking) -> int:
    return abs(a.position(system_id) - b.position(system_id))


def kendall_at_k_curve(reference: SystemRanking, candidate: SystemRanking, k_values: Iterable[int]) -> dict[int, float]:
    """Tau between both rankings restricted to the reference's top-K systems."""
    if set(reference.systems) != set(candidate.systems):
        raise SystemSetMismatch("rankings cover different systems")
    curve = {}
    for k in k_values:
        if not 1 <= k <= len(reference):
            raise ValueError(f"K={k} outside 1..{len(reference)}")
        top = reference.systems[:k]
        curve[k] = kendall_tau(reference.restricted(top), candidate.restricted(top))
    return curve


def cohen_kappa(
    a: Mapping[Pair, int], b: Mapping[Pair, int], mode: str = "binary", threshold: int = 2
) -> float:
    """Unweighted Cohen's kappa over the shared key set.

    ``binary`` collapses grades at ``threshold`` (>= is relevant); ``graded``
    keeps the five grades as categories.
    """
    if set(a) != set(b):
        raise KeySetMismatch(f"label maps differ on {len(set(a) ^ set(b))} keys")
    if not a:
        raise EmptyInput("no labels to compare")
    if mode == "binary":
        def cat(g):
            return int(g >= threshold)
    elif mode == "graded":
        def cat(g):
            return int(g)
    else:
        raise ValueError(f"unknown kappa mode {mode!r}")
    keys = sorted(a)
    n = len(keys)
    ca = [cat(a[k]) for k in keys]
    cb = [cat(b[k]) for k in keys]
    observed = sum(x == y for x, y in zip(ca, cb)) / n
    ma, mb = Counter(ca), Counter(cb)
    expected = sum(ma[c] * mb[c] for c in ma) / (n * n)
    if expected == 1.0:
        return 1.0
    return (observed - expected) / (1.0 - expected)


@dataclass(frozen=True)
class ComparisonReport:
    ranking_a: SystemRanking
    ranking_b: SystemRanking
    tau: float
    per_system_distance: dict[str, int]

    @property
    def n_systems(self) -> int:
        return len(self.ranking_a)

    @property
    def mean_distance(self) -> float:
        d = self.per_system_distance
        return sum(d.values()) / len(d) if d else 0.0


def compare_rankings(a: SystemRanking, b: SystemRanking) -> ComparisonReport:
    tau = kendall_tau(a, b)
    return ComparisonReport(a, b, tau, {s: rank_distance(s, a, b) for s in sorted(a.systems)})


def write_ranking_csv(ranking: SystemRanking, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        f.write(f"# metric={ranking.metric_id}; ties={ranking.tie_policy}\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["position", "system_id", "score"])
        for i, (sid, score) in enumerate(ranking.entries, start=1):
            w.writerow([i, sid, f"{score:.6f}"])


def write_comparison_csv(report: ComparisonReport, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        f.write(f"# metric={report.ranking_a.metric_id}; ties={report.ranking_a.tie_policy}; tau={report.tau:.6f}\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["system_id", "position_a", "score_a", "position_b", "score_b", "distance"])
        sa, sb = report.ranking_a.scores(), report.ranking_b.scores()
        for sid in report.ranking_a.systems:
            w.writerow([
                sid,
                report.ranking_a.position(sid),
                f"{sa[sid]:.6f}",
                report.ranking_b.position(sid),
                f"{sb[sid]:.6f}",
                report.per_system_distance[sid],
            ])
