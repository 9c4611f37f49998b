"""Seeded synthetic conversational collections for tests and demos."""

from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path

from .collection import (
    Conversation,
    JudgmentSet,
    SystemRun,
    Turn,
    format_qrels,
    format_run,
    map_teams,
    topics_to_json,
)

_WORDS = [
    "river", "garden", "engine", "violin", "planet", "coffee", "harbor", "glacier", "museum", "pepper",
    "falcon", "lantern", "meadow", "circuit", "ballet", "canyon", "orchard", "quartz", "saddle", "tundra",
    "walnut", "beacon", "cobalt", "dynamo", "ember", "fjord", "gazebo", "hazel", "igloo", "jasmine",
    "kernel", "lagoon", "marble", "nectar", "oasis", "parrot", "quiver", "raven", "sonnet", "thistle",
    "umber", "velvet", "willow", "yonder", "zephyr", "anchor", "bramble", "cactus", "dahlia", "easel",
]


@dataclass
class SyntheticCollection:
    runs: dict[str, SystemRun]
    qrels: JudgmentSet
    conversations: list[Conversation]
    passages: dict[str, str]
    team_map: dict[str, str]
    k_pool: int

    def write(self, directory: str | Path) -> dict[str, Path]:
        d = Path(directory)
        (d / "runs").mkdir(parents=True, exist_ok=True)
        for sid, run in self.runs.items():
            (d / "runs" / f"{sid}.run").write_text(format_run([run]), encoding="utf-8")
        (d / "qrels.txt").write_text(format_qrels(self.qrels), encoding="utf-8")
        (d / "topics.json").write_text(topics_to_json(self.conversations), encoding="utf-8")
        (d / "passages.tsv").write_text("".join(f"{k}\t{v}\n" for k, v in sorted(self.passages.items())), encoding="utf-8")
        (d / "teams.tsv").write_text("".join(f"{s}\t{t}\n" for s, t in sorted(self.team_map.items())), encoding="utf-8")
        return {
            "runs": d / "runs",
            "qrels": d / "qrels.txt",
            "topics": d / "topics.json",
            "passages": d / "passages.tsv",
            "team_map": d / "teams.tsv",
        }


def synthetic_collection(
    seed: int = 0,
    n_systems: int = 8,
    n_teams: int = 3,
    n_conversations: int = 10,
    depth: int = 5,
    n_passages: int = 200,
    candidates_per_query: int = 25,
    run_depth: int = 20,
    k_pool: int = 10,
) -> SyntheticCollection:
    """Build a small collection whose pool is the top-``k_pool`` of all runs.

    Systems of the same team share a noise profile, so teammates retrieve
    similar documents. Every pooled pair is judged.
    """
    rng = random.Random(seed)
    doc_ids = [f"d{i:04d}" for i in range(n_passages)]
    passages = {d: " ".join(rng.sample(_WORDS, 8)) for d in doc_ids}

    conversations, truth, resolved_by_qid = [], {}, {}
    for c in range(n_conversations):
        cid = f"c{c + 1:02d}"
        topic = rng.sample(_WORDS, 2)
        turns = []
        for t in range(1, depth + 1):
            focus = rng.sample(_WORDS, 2)
            resolved = " ".join(topic + focus)
            turns.append(Turn(t, f"what about {focus[0]}?", resolved, f"{resolved} explained in detail."))
            qid = f"{cid}_{t}"
            resolved_by_qid[qid] = resolved
            cands = rng.sample(doc_ids, candidates_per_query)
            # grades skew low, like real pools
            truth[qid] = {d: rng.choices(range(5), weights=(50, 20, 15, 10, 5))[0] for d in cands}
        conversations.append(Conversation(cid, tuple(turns), aux_text=f"persona of {cid}"))

    # a passage mentions g of its query's terms when graded g for it
    extra_words: dict[str, list[str]] = {d: [] for d in doc_ids}
    for qid, grades in truth.items():
        terms = resolved_by_qid[qid].split()
        for d, g in grades.items():
            extra_words[d].extend(rng.sample(terms, min(g, len(terms))))
    passages = {d: " ".join([passages[d]] + extra_words[d]) for d in doc_ids}

    systems = [f"sys{i + 1}" for i in range(n_systems)]
    team_map = {s: f"team{chr(ord('A') + i % n_teams)}" for i, s in enumerate(systems)}
    team_noise = {t: rng.uniform(0.5, 2.5) for t in sorted(set(team_map.values()))}
    runs = {}
    for s in systems:
        noise = team_noise[team_map[s]] + rng.uniform(0.0, 0.8)
        rankings, scores = {}, {}
        for qid, grades in truth.items():
            scored = sorted(((g + rng.gauss(0, noise), d) for d, g in grades.items()), reverse=True)
            extras = [d for d in rng.sample(doc_ids, 6) if d not in grades]
            docs = [d for _, d in scored]
            for e in extras:
                docs.insert(rng.randrange(len(docs) + 1), e)
            docs = docs[:run_depth]
            rankings[qid] = tuple(docs)
            scores[qid] = tuple(float(run_depth - i) for i in range(len(docs)))
        runs[s] = SystemRun(s, rankings, scores)

    pooled = {(q, d) for run in runs.values() for q, docs in run.rankings.items() for d in docs[:k_pool]}
    qrels = JudgmentSet({(q, d): truth[q].get(d, 0) for q, d in pooled})
    return SyntheticCollection(map_teams(runs, team_map), qrels, conversations, passages, team_map, k_pool)
