"""Brute-force reference implementations used only by the tests.

Nothing here imports csreuse code paths being checked; each function is a
direct transcription of the definition, written for clarity over speed.
"""

from __future__ import annotations

import itertools
import math
import random


def dcg_bruteforce(grades, k, gain="linear"):
    total = 0.0
    for position in range(1, k + 1):
        if position > len(grades):
            break
        g = grades[position - 1]
        value = g if gain == "linear" else 2**g - 1
        total += value / math.log(position + 1, 2)
    return total


def ndcg_bruteforce(ranking, judged, k, gain="linear"):
    """ranking: list of doc ids; judged: {doc: grade}."""
    ideal_grades = sorted(judged.values(), reverse=True)
    ideal = dcg_bruteforce(ideal_grades, k, gain)
    if ideal == 0:
        return 0.0
    actual = dcg_bruteforce([judged.get(d, 0) for d in ranking], k, gain)
    return actual / ideal


def mean_ndcg_bruteforce(ranking_by_query, qrels_by_query, k, gain="linear", queries=None):
    qs = sorted(qrels_by_query) if queries is None else sorted(queries)
    vals = [ndcg_bruteforce(list(ranking_by_query.get(q, [])), qrels_by_query.get(q, {}), k, gain) for q in qs]
    return sum(vals) / len(vals) if vals else 0.0


def tau_b_bruteforce(xs: dict, ys: dict) -> float:
    """Kendall tau-b from the textbook n0/n1/n2 counts."""
    keys = sorted(xs)
    n = len(keys)
    n0 = n * (n - 1) // 2
    ties_x = sum(1 for a, b in itertools.combinations(keys, 2) if xs[a] == xs[b])
    ties_y = sum(1 for a, b in itertools.combinations(keys, 2) if ys[a] == ys[b])
    s = 0
    for a, b in itertools.combinations(keys, 2):
        dx = xs[a] - xs[b]
        dy = ys[a] - ys[b]
        if dx * dy > 0:
            s += 1
        elif dx * dy < 0:
            s -= 1
    denom = math.sqrt((n0 - ties_x) * (n0 - ties_y))
    return s / denom


def kappa_bruteforce(a: list, b: list) -> float:
    """Cohen's kappa from an explicit confusion matrix."""
    cats = sorted(set(a) | set(b))
    n = len(a)
    matrix = {(x, y): 0 for x in cats for y in cats}
    for x, y in zip(a, b):
        matrix[(x, y)] += 1
    po = sum(matrix[(c, c)] for c in cats) / n
    row = {c: sum(matrix[(c, y)] for y in cats) / n for c in cats}
    col = {c: sum(matrix[(x, c)] for x in cats) / n for c in cats}
    pe = sum(row[c] * col[c] for c in cats)
    if pe == 1:
        return 1.0
    return (po - pe) / (1 - pe)


def positions_by_sort(scores: dict) -> dict:
    """1-based positions: score descending, system id ascending on ties."""
    ordered = sorted(scores, key=lambda s: (-scores[s], s))
    return {s: i + 1 for i, s in enumerate(ordered)}


def unique_pairs_bruteforce(rankings_by_system: dict, group: set, k: int) -> set:
    """Scan every (system, query, doc) triple explicitly."""
    result = set()
    for sid in group:
        for qid, docs in rankings_by_system[sid].items():
            for doc in docs[:k]:
                found_elsewhere = False
                for other, other_rankings in rankings_by_system.items():
                    if other in group:
                        continue
                    if doc in list(other_rankings.get(qid, []))[:k]:
                        found_elsewhere = True
                if not found_elsewhere:
                    result.add((qid, doc))
    return result


def unjudged_bruteforce(rankings: dict, judged_keys: set, k: int) -> dict:
    out = {}
    for qid, docs in rankings.items():
        top = list(docs)[:k]
        if top:
            missing = 0
            for d in top:
                if (qid, d) not in judged_keys:
                    missing += 1
            out[qid] = missing / len(top)
    return out


def mock_grade_bruteforce(utterance: str, passage: str) -> int:
    def toks(text):
        out, cur = set(), ""
        for ch in text.lower():
            if ("a" <= ch <= "z") or ("0" <= ch <= "9"):
                cur += ch
            else:
                if cur:
                    out.add(cur)
                cur = ""
        if cur:
            out.add(cur)
        return out

    u = toks(utterance)
    if not u:
        return 0
    r = len(u & toks(passage)) / len(u)
    return max(0, min(4, math.floor(5 * r + 1e-12)))


def replay_two_shot(pool: dict, passages: dict, query_id: str, doc_id: str, seed: int, threshold: int = 2):
    """Replay of the documented two-shot sampler from its description."""
    rng = random.Random(f"two-shot:{seed}:{query_id}:{doc_id}")
    chosen = []
    for want_relevant in (True, False):
        def ok(key):
            return key != (query_id, doc_id) and key[1] in passages and (pool[key] >= threshold) == want_relevant

        local = [k for k in sorted(pool) if k[0] == query_id and ok(k)]
        options = local or [k for k in sorted(pool) if ok(k)]
        chosen.append(options[rng.randrange(len(options))])
    return tuple(chosen)
