"""Readers and writers for runs, qrels, topics, team maps and passages.

Run lines are ``query_id Q0 doc_id rank score run_tag`` and qrels lines are
``query_id 0 doc_id grade``. The second column of both is ignored.
"""

from __future__ import annotations

import json
import re
from collections import defaultdict
from dataclasses import dataclass, field, replace
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping

from .errors import (
    DuplicateDoc,
    DuplicatePair,
    DuplicateRank,
    GradeOutOfRange,
    MalformedLine,
    MissingField,
    NoMatch,
    NonContiguousTurns,
    UnmappedSystem,
)

MIN_GRADE = 0
MAX_GRADE = 4
HUMAN = "human"

DEFAULT_DEPTH_PATTERN = r"[_-](?P<depth>\d+)$"

Pair = tuple[str, str]


@dataclass(frozen=True)
class RunRecord:
    query_id: str
    doc_id: str
    rank: int
    score: float
    run_tag: str


@dataclass(frozen=True)
class SystemRun:
    """One system's ranked lists. ``team_id`` is empty until :func:`map_teams`."""

    system_id: str
    rankings: Mapping[str, tuple[str, ...]]
    scores: Mapping[str, tuple[float, ...]] = field(default_factory=dict)
    team_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "rankings", MappingProxyType(dict(self.rankings)))
        object.__setattr__(self, "scores", MappingProxyType(dict(self.scores)))

    def top(self, query_id: str, k: int) -> tuple[str, ...]:
        return self.rankings.get(query_id, ())[:k]

    def records(self) -> Iterator[RunRecord]:
        for qid in sorted(self.rankings):
            docs = self.rankings[qid]
            scores = self.scores.get(qid) or tuple(float(len(docs) - i) for i in range(len(docs)))
            for i, (doc, score) in enumerate(zip(docs, scores), start=1):
                yield RunRecord(qid, doc, i, score, self.system_id)


class JudgmentSet(Mapping[Pair, int]):
    """Immutable map from ``(query_id, doc_id)`` to a 0..4 grade, with provenance.

    Provenance is ``"human"`` or ``"assessor:<backend-id>"`` per pair.
    """

    __slots__ = ("_labels", "_provenance", "_by_query")

    def __init__(self, labels: Mapping[Pair, int], provenance: Mapping[Pair, str] | str = HUMAN):
        checked: dict[Pair, int] = {}
        for key, grade in labels.items():
            grade = int(grade)
            if not MIN_GRADE <= grade <= MAX_GRADE:
                raise GradeOutOfRange(grade)
            checked[key] = grade
        self._labels = checked
        if isinstance(provenance, str):
            self._provenance = {key: provenance for key in checked}
        else:
            self._provenance = {key: provenance.get(key, HUMAN) for key in checked}
        self._by_query: dict[str, dict[str, int]] | None = None

    def __getitem__(self, key: Pair) -> int:
        return self._labels[key]

    def __iter__(self) -> Iterator[Pair]:
        return iter(self._labels)

    def __len__(self) -> int:
        return len(self._labels)

    def __repr__(self) -> str:
        return f"JudgmentSet({len(self)} labels, {len(self.queries())} queries)"

    def __eq__(self, other):
        if isinstance(other, JudgmentSet):
            return self._labels == other._labels and self._provenance == other._provenance
        return NotImplemented

    __hash__ = None

    @property
    def labels(self) -> Mapping[Pair, int]:
        return MappingProxyType(self._labels)

    @property
    def provenance(self) -> Mapping[Pair, str]:
        return MappingProxyType(self._provenance)

    def by_query(self) -> Mapping[str, Mapping[str, int]]:
        if self._by_query is None:
            grouped: dict[str, dict[str, int]] = defaultdict(dict)
            for (qid, doc), grade in self._labels.items():
                grouped[qid][doc] = grade
            self._by_query = dict(grouped)
        return self._by_query

    def queries(self) -> list[str]:
        return sorted(self.by_query())

    def grades_for(self, query_id: str) -> Mapping[str, int]:
        return self.by_query().get(query_id, {})

    def restrict(self, keys: Iterable[Pair]) -> JudgmentSet:
        keep = set(keys)
        return JudgmentSet(
            {k: g for k, g in self._labels.items() if k in keep},
            {k: p for k, p in self._provenance.items() if k in keep},
        )

    def restrict_queries(self, query_ids: Iterable[str]) -> JudgmentSet:
        keep = set(query_ids)
        return self.restrict(k for k in self._labels if k[0] in keep)

    def without(self, keys: Iterable[Pair]) -> JudgmentSet:
        drop = set(keys)
        return self.restrict(k for k in self._labels if k not in drop)

    def merged(self, other: JudgmentSet) -> JudgmentSet:
        """Union of both sets; on overlapping keys ``self`` wins."""
        labels = dict(other._labels)
        labels.update(self._labels)
        prov = dict(other._provenance)
        prov.update(self._provenance)
        return JudgmentSet(labels, prov)

    def binarized(self, threshold: int) -> JudgmentSet:
        return JudgmentSet(
            {k: (1 if g >= threshold else 0) for k, g in self._labels.items()}, self._provenance
        )

    def is_human(self) -> bool:
        return all(p == HUMAN for p in self._provenance.values())


# --- runs ---------------------------------------------------------------------


def _content_lines(text: str) -> Iterator[tuple[int, list[str]]]:
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        yield line_no, stripped.split()


def parse_run(text: str) -> dict[str, SystemRun]:
    """Parse run text into SystemRuns keyed by run tag (team ids unset)."""
    by_tag: dict[str, dict[str, dict[int, tuple[str, float]]]] = defaultdict(lambda: defaultdict(dict))
    seen: set[tuple[str, str, str]] = set()
    for line_no, fields in _content_lines(text):
        if len(fields) != 6:
            raise MalformedLine(line_no, f"expected 6 fields, got {len(fields)}")
        qid, _, doc, rank_s, score_s, tag = fields
        try:
            rank = int(rank_s)
            score = float(score_s)
        except ValueError:
            raise MalformedLine(line_no, "rank must be an integer and score a number") from None
        if rank < 1:
            raise MalformedLine(line_no, f"rank {rank} is not positive")
        if (tag, qid, doc) in seen:
            raise DuplicateDoc(qid, doc, tag)
        seen.add((tag, qid, doc))
        ranked = by_tag[tag][qid]
        if rank in ranked:
            raise DuplicateRank(qid, rank, tag)
        ranked[rank] = (doc, score)

    runs = {}
    for tag, queries in by_tag.items():
        rankings, scores = {}, {}
        for qid, ranked in queries.items():
            ordered = [ranked[r] for r in sorted(ranked)]
            rankings[qid] = tuple(d for d, _ in ordered)
            scores[qid] = tuple(s for _, s in ordered)
        runs[tag] = SystemRun(tag, rankings, scores)
    return dict(sorted(runs.items()))


def read_runs(path: str | Path) -> dict[str, SystemRun]:
    """Read one run file, or every regular file in a directory."""
    path = Path(path)
    files = sorted(p for p in path.iterdir() if p.is_file() and not p.name.startswith(".")) if path.is_dir() else [path]
    runs: dict[str, SystemRun] = {}
    for f in files:
        for tag, run in parse_run(f.read_text(encoding="utf-8")).items():
            if tag in runs:
                raise MalformedLine(0, f"run tag {tag!r} appears in more than one file ({f})")
            runs[tag] = run
    return dict(sorted(runs.items()))


def format_run(runs: Iterable[SystemRun]) -> str:
    lines = []
    for run in runs:
        for rec in run.records():
            lines.append(f"{rec.query_id} Q0 {rec.doc_id} {rec.rank} {rec.score:.6f} {rec.run_tag}")
    return "\n".join(lines) + ("\n" if lines else "")


def write_run(runs: Iterable[SystemRun], path: str | Path) -> None:
    Path(path).write_text(format_run(runs), encoding="utf-8")


# --- qrels --------------------------------------------------------------------


def parse_qrels(text: str) -> JudgmentSet:
    labels: dict[Pair, int] = {}
    for line_no, fields in _content_lines(text):
        if len(fields) != 4:
            raise MalformedLine(line_no, f"expected 4 fields, got {len(fields)}")
        qid, _, doc, grade_s = fields
        try:
            grade = int(grade_s)
        except ValueError:
            raise MalformedLine(line_no, f"grade {grade_s!r} is not an integer") from None
        if not MIN_GRADE <= grade <= MAX_GRADE:
            raise GradeOutOfRange(grade, line_no)
        key = (qid, doc)
        if key in labels and labels[key] != grade:
            raise DuplicatePair(qid, doc, labels[key], grade)
        labels[key] = grade
    return JudgmentSet(labels)


def read_qrels(path: str | Path) -> JudgmentSet:
    return parse_qrels(Path(path).read_text(encoding="utf-8"))


def format_qrels(judgments: Mapping[Pair, int]) -> str:
    """Canonical qrels text: sorted by (query_id, doc_id), byte-stable."""
    return "".join(f"{q} 0 {d} {judgments[(q, d)]}\n" for q, d in sorted(judgments))


def write_qrels(judgments: Mapping[Pair, int], path: str | Path) -> None:
    Path(path).write_text(format_qrels(judgments), encoding="utf-8")


# --- topics -------------------------------------------------------------------


@dataclass(frozen=True)
class Turn:
    turn_index: int
    utterance: str
    resolved_utterance: str
    response: str


@dataclass(frozen=True)
class Conversation:
    conversation_id: str
    turns: tuple[Turn, ...]
    aux_text: str | None = None

    def turn(self, index: int) -> Turn:
        return self.turns[index - 1]

    def context(self, index: int) -> list[tuple[str, str]]:
        """``(utterance, response)`` pairs of every turn before ``index``."""
        return [(t.utterance, t.response) for t in self.turns[: index - 1]]


def _require(obj: Mapping, key: str, path: str, conv_id: str | None):
    if not isinstance(obj, Mapping) or key not in obj or obj[key] is None:
        raise MissingField(path, conv_id)
    return obj[key]


def parse_topics(doc: str | list) -> list[Conversation]:
    """Parse the canonical topic document (a JSON list of conversations).

    Each conversation is ``{"conversation_id", "aux_text"?, "turns": [...]}``
    and each turn carries ``turn_index``, ``utterance``, ``resolved_utterance``
    and ``response``. Turns are sorted by index and must run 1..n.
    """
    data = json.loads(doc) if isinstance(doc, str) else doc
    if isinstance(data, Mapping) and "conversations" in data:
        data = data["conversations"]
    if not isinstance(data, list):
        raise MissingField("conversations")
    conversations = []
    for ci, raw in enumerate(data):
        conv_id = str(_require(raw, "conversation_id", f"[{ci}].conversation_id", None))
        raw_turns = _require(raw, "turns", "turns", conv_id)
        turns = []
        for ti, rt in enumerate(raw_turns):
            idx = _require(rt, "turn_index", f"turns[{ti}].turn_index", conv_id)
            utterance = _require(rt, "utterance", f"turns[{ti}].utterance", conv_id)
            resolved = _require(rt, "resolved_utterance", f"turns[{ti}].resolved_utterance", conv_id)
            if not str(resolved).strip():
                raise MissingField(f"turns[{ti}].resolved_utterance", conv_id)
            response = _require(rt, "response", f"turns[{ti}].response", conv_id)
            turns.append(Turn(int(idx), str(utterance), str(resolved), str(response)))
        turns.sort(key=lambda t: t.turn_index)
        if [t.turn_index for t in turns] != list(range(1, len(turns) + 1)):
            raise NonContiguousTurns(conv_id)
        aux = raw.get("aux_text")
        conversations.append(Conversation(conv_id, tuple(turns), None if aux is None else str(aux)))
    return conversations


def read_topics(path: str | Path) -> list[Conversation]:
    return parse_topics(Path(path).read_text(encoding="utf-8"))


def topics_to_json(conversations: Iterable[Conversation]) -> str:
    out = []
    for conv in conversations:
        item: dict = {"conversation_id": conv.conversation_id}
        if conv.aux_text is not None:
            item["aux_text"] = conv.aux_text
        item["turns"] = [
            {
                "turn_index": t.turn_index,
                "utterance": t.utterance,
                "resolved_utterance": t.resolved_utterance,
                "response": t.response,
            }
            for t in conv.turns
        ]
        out.append(item)
    return json.dumps(out, indent=2, ensure_ascii=False) + "\n"


def index_turns(
    conversations: Iterable[Conversation], query_id_format: str = "{conversation_id}_{turn_index}"
) -> dict[str, tuple[Conversation, Turn]]:
    """Map query ids (built from ``query_id_format``) to their conversation turn."""
    index = {}
    for conv in conversations:
        for turn in conv.turns:
            qid = query_id_format.format(conversation_id=conv.conversation_id, turn_index=turn.turn_index)
            index[qid] = (conv, turn)
    return index


# --- depth, teams, passages ---------------------------------------------------


def extract_depth(query_id: str, pattern: str | re.Pattern = DEFAULT_DEPTH_PATTERN) -> int:
    """Conversation depth of ``query_id`` from the ``depth`` capture group.

    >>> extract_depth("9-1_4")
    4
    """
    compiled = re.compile(pattern) if isinstance(pattern, str) else pattern
    m = compiled.search(query_id)
    if m is None or m.group("depth") is None:
        raise NoMatch(query_id)
    depth = int(m.group("depth"))
    if depth < 1:
        raise NoMatch(query_id)
    return depth


def depth_map(query_ids: Iterable[str], pattern: str | re.Pattern = DEFAULT_DEPTH_PATTERN) -> dict[str, int]:
    compiled = re.compile(pattern) if isinstance(pattern, str) else pattern
    if "depth" not in compiled.groupindex:
        raise ValueError("depth pattern needs a named group 'depth'")
    return {qid: extract_depth(qid, compiled) for qid in query_ids}


def map_teams(runs: Mapping[str, SystemRun], mapping: Mapping[str, str]) -> dict[str, SystemRun]:
    out = {}
    for sid, run in runs.items():
        team = mapping.get(sid)
        if not team:
            raise UnmappedSystem(sid)
        out[sid] = replace(run, team_id=team)
    return out


def identity_teams(runs: Mapping[str, SystemRun]) -> dict[str, SystemRun]:
    return map_teams(runs, {sid: sid for sid in runs})


def parse_team_map(text: str) -> dict[str, str]:
    mapping = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.rstrip("\n").split("\t")
        if len(parts) != 2 or not parts[0].strip() or not parts[1].strip():
            raise MalformedLine(line_no, "expected 'system_id<TAB>team_id'")
        mapping[parts[0].strip()] = parts[1].strip()
    return mapping


def read_team_map(path: str | Path) -> dict[str, str]:
    return parse_team_map(Path(path).read_text(encoding="utf-8"))


def parse_passages(text: str) -> dict[str, str]:
    passages = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        doc, sep, body = line.partition("\t")
        if not sep:
            raise MalformedLine(line_no, "expected 'doc_id<TAB>text'")
        passages[doc.strip()] = body
    return passages


def read_passages(path: str | Path) -> dict[str, str]:
    return parse_passages(Path(path).read_text(encoding="utf-8"))
