"""Grade parsing, cached assessment, hole filling and pool regeneration."""

from __future__ import annotations

import copy
import logging
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Callable, Iterable, Mapping

from ..collection import MAX_GRADE, Conversation, JudgmentSet, Pair, Turn
from ..errors import AssessorError, BackendUnavailable, UnparsableGrade
from ..pooling import HoleSet
from .backends import Backend
from .cache import AssessmentRecord, JudgmentCache
from .prompts import AssessmentRequest, ExemplarSource, PromptTemplate, build_prompt

log = logging.getLogger(__name__)

REPROMPT_SUFFIX = "\n\nAnswer with a single integer 0-4."

_MARKUP = re.compile(r"<[^>]*>|[*_`#>~|\[\]]")
_INTEGER = re.compile(r"(?<![\w.])(\d+)(?!\w|\.\d)")


def parse_grade(raw: str) -> int:
    """First standalone integer between 0 and 4 in ``raw``, ignoring markup."""
    text = _MARKUP.sub(" ", raw)
    for m in _INTEGER.finditer(text):
        value = int(m.group(1))
        if 0 <= value <= MAX_GRADE:
            return value
    raise UnparsableGrade(raw)


class Assessor:
    """Grades (utterance, context, passage) requests through one backend.

    Transport failures are retried ``max_attempts`` times with exponential
    backoff; an unparsable answer earns one re-prompt before failing.
    """

    def __init__(
        self,
        backend: Backend,
        template: PromptTemplate | None = None,
        exemplars: ExemplarSource | None = None,
        cache: JudgmentCache | None = None,
        seed: int = 0,
        max_attempts: int = 3,
        backoff: float = 1.0,
        sleep: Callable[[float], None] = time.sleep,
        clock: Callable[[], datetime] | None = None,
    ):
        self.backend = backend
        self.template = template or PromptTemplate.default("zero")
        self.exemplars = exemplars
        self.cache = cache
        self.seed = seed
        self.max_attempts = max_attempts
        self.backoff = backoff
        self.sleep = sleep
        self.clock = clock or (lambda: datetime.now(timezone.utc))
        self.calls = 0

    @property
    def backend_id(self) -> str:
        return self.backend.backend_id

    def with_exemplar_pool(self, judgments: JudgmentSet) -> Assessor:
        """Copy sharing backend and cache whose two-shot exemplars come from ``judgments``."""
        if self.exemplars is None:
            return self
        clone = copy.copy(self)
        clone.exemplars = replace(self.exemplars, judgments=judgments)
        return clone

    def _call(self, prompt: str, req: AssessmentRequest) -> str:
        for attempt in range(self.max_attempts):
            try:
                self.calls += 1
                return self.backend.complete(prompt, req)
            except BackendUnavailable as exc:
                if attempt + 1 == self.max_attempts:
                    raise
                delay = self.backoff * 2**attempt
                log.warning("backend %s failed (%s); retrying in %.1fs", self.backend_id, exc, delay)
                self.sleep(delay)
        raise AssertionError("unreachable")

    def assess(self, req: AssessmentRequest) -> AssessmentRecord:
        prompt, digest = build_prompt(self.template, req, self.exemplars, self.seed)
        use_cache = self.cache is not None and self.backend.cacheable
        if use_cache:
            hit = self.cache.get(self.backend_id, digest)
            if hit is not None:
                return hit
        raw = self._call(prompt, req)
        try:
            grade = parse_grade(raw)
        except UnparsableGrade:
            raw = self._call(prompt + REPROMPT_SUFFIX, req)
            grade = parse_grade(raw)
        record = AssessmentRecord(
            req.query_id, req.doc_id, grade, self.backend_id, digest, raw, self.clock().isoformat()
        )
        if use_cache:
            self.cache.put(record)
        return record


def build_requests(
    pairs: Iterable[Pair],
    turns: Mapping[str, tuple[Conversation, Turn]],
    passages: Mapping[str, str],
    strict: bool = True,
) -> tuple[dict[Pair, AssessmentRequest], dict[Pair, str]]:
    """Assemble requests for ``pairs``.

    With ``strict`` a pair lacking its topic turn or passage text is returned
    as missing. Otherwise placeholders are used (the query id as utterance,
    an empty passage), which only suits backends that ignore the text.
    """
    requests, missing = {}, {}
    for qid, doc in sorted(set(pairs)):
        if qid not in turns and strict:
            missing[(qid, doc)] = "no topic turn"
            continue
        if doc not in passages and strict:
            missing[(qid, doc)] = "no passage text"
            continue
        if qid in turns:
            conv, turn = turns[qid]
            utterance, context = turn.resolved_utterance, tuple(conv.context(turn.turn_index))
        else:
            utterance, context = qid, ()
        requests[(qid, doc)] = AssessmentRequest(qid, doc, utterance, context, passages.get(doc, ""))
    return requests, missing


@dataclass
class FillResult:
    judgments: JudgmentSet
    records: dict[Pair, AssessmentRecord] = field(default_factory=dict)
    failed: dict[Pair, str] = field(default_factory=dict)
    attempted: int = 0

    @property
    def filled_fraction(self) -> float:
        return 1.0 if self.attempted == 0 else len(self.records) / self.attempted


def assess_pairs(
    pairs: Iterable[Pair], assessor: Assessor, requests: Mapping[Pair, AssessmentRequest], jobs: int = 1
) -> tuple[dict[Pair, AssessmentRecord], dict[Pair, str]]:
    ordered = sorted(set(pairs))
    failed: dict[Pair, str] = {p: "no request" for p in ordered if p not in requests}
    todo = [p for p in ordered if p in requests]

    def run(pair):
        try:
            return pair, assessor.assess(requests[pair]), None
        except AssessorError as exc:
            return pair, None, f"{type(exc).__name__}: {exc}"

    if jobs > 1 and len(todo) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, todo))
    else:
        results = [run(p) for p in todo]
    records = {}
    for pair, rec, err in results:
        if rec is None:
            failed[pair] = err
        else:
            records[pair] = rec
    return records, dict(sorted(failed.items()))


def _assessor_judgments(records: Mapping[Pair, AssessmentRecord], backend_id: str) -> JudgmentSet:
    return JudgmentSet({p: r.grade for p, r in records.items()}, f"assessor:{backend_id}")


def fill_holes(
    P_hole: JudgmentSet,
    holes: HoleSet,
    assessor: Assessor,
    requests: Mapping[Pair, AssessmentRequest],
    jobs: int = 1,
) -> FillResult:
    """P_hole plus assessor grades for every excised pair; failures stay unjudged."""
    records, failed = assess_pairs(holes.removed, assessor, requests, jobs)
    filled = P_hole.merged(_assessor_judgments(records, assessor.backend_id))
    return FillResult(filled, records, failed, len(holes.removed))


def regenerate_pool(
    P: JudgmentSet, assessor: Assessor, requests: Mapping[Pair, AssessmentRequest], jobs: int = 1
) -> FillResult:
    """Re-grade every key of ``P`` with the assessor (human grades discarded)."""
    records, failed = assess_pairs(P.keys(), assessor, requests, jobs)
    return FillResult(_assessor_judgments(records, assessor.backend_id), records, failed, len(P))
