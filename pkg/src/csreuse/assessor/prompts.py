"""Prompt templates and few-shot exemplar selection."""

from __future__ import annotations

import hashlib
import random
import string
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

from ..collection import JudgmentSet
from ..errors import MissingCanonicalResponse, NoJudgedPairAvailable

SHOTS = ("zero", "one", "two")
PLACEHOLDERS = {"resolved_utterance", "context", "passage", "exemplar_positive", "exemplar_negative"}
_REQUIRED = {
    "zero": {"resolved_utterance", "passage"},
    "one": {"resolved_utterance", "passage", "exemplar_positive"},
    "two": {"resolved_utterance", "passage", "exemplar_positive", "exemplar_negative"},
}


@dataclass(frozen=True)
class AssessmentRequest:
    query_id: str
    doc_id: str
    resolved_utterance: str
    context: tuple[tuple[str, str], ...]
    passage: str

    def __post_init__(self):
        if not self.resolved_utterance.strip():
            raise ValueError(f"empty resolved utterance for {self.query_id}")


@dataclass(frozen=True)
class PromptTemplate:
    shots: str
    include_context: bool
    template_text: str
    context_turns: int = 4

    def __post_init__(self):
        if self.shots not in SHOTS:
            raise ValueError(f"shots must be one of {SHOTS}")
        fields = {name for _, name, _, _ in string.Formatter().parse(self.template_text) if name}
        unknown = fields - PLACEHOLDERS
        if unknown:
            raise ValueError(f"unknown template placeholders: {sorted(unknown)}")
        missing = _REQUIRED[self.shots] - fields
        if missing:
            raise ValueError(f"{self.shots}-shot template lacks {sorted(missing)}")
        if self.include_context and "context" not in fields:
            raise ValueError("include_context requires a {context} placeholder")

    @classmethod
    def default(cls, shots: str = "one", include_context: bool = False, context_turns: int = 4) -> PromptTemplate:
        text = resources.files(__package__).joinpath("templates", f"{shots}_shot.txt").read_text(encoding="utf-8")
        return cls(shots, include_context, text, context_turns)

    @classmethod
    def from_file(cls, path: str | Path, shots: str, include_context: bool = False, context_turns: int = 4) -> PromptTemplate:
        return cls(shots, include_context, Path(path).read_text(encoding="utf-8"), context_turns)


@dataclass(frozen=True)
class ExemplarSource:
    """Where few-shot exemplars come from.

    ``canonical`` maps query ids to the organizers' canonical response (the
    one-shot positive). ``judgments`` and ``passages`` feed the two-shot
    sampler, which prefers pairs of the same query and falls back to the
    whole collection.
    """

    canonical: Mapping[str, str]
    judgments: JudgmentSet | None = None
    passages: Mapping[str, str] | None = None
    relevant_threshold: int = 2


def sample_two_shot(source: ExemplarSource, query_id: str, doc_id: str, seed: int) -> tuple[tuple[str, str], tuple[str, str]]:
    """Pick one relevant and one irrelevant judged pair, never the pair being assessed."""
    pool = source.judgments
    passages = source.passages or {}
    if pool is None or not len(pool):
        raise NoJudgedPairAvailable("two-shot prompt needs a non-empty judgment pool")
    rng = random.Random(f"two-shot:{seed}:{query_id}:{doc_id}")

    def candidates(keys: Sequence[tuple[str, str]], relevant: bool) -> list[tuple[str, str]]:
        return [
            k for k in keys
            if k != (query_id, doc_id)
            and k[1] in passages
            and (pool[k] >= source.relevant_threshold) == relevant
        ]

    local = sorted((query_id, d) for d in pool.grades_for(query_id))
    everything = None
    picks = []
    for relevant in (True, False):
        options = candidates(local, relevant)
        if not options:
            if everything is None:
                everything = sorted(pool)
            options = candidates(everything, relevant)
        if not options:
            kind = "relevant" if relevant else "irrelevant"
            raise NoJudgedPairAvailable(f"no {kind} judged pair with passage text available")
        picks.append(options[rng.randrange(len(options))])
    return picks[0], picks[1]


def format_context(context: Sequence[tuple[str, str]], max_turns: int) -> str:
    recent = list(context)[-max_turns:] if max_turns > 0 else []
    if not recent:
        return ""
    lines = ["Conversation so far:"]
    for utterance, response in recent:
        lines.append(f"User: {utterance}")
        lines.append(f"System: {response}")
    return "\n".join(lines) + "\n"


def prompt_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def build_prompt(
    tmpl: PromptTemplate, req: AssessmentRequest, exemplars: ExemplarSource | None = None, rng_seed: int = 0
) -> tuple[str, str]:
    """Render the prompt for ``req`` and return ``(text, sha256 hex of text)``."""
    values = dict.fromkeys(PLACEHOLDERS, "")
    values["resolved_utterance"] = req.resolved_utterance
    values["passage"] = req.passage
    if tmpl.include_context:
        values["context"] = format_context(req.context, tmpl.context_turns)
    if tmpl.shots == "one":
        response = (exemplars.canonical.get(req.query_id) if exemplars else None) or ""
        if not response.strip():
            raise MissingCanonicalResponse(req.query_id)
        values["exemplar_positive"] = response
    elif tmpl.shots == "two":
        if exemplars is None:
            raise NoJudgedPairAvailable("two-shot prompt needs an exemplar source")
        pos, neg = sample_two_shot(exemplars, req.query_id, req.doc_id, rng_seed)
        values["exemplar_positive"] = exemplars.passages[pos[1]]
        values["exemplar_negative"] = exemplars.passages[neg[1]]
    text = tmpl.template_text.format_map(values)
    return text, prompt_hash(text)
