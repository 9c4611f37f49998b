from .backends import Backend, MockBackend, OracleBackend, RemoteBackend, mock_grade, tokenize
from .cache import AssessmentRecord, JudgmentCache
from .core import (
    Assessor,
    FillResult,
    assess_pairs,
    build_requests,
    fill_holes,
    parse_grade,
    regenerate_pool,
)
from .prompts import (
    AssessmentRequest,
    ExemplarSource,
    PromptTemplate,
    build_prompt,
    format_context,
    sample_two_shot,
)

__all__ = [
    "AssessmentRecord",
    "AssessmentRequest",
    "Assessor",
    "Backend",
    "ExemplarSource",
    "FillResult",
    "JudgmentCache",
    "MockBackend",
    "OracleBackend",
    "PromptTemplate",
    "RemoteBackend",
    "assess_pairs",
    "build_prompt",
    "build_requests",
    "fill_holes",
    "format_context",
    "mock_grade",
    "parse_grade",
    "regenerate_pool",
    "sample_two_shot",
    "tokenize",
]
