"""Exception hierarchy shared across the package."""

from __future__ import annotations


class CsReuseError(Exception):
    """Base class for all errors raised by csreuse."""


# --- collection parsing -------------------------------------------------------


class CollectionError(CsReuseError):
    pass


class MalformedLine(CollectionError):
    def __init__(self, line_no: int, reason: str = ""):
        self.line_no = line_no
        self.reason = reason
        msg = f"malformed line {line_no}"
        super().__init__(f"{msg}: {reason}" if reason else msg)


class DuplicateDoc(CollectionError):
    def __init__(self, query_id: str, doc_id: str, run_tag: str = ""):
        self.query_id = query_id
        self.doc_id = doc_id
        self.run_tag = run_tag
        super().__init__(f"document {doc_id!r} repeated for query {query_id!r} in run {run_tag!r}")


class DuplicateRank(CollectionError):
    def __init__(self, query_id: str, rank: int, run_tag: str = ""):
        self.query_id = query_id
        self.rank = rank
        super().__init__(f"rank {rank} repeated for query {query_id!r} in run {run_tag!r}")


class GradeOutOfRange(CollectionError):
    def __init__(self, grade: int, line_no: int | None = None):
        self.grade = grade
        self.line_no = line_no
        where = f" (line {line_no})" if line_no is not None else ""
        super().__init__(f"grade {grade} outside 0..4{where}")


class DuplicatePair(CollectionError):
    def __init__(self, query_id: str, doc_id: str, old: int, new: int):
        self.query_id = query_id
        self.doc_id = doc_id
        super().__init__(f"conflicting grades for ({query_id}, {doc_id}): {old} vs {new}")


class MissingField(CollectionError):
    def __init__(self, path: str, conversation_id: str | None = None):
        self.path = path
        self.conversation_id = conversation_id
        where = f" in conversation {conversation_id!r}" if conversation_id else ""
        super().__init__(f"missing field {path!r}{where}")


class NonContiguousTurns(CollectionError):
    def __init__(self, conversation_id: str):
        self.conversation_id = conversation_id
        super().__init__(f"turn indices of conversation {conversation_id!r} are not 1..n")


class NoMatch(CollectionError):
    def __init__(self, query_id: str):
        self.query_id = query_id
        super().__init__(f"depth pattern does not match query id {query_id!r}")


class UnmappedSystem(CollectionError):
    def __init__(self, system_id: str):
        self.system_id = system_id
        super().__init__(f"system {system_id!r} has no team mapping")


# --- pooling / metrics --------------------------------------------------------


class UnknownSystem(CsReuseError, KeyError):
    def __init__(self, system_id: str):
        self.system_id = system_id
        super().__init__(f"unknown system {system_id!r}")

    def __str__(self) -> str:
        return self.args[0]


class MissingDepth(CsReuseError):
    def __init__(self, query_id: str):
        self.query_id = query_id
        super().__init__(f"no depth known for query {query_id!r}")


class SystemSetMismatch(CsReuseError):
    pass


class KeySetMismatch(CsReuseError):
    pass


class EmptyInput(CsReuseError):
    pass


class EmptyIntersection(EmptyInput):
    pass


# --- assessor -----------------------------------------------------------------


class AssessorError(CsReuseError):
    pass


class MissingCanonicalResponse(AssessorError):
    def __init__(self, query_id: str):
        self.query_id = query_id
        super().__init__(f"no canonical response for query {query_id!r}")


class NoJudgedPairAvailable(AssessorError):
    pass


class UnparsableGrade(AssessorError):
    def __init__(self, raw: str):
        self.raw = raw
        preview = raw if len(raw) <= 80 else raw[:77] + "..."
        super().__init__(f"no grade 0-4 found in {preview!r}")


class BackendUnavailable(AssessorError):
    pass


# --- simulation / cli ---------------------------------------------------------


class UnbalanceableQuery(CsReuseError):
    def __init__(self, query_id: str):
        self.query_id = query_id
        super().__init__(f"query {query_id!r} lacks a relevant or an irrelevant judgment")


class ConfigError(CsReuseError):
    pass
