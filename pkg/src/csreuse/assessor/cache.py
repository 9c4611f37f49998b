"""Append-only judgment cache with a compacted index.

Layout of the cache directory::

    records.jsonl   one JSON AssessmentRecord per line, append-only
    index.json      {"log_size": int, "entries": {"<backend>\\t<hash>": offset}}

The index is a pure accelerator: if missing or stale it is rebuilt from the
log. Later log lines win over earlier ones for the same key.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import asdict, dataclass
from pathlib import Path


@dataclass(frozen=True)
class AssessmentRecord:
    query_id: str
    doc_id: str
    grade: int
    backend_id: str
    prompt_hash: str
    raw_output: str
    created_at: str

    def to_json(self) -> str:
        return json.dumps(asdict(self), ensure_ascii=False, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> AssessmentRecord:
        return cls(**json.loads(line))


def _key(backend_id: str, prompt_hash: str) -> str:
    return f"{backend_id}\t{prompt_hash}"


class JudgmentCache:
    LOG = "records.jsonl"
    INDEX = "index.json"

    def __init__(self, directory: str | Path):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.log_path = self.dir / self.LOG
        self.index_path = self.dir / self.INDEX
        self._lock = threading.Lock()
        self._records: dict[str, AssessmentRecord] = {}
        self._load()

    def _load(self) -> None:
        if not self.log_path.exists():
            return
        size = self.log_path.stat().st_size
        offsets = None
        if self.index_path.exists():
            try:
                idx = json.loads(self.index_path.read_text(encoding="utf-8"))
                if idx.get("log_size") == size:
                    offsets = idx["entries"]
            except (ValueError, KeyError):
                offsets = None
        with open(self.log_path, "rb") as f:
            if offsets is not None:
                for key, off in offsets.items():
                    f.seek(off)
                    self._records[key] = AssessmentRecord.from_json(f.readline().decode("utf-8"))
                return
            for raw in f:
                line = raw.decode("utf-8").strip()
                if not line:
                    continue
                try:
                    rec = AssessmentRecord.from_json(line)
                except (ValueError, TypeError):
                    continue  # torn trailing write
                self._records[_key(rec.backend_id, rec.prompt_hash)] = rec

    def get(self, backend_id: str, prompt_hash: str) -> AssessmentRecord | None:
        with self._lock:
            return self._records.get(_key(backend_id, prompt_hash))

    def put(self, record: AssessmentRecord) -> None:
        with self._lock:
            with open(self.log_path, "a", encoding="utf-8") as f:
                f.write(record.to_json() + "\n")
                f.flush()
                os.fsync(f.fileno())
            self._records[_key(record.backend_id, record.prompt_hash)] = record

    def __len__(self) -> int:
        return len(self._records)

    def __contains__(self, key: tuple[str, str]) -> bool:
        return self.get(*key) is not None

    def compact(self) -> None:
        """Write the index of latest-record offsets for fast reopening."""
        with self._lock:
            if not self.log_path.exists():
                return
            entries: dict[str, int] = {}
            with open(self.log_path, "rb") as f:
                while True:
                    off = f.tell()
                    raw = f.readline()
                    if not raw:
                        break
                    try:
                        rec = AssessmentRecord.from_json(raw.decode("utf-8"))
                    except (ValueError, TypeError):
                        continue
                    entries[_key(rec.backend_id, rec.prompt_hash)] = off
                size = f.tell()
            tmp = self.index_path.with_suffix(".tmp")
            tmp.write_text(json.dumps({"log_size": size, "entries": entries}, sort_keys=True), encoding="utf-8")
            tmp.replace(self.index_path)
