"""Seeds, digests and deterministic JSON output for experiment manifests."""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import Any


def derive_seed(master: int, label: str) -> int:
    """Per-purpose seed from a master seed and a label, stable across runs."""
    digest = hashlib.sha256(f"{master}:{label}".encode("utf-8")).hexdigest()
    return int(digest[:16], 16)


def file_digest(path: str | Path) -> str:
    path = Path(path)
    h = hashlib.sha256()
    if path.is_dir():
        for p in sorted(q for q in path.rglob("*") if q.is_file()):
            h.update(p.relative_to(path).as_posix().encode("utf-8"))
            h.update(p.read_bytes())
    else:
        h.update(path.read_bytes())
    return h.hexdigest()


def _round(obj: Any) -> Any:
    if isinstance(obj, float):
        return None if math.isnan(obj) else round(obj, 6)
    if isinstance(obj, dict):
        return {str(k): _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    return obj


def dumps(obj: Any) -> str:
    return json.dumps(_round(obj), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def write_json(obj: Any, path: str | Path) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8")
