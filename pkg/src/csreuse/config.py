"""YAML experiment configuration with strict key checking.

Relative paths resolve against the directory of the config file. Input paths
must exist when the config is loaded; ``cache_dir`` and ``output_dir`` are
created on demand.
"""

from __future__ import annotations

import re
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import yaml

from .collection import DEFAULT_DEPTH_PATTERN
from .errors import ConfigError
from .pooling import PoolConfig

INPUT_PATHS = ("runs", "qrels", "topics", "passages", "team_map")
OUTPUT_PATHS = ("cache_dir", "output_dir")


@dataclass(frozen=True)
class Paths:
    runs: Path | None = None
    qrels: Path | None = None
    topics: Path | None = None
    passages: Path | None = None
    team_map: Path | None = None
    cache_dir: Path | None = None
    output_dir: Path = Path("out")


@dataclass(frozen=True)
class PoolSection:
    k_pool: int | None = None
    k_eval: int = 10
    relevant_threshold: int = 2


@dataclass(frozen=True)
class MetricSection:
    k: int = 5
    gain: str = "linear"


@dataclass(frozen=True)
class BackendSection:
    kind: str = "mock"
    id: str | None = None
    endpoint: str | None = None
    model: str | None = None
    temperature: float = 0.0
    top_p: float = 1.0
    api_key_env: str = "OPENAI_API_KEY"
    timeout: float = 60.0
    max_attempts: int = 3
    backoff: float = 1.0


@dataclass(frozen=True)
class TemplateSection:
    shots: str = "zero"
    include_context: bool = False
    context_turns: int = 4
    path: Path | None = None


@dataclass(frozen=True)
class SplitSection:
    ratios: tuple[float, float, float] = (0.70, 0.15, 0.15)


@dataclass(frozen=True)
class Config:
    paths: Paths = field(default_factory=Paths)
    pool: PoolSection = field(default_factory=PoolSection)
    metric: MetricSection = field(default_factory=MetricSection)
    backend: BackendSection = field(default_factory=BackendSection)
    template: TemplateSection = field(default_factory=TemplateSection)
    split: SplitSection = field(default_factory=SplitSection)
    depth_pattern: str = DEFAULT_DEPTH_PATTERN
    query_id_format: str = "{conversation_id}_{turn_index}"
    seed: int = 0
    jobs: int = 1

    def pool_config(self) -> PoolConfig:
        if self.pool.k_pool is None:
            raise ConfigError("pool.k_pool must be set explicitly")
        try:
            return PoolConfig(self.pool.k_pool, self.pool.k_eval, self.pool.relevant_threshold)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def require(self, *names: str) -> None:
        for name in names:
            if getattr(self.paths, name) is None:
                raise ConfigError(f"paths.{name} is required for this command")

    def to_dict(self) -> dict[str, Any]:
        def clean(v):
            if isinstance(v, Path):
                return str(v)
            if isinstance(v, dict):
                return {k: clean(x) for k, x in v.items()}
            if isinstance(v, (list, tuple)):
                return [clean(x) for x in v]
            return v

        return clean(asdict(self))


_SECTIONS = {
    "paths": Paths,
    "pool": PoolSection,
    "metric": MetricSection,
    "backend": BackendSection,
    "template": TemplateSection,
    "split": SplitSection,
}


def _build(cls, raw: Any, where: str):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError(f"{where} must be a mapping")
    known = {f.name for f in fields(cls)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    return cls(**raw)


def _validate(cfg: Config) -> None:
    if cfg.metric.gain not in ("linear", "exponential"):
        raise ConfigError("metric.gain must be 'linear' or 'exponential'")
    if cfg.metric.k < 1:
        raise ConfigError("metric.k must be >= 1")
    if cfg.backend.kind not in ("oracle", "mock", "remote"):
        raise ConfigError("backend.kind must be oracle, mock or remote")
    if cfg.template.shots not in ("zero", "one", "two"):
        raise ConfigError("template.shots must be zero, one or two")
    if cfg.jobs < 1:
        raise ConfigError("jobs must be >= 1")
    try:
        pattern = re.compile(cfg.depth_pattern)
    except re.error as exc:
        raise ConfigError(f"depth_pattern does not compile: {exc}") from None
    if "depth" not in pattern.groupindex:
        raise ConfigError("depth_pattern needs a named group 'depth'")
    ratios = cfg.split.ratios
    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError("split.ratios must be three numbers summing to 1")


def load_config(path: str | Path | None, overrides: dict[str, Any] | None = None) -> Config:
    """Load and validate a config file; ``overrides`` use dotted keys (flags win)."""
    raw: dict[str, Any] = {}
    base = Path.cwd()
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file {path} not found")
        try:
            raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a mapping")
        base = path.parent.resolve()

    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        node = raw
        *parents, leaf = dotted.split(".")
        for p in parents:
            if not isinstance(node.get(p), dict):
                node[p] = {}
            node = node[p]
        node[leaf] = value

    top_known = set(_SECTIONS) | {"depth_pattern", "query_id_format", "seed", "jobs"}
    unknown = set(raw) - top_known
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    try:
        sections = {name: _build(cls, raw.get(name), name) for name, cls in _SECTIONS.items()}
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    scalars = {k: raw[k] for k in ("depth_pattern", "query_id_format", "seed", "jobs") if k in raw}
    cfg = Config(**sections, **scalars)

    resolved = {}
    for name in INPUT_PATHS + OUTPUT_PATHS:
        value = getattr(cfg.paths, name)
        if value is None:
            resolved[name] = None
            continue
        p = Path(value)
        if not p.is_absolute():
            p = base / p
        if name in INPUT_PATHS and not p.exists():
            raise ConfigError(f"paths.{name}: {p} does not exist")
        resolved[name] = p
    template = cfg.template
    if template.path is not None:
        tp = Path(template.path)
        tp = tp if tp.is_absolute() else base / tp
        if not tp.is_file():
            raise ConfigError(f"template.path: {tp} does not exist")
        template = replace(template, path=tp)
    try:
        ratios = tuple(float(r) for r in cfg.split.ratios)
    except (TypeError, ValueError):
        raise ConfigError("split.ratios must be numbers") from None
    cfg = replace(cfg, paths=Paths(**resolved), template=template, split=SplitSection(ratios))
    _validate(cfg)
    return cfg
