"""Command-line entry point: ``csreuse <subcommand> --config experiment.yaml``.

Exit codes: 0 success, 1 runtime failure, 2 configuration or usage error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Any

from . import __version__
from .assessor import (
    Assessor,
    ExemplarSource,
    JudgmentCache,
    MockBackend,
    OracleBackend,
    PromptTemplate,
    RemoteBackend,
    assess_pairs,
    build_requests,
)
from .collection import (
    JudgmentSet,
    depth_map,
    identity_teams,
    index_turns,
    map_teams,
    read_passages,
    read_qrels,
    read_runs,
    read_team_map,
    read_topics,
    write_qrels,
)
from .config import Config, load_config
from .errors import ConfigError, CsReuseError
from .manifest import derive_seed, dumps, file_digest, write_json
from .metrics import kendall_at_k_curve, rank_systems, write_comparison_csv, write_ranking_csv
from .pooling import aggregate_sweep, groups_for, hole_sweep, make_hole_pool, overall_mean_phi, unjudged_at_k, write_depth_csv, write_hole_csv
from .simulation import (
    ExperimentConfig,
    SplitSpec,
    agreement_report,
    compare_pools,
    make_split,
    run_leave_one_out,
    write_curve_csv,
    write_depth_rows,
    write_group_csv,
    write_system_csv,
)

log = logging.getLogger("csreuse")


class Context:
    """Lazily loaded inputs for one invocation."""

    def __init__(self, cfg: Config, args: argparse.Namespace):
        self.cfg = cfg
        self.args = args
        self._cache: dict[str, Any] = {}

    def _memo(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    def runs(self, mode: str = "model"):
        self.cfg.require("runs")

        def load():
            runs = read_runs(self.cfg.paths.runs)
            if mode == "team":
                if self.cfg.paths.team_map is None:
                    raise ConfigError("--mode team needs paths.team_map")
                return map_teams(runs, read_team_map(self.cfg.paths.team_map))
            return identity_teams(runs)

        return self._memo(("runs", mode), load)

    def qrels(self) -> JudgmentSet:
        self.cfg.require("qrels")
        return self._memo("qrels", lambda: read_qrels(self.cfg.paths.qrels))

    def turns(self):
        if self.cfg.paths.topics is None:
            return {}
        return self._memo("turns", lambda: index_turns(read_topics(self.cfg.paths.topics), self.cfg.query_id_format))

    def passages(self):
        if self.cfg.paths.passages is None:
            return {}
        return self._memo("passages", lambda: read_passages(self.cfg.paths.passages))

    def depths(self, query_ids):
        return depth_map(query_ids, self.cfg.depth_pattern)

    def digests(self) -> dict[str, str]:
        return {
            name: file_digest(p)
            for name in ("runs", "qrels", "topics", "passages", "team_map")
            if (p := getattr(self.cfg.paths, name)) is not None
        }

    def out_dir(self, name: str) -> Path:
        d = Path(self.cfg.paths.output_dir) / name
        d.mkdir(parents=True, exist_ok=True)
        return d

    def manifest(self, command: str, **extra) -> dict:
        cfg = self.cfg.to_dict()
        paths = cfg.pop("paths")
        return {
            "command": command,
            "version": __version__,
            "config": cfg,
            "inputs": {k: Path(v).name for k, v in paths.items() if v is not None and k not in ("cache_dir", "output_dir")},
            "input_digests": self.digests(),
            "seed": self.cfg.seed,
            **extra,
        }

    def assessor(self, backend_kind: str, reference: JudgmentSet | None = None) -> Assessor:
        cfg = self.cfg
        b = cfg.backend
        if backend_kind == "oracle":
            backend = OracleBackend(reference if reference is not None else self.qrels(), b.id or "oracle")
        elif backend_kind == "mock":
            backend = MockBackend(b.id or "mock")
        elif backend_kind == "remote":
            if not b.endpoint or not b.model:
                raise ConfigError("remote backend needs backend.endpoint and backend.model")
            backend = RemoteBackend(b.endpoint, b.model, b.temperature, b.top_p, b.api_key_env, b.timeout, b.id)
        else:
            raise ConfigError(f"unknown backend {backend_kind!r}")
        t = cfg.template
        try:
            if t.path is not None:
                template = PromptTemplate.from_file(t.path, t.shots, t.include_context, t.context_turns)
            else:
                template = PromptTemplate.default(t.shots, t.include_context, t.context_turns)
        except ValueError as exc:
            raise ConfigError(f"template: {exc}") from None
        canonical = {qid: turn.response for qid, (_, turn) in self.turns().items()}
        exemplars = ExemplarSource(
            canonical,
            self.qrels() if cfg.paths.qrels is not None else None,
            self.passages(),
            cfg.pool.relevant_threshold,
        )
        use_cache = cfg.paths.cache_dir is not None and not self.args.dry_run
        cache = JudgmentCache(cfg.paths.cache_dir) if use_cache else None
        return Assessor(
            backend,
            template,
            exemplars,
            cache,
            seed=derive_seed(cfg.seed, "assessor.two_shot"),
            max_attempts=b.max_attempts,
            backoff=b.backoff,
        )

    def requests(self, pairs, backend_kind: str):
        return build_requests(pairs, self.turns(), self.passages(), strict=backend_kind != "oracle")


def _plan(ctx: Context, command: str, **details) -> int:
    print(dumps({"command": command, "dry_run": True, "config": ctx.cfg.to_dict(), **details}), end="")
    return 0


def _close_cache(assessor: Assessor) -> None:
    if assessor.cache is not None:
        assessor.cache.compact()


# --- subcommands --------------------------------------------------------------


def cmd_pool_stats(ctx: Context) -> int:
    mode = ctx.args.mode
    pool_cfg = ctx.cfg.pool_config()
    runs = ctx.runs(mode)
    if ctx.args.dry_run:
        return _plan(ctx, "pool-stats", mode=mode, groups=list(groups_for(runs, mode)))
    P = ctx.qrels()
    depths = ctx.depths(sorted({q for r in runs.values() for q in r.rankings}))
    reports = hole_sweep(P, runs, mode, pool_cfg, depths)
    out = ctx.out_dir(f"pool-stats-{mode}")
    write_hole_csv(reports, out / "holes.csv")
    write_depth_csv(aggregate_sweep(reports), out / "holes_by_depth.csv")
    summary = {
        "mode": mode,
        "n_groups": len(reports),
        "n_systems": len(runs),
        "pool_size": len(P),
        "mean_phi": overall_mean_phi(reports),
        "mean_phi_plus": (
            sum(p for r in reports for _, p in r.per_query.values()) / max(1, sum(len(r.per_query) for r in reports))
        ),
        "per_group_mean_phi": {r.group_id: r.mean_phi for r in reports},
    }
    write_json(ctx.manifest("pool-stats", summary=summary), out / "manifest.json")
    print(f"mean phi = {summary['mean_phi']:.6f} over {len(reports)} {mode} groups -> {out}")
    return 0


def _parse_depths(spec: str | None) -> tuple[bool, tuple[int, ...] | None]:
    if spec is None:
        return False, None
    if spec == "all":
        return True, None
    try:
        return True, tuple(sorted({int(x) for x in spec.split(",") if x.strip()}))
    except ValueError:
        raise ConfigError(f"--depths must be 'all' or a comma list of integers, got {spec!r}") from None


def cmd_simulate(ctx: Context) -> int:
    args, cfg = ctx.args, ctx.cfg
    mode, backend_kind = args.mode, args.backend or cfg.backend.kind
    pool_cfg = ctx.cfg.pool_config()
    want_depths, depth_filter = _parse_depths(args.depths)
    runs = ctx.runs(mode)
    P = ctx.qrels()
    assessor = ctx.assessor(backend_kind, reference=P)
    exp = ExperimentConfig(mode, pool_cfg, assessor.backend_id, cfg.metric.k, cfg.metric.gain, depth_filter, cfg.seed, cfg.jobs)
    if args.dry_run:
        return _plan(ctx, "simulate", mode=mode, backend=assessor.backend_id, groups=list(groups_for(runs, mode)))
    all_holes = set()
    for members in groups_for(runs, mode).values():
        all_holes |= make_hole_pool(P, runs, members, pool_cfg)[1].removed
    requests, missing = ctx.requests(all_holes, backend_kind)
    depths = ctx.depths(P.queries()) if want_depths else None
    result = run_leave_one_out(runs, P, assessor, requests, exp, depths)
    _close_cache(assessor)

    out = ctx.out_dir(f"simulate-{mode}")
    write_system_csv(result, out / "systems.csv")
    write_group_csv(result, out / "groups.csv")
    write_ranking_csv(result.reference, out / "reference_ranking.csv")
    if want_depths:
        write_depth_rows(result.depth_rows, out / "depths.csv")
    flagged = [g.group_id for g in result.groups if g.partial]
    write_json(
        ctx.manifest(
            "simulate",
            mode=mode,
            backend=assessor.backend_id,
            template={"shots": cfg.template.shots, "include_context": cfg.template.include_context},
            derived_seeds={"assessor.two_shot": assessor.seed},
            missing_requests=len(missing),
            partial_groups=flagged,
            failures={g.group_id: len(g.fill.failed) for g in result.groups},
        ),
        out / "manifest.json",
    )
    mean_tau = sum(g.tau_filled for g in result.groups) / len(result.groups)
    print(f"{len(result.groups)} {mode} groups; mean tau(P, P_filled) = {mean_tau:.6f} -> {out}")
    if flagged:
        print(f"warning: {len(flagged)} group(s) only partially filled: {', '.join(flagged)}", file=sys.stderr)
    return 0


def cmd_assess(ctx: Context) -> int:
    args, cfg = ctx.args, ctx.cfg
    backend_kind = args.backend or cfg.backend.kind
    P = ctx.qrels()
    if args.target == "holes":
        pool_cfg = cfg.pool_config()
        runs = ctx.runs(args.mode)
        pairs = set()
        for members in groups_for(runs, args.mode).values():
            pairs |= make_hole_pool(P, runs, members, pool_cfg)[1].removed
        reference = P
    elif args.target == "full":
        pairs, reference = set(P), P
    else:
        if args.qrels_in is None:
            raise ConfigError("--target testset needs --qrels-in")
        if not Path(args.qrels_in).is_file():
            raise ConfigError(f"--qrels-in {args.qrels_in} does not exist")
        reference = read_qrels(args.qrels_in)
        pairs = set(reference)
    assessor = ctx.assessor(backend_kind, reference=reference)
    if args.dry_run:
        return _plan(ctx, "assess", target=args.target, backend=assessor.backend_id, n_pairs=len(pairs))
    requests, missing = ctx.requests(pairs, backend_kind)
    records, failed = assess_pairs(pairs, assessor, requests, cfg.jobs)
    _close_cache(assessor)
    labels = JudgmentSet({p: r.grade for p, r in records.items()}, f"assessor:{assessor.backend_id}")
    out = ctx.out_dir("assess")
    qrels_path = out / f"{args.target}.{assessor.backend_id.replace(':', '_')}.qrels"
    write_qrels(labels, qrels_path)
    write_json(
        ctx.manifest(
            "assess",
            target=args.target,
            backend=assessor.backend_id,
            template={"shots": cfg.template.shots, "include_context": cfg.template.include_context},
            n_pairs=len(pairs),
            n_assessed=len(records),
            n_failed=len(failed),
            failures={f"{q} {d}": why for (q, d), why in failed.items()},
            output=qrels_path.name,
        ),
        out / f"{qrels_path.stem}.manifest.json",
    )
    print(f"assessed {len(records)}/{len(pairs)} pairs -> {qrels_path}")
    return 0 if not failed else 1


def cmd_compare(ctx: Context) -> int:
    args, cfg = ctx.args, ctx.cfg
    for p in (args.qrels_a, args.qrels_b):
        if not Path(p).is_file():
            raise ConfigError(f"{p} does not exist")
    if args.dry_run:
        return _plan(ctx, "compare", qrels_a=str(args.qrels_a), qrels_b=str(args.qrels_b))
    A, B = read_qrels(args.qrels_a), read_qrels(args.qrels_b)
    agreement = agreement_report(A, B, cfg.pool.relevant_threshold)
    out = ctx.out_dir("compare")
    report: dict[str, Any] = {
        "qrels_a": Path(args.qrels_a).name,
        "qrels_b": Path(args.qrels_b).name,
        "qrels_a_digest": file_digest(args.qrels_a),
        "qrels_b_digest": file_digest(args.qrels_b),
        "kappa_binary": agreement.kappa_binary,
        "kappa_graded": agreement.kappa_graded,
        "relevant_threshold": cfg.pool.relevant_threshold,
        "n_shared": agreement.n_shared,
        "n_only_a": agreement.n_only_a,
        "n_only_b": agreement.n_only_b,
    }
    if cfg.paths.runs is not None:
        runs = ctx.runs()
        comparison = compare_pools(runs, A, B, cfg.metric.k, cfg.metric.gain)
        write_comparison_csv(comparison, out / "ranking_comparison.csv")
        curve = kendall_at_k_curve(comparison.ranking_a, comparison.ranking_b, range(1, comparison.n_systems + 1))
        write_curve_csv(curve, out / "kendall_at_k.csv")
        report.update(
            tau=comparison.tau,
            mean_distance=comparison.mean_distance,
            n_systems=comparison.n_systems,
            metric=comparison.ranking_a.metric_id,
            tie_policy=comparison.ranking_a.tie_policy,
        )
    write_json(report, out / "report.json")
    line = f"kappa binary = {agreement.kappa_binary:.6f}, graded = {agreement.kappa_graded:.6f}"
    if "tau" in report:
        line += f", tau = {report['tau']:.6f}"
    print(line)
    return 0


def cmd_split(ctx: Context) -> int:
    cfg = ctx.cfg
    seed = derive_seed(cfg.seed, "split")
    spec = SplitSpec(cfg.split.ratios, cfg.pool.relevant_threshold, seed)
    if ctx.args.dry_run:
        return _plan(ctx, "split", derived_seed=seed)
    result = make_split(ctx.qrels(), spec)
    out = ctx.out_dir("split")
    sizes = {}
    for name in ("train", "test", "validation"):
        js = getattr(result, name)
        write_qrels(js, out / f"{name}.qrels")
        sizes[name] = len(js)
    total = sum(sizes.values())
    write_json(
        ctx.manifest(
            "split",
            derived_seeds={"split": seed},
            balancing="per query, irrelevant judgments randomly dropped until they do not outnumber relevant ones",
            sizes=sizes,
            proportions={k: (v / total if total else 0.0) for k, v in sizes.items()},
            balanced_size=len(result.balanced),
            unbalanceable_queries=result.unbalanceable,
        ),
        out / "manifest.json",
    )
    print(f"train/test/validation = {sizes['train']}/{sizes['test']}/{sizes['validation']} -> {out}")
    if result.unbalanceable:
        print(f"warning: {len(result.unbalanceable)} unbalanceable queries skipped", file=sys.stderr)
    return 0


def cmd_rank(ctx: Context) -> int:
    cfg = ctx.cfg
    qrels_path = ctx.args.qrels or cfg.paths.qrels
    if qrels_path is None:
        raise ConfigError("rank needs --qrels or paths.qrels")
    if not Path(qrels_path).is_file():
        raise ConfigError(f"{qrels_path} does not exist")
    if ctx.args.dry_run:
        return _plan(ctx, "rank", qrels=str(qrels_path))
    runs = ctx.runs()
    P = read_qrels(qrels_path)
    ranking = rank_systems(runs, P, cfg.metric.k, cfg.metric.gain)
    out = ctx.out_dir("rank")
    write_ranking_csv(ranking, out / f"{Path(qrels_path).stem}.ranking.csv")
    if ctx.args.unjudged:
        with open(out / f"{Path(qrels_path).stem}.unjudged.csv", "w", encoding="utf-8") as f:
            f.write("system_id,unjudged_at_k\n")
            for sid in sorted(runs):
                f.write(f"{sid},{unjudged_at_k(runs[sid], P, cfg.pool_config())[1]:.6f}\n")
    for i, (sid, score) in enumerate(ranking.entries, start=1):
        print(f"{i:3d}  {sid}  {score:.6f}")
    return 0


# --- argument parsing ---------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="YAML experiment config")
    common.add_argument("--seed", type=int, help="master seed (overrides config)")
    common.add_argument("--jobs", type=int, help="max concurrent backend requests")
    common.add_argument("--output-dir", help="override paths.output_dir")
    common.add_argument("--k-pool", type=int, help="override pool.k_pool")
    common.add_argument("--dry-run", action="store_true", help="print the resolved plan and exit")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="csreuse", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pool-stats", parents=[common], help="phi / phi+ hole statistics per depth")
    p.add_argument("--mode", choices=("model", "team"), default="team")
    p.set_defaults(func=cmd_pool_stats)

    p = sub.add_parser("simulate", parents=[common], help="leave-one-out hole filling experiment")
    p.add_argument("--mode", choices=("model", "team"), default="model")
    p.add_argument("--backend", choices=("oracle", "mock", "remote"))
    p.add_argument("--depths", nargs="?", const="all", help="per-depth breakdown: 'all' or e.g. 1,2,3")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("assess", parents=[common], help="grade pairs with the configured assessor")
    p.add_argument("--target", choices=("holes", "full", "testset"), default="full")
    p.add_argument("--mode", choices=("model", "team"), default="model", help="hole definition for --target holes")
    p.add_argument("--backend", choices=("oracle", "mock", "remote"))
    p.add_argument("--qrels-in", help="qrels whose pairs are graded for --target testset")
    p.set_defaults(func=cmd_assess)

    p = sub.add_parser("compare", parents=[common], help="kappa and tau between two label files")
    p.add_argument("qrels_a")
    p.add_argument("qrels_b")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("split", parents=[common], help="balanced 70/15/15 train/test/validation split")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("rank", parents=[common], help="rank systems by nDCG@k under a qrels file")
    p.add_argument("--qrels", help="defaults to paths.qrels")
    p.add_argument("--unjudged", action="store_true", help="also write Unjudged@k per system")
    p.set_defaults(func=cmd_rank)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(
            args.config,
            {
                "seed": args.seed,
                "jobs": args.jobs,
                "paths.output_dir": str(Path(args.output_dir).resolve()) if args.output_dir else None,
                "pool.k_pool": args.k_pool,
            },
        )
        return args.func(Context(cfg, args))
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (CsReuseError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
