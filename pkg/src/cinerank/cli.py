"""Command-line entry points.

Every run prints a reproducibility header (config hash, seed, dataset
fingerprint) before its output. Failures exit nonzero after writing one
machine-readable JSON error line to stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from . import errors
from .config import AppConfig, config_hash, load_config
from .data import Dataset, format_title, load_dataset
from .evaluation import (
    EvalReport,
    loo_split,
    render_comparison,
    rmse,
    run_loo_protocol,
    run_ranking_protocol,
    stratified_split,
)
from .llm import OracleClient, client_from_spec
from .metadata import MetaCache, SnapshotProvider, lazy_resolver, resolve_all
from .mf import (
    SVD,
    SVDPP,
    TrainConfig,
    load_checkpoint,
    save_checkpoint,
    top_candidates,
    train,
)
from .profiles import (
    AblationFlags,
    build_auto_profile,
    profile_from_payload,
    write_profiles_jsonl,
)
from .rerank import PoolSpec, ScoreCache, pool_size, recommend, recommendation_json
from .synth import generate_corpus

# exception class -> owning module, for the machine-readable error line
_ERROR_ORIGIN = {
    errors.MissingFile: "data",
    errors.MalformedRow: "data",
    errors.DanglingReference: "data",
    errors.EmptyDataset: "data",
    errors.ProviderUnavailable: "metadata",
    errors.GenerationFailed: "metadata",
    errors.NoNumberFound: "llm",
    errors.OutOfRange: "llm",
    errors.TransportError: "llm",
    errors.NoRatings: "profiles",
    errors.InvalidRange: "profiles",
    errors.EmptyProfile: "profiles",
    errors.InvalidSpec: "rerank",
    errors.NoCandidates: "rerank",
    errors.MissingUser: "evaluation",
    errors.EmptyFilteredSet: "evaluation",
    errors.KeyMismatch: "evaluation",
    errors.UsageError: "cli",
}


def _error_line(exc: Exception) -> str:
    origin = "internal"
    for cls, module in _ERROR_ORIGIN.items():
        if isinstance(exc, cls):
            origin = module
            break
    return json.dumps(
        {"error": type(exc).__name__, "module": origin, "message": str(exc)}
    )


def _print_header(args, config: AppConfig, dataset: Dataset | None = None) -> None:
    print(f"# cinerank {args.command}")
    print(f"# config_hash: {config_hash(config)[:12]}")
    print(f"# seed: {config.seed}")
    if dataset is not None:
        print(f"# dataset_fingerprint: {dataset.fingerprint()[:12]}")


def _load(config: AppConfig) -> Dataset:
    return load_dataset(
        config.data.ratings,
        config.data.movies,
        config.data.links,
        current_year=config.current_year,
    )


def _client_for(config: AppConfig, spec: str | None):
    return client_from_spec(
        spec or config.llm.backend,
        {
            "base_url": config.llm.base_url,
            "model": config.llm.model,
            "mode": config.llm.mode,
            "api_key_env": config.llm.api_key_env,
            "in_flight_cap": config.llm.in_flight_cap,
        },
    )


def _meta_lookup(config: AppConfig, dataset: Dataset, client):
    """meta_for backed by the metadata cache, resolving misses lazily."""
    cache = MetaCache(config.cache.metadata)
    provider = SnapshotProvider(config.data.snapshot)
    return lazy_resolver(dataset.movies, dataset.id_map, provider, client, cache)


# --- subcommands ------------------------------------------------------------------


def cmd_ingest(args, config: AppConfig) -> int:
    dataset = _load(config)
    _print_header(args, config, dataset)
    print(f"ratings: {len(dataset.ratings)}")
    print(f"movies: {len(dataset.movies)}")
    print(f"users: {len(dataset.user_ids())}")
    print(f"fingerprint: {dataset.fingerprint()}")
    return 0


def cmd_gen_data(args, config: AppConfig) -> int:
    if args.synth:
        out = Path(config.data.ratings).parent
        generate_corpus(out, seed=config.seed)
        print(f"# synthesized corpus in {out}")
    dataset = _load(config)
    _print_header(args, config, dataset)
    client = _client_for(config, args.llm)
    cache = MetaCache(config.cache.metadata)
    provider = SnapshotProvider(config.data.snapshot)
    resolved, failures = resolve_all(
        dataset.movies.values(), dataset.id_map, provider, client, cache
    )
    print(f"metadata resolved: {len(resolved)}  failures: {len(failures)}")
    for movie_id, message in sorted(failures.items()):
        print(f"  movie {movie_id}: {message}")

    profiles = []
    for user in dataset.user_ids():
        profiles.append(
            build_auto_profile(
                user,
                dataset.user_ratings(user),
                dataset.movies,
                resolved.get,
                current_year=config.current_year,
                rating_threshold=config.thresholds.rating_pref,
                popularity_threshold=config.thresholds.popularity_pref,
            )
        )
    Path(config.cache.profiles).parent.mkdir(parents=True, exist_ok=True)
    write_profiles_jsonl(profiles, config.cache.profiles)
    print(f"profiles written: {len(profiles)} -> {config.cache.profiles}")
    return 0


def _train_config(args, config: AppConfig) -> TrainConfig:
    overrides = {}
    if args.factors is not None:
        overrides["factors"] = args.factors
    if args.epochs is not None:
        overrides["epochs"] = args.epochs
    if args.lr is not None:
        overrides["learning_rate"] = args.lr
    if args.reg is not None:
        overrides["regularization"] = args.reg
    return TrainConfig(seed=config.seed, **overrides)


def cmd_train(args, config: AppConfig) -> int:
    dataset = _load(config)
    _print_header(args, config, dataset)
    tc = _train_config(args, config)
    model = train(dataset.ratings, tc, args.algo)
    Path(config.cache.checkpoint).parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(model, config.cache.checkpoint)
    print(f"algo: {args.algo}  factors: {tc.factors}  epochs: {tc.epochs}")
    print(f"train_rmse: {rmse(model, dataset.ratings):.6f}")
    print(f"checkpoint: {config.cache.checkpoint}")
    return 0


def cmd_recommend(args, config: AppConfig) -> int:
    dataset = _load(config)
    _print_header(args, config, dataset)
    client = _client_for(config, args.llm)
    meta_for = _meta_lookup(config, dataset, client)
    model = load_checkpoint(config.cache.checkpoint)

    if args.profile:
        with open(args.profile, encoding="utf-8") as fh:
            draft = json.load(fh)
        profile = profile_from_payload(draft, dataset.movies, config.current_year)
    elif args.user is not None:
        if args.user not in set(dataset.user_ids()):
            raise errors.MissingUser(f"user {args.user} not in dataset")
        profile = build_auto_profile(
            args.user,
            dataset.user_ratings(args.user),
            dataset.movies,
            meta_for,
            current_year=config.current_year,
            rating_threshold=config.thresholds.rating_pref,
            popularity_threshold=config.thresholds.popularity_pref,
        )
    else:
        raise errors.UsageError("recommend needs --user or --profile")

    spec = PoolSpec(n=args.n, t=config.pool.t, m=config.pool.m)
    score_cache = ScoreCache(config.cache.scores) if args.use_score_cache else None
    ablation = AblationFlags.from_names((args.ablate or "").split(","))
    result = recommend(
        profile, model, dataset, meta_for, spec, client,
        ablation=ablation,
        retries=config.llm.retries,
        score_cache=score_cache,
    )
    print(json.dumps(recommendation_json(result, dataset.movies), indent=2))
    return 0


def _pool_cache_key(config: AppConfig, dataset: Dataset, protocol: str, algo: str,
                    tc: TrainConfig, run_spec: PoolSpec) -> str:
    blob = json.dumps(
        {
            "protocol": protocol,
            "algo": algo,
            "train": vars(tc),
            "spec": [run_spec.n, run_spec.t, run_spec.m],
            "dataset": dataset.fingerprint(),
            "split_seed": config.seed,
        },
        sort_keys=True,
    )
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def _cached_pools(config: AppConfig, key: str) -> dict[int, list[tuple[int, float]]] | None:
    path = Path(config.cache.pools) / f"pools-{key}.json"
    if not path.is_file():
        return None
    with path.open(encoding="utf-8") as fh:
        payload = json.load(fh)
    return {
        int(user): [(int(m), float(p)) for m, p in pairs]
        for user, pairs in payload["pools"].items()
    }


def _store_pools(config: AppConfig, key: str, pools: dict[int, list[tuple[int, float]]]) -> Path:
    path = Path(config.cache.pools) / f"pools-{key}.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {"key": key, "pools": {str(u): [[m, p] for m, p in pairs] for u, pairs in pools.items()}}
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


def _evaluate(
    args, config: AppConfig, dataset: Dataset, ablation: AblationFlags
) -> tuple[EvalReport, EvalReport]:
    client = _client_for(config, args.llm)
    meta_for = _meta_lookup(config, dataset, client)
    tc = TrainConfig(seed=config.seed) if args.factors is None else TrainConfig(
        seed=config.seed, factors=args.factors, epochs=args.epochs or 20
    )
    header = {
        "config_hash": config_hash(config)[:12],
        "dataset_fingerprint": dataset.fingerprint()[:12],
        "seed": config.seed,
        "llm": args.llm or config.llm.backend,
    }

    if args.protocol == "loo":
        split = loo_split(dataset.ratings)
        try:
            ns = tuple(int(n) for n in args.ns.split(","))
        except ValueError as exc:
            raise errors.UsageError(f"bad --ns value {args.ns!r}") from exc
        run_spec = PoolSpec(n=max(max(ns), config.pool.n), t=config.pool.t, m=config.pool.m)
        key = _pool_cache_key(config, dataset, "loo", args.algo, tc, run_spec)
        pools = _cached_pools(config, key)
        if pools is None:
            model = train(split.train, tc, args.algo)
            by_user: dict[int, set[int]] = {}
            for r in split.train:
                by_user.setdefault(r.user_id, set()).add(r.movie_id)
            pools = {
                u: top_candidates(model, u, pool_size(run_spec), by_user[u])
                for u in sorted(split.held_out)
            }
            print(f"# pools cached: {_store_pools(config, key, pools)}")
        else:
            print(f"# pools reused: {key}")

        def factory(user, held):
            if (args.llm or config.llm.backend) == "mock:oracle" and held is not None:
                return OracleClient([format_title(dataset.movies[held.movie_id])])
            return client

        return run_loo_protocol(
            dataset, meta_for, factory,
            kind=args.algo, spec=config.pool, ns=ns,
            chr_threshold=config.thresholds.chr, ablation=ablation,
            retries=config.llm.retries, current_year=config.current_year,
            split=split, pools=pools, header=header,
        )[:2]

    split = stratified_split(dataset.ratings, seed=config.seed)
    run_spec = PoolSpec(n=max(args.k, config.pool.n), t=config.pool.t, m=config.pool.m)
    key = _pool_cache_key(config, dataset, "ranking", args.algo, tc, run_spec)
    pools = _cached_pools(config, key)
    if pools is None:
        model = train(split.train, tc, args.algo)
        by_user = {}
        for r in split.train:
            by_user.setdefault(r.user_id, set()).add(r.movie_id)
        test_users = sorted({r.user_id for r in split.test} & set(by_user))
        pools = {
            u: top_candidates(model, u, pool_size(run_spec), by_user[u])
            for u in test_users
        }
        print(f"# pools cached: {_store_pools(config, key, pools)}")
    else:
        print(f"# pools reused: {key}")

    return run_ranking_protocol(
        dataset, meta_for, lambda u, h: client,
        kind=args.algo, spec=config.pool, k=args.k, seed=config.seed,
        ablation=ablation, retries=config.llm.retries,
        current_year=config.current_year, split=split, pools=pools, header=header,
    )


def cmd_evaluate(args, config: AppConfig) -> int:
    dataset = _load(config)
    _print_header(args, config, dataset)
    base, enhanced = _evaluate(args, config, dataset, AblationFlags())
    print(render_comparison(base, enhanced))
    if args.json:
        Path(args.json).write_text(
            json.dumps({"base": base.to_json_dict(), "enhanced": enhanced.to_json_dict()}, indent=2),
            encoding="utf-8",
        )
        print(f"# report written: {args.json}")
    return 0


def cmd_ablate(args, config: AppConfig) -> int:
    dataset = _load(config)
    _print_header(args, config, dataset)
    rows = []
    _, full = _evaluate(args, config, dataset, AblationFlags())
    rows.append(("none", full))
    for flag in AblationFlags.named():
        _, dropped = _evaluate(args, config, dataset, AblationFlags(**{flag: True}))
        rows.append((flag, dropped))
    metric = "hr@10" if args.protocol == "loo" else f"ndcg@{args.k}"
    print(f"{'dropped':<24}{metric:>12}")
    for name, report in rows:
        value = report.metrics().get(metric, 0.0)
        print(f"{name:<24}{value:>12.6f}")
    return 0


def cmd_serve(args, config: AppConfig) -> int:
    import uvicorn

    from .service import build_state, create_app

    state = build_state(config, llm_spec=args.llm)
    app = create_app(state)
    _print_header(args, config, state.dataset)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cinerank",
        description="Matrix-factorization recommendations re-ranked by LLM similarity scores.",
    )
    parser.add_argument("--config", help="path to a TOML config file")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("ingest", help="validate and fingerprint the dataset")

    p = sub.add_parser("gen-data", help="resolve metadata and generate user profiles")
    p.add_argument("--llm", help="llm backend override, e.g. mock:neutral or http")
    p.add_argument("--synth", action="store_true",
                   help="synthesize a corpus into the data directory first")

    p = sub.add_parser("train", help="fit a factor model and write a checkpoint")
    p.add_argument("--algo", choices=[SVD, SVDPP], default=SVD)
    p.add_argument("--factors", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--reg", type=float)

    p = sub.add_parser("recommend", help="top-N recommendations for a user or manual profile")
    p.add_argument("--user", type=int)
    p.add_argument("--profile", help="path to a manual profile JSON draft")
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--llm")
    p.add_argument("--ablate", help="comma-separated ablation flags")
    p.add_argument("--use-score-cache", action="store_true")

    for name in ("evaluate", "ablate"):
        p = sub.add_parser(name, help=f"{name} base vs LLM-enhanced recommendations")
        p.add_argument("--protocol", choices=["loo", "ranking"], default="loo")
        p.add_argument("--algo", choices=[SVD, SVDPP], default=SVD)
        p.add_argument("--llm")
        p.add_argument("--ns", default="1,5,10", help="loo cutoffs, comma separated")
        p.add_argument("--k", type=int, default=10, help="ranking cutoff")
        p.add_argument("--factors", type=int)
        p.add_argument("--epochs", type=int)
        if name == "evaluate":
            p.add_argument("--json", help="also write the report as JSON here")

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--llm")

    return parser


_COMMANDS = {
    "ingest": cmd_ingest,
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "recommend": cmd_recommend,
    "evaluate": cmd_evaluate,
    "ablate": cmd_ablate,
    "serve": cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config)
        return _COMMANDS[args.command](args, config)
    except Exception as exc:  # noqa: BLE001 - single reporting funnel
        print(_error_line(exc), file=sys.stderr)
        return 2 if isinstance(exc, errors.UsageError) else 1


if __name__ == "__main__":
    sys.exit(main())
