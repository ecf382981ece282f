"""Evaluation protocols: leave-one-out hit rates and stratified ranking metrics.

Leave-one-out holds back each eligible user's most recent rating, asks for
recommendations with that movie eligible, and counts how often it lands in
the top N. The ranking protocol splits per item 75/25 and scores the top-K
lists with NDCG/MAP/Precision/Recall against test-set membership.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .data import Dataset, Rating
from .errors import EmptyFilteredSet, KeyMismatch, MissingUser
from .llm import DEFAULT_RETRIES
from .metadata import MovieMeta
from .mf import MfModel, TrainConfig, predict, top_candidates, train
from .profiles import AblationFlags, build_auto_profile
from .rerank import PoolSpec, TimingSummary, pool_size, recommend

CHR_THRESHOLD = 4.0
INFINITY_MARKER = "∞"


# --- splits -------------------------------------------------------------------


@dataclass(frozen=True)
class LooSplit:
    train: list[Rating]
    held_out: dict[int, Rating]


def loo_split(ratings: Sequence[Rating], seed: int = 0) -> LooSplit:
    """Hold out each eligible user's most recent rating.

    Eligible users have at least two ratings. Recency ties break toward the
    larger movie_id. The policy is fully deterministic; `seed` is accepted
    for interface symmetry with stratified_split but has no effect.
    """
    by_user: dict[int, list[Rating]] = {}
    for r in ratings:
        by_user.setdefault(r.user_id, []).append(r)
    held_out: dict[int, Rating] = {}
    for user, user_ratings in by_user.items():
        if len(user_ratings) < 2:
            continue
        held_out[user] = max(user_ratings, key=lambda r: (r.timestamp, r.movie_id))
    held_set = {(r.user_id, r.movie_id) for r in held_out.values()}
    train_part = [r for r in ratings if (r.user_id, r.movie_id) not in held_set]
    return LooSplit(train=train_part, held_out=held_out)


@dataclass(frozen=True)
class StratifiedSplit:
    train: list[Rating]
    test: list[Rating]


def stratified_split(
    ratings: Sequence[Rating], seed: int = 0, test_fraction: float = 0.25
) -> StratifiedSplit:
    """Per-item split: floor(test_fraction * count) to test, at least one
    when the item has two or more ratings; singleton items stay in train."""
    by_item: dict[int, list[int]] = {}
    for idx, r in enumerate(ratings):
        by_item.setdefault(r.movie_id, []).append(idx)
    rng = np.random.default_rng(seed)
    test_idx: set[int] = set()
    for movie_id in sorted(by_item):
        indices = by_item[movie_id]
        if len(indices) < 2:
            continue
        n_test = max(1, int(math.floor(test_fraction * len(indices))))
        picked = rng.permutation(len(indices))[:n_test]
        test_idx.update(indices[k] for k in picked)
    train_part = [r for i, r in enumerate(ratings) if i not in test_idx]
    test_part = [r for i, r in enumerate(ratings) if i in test_idx]
    return StratifiedSplit(train=train_part, test=test_part)


# --- hit rates ------------------------------------------------------------------


def hit_rate(
    recommendations: Mapping[int, Sequence[int]],
    held_out: Mapping[int, Rating],
    n: int,
) -> float:
    """Fraction of users whose held-out movie appears in their top n."""
    if not held_out:
        raise EmptyFilteredSet("no held-out ratings")
    hits = 0
    for user, rating in held_out.items():
        if user not in recommendations:
            raise MissingUser(f"no recommendations for user {user}")
        if rating.movie_id in recommendations[user][:n]:
            hits += 1
    return hits / len(held_out)


def cumulative_hit_rate(
    recommendations: Mapping[int, Sequence[int]],
    held_out: Mapping[int, Rating],
    n: int,
    threshold: float = CHR_THRESHOLD,
) -> float:
    """hit_rate restricted to held-out ratings at or above the threshold."""
    filtered = {u: r for u, r in held_out.items() if r.value >= threshold}
    if not filtered:
        raise EmptyFilteredSet(f"no held-out rating >= {threshold}")
    return hit_rate(recommendations, filtered, n)


# --- ranking metrics -------------------------------------------------------------


@dataclass(frozen=True)
class RankingMetrics:
    ndcg: float
    map: float
    precision: float
    recall: float
    users: int


def _user_ranking_metrics(
    ranked: Sequence[int], relevant: set[int], k: int
) -> tuple[float, float, float, float]:
    top = list(ranked[:k])
    hit_ranks = [i + 1 for i, m in enumerate(top) if m in relevant]
    dcg = sum(1.0 / math.log2(rank + 1) for rank in hit_ranks)
    ideal_slots = min(k, len(relevant))
    idcg = sum(1.0 / math.log2(rank + 1) for rank in range(1, ideal_slots + 1))
    ndcg = dcg / idcg if idcg > 0 else 0.0
    ap = (
        sum(count / rank for count, rank in enumerate(hit_ranks, start=1)) / ideal_slots
        if ideal_slots
        else 0.0
    )
    precision = len(hit_ranks) / k
    recall = len(hit_ranks) / len(relevant)
    return ndcg, ap, precision, recall


def ranking_metrics(
    ranked: Mapping[int, Sequence[int]],
    test_sets: Mapping[int, set[int]],
    k: int = 10,
) -> RankingMetrics:
    """Average NDCG/MAP/Precision/Recall@k over users with relevant items.

    Users whose relevance set is empty are excluded from the averages.
    Accumulation runs in ascending user-id order so results are bit-stable.
    """
    users = [u for u in sorted(test_sets) if test_sets[u]]
    if not users:
        return RankingMetrics(0.0, 0.0, 0.0, 0.0, 0)
    totals = [0.0, 0.0, 0.0, 0.0]
    for user in users:
        if user not in ranked:
            raise MissingUser(f"no ranked list for user {user}")
        values = _user_ranking_metrics(ranked[user], test_sets[user], k)
        for i, v in enumerate(values):
            totals[i] += v
    n = len(users)
    return RankingMetrics(
        ndcg=totals[0] / n, map=totals[1] / n,
        precision=totals[2] / n, recall=totals[3] / n, users=n,
    )


def rmse(model: MfModel, ratings: Sequence[Rating]) -> float:
    if not ratings:
        raise EmptyFilteredSet("no ratings to score")
    total = sum((r.value - predict(model, r.user_id, r.movie_id)) ** 2 for r in ratings)
    return math.sqrt(total / len(ratings))


# --- reports ----------------------------------------------------------------------


@dataclass
class EvalReport:
    protocol: str
    variant: str
    algo: str
    users: int
    hr: dict[int, float] = field(default_factory=dict)
    chr: dict[int, float] = field(default_factory=dict)
    ndcg: float | None = None
    map: float | None = None
    precision: float | None = None
    recall: float | None = None
    k: int | None = None
    header: dict = field(default_factory=dict)
    timing: TimingSummary | None = None

    def metrics(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for n in sorted(self.hr):
            out[f"hr@{n}"] = self.hr[n]
        for n in sorted(self.chr):
            out[f"chr@{n}"] = self.chr[n]
        if self.ndcg is not None:
            out[f"ndcg@{self.k}"] = self.ndcg
            out[f"map@{self.k}"] = self.map
            out[f"precision@{self.k}"] = self.precision
            out[f"recall@{self.k}"] = self.recall
        return out

    def to_json_dict(self) -> dict:
        return {
            "protocol": self.protocol,
            "variant": self.variant,
            "algo": self.algo,
            "users": self.users,
            "metrics": self.metrics(),
            "header": self.header,
            "timing": None if self.timing is None else vars(self.timing),
        }


def improvement_report(
    enhanced: "EvalReport | Mapping[str, float]",
    base: "EvalReport | Mapping[str, float]",
) -> dict[str, float | str]:
    """Per-metric enhanced/base ratios; zero denominators yield the infinity
    marker rather than an error so whole-table reporting stays total."""
    e = enhanced.metrics() if isinstance(enhanced, EvalReport) else dict(enhanced)
    b = base.metrics() if isinstance(base, EvalReport) else dict(base)
    if e.keys() != b.keys():
        raise KeyMismatch(f"metric keys differ: {sorted(e)} vs {sorted(b)}")
    out: dict[str, float | str] = {}
    for key in e:
        out[key] = INFINITY_MARKER if b[key] == 0 else e[key] / b[key]
    return out


def _fmt(key: str, value: float) -> str:
    decimals = 6 if key.startswith(("hr@", "chr@")) else 3
    return f"{value:.{decimals}f}"


def render_comparison(base: EvalReport, enhanced: EvalReport) -> str:
    """Aligned-column text table: metric, base, enhanced, improvement ratio."""
    ratios = improvement_report(enhanced, base)
    base_m = base.metrics()
    enh_m = enhanced.metrics()
    lines = [
        f"protocol: {base.protocol}  algo: {base.algo}  users: {base.users}",
    ]
    for key, value in sorted(base.header.items()):
        lines.append(f"{key}: {value}")
    lines.append("")
    width = max(len(k) for k in base_m) + 2
    lines.append(f"{'metric':<{width}}{'base':>12}{'enhanced':>12}{'ratio':>10}")
    for key in base_m:
        ratio = ratios[key]
        ratio_text = ratio if isinstance(ratio, str) else f"{ratio:.3f}"
        lines.append(
            f"{key:<{width}}{_fmt(key, base_m[key]):>12}{_fmt(key, enh_m[key]):>12}{ratio_text:>10}"
        )
    return "\n".join(lines)


# --- protocol runners ---------------------------------------------------------------


ClientFactory = Callable[[int, Rating | None], object]


def run_loo_protocol(
    dataset: Dataset,
    meta_for: Callable[[int], MovieMeta | None],
    client_factory: ClientFactory,
    train_config: TrainConfig = TrainConfig(),
    kind: str = "svd",
    spec: PoolSpec = PoolSpec(),
    ns: Sequence[int] = (1, 5, 10),
    chr_threshold: float = CHR_THRESHOLD,
    ablation: AblationFlags = AblationFlags(),
    retries: int = DEFAULT_RETRIES,
    favorites_k: int = 3,
    current_year: int | None = None,
    model: MfModel | None = None,
    split: LooSplit | None = None,
    pools: dict[int, list[tuple[int, float]]] | None = None,
    header: dict | None = None,
) -> tuple[EvalReport, EvalReport, dict[int, list[int]], dict[int, list[int]]]:
    """Leave-one-out evaluation of base vs LLM-enhanced recommendations.

    For every eligible user the held-out movie stays eligible for
    recommendation but is excluded from the profile's favorites. Passing
    precomputed per-user candidate `pools` skips training altogether.
    Returns (base report, enhanced report, base lists, enhanced lists).
    """
    if split is None:
        split = loo_split(dataset.ratings)
    train_by_user: dict[int, list[Rating]] = {}
    for r in split.train:
        train_by_user.setdefault(r.user_id, []).append(r)

    max_n = max(max(ns), spec.n)
    run_spec = PoolSpec(n=max_n, t=spec.t, m=spec.m)
    if pools is None:
        if model is None:
            model = train(split.train, train_config, kind)
        pools = {
            user: top_candidates(
                model, user, pool_size(run_spec),
                {r.movie_id for r in train_by_user[user]},
            )
            for user in sorted(split.held_out)
        }
    base_lists: dict[int, list[int]] = {}
    enhanced_lists: dict[int, list[int]] = {}
    timings = []
    for user in sorted(split.held_out):
        held = split.held_out[user]
        rated_in_train = {r.movie_id for r in train_by_user[user]}
        profile = build_auto_profile(
            user,
            train_by_user[user],
            dataset.movies,
            meta_for,
            k=favorites_k,
            exclude=held.movie_id,
            current_year=current_year,
        )
        client = client_factory(user, held)
        result = recommend(
            profile, model, dataset, meta_for, run_spec, client,
            ablation=ablation, exclude=rated_in_train, retries=retries,
            candidates=pools[user],
        )
        base_lists[user] = [m for m, _ in pools[user][:max_n]]
        enhanced_lists[user] = [c.movie_id for c in result.items]
        timings.append(result.timing)

    def build_report(lists: dict[int, list[int]], variant: str) -> EvalReport:
        report = EvalReport(
            protocol="loo",
            variant=variant,
            algo=kind,
            users=len(split.held_out),
            header=dict(header or {}),
            timing=TimingSummary.from_timings(timings) if variant == "enhanced" else None,
        )
        for n in ns:
            report.hr[n] = hit_rate(lists, split.held_out, n)
            try:
                report.chr[n] = cumulative_hit_rate(lists, split.held_out, n, chr_threshold)
            except EmptyFilteredSet:
                pass
        return report

    return (
        build_report(base_lists, "base"),
        build_report(enhanced_lists, "enhanced"),
        base_lists,
        enhanced_lists,
    )


def run_ranking_protocol(
    dataset: Dataset,
    meta_for: Callable[[int], MovieMeta | None],
    client_factory: ClientFactory,
    train_config: TrainConfig = TrainConfig(),
    kind: str = "svd",
    spec: PoolSpec = PoolSpec(),
    k: int = 10,
    seed: int = 0,
    ablation: AblationFlags = AblationFlags(),
    retries: int = DEFAULT_RETRIES,
    favorites_k: int = 3,
    current_year: int | None = None,
    model: MfModel | None = None,
    split: StratifiedSplit | None = None,
    pools: dict[int, list[tuple[int, float]]] | None = None,
    header: dict | None = None,
) -> tuple[EvalReport, EvalReport]:
    """Item-stratified 75/25 evaluation with ranking metrics at k.

    Users with no train ratings cannot be profiled or ranked and are
    dropped; users with no test items are excluded from averages by
    ranking_metrics itself. Precomputed `pools` skip training altogether.
    """
    if split is None:
        split = stratified_split(dataset.ratings, seed)
    train_by_user: dict[int, list[Rating]] = {}
    for r in split.train:
        train_by_user.setdefault(r.user_id, []).append(r)
    test_sets: dict[int, set[int]] = {}
    for r in split.test:
        test_sets.setdefault(r.user_id, set()).add(r.movie_id)
    test_sets = {u: s for u, s in test_sets.items() if u in train_by_user}

    run_spec = PoolSpec(n=max(k, spec.n), t=spec.t, m=spec.m)
    if pools is None:
        if model is None:
            model = train(split.train, train_config, kind)
        pools = {
            user: top_candidates(
                model, user, pool_size(run_spec),
                {r.movie_id for r in train_by_user[user]},
            )
            for user in sorted(test_sets)
        }
    base_lists: dict[int, list[int]] = {}
    enhanced_lists: dict[int, list[int]] = {}
    timings = []
    for user in sorted(test_sets):
        rated_in_train = {r.movie_id for r in train_by_user[user]}
        profile = build_auto_profile(
            user,
            train_by_user[user],
            dataset.movies,
            meta_for,
            k=favorites_k,
            current_year=current_year,
        )
        client = client_factory(user, None)
        result = recommend(
            profile, model, dataset, meta_for, run_spec, client,
            ablation=ablation, exclude=rated_in_train, retries=retries,
            candidates=pools[user],
        )
        base_lists[user] = [m for m, _ in pools[user][:k]]
        enhanced_lists[user] = [c.movie_id for c in result.items][:k]
        timings.append(result.timing)

    def build_report(lists: dict[int, list[int]], variant: str) -> EvalReport:
        metrics = ranking_metrics(lists, test_sets, k)
        return EvalReport(
            protocol="ranking",
            variant=variant,
            algo=kind,
            users=metrics.users,
            ndcg=metrics.ndcg,
            map=metrics.map,
            precision=metrics.precision,
            recall=metrics.recall,
            k=k,
            header=dict(header or {}),
            timing=TimingSummary.from_timings(timings) if variant == "enhanced" else None,
        )

    return build_report(base_lists, "base"), build_report(enhanced_lists, "enhanced")
