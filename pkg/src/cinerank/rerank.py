"""Candidate-pool sizing, LLM re-ranking, and batch recommendation.

The flow per user: take the base model's top pool_size candidates (already
excluding rated items), score each against the preference profile through
the LLM gateway, then return the top N by similarity. With a neutral scorer
the similarity ties all break back to base order, so re-ranking degrades
gracefully to the base algorithm.
"""

from __future__ import annotations

import hashlib
import json
import statistics
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable

from .data import Dataset, MovieRecord
from .errors import InvalidSpec, NoCandidates, TransportError
from .llm import DEFAULT_RETRIES, build_similarity_prompt, score_similarity
from .metadata import MovieMeta
from .mf import MfModel, top_candidates
from .profiles import AblationFlags, PreferenceProfile


@dataclass(frozen=True)
class PoolSpec:
    n: int = 10
    t: float = 0.1
    m: int = 2

    def __post_init__(self):
        if self.n < 1:
            raise InvalidSpec(f"N must be >= 1, got {self.n}")
        if not 0 < self.t <= 1:
            raise InvalidSpec(f"T must be on (0, 1], got {self.t}")
        if self.m < 0 or int(self.m) != self.m:
            raise InvalidSpec(f"M must be a non-negative integer, got {self.m}")


def pool_size(spec: PoolSpec, available: int | None = None) -> int:
    """round(N * T * 10^M), never below N, never above what's available."""
    size = max(spec.n, round(spec.n * spec.t * 10**spec.m))
    if available is not None:
        size = min(size, available)
    return size


@dataclass(frozen=True)
class ScoredCandidate:
    movie_id: int
    base_pred: float
    sim: float
    attempts: int = 1

    def __post_init__(self):
        if not 0.5 <= self.base_pred <= 5.0:
            raise ValueError(f"base_pred {self.base_pred} outside [0.5, 5.0]")
        if not -1.0 <= self.sim <= 1.0:
            raise ValueError(f"sim {self.sim} outside [-1, 1]")


@dataclass(frozen=True)
class TimingStats:
    base_ms: float
    llm_ms: float
    total_ms: float


@dataclass(frozen=True)
class RecommendResult:
    user_id: int | None
    items: tuple[ScoredCandidate, ...]
    timing: TimingStats


class ScoreCache:
    """Similarity scores keyed by (profile + ablation) hash and movie id.

    Editing a profile changes the hash, so stale scores can never leak into
    a rerun.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.records: dict[str, tuple[float, int]] = {}
        self._lock = threading.Lock()
        if self.path.exists():
            with self.path.open(encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        obj = json.loads(line)
                        self.records[obj["key"]] = (obj["sim"], obj["attempts"])
                    except (ValueError, KeyError):
                        continue

    @staticmethod
    def key(profile: PreferenceProfile, flags: AblationFlags, movie_id: int) -> str:
        basis = json.dumps(
            {"profile": profile.to_json_dict(), "flags": vars(flags), "movie": movie_id},
            sort_keys=True,
        )
        return hashlib.sha256(basis.encode()).hexdigest()

    def get(self, key: str) -> tuple[float, int] | None:
        return self.records.get(key)

    def put(self, key: str, sim: float, attempts: int) -> None:
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps({"key": key, "sim": sim, "attempts": attempts}) + "\n")
            self.records[key] = (sim, attempts)


def recommend(
    profile: PreferenceProfile,
    model: MfModel,
    dataset: Dataset,
    meta_for: Callable[[int], MovieMeta | None],
    spec: PoolSpec,
    client,
    ablation: AblationFlags = AblationFlags(),
    exclude: set[int] | None = None,
    retries: int = DEFAULT_RETRIES,
    score_cache: ScoreCache | None = None,
    max_workers: int = 1,
    candidates: list[tuple[int, float]] | None = None,
) -> RecommendResult:
    """Top-N re-ranked recommendations for one profile.

    By default every movie the user already rated is excluded from the
    pool; pass `exclude` to override (evaluation protocols do). A
    precomputed `candidates` list of (movie_id, base_pred) pairs skips the
    model read entirely, which is how cached pools are replayed. Ordering:
    similarity desc, then base prediction desc, then movie_id asc.
    """
    if exclude is None:
        exclude = dataset.user_rated_items(profile.user_id) if profile.user_id is not None else set()

    t0 = time.perf_counter()
    if candidates is None:
        candidates = top_candidates(model, profile.user_id, pool_size(spec), exclude)
    t1 = time.perf_counter()
    if not candidates:
        raise NoCandidates("candidate pool is empty after exclusions")

    def score_one(pair: tuple[int, float]) -> ScoredCandidate:
        movie_id, base_pred = pair
        if score_cache is not None:
            key = ScoreCache.key(profile, ablation, movie_id)
            cached = score_cache.get(key)
            if cached is not None:
                return ScoredCandidate(movie_id, base_pred, cached[0], cached[1])
        prompt = build_similarity_prompt(
            profile, dataset.movies[movie_id], meta_for(movie_id), ablation
        )
        score = score_similarity(client, prompt, retries=retries)
        if score_cache is not None:
            score_cache.put(key, score.value, score.attempts)
        return ScoredCandidate(movie_id, base_pred, score.value, score.attempts)

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            scored = list(pool.map(score_one, candidates))
    else:
        scored = [score_one(pair) for pair in candidates]
    t2 = time.perf_counter()

    scored.sort(key=lambda c: (-c.sim, -c.base_pred, c.movie_id))
    return RecommendResult(
        user_id=profile.user_id,
        items=tuple(scored[: spec.n]),
        timing=TimingStats(
            base_ms=(t1 - t0) * 1000,
            llm_ms=(t2 - t1) * 1000,
            total_ms=(t2 - t0) * 1000,
        ),
    )


@dataclass(frozen=True)
class TimingSummary:
    """Per-user wall-clock aggregates across a batch run."""

    users: int
    mean_base_ms: float
    median_base_ms: float
    mean_llm_ms: float
    median_llm_ms: float
    mean_total_ms: float
    median_total_ms: float

    @classmethod
    def from_timings(cls, timings: list[TimingStats]) -> "TimingSummary":
        if not timings:
            return cls(0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
        base = [t.base_ms for t in timings]
        llm = [t.llm_ms for t in timings]
        total = [t.total_ms for t in timings]
        return cls(
            users=len(timings),
            mean_base_ms=statistics.mean(base),
            median_base_ms=statistics.median(base),
            mean_llm_ms=statistics.mean(llm),
            median_llm_ms=statistics.median(llm),
            mean_total_ms=statistics.mean(total),
            median_total_ms=statistics.median(total),
        )


def batch_recommend(
    profiles: Iterable[PreferenceProfile],
    model: MfModel,
    dataset: Dataset,
    meta_for: Callable[[int], MovieMeta | None],
    spec: PoolSpec,
    client,
    ablation: AblationFlags = AblationFlags(),
    retries: int = DEFAULT_RETRIES,
    score_cache: ScoreCache | None = None,
) -> tuple[dict[int, RecommendResult], dict[int, str], TimingSummary]:
    """Recommend for many users; one user's failure never sinks the batch.

    Returns (results by user, failure text by user, timing summary over
    the successful runs).
    """
    results: dict[int, RecommendResult] = {}
    failures: dict[int, str] = {}
    for profile in profiles:
        try:
            result = recommend(
                profile, model, dataset, meta_for, spec, client,
                ablation=ablation, retries=retries, score_cache=score_cache,
            )
        except (TransportError, NoCandidates) as exc:
            failures[profile.user_id] = f"{type(exc).__name__}: {exc}"
            continue
        results[profile.user_id] = result
    summary = TimingSummary.from_timings([r.timing for r in results.values()])
    return results, failures, summary


def recommendation_json(result: RecommendResult, movies: dict[int, MovieRecord]) -> dict:
    """The recommendation report shape emitted by the CLI and service."""
    return {
        "user_id": result.user_id,
        "items": [
            {
                "movie_id": c.movie_id,
                "title": movies[c.movie_id].title,
                "year": movies[c.movie_id].release_year,
                "sim": c.sim,
                "base_pred": c.base_pred,
                "rank": rank,
            }
            for rank, c in enumerate(result.items, start=1)
        ],
        "timing": {
            "base_ms": result.timing.base_ms,
            "llm_ms": result.timing.llm_ms,
            "total_ms": result.timing.total_ms,
        },
    }
