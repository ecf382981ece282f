"""HTTP service over the recommender.

Routes live under /api/v1 and speak plain JSON. The service treats the
dataset and checkpoint as read-only; only the metadata and score caches
may grow while it runs. Domain errors map to structured bodies:
{"error": <class name>, "message": <text>} with 400 for bad requests,
404 for unknown ids, and 503 when an upstream dependency is down.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .config import AppConfig, config_hash
from .data import Dataset, MovieRecord, format_title, load_dataset
from .errors import (
    CinerankError,
    EmptyProfile,
    InvalidRange,
    MissingUser,
    NoCandidates,
    ProviderUnavailable,
    TransportError,
    UsageError,
)
from .llm import client_from_spec
from .metadata import MetaCache, SnapshotProvider, lazy_resolver, title_similarity
from .mf import MfModel, load_checkpoint
from .profiles import AblationFlags, build_auto_profile, profile_from_payload
from .rerank import PoolSpec, recommend, recommendation_json

SEARCH_LIMIT = 10
MIN_SEARCH_SCORE = 0.3

_STATUS_FOR = (
    (TransportError, 503),
    (ProviderUnavailable, 503),
    (UsageError, 400),
    (InvalidRange, 400),
    (EmptyProfile, 400),
    (MissingUser, 400),
    (NoCandidates, 400),
)


@dataclass
class ServiceState:
    """Shared request-handler context; dataset and model never change."""

    config: AppConfig
    dataset: Dataset
    model: MfModel
    meta_for: Callable
    client: object


def build_state(config: AppConfig, llm_spec: str | None = None) -> ServiceState:
    """Load everything the service needs up front: dataset, checkpoint,
    metadata resolver, and the LLM client named by llm_spec (falling back
    to the configured backend)."""
    dataset = load_dataset(
        config.data.ratings,
        config.data.movies,
        config.data.links,
        current_year=config.current_year,
    )
    model = load_checkpoint(config.cache.checkpoint)
    client = client_from_spec(
        llm_spec or config.llm.backend,
        {
            "base_url": config.llm.base_url,
            "model": config.llm.model,
            "mode": config.llm.mode,
            "api_key_env": config.llm.api_key_env,
            "in_flight_cap": config.llm.in_flight_cap,
        },
    )
    meta_for = lazy_resolver(
        dataset.movies,
        dataset.id_map,
        SnapshotProvider(config.data.snapshot),
        client,
        MetaCache(config.cache.metadata),
    )
    return ServiceState(config, dataset, model, meta_for, client)


def _movie_json(record: MovieRecord) -> dict:
    return {
        "movie_id": record.movie_id,
        "title": format_title(record),
        "year": record.release_year,
        "genres": list(record.genres),
    }


def _search_score(query: str, record: MovieRecord) -> float:
    sim = max(
        title_similarity(query, record.title),
        title_similarity(query, format_title(record)),
    )
    if len(query) >= 3 and query.casefold() in record.title.casefold():
        sim = max(sim, 0.8)
    return sim


def _not_found(message: str) -> JSONResponse:
    return JSONResponse(status_code=404, content={"error": "NotFound", "message": message})


async def _json_body(request: Request) -> dict:
    try:
        payload = await request.json()
    except Exception as exc:
        raise UsageError("request body must be valid JSON") from exc
    if not isinstance(payload, dict):
        raise UsageError("request body must be a JSON object")
    return payload


def _parse_ablation(raw) -> AblationFlags:
    if raw is None:
        return AblationFlags()
    if isinstance(raw, str):
        raw = raw.split(",")
    if not isinstance(raw, list) or not all(isinstance(x, str) for x in raw):
        raise UsageError("ablation must be a list of flag names")
    return AblationFlags.from_names(raw)


def create_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="cinerank", docs_url=None, redoc_url=None)
    config = state.config
    known_users = set(state.dataset.user_ids())

    @app.exception_handler(CinerankError)
    async def _domain_error(request: Request, exc: CinerankError):
        status = 500
        for cls, code in _STATUS_FOR:
            if isinstance(exc, cls):
                status = code
                break
        return JSONResponse(
            status_code=status,
            content={"error": type(exc).__name__, "message": str(exc)},
        )

    @app.get("/api/v1/health")
    async def health():
        return {
            "status": "ok",
            "algo": state.model.kind,
            "users": len(known_users),
            "movies": len(state.dataset.movies),
            "dataset_fingerprint": state.dataset.fingerprint()[:12],
            "config_hash": config_hash(config)[:12],
        }

    @app.get("/api/v1/search")
    async def search(q: str = Query("")):
        q = q.strip()
        if not q:
            raise UsageError("query parameter q must not be empty")
        scored = [
            (_search_score(q, record), record.movie_id, record)
            for record in state.dataset.movies.values()
        ]
        scored.sort(key=lambda t: (-t[0], t[1]))
        results = [
            {**_movie_json(record), "score": round(sim, 3)}
            for sim, _, record in scored[:SEARCH_LIMIT]
            if sim >= MIN_SEARCH_SCORE
        ]
        return {"query": q, "results": results}

    @app.post("/api/v1/profile")
    async def make_profile(request: Request):
        payload = await _json_body(request)
        profile = profile_from_payload(
            payload, state.dataset.movies, config.current_year
        )
        return profile.to_json_dict()

    @app.post("/api/v1/recommend")
    async def recommend_route(request: Request):
        payload = await _json_body(request)
        unknown = set(payload) - {"profile", "user_id", "n", "ablation"}
        if unknown:
            raise UsageError(f"unknown field(s): {sorted(unknown)}")

        n = payload.get("n", config.pool.n)
        if not isinstance(n, int) or isinstance(n, bool) or not 1 <= n <= 100:
            raise UsageError("n must be an integer in [1, 100]")
        ablation = _parse_ablation(payload.get("ablation"))

        if "profile" in payload:
            profile = profile_from_payload(
                payload["profile"], state.dataset.movies, config.current_year
            )
        elif "user_id" in payload:
            user_id = payload["user_id"]
            if not isinstance(user_id, int) or isinstance(user_id, bool):
                raise UsageError("user_id must be an integer")
            if user_id not in known_users:
                raise MissingUser(f"user {user_id} not in dataset")
            profile = build_auto_profile(
                user_id,
                state.dataset.user_ratings(user_id),
                state.dataset.movies,
                state.meta_for,
                current_year=config.current_year,
                rating_threshold=config.thresholds.rating_pref,
                popularity_threshold=config.thresholds.popularity_pref,
            )
        else:
            raise UsageError("request needs a profile or a user_id")

        spec = PoolSpec(n=n, t=config.pool.t, m=config.pool.m)
        result = recommend(
            profile,
            state.model,
            state.dataset,
            state.meta_for,
            spec,
            state.client,
            ablation=ablation,
            retries=config.llm.retries,
        )
        return recommendation_json(result, state.dataset.movies)

    @app.get("/api/v1/movies/{movie_id}")
    async def movie_detail(movie_id: int):
        record = state.dataset.movies.get(movie_id)
        if record is None:
            return _not_found(f"movie {movie_id} not in catalog")
        out = _movie_json(record)
        meta = state.meta_for(movie_id)
        if meta is not None:
            out["meta"] = {
                "description": meta.description,
                "imdb_rating": meta.imdb_rating,
                "popularity": meta.popularity,
                "votes": meta.votes,
                "source": meta.source,
            }
        return out

    ui_dir = Path(config.ui_dir)
    if ui_dir.is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
