"""cinerank: matrix-factorization movie recommendations re-ranked by LLM similarity."""

from .config import AppConfig, config_hash, load_config
from .data import Dataset, MovieRecord, Rating, format_title, load_dataset
from .errors import CinerankError
from .evaluation import (
    EvalReport,
    cumulative_hit_rate,
    hit_rate,
    improvement_report,
    loo_split,
    ranking_metrics,
    render_comparison,
    rmse,
    run_loo_protocol,
    run_ranking_protocol,
    stratified_split,
)
from .llm import (
    HttpLlmClient,
    build_similarity_prompt,
    client_from_spec,
    extract_score,
    generate_description,
    mock_backend,
    score_similarity,
)
from .metadata import (
    MetaCache,
    MovieMeta,
    SnapshotProvider,
    lazy_resolver,
    normalize_popularity,
    resolve_all,
    resolve_metadata,
)
from .mf import (
    SVD,
    SVDPP,
    MfModel,
    TrainConfig,
    load_checkpoint,
    save_checkpoint,
    top_candidates,
    train,
)
from .profiles import (
    AblationFlags,
    Favorite,
    PreferenceProfile,
    build_auto_profile,
    build_manual_profile,
    profile_from_payload,
    select_favorites,
)
from .rerank import PoolSpec, ScoreCache, pool_size, recommend, recommendation_json
from .synth import generate_corpus

__version__ = "0.1.0"

__all__ = [
    "AppConfig", "config_hash", "load_config",
    "Dataset", "MovieRecord", "Rating", "format_title", "load_dataset",
    "CinerankError",
    "EvalReport", "cumulative_hit_rate", "hit_rate", "improvement_report",
    "loo_split", "ranking_metrics", "render_comparison", "rmse",
    "run_loo_protocol", "run_ranking_protocol", "stratified_split",
    "HttpLlmClient", "build_similarity_prompt", "client_from_spec",
    "extract_score", "generate_description", "mock_backend", "score_similarity",
    "MetaCache", "MovieMeta", "SnapshotProvider", "lazy_resolver",
    "normalize_popularity", "resolve_all", "resolve_metadata",
    "SVD", "SVDPP", "MfModel", "TrainConfig", "load_checkpoint",
    "save_checkpoint", "top_candidates", "train",
    "AblationFlags", "Favorite", "PreferenceProfile", "build_auto_profile",
    "build_manual_profile", "profile_from_payload", "select_favorites",
    "PoolSpec", "ScoreCache", "pool_size", "recommend", "recommendation_json",
    "generate_corpus",
    "__version__",
]
