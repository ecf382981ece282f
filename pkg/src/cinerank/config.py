"""Application configuration: TOML file, environment overrides, hashing.

Secrets never live in config files; the file names the environment
variable that holds the API key, and only the gateway reads it.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # 3.10
    import tomli as tomllib

from .errors import UsageError
from .rerank import PoolSpec


@dataclass(frozen=True)
class DataPaths:
    ratings: str = "data/ratings.csv"
    movies: str = "data/movies.csv"
    links: str = "data/links.csv"
    snapshot: str = "data/snapshot.jsonl"


@dataclass(frozen=True)
class CachePaths:
    metadata: str = "cache/metadata.jsonl"
    scores: str = "cache/scores.jsonl"
    pools: str = "cache/pools"
    checkpoint: str = "cache/model.npz"
    profiles: str = "cache/profiles.jsonl"


@dataclass(frozen=True)
class LlmSettings:
    backend: str = "mock:neutral"
    base_url: str = "http://localhost:8080"
    model: str = "phi-4"
    mode: str = "development"
    retries: int = 3
    in_flight_cap: int = 1
    api_key_env: str = "CINERANK_LLM_API_KEY"


@dataclass(frozen=True)
class Thresholds:
    rating_pref: float = 7.0
    popularity_pref: float = 80.0
    chr: float = 4.0

    def __post_init__(self):
        if not 0.0 <= self.rating_pref <= 10.0:
            raise UsageError(f"rating_pref threshold out of range: {self.rating_pref}")
        if not 0.0 <= self.popularity_pref <= 100.0:
            raise UsageError(f"popularity_pref threshold out of range: {self.popularity_pref}")
        if not 0.5 <= self.chr <= 5.0:
            raise UsageError(f"chr threshold out of range: {self.chr}")


@dataclass(frozen=True)
class AppConfig:
    data: DataPaths = field(default_factory=DataPaths)
    cache: CachePaths = field(default_factory=CachePaths)
    llm: LlmSettings = field(default_factory=LlmSettings)
    pool: PoolSpec = field(default_factory=PoolSpec)
    thresholds: Thresholds = field(default_factory=Thresholds)
    seed: int = 0
    current_year: int | None = None
    ui_dir: str = "frontend/dist"


ENV_PREFIX = "CINERANK"


def _coerce(value: str, target_type: type):
    if target_type is bool:
        if value.lower() in ("1", "true", "yes", "on"):
            return True
        if value.lower() in ("0", "false", "no", "off"):
            return False
        raise UsageError(f"not a boolean: {value!r}")
    return target_type(value)


def load_config(path: str | Path | None = None, env: dict | None = None) -> AppConfig:
    """Build an AppConfig from a TOML file with environment overrides.

    Any scalar field can be overridden via CINERANK_<SECTION>_<FIELD>
    (e.g. CINERANK_LLM_BASE_URL, CINERANK_POOL_N, CINERANK_RUN_SEED).
    Unknown keys in the file are rejected rather than ignored.
    """
    env = os.environ if env is None else env
    raw: dict = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise UsageError(f"config file not found: {path}")
        with path.open("rb") as fh:
            try:
                raw = tomllib.load(fh)
            except tomllib.TOMLDecodeError as exc:
                raise UsageError(f"invalid TOML in {path}: {exc}") from exc

    def section(name: str) -> dict:
        sec = raw.get(name, {})
        if not isinstance(sec, dict):
            raise UsageError(f"[{name}] must be a table")
        return dict(sec)

    def build(name: str, cls, defaults) -> object:
        values = dict(defaults)
        sec = section(name)
        for key, value in sec.items():
            if key not in values:
                raise UsageError(f"unknown key [{name}].{key}")
            values[key] = value
        for key in values:
            env_key = f"{ENV_PREFIX}_{name.upper()}_{key.upper()}"
            if env_key in env:
                values[key] = _coerce(env[env_key], type(values[key]))
        return cls(**values)

    data = build("data", DataPaths, asdict(DataPaths()))
    cache = build("cache", CachePaths, asdict(CachePaths()))
    llm = build("llm", LlmSettings, asdict(LlmSettings()))
    thresholds = build("thresholds", Thresholds, asdict(Thresholds()))
    pool = build("pool", PoolSpec, {"n": 10, "t": 0.1, "m": 2})

    run = section("run")
    known_run = {"seed": 0, "current_year": 0, "ui_dir": AppConfig.ui_dir}
    for key in run:
        if key not in known_run:
            raise UsageError(f"unknown key [run].{key}")
    known_run.update(run)
    for key in known_run:
        env_key = f"{ENV_PREFIX}_RUN_{key.upper()}"
        if env_key in env:
            known_run[key] = _coerce(env[env_key], type(known_run[key]))

    extra = set(raw) - {"data", "cache", "llm", "thresholds", "pool", "run"}
    if extra:
        raise UsageError(f"unknown config section(s): {sorted(extra)}")

    return AppConfig(
        data=data,
        cache=cache,
        llm=llm,
        pool=pool,
        thresholds=thresholds,
        seed=int(known_run["seed"]),
        current_year=int(known_run["current_year"]) or None,
        ui_dir=str(known_run["ui_dir"]),
    )


def config_hash(config: AppConfig) -> str:
    """Stable digest of everything that affects results (never secrets)."""
    payload = {
        "data": asdict(config.data),
        "llm": asdict(config.llm),
        "pool": {"n": config.pool.n, "t": config.pool.t, "m": config.pool.m},
        "thresholds": asdict(config.thresholds),
        "seed": config.seed,
        "current_year": config.current_year,
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()
