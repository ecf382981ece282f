"""Movie metadata: descriptions, external ratings, and popularity.

Resolution for a movie walks a fixed cascade: cache hit, provider lookup by
external ID, fuzzy title search against the provider, and finally LLM
description generation. Every result is written through to a JSON-lines
cache so repeated runs never re-fetch or re-generate.
"""

from __future__ import annotations

import difflib
import json
import re
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable

from .data import IdMap, MovieRecord, format_title
from .errors import MissingFile
from .llm import DEFAULT_RETRIES, generate_description

MATCH_THRESHOLD = 0.85
DESCRIPTION_CHAR_LIMIT = 600
CACHE_SCHEMA_VERSION = 1

VOTES_AT_FULL_SCORE = 1_000_000

SOURCES = ("provider", "generated", "manual")


def normalize_popularity(votes: int) -> float:
    """Linear 0-100 popularity; one million votes saturates the scale."""
    if votes < 0:
        raise ValueError("votes must be >= 0")
    return min(100.0, max(0.0, 100.0 * votes / VOTES_AT_FULL_SCORE))


@dataclass(frozen=True)
class MovieMeta:
    movie_id: int
    description: str
    imdb_rating: float | None
    votes: int | None
    popularity: float | None
    source: str

    def __post_init__(self):
        if "\n" in self.description or "\r" in self.description:
            raise ValueError("description must be a single line")
        if self.source not in SOURCES:
            raise ValueError(f"unknown source {self.source!r}")
        if self.imdb_rating is not None and not 0.0 <= self.imdb_rating <= 10.0:
            raise ValueError(f"imdb_rating {self.imdb_rating} outside [0, 10]")
        if (self.votes is None) != (self.popularity is None):
            raise ValueError("popularity present iff votes present")
        if self.votes is not None and self.popularity != normalize_popularity(self.votes):
            raise ValueError("popularity must equal normalize_popularity(votes)")

    @classmethod
    def create(
        cls,
        movie_id: int,
        description: str,
        imdb_rating: float | None = None,
        votes: int | None = None,
        source: str = "provider",
    ) -> "MovieMeta":
        return cls(
            movie_id=movie_id,
            description=description,
            imdb_rating=imdb_rating,
            votes=votes,
            popularity=None if votes is None else normalize_popularity(votes),
            source=source,
        )


@dataclass(frozen=True)
class ProviderRecord:
    external_id: str
    title: str
    year: int | None
    plot: str
    rating: float | None
    votes: int | None


class MetadataProvider:
    """Read-only, idempotent lookup interface."""

    def lookup_by_external_id(self, external_id: str) -> ProviderRecord | None:
        raise NotImplementedError

    def search_by_title(self, title: str) -> list[ProviderRecord]:
        raise NotImplementedError


_PUNCT_RE = re.compile(r"[^\w\s]")


def _normalize_title(title: str) -> str:
    return " ".join(_PUNCT_RE.sub(" ", title.casefold()).split())


def title_similarity(a: str, b: str) -> float:
    """Similarity on [0, 1] after case folding and punctuation stripping."""
    na, nb = _normalize_title(a), _normalize_title(b)
    if not na or not nb:
        return 0.0
    if na == nb:
        return 1.0
    return difflib.SequenceMatcher(None, na, nb).ratio()


class SnapshotProvider(MetadataProvider):
    """Provider backed by a local JSON-lines snapshot, keyed by external ID."""

    def __init__(self, path: str | Path):
        path = Path(path)
        if not path.is_file():
            raise MissingFile(str(path))
        self._by_id: dict[str, ProviderRecord] = {}
        self._by_title: dict[str, list[ProviderRecord]] = {}
        with path.open(encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                rec = ProviderRecord(
                    external_id=obj["external_id"],
                    title=obj["title"],
                    year=obj.get("year"),
                    plot=obj.get("plot", ""),
                    rating=obj.get("rating"),
                    votes=obj.get("votes"),
                )
                self._by_id[rec.external_id] = rec
                self._by_title.setdefault(_normalize_title(rec.title), []).append(rec)

    def __len__(self) -> int:
        return len(self._by_id)

    def lookup_by_external_id(self, external_id: str) -> ProviderRecord | None:
        return self._by_id.get(external_id)

    def search_by_title(self, title: str) -> list[ProviderRecord]:
        """Best-first matches; exact normalized-title hits shortcut the scan."""
        exact = self._by_title.get(_normalize_title(title))
        if exact:
            return list(exact)
        scored = [
            (title_similarity(title, rec.title), rec.external_id, rec)
            for rec in self._by_id.values()
        ]
        scored.sort(key=lambda t: (-t[0], t[1]))
        return [rec for sim, _, rec in scored[:5] if sim > 0]


class MetaCache:
    """Append-only JSON-lines cache; the latest line per movie_id wins."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.records: dict[int, MovieMeta] = {}
        self.warnings = 0
        self._lock = threading.Lock()
        if self.path.exists():
            self._load()

    def _load(self) -> None:
        with self.path.open(encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                    meta = MovieMeta(
                        movie_id=obj["movie_id"],
                        description=obj["description"],
                        imdb_rating=obj["imdb_rating"],
                        votes=obj["votes"],
                        popularity=obj["popularity"],
                        source=obj["source"],
                    )
                except (ValueError, KeyError, TypeError):
                    self.warnings += 1
                    continue
                self.records[meta.movie_id] = meta

    def get(self, movie_id: int) -> MovieMeta | None:
        return self.records.get(movie_id)

    def put(self, meta: MovieMeta) -> None:
        line = json.dumps({"schema_version": CACHE_SCHEMA_VERSION, **asdict(meta)})
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(line + "\n")
            self.records[meta.movie_id] = meta

    def __len__(self) -> int:
        return len(self.records)


def truncate_description(text: str, limit: int = DESCRIPTION_CHAR_LIMIT) -> str:
    """Cut overlong text at the last sentence end that fits the limit."""
    if len(text) <= limit:
        return text
    cut = text[:limit]
    ends = [cut.rfind(ch) for ch in ".!?"]
    best = max(ends)
    if best > 0:
        return cut[: best + 1]
    return cut.rstrip()


def _single_line(text: str) -> str:
    return " ".join(text.split())


def _meta_from_provider(movie_id: int, rec: ProviderRecord) -> MovieMeta:
    return MovieMeta.create(
        movie_id=movie_id,
        description=_single_line(rec.plot),
        imdb_rating=rec.rating,
        votes=rec.votes,
        source="provider",
    )


def resolve_metadata(
    movie: MovieRecord,
    id_map: IdMap,
    provider: MetadataProvider,
    llm_client,
    cache: MetaCache | None = None,
    threshold: float = MATCH_THRESHOLD,
    retries: int = DEFAULT_RETRIES,
) -> MovieMeta:
    """Resolve one movie: cache, then provider by ID, then fuzzy title
    search, then LLM generation. The result is cached before returning.

    Raises ProviderUnavailable from transient provider failures and
    GenerationFailed when the last-resort generation cannot produce text.
    """
    if cache is not None:
        hit = cache.get(movie.movie_id)
        if hit is not None:
            return hit

    meta: MovieMeta | None = None
    external = movie.external_id or id_map.external_for(movie.movie_id)
    if external is not None:
        rec = provider.lookup_by_external_id(external)
        if rec is not None and rec.plot.strip():
            meta = _meta_from_provider(movie.movie_id, rec)

    if meta is None:
        matches = provider.search_by_title(movie.title)
        if matches:
            top = matches[0]
            if top.plot.strip() and title_similarity(movie.title, top.title) >= threshold:
                meta = _meta_from_provider(movie.movie_id, top)

    if meta is None:
        text = generate_description(llm_client, format_title(movie), retries=retries)
        meta = MovieMeta.create(
            movie_id=movie.movie_id,
            description=truncate_description(text),
            source="generated",
        )

    if cache is not None:
        cache.put(meta)
    return meta


def lazy_resolver(
    movies: dict[int, MovieRecord],
    id_map: IdMap,
    provider: MetadataProvider,
    llm_client,
    cache: MetaCache | None = None,
):
    """meta_for callable that resolves cache misses on first use.

    Unknown movie ids return None instead of raising, so profile builders
    can skip them.
    """

    def meta_for(movie_id: int) -> MovieMeta | None:
        hit = cache.get(movie_id) if cache is not None else None
        if hit is not None:
            return hit
        movie = movies.get(movie_id)
        if movie is None:
            return None
        return resolve_metadata(movie, id_map, provider, llm_client, cache)

    return meta_for


def resolve_all(
    movies: Iterable[MovieRecord],
    id_map: IdMap,
    provider: MetadataProvider,
    llm_client,
    cache: MetaCache | None = None,
    max_workers: int = 4,
) -> tuple[dict[int, MovieMeta], dict[int, str]]:
    """Resolve many movies concurrently.

    Returns (resolved metadata by movie_id, error text by movie_id); a
    failure for one movie never aborts the rest.
    """
    movies = list(movies)
    resolved: dict[int, MovieMeta] = {}
    failures: dict[int, str] = {}

    def work(movie: MovieRecord):
        return movie.movie_id, resolve_metadata(movie, id_map, provider, llm_client, cache)

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        futures = {pool.submit(work, m): m.movie_id for m in movies}
        for fut, movie_id in futures.items():
            try:
                mid, meta = fut.result()
                resolved[mid] = meta
            except Exception as exc:
                failures[movie_id] = f"{type(exc).__name__}: {exc}"
    return resolved, failures
