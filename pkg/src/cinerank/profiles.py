"""User preference profiles.

A profile carries everything the similarity prompt needs: a free-text
preference line, favorite movies, two conditional preference flags, and a
preferred release-year range. Profiles are built automatically from rating
history (threshold rules below) or manually from user-supplied parts.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, fields
from datetime import date
from pathlib import Path
from typing import Callable, Iterable, NamedTuple

from .data import MovieRecord, Rating
from .errors import EmptyProfile, InvalidRange, NoRatings, UsageError

RATING_PREF_THRESHOLD = 7.0
POPULARITY_PREF_THRESHOLD = 80.0
DEFAULT_FAVORITE_COUNT = 3
DEFAULT_YEAR_MIN = 1870

PROFILE_SCHEMA_VERSION = 1


class Favorite(NamedTuple):
    movie_id: int
    title: str
    year: int | None


@dataclass(frozen=True)
class AblationFlags:
    drop_user_text: bool = False
    drop_descriptions: bool = False
    drop_temporal: bool = False
    drop_popularity_rating: bool = False
    drop_favorites: bool = False

    @classmethod
    def named(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    @classmethod
    def from_names(cls, names: Iterable[str]) -> "AblationFlags":
        valid = set(cls.named())
        flags = {}
        for name in names:
            name = name.strip()
            if not name:
                continue
            if name not in valid:
                raise UsageError(
                    f"unknown ablation flag {name!r}; valid: {', '.join(sorted(valid))}"
                )
            flags[name] = True
        return cls(**flags)


@dataclass(frozen=True)
class PreferenceProfile:
    user_id: int | None
    preference_text: str
    favorites: tuple[Favorite, ...]
    rating_pref: bool
    popularity_pref: bool
    year_min: int
    year_max: int

    def to_json_dict(self) -> dict:
        return {
            "schema_version": PROFILE_SCHEMA_VERSION,
            "user_id": self.user_id,
            "preference_text": self.preference_text,
            "favorites": [list(f) for f in self.favorites],
            "rating_pref": self.rating_pref,
            "popularity_pref": self.popularity_pref,
            "year_min": self.year_min,
            "year_max": self.year_max,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "PreferenceProfile":
        return cls(
            user_id=obj["user_id"],
            preference_text=obj["preference_text"],
            favorites=tuple(Favorite(int(m), t, y) for m, t, y in obj["favorites"]),
            rating_pref=bool(obj["rating_pref"]),
            popularity_pref=bool(obj["popularity_pref"]),
            year_min=int(obj["year_min"]),
            year_max=int(obj["year_max"]),
        )


def select_favorites(
    ratings: Iterable[Rating], k: int, exclude: int | None = None
) -> list[int]:
    """The user's k best-loved movie IDs.

    Highest rating first; ties go to the more recently rated, then the
    smaller movie_id.
    """
    pool = [r for r in ratings if r.movie_id != exclude]
    if not pool:
        raise NoRatings("no ratings left after exclusion")
    pool.sort(key=lambda r: (-r.value, -r.timestamp, r.movie_id))
    return [r.movie_id for r in pool[:k]]


def _year_range(years: list[int], current_year: int) -> tuple[int, int]:
    if not years:
        return DEFAULT_YEAR_MIN, current_year
    lo = (min(years) // 10) * 10
    hi = min((max(years) // 10) * 10 + 10, current_year)
    return lo, hi


def _top_genres(favorite_records: list[MovieRecord], n: int = 2) -> list[str]:
    counts = Counter(g for rec in favorite_records for g in rec.genres)
    # most common first, ties alphabetical
    return [g for g, _ in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:n]]


def preference_sentence(genres: list[str]) -> str:
    if not genres:
        return ""
    if len(genres) == 1:
        return f"I enjoy {genres[0]} movies."
    return f"I enjoy {genres[0]} and {genres[1]} movies."


def build_auto_profile(
    user_id: int,
    ratings: Iterable[Rating],
    movies: dict[int, MovieRecord],
    meta_for: Callable[[int], object | None],
    k: int = DEFAULT_FAVORITE_COUNT,
    exclude: int | None = None,
    current_year: int | None = None,
    rating_threshold: float = RATING_PREF_THRESHOLD,
    popularity_threshold: float = POPULARITY_PREF_THRESHOLD,
) -> PreferenceProfile:
    """Profile from rating history.

    rating_pref: mean favorite IMDb rating >= 7.0 (absent ratings skipped).
    popularity_pref: mean favorite popularity >= 80 (absent skipped).
    Year range: decade floor of the oldest favorite up to the start of the
    decade after the newest, capped at the current year.
    """
    current_year = current_year or date.today().year
    fav_ids = select_favorites(ratings, k, exclude)
    records = [movies[m] for m in fav_ids]
    favorites = tuple(Favorite(r.movie_id, r.title, r.release_year) for r in records)

    imdb_ratings, pops = [], []
    for m in fav_ids:
        meta = meta_for(m)
        if meta is None:
            continue
        if getattr(meta, "imdb_rating", None) is not None:
            imdb_ratings.append(meta.imdb_rating)
        if getattr(meta, "popularity", None) is not None:
            pops.append(meta.popularity)

    rating_pref = bool(imdb_ratings) and sum(imdb_ratings) / len(imdb_ratings) >= rating_threshold
    popularity_pref = bool(pops) and sum(pops) / len(pops) >= popularity_threshold
    year_min, year_max = _year_range(
        [r.release_year for r in records if r.release_year is not None], current_year
    )
    return PreferenceProfile(
        user_id=user_id,
        preference_text=preference_sentence(_top_genres(records)),
        favorites=favorites,
        rating_pref=rating_pref,
        popularity_pref=popularity_pref,
        year_min=year_min,
        year_max=year_max,
    )


def validate_year_range(year_min: int, year_max: int, current_year: int) -> None:
    if year_min > year_max:
        raise InvalidRange(f"year_min {year_min} > year_max {year_max}")
    if year_min % 10 != 0:
        raise InvalidRange(f"year_min {year_min} must start a decade")
    if year_max % 10 != 0 and year_max != current_year:
        raise InvalidRange(f"year_max {year_max} must start a decade or be the current year")


def build_manual_profile(
    text: str = "",
    favorites: Iterable[Favorite] = (),
    rating_pref: bool = False,
    popularity_pref: bool = False,
    year_range: tuple[int, int] | None = None,
    user_id: int | None = None,
    current_year: int | None = None,
) -> PreferenceProfile:
    """Profile from user-supplied parts; needs at least text or favorites."""
    current_year = current_year or date.today().year
    favorites = tuple(Favorite(*f) for f in favorites)
    if not text.strip() and not favorites:
        raise EmptyProfile("a profile needs preference text or favorite movies")
    if year_range is None:
        year_range = (DEFAULT_YEAR_MIN, current_year)
    validate_year_range(year_range[0], year_range[1], current_year)
    return PreferenceProfile(
        user_id=user_id,
        preference_text=text.strip(),
        favorites=favorites,
        rating_pref=rating_pref,
        popularity_pref=popularity_pref,
        year_min=year_range[0],
        year_max=year_range[1],
    )


_PAYLOAD_FIELDS = {
    "preference_text", "favorites", "rating_pref", "popularity_pref",
    "year_min", "year_max", "user_id",
}


def profile_from_payload(
    payload: dict,
    movies: dict[int, MovieRecord],
    current_year: int | None = None,
) -> PreferenceProfile:
    """Manual profile from an untrusted JSON draft (CLI files, HTTP bodies).

    Shape errors raise UsageError; range and emptiness rules surface as
    InvalidRange / EmptyProfile from build_manual_profile.
    """
    if not isinstance(payload, dict):
        raise UsageError("profile payload must be a JSON object")
    unknown = set(payload) - _PAYLOAD_FIELDS
    if unknown:
        raise UsageError(f"unknown profile field(s): {sorted(unknown)}")

    favorite_ids = payload.get("favorites", [])
    if not isinstance(favorite_ids, list) or not all(
        isinstance(m, int) and not isinstance(m, bool) for m in favorite_ids
    ):
        raise UsageError("favorites must be a list of movie ids")
    missing = [m for m in favorite_ids if m not in movies]
    if missing:
        raise UsageError(f"unknown favorite movie id(s): {missing}")
    favorites = [
        Favorite(m, movies[m].title, movies[m].release_year) for m in favorite_ids
    ]

    def opt_int(name):
        value = payload.get(name)
        if value is None:
            return None
        if not isinstance(value, int) or isinstance(value, bool):
            raise UsageError(f"{name} must be an integer")
        return value

    def opt_bool(name):
        value = payload.get(name, False)
        if not isinstance(value, bool):
            raise UsageError(f"{name} must be a boolean")
        return value

    text = payload.get("preference_text", "")
    if not isinstance(text, str):
        raise UsageError("preference_text must be a string")
    user_id = payload.get("user_id")
    if user_id is not None and (not isinstance(user_id, int) or isinstance(user_id, bool)):
        raise UsageError("user_id must be an integer")

    current_year = current_year or date.today().year
    year_min, year_max = opt_int("year_min"), opt_int("year_max")
    year_range = None
    if year_min is not None or year_max is not None:
        year_range = (
            year_min if year_min is not None else DEFAULT_YEAR_MIN,
            year_max if year_max is not None else current_year,
        )

    return build_manual_profile(
        text=text,
        favorites=favorites,
        rating_pref=opt_bool("rating_pref"),
        popularity_pref=opt_bool("popularity_pref"),
        year_range=year_range,
        user_id=user_id,
        current_year=current_year,
    )


def write_profiles_jsonl(profiles: Iterable[PreferenceProfile], path: str | Path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for p in profiles:
            fh.write(json.dumps(p.to_json_dict()) + "\n")
            n += 1
    return n


def load_profiles_jsonl(path: str | Path) -> dict[int | None, PreferenceProfile]:
    out: dict[int | None, PreferenceProfile] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            p = PreferenceProfile.from_json_dict(json.loads(line))
            out[p.user_id] = p
    return out
