"""MovieLens-format dataset loading and ID mapping.

Reads the three-file CSV layout (ratings/movies/links), validates every row,
and exposes immutable views: the rating list, the movie catalog, and the
internal-to-external ID map.
"""

from __future__ import annotations

import csv
import hashlib
import re
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

from .errors import DanglingReference, MalformedRow, MissingFile

RATINGS_HEADER = ["userId", "movieId", "rating", "timestamp"]
MOVIES_HEADER = ["movieId", "title", "genres"]
LINKS_HEADER = ["movieId", "imdbId", "tmdbId"]

EARLIEST_RELEASE_YEAR = 1874
NO_GENRES = "(no genres listed)"

_TITLE_YEAR_RE = re.compile(r"^(?P<title>.*?)\s*\((?P<year>\d{4})\)\s*$")


@dataclass(frozen=True)
class Rating:
    user_id: int
    movie_id: int
    value: float
    timestamp: int


@dataclass(frozen=True)
class MovieRecord:
    movie_id: int
    title: str
    release_year: int | None
    genres: frozenset[str]
    external_id: str | None


@dataclass(frozen=True)
class IdMap:
    forward: dict[int, str]
    reverse: dict[str, int]

    def external_for(self, movie_id: int) -> str | None:
        return self.forward.get(movie_id)

    def movie_for(self, external_id: str) -> int | None:
        return self.reverse.get(external_id)


@dataclass
class Dataset:
    """Loaded dataset: immutable after construction."""

    ratings: list[Rating]
    movies: dict[int, MovieRecord]
    id_map: IdMap
    _by_user: dict[int, list[Rating]] = field(init=False, repr=False)

    def __post_init__(self):
        by_user: dict[int, list[Rating]] = {}
        for r in self.ratings:
            by_user.setdefault(r.user_id, []).append(r)
        self._by_user = by_user

    def user_ids(self) -> list[int]:
        return sorted(self._by_user)

    def user_ratings(self, user_id: int) -> list[Rating]:
        return list(self._by_user.get(user_id, []))

    def user_rated_items(self, user_id: int) -> set[int]:
        """Movie IDs the user rated; empty set for an unknown user."""
        return {r.movie_id for r in self._by_user.get(user_id, [])}

    def fingerprint(self) -> str:
        return dataset_fingerprint(self.ratings)


def parse_title_year(raw_title: str, current_year: int | None = None) -> tuple[str, int | None]:
    """Split a trailing "(YYYY)" from a title into (title, year).

    Years outside the plausible release window are kept as part of
    the title rather than treated as a release year.
    """
    current_year = current_year or date.today().year
    m = _TITLE_YEAR_RE.match(raw_title)
    if m:
        year = int(m.group("year"))
        if EARLIEST_RELEASE_YEAR <= year <= current_year:
            return m.group("title"), year
    return raw_title.strip(), None


def parse_genres(raw: str) -> frozenset[str]:
    if not raw or raw == NO_GENRES:
        return frozenset()
    return frozenset(g for g in raw.split("|") if g)


def _open_csv(path: str | Path, expected_header: list[str]):
    path = Path(path)
    if not path.is_file():
        raise MissingFile(str(path))
    fh = path.open(newline="", encoding="utf-8")
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        fh.close()
        raise MalformedRow(1, f"{path.name}: empty file, expected header {expected_header}")
    if header != expected_header:
        fh.close()
        raise MalformedRow(1, f"{path.name}: bad header {header!r}, expected {expected_header}")
    return fh, reader


def _load_ratings(path: str | Path) -> list[Rating]:
    fh, reader = _open_csv(path, RATINGS_HEADER)
    ratings: list[Rating] = []
    seen: set[tuple[int, int]] = set()
    with fh:
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 4:
                raise MalformedRow(lineno, f"expected 4 fields, got {len(row)}")
            try:
                user_id = int(row[0])
                movie_id = int(row[1])
                value = float(row[2])
                timestamp = int(row[3])
            except ValueError as exc:
                raise MalformedRow(lineno, str(exc)) from exc
            if not (0.5 <= value <= 5.0) or (value * 2) != int(value * 2):
                raise MalformedRow(lineno, f"rating {value} not on the 0.5..5.0 half-step scale")
            key = (user_id, movie_id)
            if key in seen:
                raise MalformedRow(lineno, f"duplicate rating for user {user_id}, movie {movie_id}")
            seen.add(key)
            ratings.append(Rating(user_id, movie_id, value, timestamp))
    return ratings


def _load_movies(path: str | Path, current_year: int | None) -> dict[int, tuple[str, int | None, frozenset[str]]]:
    fh, reader = _open_csv(path, MOVIES_HEADER)
    movies: dict[int, tuple[str, int | None, frozenset[str]]] = {}
    with fh:
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 3:
                raise MalformedRow(lineno, f"expected 3 fields, got {len(row)}")
            try:
                movie_id = int(row[0])
            except ValueError as exc:
                raise MalformedRow(lineno, str(exc)) from exc
            if movie_id in movies:
                raise MalformedRow(lineno, f"duplicate movie id {movie_id}")
            title, year = parse_title_year(row[1], current_year)
            movies[movie_id] = (title, year, parse_genres(row[2]))
    return movies


def _load_links(path: str | Path) -> dict[int, str]:
    fh, reader = _open_csv(path, LINKS_HEADER)
    links: dict[int, str] = {}
    seen_external: set[str] = set()
    with fh:
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 3:
                raise MalformedRow(lineno, f"expected 3 fields, got {len(row)}")
            try:
                movie_id = int(row[0])
            except ValueError as exc:
                raise MalformedRow(lineno, str(exc)) from exc
            external = row[1].strip()
            if not external:
                continue
            if external in seen_external:
                raise MalformedRow(lineno, f"duplicate external id {external!r}")
            seen_external.add(external)
            links[movie_id] = external
    return links


def load_dataset(
    ratings_path: str | Path,
    movies_path: str | Path,
    links_path: str | Path,
    current_year: int | None = None,
) -> Dataset:
    """Load the three MovieLens CSVs into an immutable Dataset.

    Raises MissingFile, MalformedRow (with line number), or
    DanglingReference when a rating points at an unknown movie.
    """
    raw_movies = _load_movies(movies_path, current_year)
    links = _load_links(links_path)
    ratings = _load_ratings(ratings_path)

    movies = {
        mid: MovieRecord(mid, title, year, genres, links.get(mid))
        for mid, (title, year, genres) in raw_movies.items()
    }
    for r in ratings:
        if r.movie_id not in movies:
            raise DanglingReference(f"rating for user {r.user_id} references unknown movie {r.movie_id}")

    forward = {mid: rec.external_id for mid, rec in movies.items() if rec.external_id is not None}
    reverse = {ext: mid for mid, ext in forward.items()}
    return Dataset(ratings=ratings, movies=movies, id_map=IdMap(forward, reverse))


def format_title(record: MovieRecord) -> str:
    """Render a catalog title back to the "Title (Year)" convention."""
    if record.release_year is None:
        return record.title
    return f"{record.title} ({record.release_year})"


def write_dataset(dataset: Dataset, out_dir: str | Path) -> None:
    """Serialize a dataset back to the three-file CSV layout."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "ratings.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(RATINGS_HEADER)
        for r in dataset.ratings:
            w.writerow([r.user_id, r.movie_id, _format_rating(r.value), r.timestamp])
    with (out / "movies.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(MOVIES_HEADER)
        for mid in sorted(dataset.movies):
            rec = dataset.movies[mid]
            genres = "|".join(sorted(rec.genres)) if rec.genres else NO_GENRES
            w.writerow([mid, format_title(rec), genres])
    with (out / "links.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(LINKS_HEADER)
        for mid in sorted(dataset.movies):
            rec = dataset.movies[mid]
            w.writerow([mid, rec.external_id or "", ""])


def _format_rating(value: float) -> str:
    return f"{value:g}"


def dataset_fingerprint(ratings: list[Rating]) -> str:
    """Content hash over the rating stream, for checkpoint/cache invalidation."""
    h = hashlib.sha256()
    for r in ratings:
        h.update(f"{r.user_id}:{r.movie_id}:{r.value:g}:{r.timestamp}\n".encode())
    return h.hexdigest()
