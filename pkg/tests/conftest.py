import csv
from pathlib import Path

import pytest

from cinerank.data import Dataset, load_dataset


def write_csv(path: Path, header: list[str], rows: list[list]) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


def make_dataset_files(
    tmp_path: Path,
    ratings: list[list],
    movies: list[list],
    links: list[list],
) -> tuple[Path, Path, Path]:
    rp = write_csv(tmp_path / "ratings.csv", ["userId", "movieId", "rating", "timestamp"], ratings)
    mp = write_csv(tmp_path / "movies.csv", ["movieId", "title", "genres"], movies)
    lp = write_csv(tmp_path / "links.csv", ["movieId", "imdbId", "tmdbId"], links)
    return rp, mp, lp


@pytest.fixture
def tiny_dataset(tmp_path) -> Dataset:
    """Three users, four movies, seven ratings. Small enough to verify by hand."""
    ratings = [
        [1, 10, 4.0, 100],
        [1, 20, 3.5, 200],
        [1, 30, 5.0, 300],
        [2, 10, 2.0, 150],
        [2, 40, 4.5, 250],
        [3, 20, 1.0, 175],
        [3, 30, 3.0, 275],
    ]
    movies = [
        [10, "Alpha Strike (1999)", "Action|Thriller"],
        [20, "Beta Dreams (2005)", "Drama"],
        [30, "Gamma Quest (2010)", "Adventure|Fantasy"],
        [40, "Delta Files", "(no genres listed)"],
    ]
    links = [
        [10, "0000010", "110"],
        [20, "0000020", "120"],
        [30, "0000030", "130"],
        [40, "", "140"],
    ]
    rp, mp, lp = make_dataset_files(tmp_path, ratings, movies, links)
    return load_dataset(rp, mp, lp)
