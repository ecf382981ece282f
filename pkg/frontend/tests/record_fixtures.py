"""Record /api/v1 responses from a live in-process service into JSON fixtures.

The UI contract tests replay these instead of talking to a server, so they
stay honest about payload shapes without needing Python at npm-test time.
Regenerate after any service contract change:

    python frontend/tests/record_fixtures.py
"""

import json
from pathlib import Path

from fastapi.testclient import TestClient

from cinerank.config import load_config
from cinerank.data import Dataset, IdMap, MovieRecord, Rating
from cinerank.llm import FeatureLinearClient, HttpLlmClient
from cinerank.metadata import MovieMeta
from cinerank.mf import TrainConfig, train
from cinerank.service import ServiceState, create_app

CATALOG = [
    (1, "The Matrix", 1999, ("Action", "Sci-Fi"), 8.7, 2_100_000),
    (2, "Interstellar", 2014, ("Sci-Fi", "Drama"), 8.7, 2_300_000),
    (3, "The Godfather", 1972, ("Crime", "Drama"), 9.2, 2_100_000),
    (4, "Pulp Fiction", 1994, ("Crime", "Drama"), 8.9, 2_300_000),
    (5, "Spirited Away", 2001, ("Animation", "Fantasy"), 8.6, 900_000),
    (6, "The Dark Knight", 2008, ("Action", "Crime"), 9.0, 3_000_000),
    (7, "Alien", 1979, ("Horror", "Sci-Fi"), 8.5, 1_000_000),
    (8, "Blade Runner", 1982, ("Sci-Fi", "Thriller"), 8.1, 850_000),
    (9, "Toy Story", 1995, ("Animation", "Comedy"), 8.3, 1_100_000),
    (10, "Parasite", 2019, ("Thriller", "Drama"), 8.5, 1_000_000),
    (11, "Heat", 1995, ("Crime", "Thriller"), 8.3, 750_000),
    (12, "Arrival", 2016, ("Sci-Fi", "Drama"), 7.9, 800_000),
    (13, "Mad Max: Fury Road", 2015, ("Action", "Adventure"), 8.1, 1_100_000),
    (14, "The Social Network", 2010, ("Drama",), 7.8, 800_000),
]

DESCRIPTIONS = {
    1: "A hacker learns reality is a simulation and joins the fight to free humanity.",
    2: "Explorers travel through a wormhole seeking a new home for a dying Earth.",
    3: "An aging patriarch transfers control of his criminal empire to his son.",
    4: "Interwoven stories of Los Angeles criminals, told out of order.",
    5: "A girl must work in a bathhouse for spirits to free her parents.",
    6: "Batman faces an agent of chaos who wants to watch the city burn.",
    7: "A commercial crew is stalked by a lethal creature aboard their ship.",
    8: "A blade runner hunts rogue replicants through a rain-soaked metropolis.",
    9: "A cowboy doll feels threatened when a new space-ranger toy arrives.",
    10: "A poor family schemes its way into the household of a wealthy one.",
    11: "A master thief and a relentless detective circle each other in LA.",
    12: "A linguist races to communicate with visitors before war breaks out.",
    13: "A drifter and a rebel flee a tyrant across a post-apocalyptic desert.",
    14: "The founding of a social media empire, and the lawsuits that followed.",
}

# a few tastes: sci-fi heads, crime devotees, animation fans
RATING_ROWS = [
    (1, 1, 5.0), (1, 2, 5.0), (1, 8, 4.5), (1, 12, 4.5), (1, 7, 4.0), (1, 3, 3.0),
    (2, 3, 5.0), (2, 4, 5.0), (2, 11, 4.5), (2, 6, 4.5), (2, 1, 3.0), (2, 9, 2.5),
    (3, 5, 5.0), (3, 9, 4.5), (3, 2, 4.0), (3, 10, 3.5), (3, 6, 3.0), (3, 4, 2.0),
    (4, 2, 5.0), (4, 12, 4.5), (4, 1, 4.5), (4, 13, 4.0), (4, 7, 3.5), (4, 14, 3.0),
    (5, 6, 5.0), (5, 13, 4.5), (5, 1, 4.0), (5, 4, 4.0), (5, 11, 3.5), (5, 5, 2.5),
    (6, 10, 5.0), (6, 14, 4.5), (6, 4, 4.5), (6, 3, 4.0), (6, 12, 3.5), (6, 9, 3.0),
    (7, 7, 5.0), (7, 8, 4.5), (7, 2, 4.5), (7, 10, 4.0), (7, 13, 4.0), (7, 5, 3.0),
    (8, 9, 5.0), (8, 5, 4.5), (8, 13, 3.5), (8, 6, 3.5), (8, 14, 3.0), (8, 8, 2.5),
]


def build_state(client) -> ServiceState:
    movies = {
        mid: MovieRecord(mid, title, year, frozenset(genres), f"{mid:07d}")
        for mid, title, year, genres, _, _ in CATALOG
    }
    metas = {
        mid: MovieMeta.create(mid, DESCRIPTIONS[mid], imdb_rating=rating, votes=votes)
        for mid, _, _, _, rating, votes in CATALOG
    }
    ratings = [Rating(u, m, v, 1_000_000 + u * 1000 + m) for u, m, v in RATING_ROWS]
    dataset = Dataset(
        ratings=ratings,
        movies=movies,
        id_map=IdMap({m.movie_id: m.external_id for m in movies.values()},
                     {m.external_id: m.movie_id for m in movies.values()}),
    )
    model = train(ratings, TrainConfig(factors=4, epochs=10, seed=1), "svd")
    return ServiceState(
        config=load_config(env={}),
        dataset=dataset,
        model=model,
        meta_for=metas.get,
        client=client,
    )


DRAFT = {
    "preference_text": "Mind-bending science fiction with emotional weight.",
    "favorites": [1, 2],
    "rating_pref": True,
    "year_min": 1990,
    "year_max": 2020,
}
REFINED = dict(DRAFT, year_min=2010)
BAD = dict(DRAFT, year_min=1995)


def main() -> None:
    http = TestClient(create_app(build_state(FeatureLinearClient())))
    down = TestClient(create_app(build_state(
        HttpLlmClient(base_url="http://127.0.0.1:9", model="phi-4", timeout=0.2))))

    def record(name, method, path, body=None, client=http):
        if method == "GET":
            response = client.get(path)
        else:
            response = client.post(path, json=body)
        return name, {
            "request": {"method": method, "path": path, "body": body},
            "response": {"status": response.status_code, "body": response.json()},
        }

    entries = dict([
        record("health", "GET", "/api/v1/health"),
        record("search_matrix", "GET", "/api/v1/search?q=matrix"),
        record("search_typo", "GET", "/api/v1/search?q=interstelar"),
        record("search_no_hits", "GET", "/api/v1/search?q=zzzzqqq"),
        record("profile_valid", "POST", "/api/v1/profile", DRAFT),
        record("profile_bad_range", "POST", "/api/v1/profile", BAD),
        record("recommend_initial", "POST", "/api/v1/recommend",
               {"profile": DRAFT, "n": 5}),
        record("recommend_refined", "POST", "/api/v1/recommend",
               {"profile": REFINED, "n": 5}),
        record("recommend_bad_range", "POST", "/api/v1/recommend",
               {"profile": BAD, "n": 5}),
        record("recommend_llm_down", "POST", "/api/v1/recommend",
               {"profile": DRAFT, "n": 5}, client=down),
        record("movie_detail", "GET", "/api/v1/movies/2"),
        record("movie_missing", "GET", "/api/v1/movies/999"),
    ])

    out = Path(__file__).parent / "fixtures" / "recorded.json"
    out.parent.mkdir(exist_ok=True)
    out.write_text(json.dumps(entries, indent=2) + "\n", encoding="utf-8")
    print(f"recorded {len(entries)} exchanges -> {out}")


if __name__ == "__main__":
    main()
