"""Deterministic synthetic corpus generator.

Emits the three-file CSV layout plus a provider snapshot at MovieLens
Latest-Small scale, with enough latent structure for factor models to
learn: users carry genre affinities, item quality correlates with the
snapshot's IMDb-style ratings, and rating traffic follows a long-tailed
popularity curve. Everything is a pure function of the seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

# Canonical catalog genre labels; lowercased they coincide with the
# vocabulary the scoring prompts use.
CANONICAL_GENRES = (
    "Action", "Adventure", "Animation", "Children", "Comedy", "Crime",
    "Documentary", "Drama", "Fantasy", "Film-Noir", "Horror", "IMAX",
    "Musical", "Mystery", "Romance", "Sci-Fi", "Thriller", "War", "Western",
)

# Common genres get proportionally more movies and more fans.
_GENRE_WEIGHTS = np.array(
    [8, 7, 4, 4, 10, 6, 3, 12, 5, 1, 5, 1, 2, 4, 7, 5, 9, 3, 2], dtype=float
)

_ADJECTIVES = (
    "Silent", "Crimson", "Forgotten", "Electric", "Midnight", "Golden",
    "Broken", "Hidden", "Savage", "Gentle", "Iron", "Paper", "Burning",
    "Frozen", "Scarlet", "Hollow", "Wandering", "Restless", "Distant",
    "Violet", "Rusty", "Glass", "Velvet", "Thundering", "Quiet", "Lonely",
    "Radiant", "Shattered", "Emerald", "Wicked", "Brave", "Pale", "Last",
    "First", "Seventh", "Endless", "Crooked", "Amber", "Ashen", "Bright",
    "Clever", "Daring", "Eager", "Fearless", "Grim", "Humble", "Jagged",
    "Kindred", "Luminous", "Mighty", "Nimble", "Obsidian", "Proud",
    "Reckless", "Sly", "Tangled", "Unseen", "Vivid", "Weary", "Zealous",
)

_NOUNS = (
    "Horizon", "Letter", "Garden", "Compass", "Symphony", "Harbor",
    "Lantern", "Voyage", "Machine", "Orchard", "Tempest", "Mirror",
    "Carnival", "Fortress", "Meadow", "Cipher", "Paradox", "Monarch",
    "Outpost", "Pilgrim", "Quarry", "Relic", "Saboteur", "Tide",
    "Umbrella", "Vagabond", "Whisper", "Zenith", "Anthem", "Beacon",
    "Cascade", "Drifter", "Echo", "Falcon", "Gambit", "Heist",
    "Illusion", "Jury", "Kingdom", "Labyrinth", "Mariner", "Nomad",
    "Oracle", "Phantom", "Quill", "Riddle", "Sentinel", "Traveler",
    "Union", "Vertigo", "Watchman", "Exile", "Yearling", "Zephyr",
    "Arcade", "Ballad", "Courier", "Dynasty", "Ember", "Frontier",
    "Glacier", "Harvest", "Inferno", "Junction", "Keeper", "Lighthouse",
    "Mosaic", "Nightfall", "Overture", "Parallel",
)

_PLACES = (
    "North", "Deep", "Old Coast", "New City", "Red Valley", "Lost Shore",
    "High Plains", "Silver Lake", "Iron Hills", "Far East", "Outer Rim",
    "Quiet Woods", "Black River", "Great Divide", "Low Country",
    "Twin Peaks", "Windward Isles", "Amber Desert", "Frozen Strait",
    "Golden Gate", "Hidden Vale", "Night Market", "Open Road",
    "Painted Canyon", "Restless Sea", "Seventh District", "Small Hours",
    "Southern Cross", "Starlit Fields", "Still Harbor", "Stone Garden",
    "Sunken Court", "Tall Grass", "Third Act", "Thousand Steps",
    "Undertow", "Velvet Curtain", "Western Reach", "White Orchard",
    "Winter Palace",
)

_PLOT_SUBJECTS = (
    "an unlikely pair of rivals", "a retired cartographer",
    "three estranged siblings", "a stubborn lighthouse keeper",
    "a touring orchestra", "an undercover archivist",
    "a crew of salvage divers", "a small-town chess club",
    "a disgraced meteorologist", "an apprentice clockmaker",
    "two feuding families", "a night-shift radio host",
    "a traveling puppeteer", "a reluctant heir",
    "an insomniac detective", "a village schoolteacher",
)

_PLOT_TURNS = (
    "everything changes after a letter arrives decades late",
    "an old debt resurfaces at the worst possible moment",
    "a storm strands everyone far from home",
    "a secret map points somewhere no one expects",
    "one wrong turn rewrites all of their plans",
    "the past refuses to stay buried",
    "a stranger's arrival divides the town",
    "a bet spirals into something much larger",
    "the truth turns out to be stranger than the rumor",
    "an heirloom goes missing on the eve of the festival",
)


@dataclass(frozen=True)
class CorpusPaths:
    root: Path
    ratings: Path
    movies: Path
    links: Path
    snapshot: Path


def _build_titles(rng: np.random.Generator, n: int) -> list[str]:
    pool = []
    for adj in _ADJECTIVES:
        for noun in _NOUNS:
            pool.append(f"The {adj} {noun}")
            pool.append(f"{adj} {noun}")
    for noun in _NOUNS:
        for place in _PLACES:
            pool.append(f"{noun} of the {place}")
    if n > len(pool):
        raise ValueError(f"title pool exhausted: {n} > {len(pool)}")
    order = rng.permutation(len(pool))
    return [pool[i] for i in order[:n]]


def _pick_distinct_absent(
    titles: list[str], candidates: np.ndarray, count: int, ceiling: float = 0.82
) -> set[int]:
    """First `count` candidate indices whose titles stay below `ceiling`
    similarity to every other catalog title.

    Comparisons are blocked on shared words: two titles built from the
    curated word lists only approach the fuzzy-match threshold when they
    share at least one content word.
    """
    from .metadata import title_similarity

    by_word: dict[str, list[int]] = {}
    for i, title in enumerate(titles):
        for word in title.lower().split():
            if len(word) >= 4:
                by_word.setdefault(word, []).append(i)

    chosen: set[int] = set()
    for raw in candidates:
        i = int(raw)
        neighbors = {
            j
            for word in titles[i].lower().split()
            if len(word) >= 4
            for j in by_word.get(word, ())
            if j != i
        }
        if all(title_similarity(titles[i], titles[j]) < ceiling for j in neighbors):
            chosen.add(i)
            if len(chosen) == count:
                return chosen
    raise ValueError("could not find enough distinct-title movies for absent records")


def _plot_for(rng: np.random.Generator, genres: tuple[str, ...]) -> str:
    subject = _PLOT_SUBJECTS[rng.integers(len(_PLOT_SUBJECTS))]
    turn = _PLOT_TURNS[rng.integers(len(_PLOT_TURNS))]
    words = [g.lower() for g in genres]
    if len(words) >= 2:
        kind = f"{words[0]} and {words[1]}"
    elif words:
        kind = words[0]
    else:
        kind = "strange little"
    return (
        f"A {kind} story following {subject}, where {turn}. "
        f"Critics called it one of the year's true originals."
    )


def _per_user_counts(
    rng: np.random.Generator, n_users: int, n_ratings: int, n_movies: int
) -> np.ndarray:
    """Long-tailed activity levels, floor 20, summing exactly to n_ratings."""
    ceiling = min(1500, n_movies)
    counts = np.clip(
        np.round(rng.lognormal(mean=4.45, sigma=0.85, size=n_users)), 20, ceiling
    ).astype(int)
    # proportional rescale toward the target, then settle the remainder
    scale = n_ratings / counts.sum()
    counts = np.clip(np.round(counts * scale), 20, ceiling).astype(int)
    diff = n_ratings - int(counts.sum())
    step = 1 if diff > 0 else -1
    idx = 0
    order = rng.permutation(n_users)
    while diff != 0:
        u = order[idx % n_users]
        candidate = counts[u] + step
        if 20 <= candidate <= ceiling:
            counts[u] = candidate
            diff -= step
        idx += 1
    return counts


def generate_corpus(
    out_dir: str | Path,
    seed: int = 0,
    n_users: int = 610,
    n_movies: int = 9742,
    n_ratings: int = 100_836,
    missing_link_rate: float = 0.015,
    broken_link_rate: float = 0.01,
    missing_record_rate: float = 0.008,
    empty_plot_rate: float = 0.004,
    extra_snapshot_records: int = 150,
) -> CorpusPaths:
    """Write ratings.csv, movies.csv, links.csv, and snapshot.jsonl.

    The link/record defect rates exercise every branch of the metadata
    cascade: absent external ids, ids pointing nowhere, records with no
    plot, and movies the provider has never heard of.
    """
    if n_ratings < 20 * n_users:
        raise ValueError("n_ratings too small for the 20-per-user floor")
    if n_movies < 50:
        raise ValueError("need at least 50 movies")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    n_genres = len(CANONICAL_GENRES)
    genre_p = _GENRE_WEIGHTS / _GENRE_WEIGHTS.sum()

    # --- movies ---------------------------------------------------------
    titles = _build_titles(rng, n_movies)
    years = np.clip(2018 - rng.gamma(shape=2.0, scale=9.0, size=n_movies), 1902, 2018)
    years = years.astype(int)
    movie_genres: list[tuple[str, ...]] = []
    genre_matrix = np.zeros((n_movies, n_genres), dtype=bool)
    for i in range(n_movies):
        k = 1 + rng.binomial(2, 0.45)
        picks = rng.choice(n_genres, size=k, replace=False, p=genre_p)
        picks = sorted(int(g) for g in picks)
        movie_genres.append(tuple(CANONICAL_GENRES[g] for g in picks))
        genre_matrix[i, picks] = True
    # a sliver of catalog oddities: unknown year, unlisted genres
    no_year = set(int(i) for i in rng.choice(n_movies, size=max(1, n_movies // 250), replace=False))
    no_genre = set(int(i) for i in rng.choice(n_movies, size=max(1, n_movies // 300), replace=False))
    for i in no_genre:
        movie_genres[i] = ()
        genre_matrix[i, :] = False

    # traffic curve: rank 0 is the most-watched movie; kept shallow enough
    # that taste, not popularity alone, decides what a user ends up rating
    rank_of = np.empty(n_movies, dtype=int)
    rank_of[rng.permutation(n_movies)] = np.arange(n_movies)
    traffic = (rank_of + 25.0) ** -0.62

    # quality drives both user enjoyment and the snapshot's critic rating.
    # Blockbusters split into prestige hits and crowd-pleasers, so heavy
    # traffic correlates with votes but only loosely with critic scores
    blockbuster = rank_of < max(4, int(0.04 * n_movies))
    quality = np.clip(rng.normal(6.8, 0.9, size=n_movies), 3.0, 9.5)
    prestige = rng.random(n_movies) < 0.5
    bb_quality = np.where(
        prestige,
        np.clip(rng.normal(7.8, 0.4, size=n_movies), 6.5, 9.5),
        np.clip(rng.normal(6.4, 0.5, size=n_movies), 5.0, 7.5),
    )
    quality = np.where(blockbuster, bb_quality, quality)
    votes = np.where(
        blockbuster,
        rng.uniform(900_000, 2_800_000, size=n_movies),
        np.exp(rng.normal(10.1, 1.3, size=n_movies)),
    )
    votes = np.clip(votes, 50, 2_800_000).astype(int)

    movie_ids = np.arange(1, n_movies + 1)
    # real ids stay below 9,000,000; broken links point into 9,000,000+
    external_ids = rng.choice(
        np.arange(1_000_000, 3_000_000), size=n_movies + extra_snapshot_records, replace=False
    )

    # --- users and ratings -------------------------------------------------
    counts = _per_user_counts(rng, n_users, n_ratings, n_movies)
    user_bias = rng.normal(0.0, 0.45, size=n_users)
    # a mainstream minority gravitates to whatever is big and rates it
    # high; everyone else follows genre taste with mild hype
    mainstream = rng.random(n_users) < 0.18
    # signed taste weights: a few loved genres, a few disliked, mild
    # indifference elsewhere; ratings are bilinear in (taste, genres)
    user_taste = np.full((n_users, n_genres), -0.05)
    for u in range(n_users):
        k_love = 1 + rng.binomial(2, 0.5)
        loved = rng.choice(n_genres, size=k_love, replace=False, p=genre_p)
        rest = np.setdiff1d(np.arange(n_genres), loved)
        hated = rng.choice(rest, size=2 + rng.integers(3), replace=False)
        user_taste[u, loved] = 1.05
        user_taste[u, hated] = -0.70

    half_steps = np.arange(0.5, 5.01, 0.5)
    start_ts = rng.integers(946_684_800, 1_483_228_800, size=n_users)  # 2000..2017
    ratings_rows: list[tuple[int, int, float, int]] = []
    for u in range(n_users):
        k = int(counts[u])
        effect = genre_matrix @ user_taste[u]
        # Gumbel top-k sample without replacement; taste enters the
        # sampling exponent so people mostly watch what they like
        traffic_pull = 2.2 if mainstream[u] else 1.0
        hype = 1.0 if mainstream[u] else 0.2
        keys = traffic_pull * np.log(traffic) + 0.9 * effect + rng.gumbel(size=n_movies)
        picked = np.argpartition(-keys, k - 1)[:k]
        picked = picked[np.argsort(-keys[picked])]

        raw = (
            3.10
            + user_bias[u]
            + 0.95 * effect[picked]
            + 0.55 * (quality[picked] - 6.8)
            + hype * blockbuster[picked]
            + rng.normal(0.0, 0.45, size=k)
        )
        values = half_steps[
            np.clip(np.round(raw / 0.5).astype(int) - 1, 0, len(half_steps) - 1)
        ]
        gaps = rng.integers(3_600, 2_592_000, size=k)
        stamps = start_ts[u] + np.cumsum(gaps)
        for m, v, t in zip(picked, values, stamps):
            ratings_rows.append((u + 1, int(movie_ids[m]), float(v), int(t)))

    # --- link defects ------------------------------------------------------
    n_defects = {
        "missing": int(round(missing_link_rate * n_movies)),
        "broken": int(round(broken_link_rate * n_movies)),
        "absent": int(round(missing_record_rate * n_movies)),
        "plotless": int(round(empty_plot_rate * n_movies)),
    }
    defect_pool = rng.permutation(n_movies)
    cursor = 0
    defects: dict[str, set[int]] = {}
    for name, size in n_defects.items():
        if name == "absent":
            continue
        defects[name] = set(int(i) for i in defect_pool[cursor : cursor + size])
        cursor += size
    # movies whose records are absent from the snapshot must not have a
    # near-lookalike title there, or fuzzy title search would "recover"
    # metadata that belongs to a different movie
    defects["absent"] = _pick_distinct_absent(
        titles, defect_pool[cursor:], n_defects["absent"]
    )
    remaining = [int(i) for i in defect_pool[cursor:] if int(i) not in defects["absent"]]
    defects["plotless"] = set(remaining[: n_defects["plotless"]])

    # --- write csv files ----------------------------------------------------
    ratings_path = out / "ratings.csv"
    with ratings_path.open("w", encoding="utf-8", newline="") as fh:
        fh.write("userId,movieId,rating,timestamp\n")
        for u, m, v, t in ratings_rows:
            value = f"{v:g}"
            fh.write(f"{u},{m},{value},{t}\n")

    def csv_quote(text: str) -> str:
        if "," in text or '"' in text:
            return '"' + text.replace('"', '""') + '"'
        return text

    movies_path = out / "movies.csv"
    with movies_path.open("w", encoding="utf-8", newline="") as fh:
        fh.write("movieId,title,genres\n")
        for i in range(n_movies):
            full = titles[i] if i in no_year else f"{titles[i]} ({years[i]})"
            genres = "|".join(movie_genres[i]) if movie_genres[i] else "(no genres listed)"
            fh.write(f"{movie_ids[i]},{csv_quote(full)},{genres}\n")

    links_path = out / "links.csv"
    with links_path.open("w", encoding="utf-8", newline="") as fh:
        fh.write("movieId,imdbId,tmdbId\n")
        for i in range(n_movies):
            if i in defects["missing"]:
                imdb = ""
            elif i in defects["broken"]:
                imdb = f"{9_000_000 + i:07d}"  # unique, points at no snapshot record
            else:
                imdb = f"{external_ids[i]:07d}"
            fh.write(f"{movie_ids[i]},{imdb},{i + 1}\n")

    snapshot_path = out / "snapshot.jsonl"
    with snapshot_path.open("w", encoding="utf-8") as fh:
        for i in range(n_movies):
            if i in defects["absent"]:
                continue
            plot = "" if i in defects["plotless"] else _plot_for(rng, movie_genres[i])
            record = {
                "external_id": f"{external_ids[i]:07d}",
                "title": titles[i],
                "year": None if i in no_year else int(years[i]),
                "plot": plot,
                "rating": round(float(quality[i]), 1),
                "votes": int(votes[i]),
            }
            fh.write(json.dumps(record) + "\n")
        for j in range(extra_snapshot_records):
            record = {
                "external_id": f"{external_ids[n_movies + j]:07d}",
                "title": f"Snapshot Extra {j + 1}",
                "year": int(1950 + (j % 60)),
                "plot": _plot_for(rng, ("Drama",)),
                "rating": 5.0,
                "votes": 1000 + j,
            }
            fh.write(json.dumps(record) + "\n")

    return CorpusPaths(
        root=out,
        ratings=ratings_path,
        movies=movies_path,
        links=links_path,
        snapshot=snapshot_path,
    )
