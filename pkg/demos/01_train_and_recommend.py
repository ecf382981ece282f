"""Train a factor model on a small corpus, then re-rank one user's pool.

Walks the core loop end to end: synthetic ratings in, SVD by SGD, a
100-item candidate pool, and an LLM-style re-rank using the bundled
feature-linear mock so everything runs offline.

    python demos/01_train_and_recommend.py
"""

import tempfile
from pathlib import Path

from cinerank import (
    PoolSpec,
    TrainConfig,
    build_auto_profile,
    format_title,
    generate_corpus,
    load_dataset,
    pool_size,
    recommend,
    rmse,
    top_candidates,
    train,
)
from cinerank.llm import FeatureLinearClient, ScriptedClient
from cinerank.metadata import SnapshotProvider, lazy_resolver

root = Path(tempfile.mkdtemp(prefix="cinerank-demo-"))
paths = generate_corpus(root, seed=3, n_users=60, n_movies=600, n_ratings=5000)
dataset = load_dataset(paths.ratings, paths.movies, paths.links)
print(f"corpus: {len(dataset.ratings)} ratings, {len(dataset.movies)} movies, "
      f"{len(dataset.user_ids())} users")

config = TrainConfig(factors=32, epochs=12, seed=3)
model = train(dataset.ratings, config, "svd")
print(f"trained svd: {config.factors} factors, {config.epochs} epochs, "
      f"train rmse {rmse(model, dataset.ratings):.4f}\n")

user = sorted(dataset.user_ids())[0]
rated = dataset.user_rated_items(user)
print(f"user {user} rated {len(rated)} movies; raw top 5 by predicted rating:")
for movie_id, pred in top_candidates(model, user, 5, rated):
    print(f"  {pred:5.2f}  {format_title(dataset.movies[movie_id])}")

# metadata resolves lazily out of the snapshot; description generation is
# scripted so the demo never needs a live model server
meta_for = lazy_resolver(
    dataset.movies, dataset.id_map, SnapshotProvider(paths.snapshot),
    ScriptedClient(["A slow-burning story of leaving and returning."]), cache=None,
)
profile = build_auto_profile(user, dataset.user_ratings(user), dataset.movies,
                             meta_for, current_year=2024)
print(f"\nauto profile: {profile.preference_text!r}")
print(f"  favorites: {[f.title for f in profile.favorites]}")
print(f"  years {profile.year_min}-{profile.year_max}, "
      f"rating_pref={profile.rating_pref}, popularity_pref={profile.popularity_pref}")

spec = PoolSpec(n=5, t=0.2, m=2)
result = recommend(profile, model, dataset, meta_for, spec, FeatureLinearClient())
print(f"\nre-ranked top {len(result.items)} out of a pool of {pool_size(spec)} "
      f"(scored in {result.timing.llm_ms:.0f} ms):")
for item in result.items:
    print(f"  sim {item.sim:+.2f}  base {item.base_pred:.2f}  "
          f"{format_title(dataset.movies[item.movie_id])}")
