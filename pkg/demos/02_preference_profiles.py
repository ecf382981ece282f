"""Preference profiles: automatic from history, manual from a draft.

Shows how the structured profile is assembled (favorites, conditional
rating/popularity statements, decade-floored year range) and how ablation
flags strip parts of it out of the scoring prompt.

    python demos/02_preference_profiles.py
"""

import tempfile
from pathlib import Path

from cinerank import (
    AblationFlags,
    build_auto_profile,
    build_manual_profile,
    generate_corpus,
    load_dataset,
    profile_from_payload,
)
from cinerank.llm import ScriptedClient, build_similarity_prompt
from cinerank.metadata import SnapshotProvider, lazy_resolver

root = Path(tempfile.mkdtemp(prefix="cinerank-demo-"))
paths = generate_corpus(root, seed=5, n_users=40, n_movies=400, n_ratings=3200)
dataset = load_dataset(paths.ratings, paths.movies, paths.links)
meta_for = lazy_resolver(dataset.movies, dataset.id_map,
                         SnapshotProvider(paths.snapshot),
                         ScriptedClient(["An unhurried portrait of a vanished town."]))

# --- automatic: favorites are the user's top-3 ratings, thresholds decide flags
user = sorted(dataset.user_ids())[2]
auto = build_auto_profile(user, dataset.user_ratings(user), dataset.movies,
                          meta_for, current_year=2024)
print(f"auto profile for user {user}:")
print(f"  text:        {auto.preference_text!r}")
print(f"  favorites:   {[(f.title, f.year) for f in auto.favorites]}")
print(f"  year range:  {auto.year_min}-{auto.year_max}")
print(f"  rating_pref={auto.rating_pref}  popularity_pref={auto.popularity_pref}")

# --- manual: the same structure, written by hand
ids = sorted(dataset.movies)[:2]
manual = build_manual_profile(
    text="I like patient, character-driven thrillers.",
    favorites=[(m, dataset.movies[m].title, dataset.movies[m].release_year)
               for m in ids],
    rating_pref=True,
    year_range=(1990, 2020),
    current_year=2024,
)
print("\nmanual profile:")
print(f"  text:        {manual.preference_text!r}")
print(f"  favorites:   {[f.title for f in manual.favorites]}")
print(f"  year range:  {manual.year_min}-{manual.year_max}")

# --- the same thing from a JSON-ish payload, as the HTTP service receives it
payload = {
    "preference_text": "I like patient, character-driven thrillers.",
    "favorites": ids,
    "rating_pref": True,
    "year_min": 1990,
    "year_max": 2020,
}
from_payload = profile_from_payload(payload, dataset.movies, current_year=2024)
assert from_payload.preference_text == manual.preference_text

# --- ablations remove prompt components without touching the profile
candidate = next(m for m in dataset.movies if m not in ids)
meta = meta_for(candidate)
full_system, full_user = build_similarity_prompt(
    manual, dataset.movies[candidate], meta, AblationFlags())
bare_system, bare_user = build_similarity_prompt(
    manual, dataset.movies[candidate], meta,
    AblationFlags(drop_user_text=True, drop_temporal=True, drop_favorites=True))
print(f"\nfull prompt: {len(full_user)} chars; heavily ablated: {len(bare_user)} chars")
print(f"system message identical across candidates: {full_system == bare_system}")
print("\nablated prompt body:\n")
print(bare_user[-400:])
