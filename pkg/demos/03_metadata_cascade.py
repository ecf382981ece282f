"""Metadata resolution: cache, external-id lookup, fuzzy rescue, generation.

The corpus generator plants broken and missing catalog links on purpose,
so every branch of the cascade fires on a real example. Resolution results
land in a JSONL cache that survives across runs.

    python demos/03_metadata_cascade.py
"""

import tempfile
from collections import Counter
from pathlib import Path

from cinerank import generate_corpus, load_dataset, normalize_popularity, resolve_all
from cinerank.llm import ScriptedClient
from cinerank.metadata import MetaCache, SnapshotProvider

root = Path(tempfile.mkdtemp(prefix="cinerank-demo-"))
paths = generate_corpus(root, seed=9, n_users=40, n_movies=500, n_ratings=3200)
dataset = load_dataset(paths.ratings, paths.movies, paths.links)
provider = SnapshotProvider(paths.snapshot)
generator = ScriptedClient(["A stubborn outsider keeps an old promise."])
cache = MetaCache(root / "metadata.jsonl")

resolved, failures = resolve_all(dataset.movies.values(), dataset.id_map,
                                 provider, generator, cache)
print(f"resolved {len(resolved)} movies, {len(failures)} failures")
sources = Counter(meta.source for meta in resolved.values())
for source, count in sources.most_common():
    print(f"  via {source:<12} {count}")

def link_is_dead(record):
    external = record.external_id or dataset.id_map.external_for(record.movie_id)
    if external is None:
        return True
    rec = provider.lookup_by_external_id(external)
    return rec is None or not rec.plot.strip()


def show(label, movie_id, meta):
    record = dataset.movies[movie_id]
    print(f"\n{label}: {record.title!r} (link {record.external_id or 'missing'})")
    print(f"  source {meta.source}, rating {meta.imdb_rating}, "
          f"votes {meta.votes}, popularity {meta.popularity}")
    print(f"  {meta.description[:90]}")


# one example per cascade branch: a healthy id lookup, a fuzzy rescue of a
# dead link, and a last-resort generated description
healthy = next(m for m, meta in sorted(resolved.items())
               if meta.source == "provider" and not link_is_dead(dataset.movies[m]))
rescued = next(m for m, meta in sorted(resolved.items())
               if meta.source == "provider" and link_is_dead(dataset.movies[m]))
invented = next(m for m, meta in sorted(resolved.items()) if meta.source == "generated")
show("id lookup", healthy, resolved[healthy])
show("fuzzy rescue", rescued, resolved[rescued])
show("generated", invented, resolved[invented])

# popularity is a saturating linear map of the vote count
print("\npopularity normalization:")
for votes in (0, 250_000, 799_000, 1_000_000, 3_500_000):
    print(f"  {votes:>9,} votes -> {normalize_popularity(votes):5.1f}")

# second pass is pure cache hits: the provider and generator stay cold
quiet = ScriptedClient(["must never be called"])
again, _ = resolve_all(dataset.movies.values(), dataset.id_map,
                       SnapshotProvider(paths.snapshot), quiet, cache)
print(f"\nre-run from cache: {len(again)} resolved, "
      f"generator calls this pass: {quiet.calls}")
