"""Evaluate base vs LLM-enhanced recommendations under both protocols.

Leave-one-out with hit rates, then the item-stratified 75/25 split with
ranking metrics. Two mock scorers bound the behavior: the constant scorer
must leave every metric untouched, and the feature-linear scorer (which
actually reads the profile) is allowed to move them.

    python demos/04_evaluation_protocols.py
"""

import tempfile
from pathlib import Path

from cinerank import (
    TrainConfig,
    generate_corpus,
    improvement_report,
    load_dataset,
    render_comparison,
    run_loo_protocol,
    run_ranking_protocol,
)
from cinerank.llm import ConstantClient, FeatureLinearClient, ScriptedClient
from cinerank.metadata import SnapshotProvider, lazy_resolver

root = Path(tempfile.mkdtemp(prefix="cinerank-demo-"))
paths = generate_corpus(root, seed=13, n_users=80, n_movies=700, n_ratings=7000)
dataset = load_dataset(paths.ratings, paths.movies, paths.links)
meta_for = lazy_resolver(dataset.movies, dataset.id_map,
                         SnapshotProvider(paths.snapshot),
                         ScriptedClient(["A reluctant guide crosses a closed border."]))
tc = TrainConfig(factors=24, epochs=12, seed=13)

print("=== leave-one-out, constant scorer (must tie the base exactly) ===\n")
base, enhanced, _, _ = run_loo_protocol(
    dataset, meta_for, lambda user, held: ConstantClient(0.0), train_config=tc)
print(render_comparison(base, enhanced))

print("\n=== leave-one-out, feature-linear scorer ===\n")
base, enhanced, _, _ = run_loo_protocol(
    dataset, meta_for, lambda user, held: FeatureLinearClient(), train_config=tc)
print(render_comparison(base, enhanced))

print("\n=== stratified 75/25, feature-linear scorer ===\n")
base_r, enhanced_r = run_ranking_protocol(
    dataset, meta_for, lambda user, held: FeatureLinearClient(),
    train_config=tc, k=10)
print(render_comparison(base_r, enhanced_r))

ratios = improvement_report(enhanced_r, base_r)
moved = {k: v for k, v in ratios.items() if v != 1.0}
print(f"\nmetrics moved by re-ranking: {sorted(moved)}")
