"""Tour the HTTP API in-process: health, search, profile, recommend, detail.

Builds a workspace (corpus + trained checkpoint + config), then drives the
FastAPI app through its test transport, printing each request/response pair.
The same app serves real traffic via `cinerank serve`.

    python demos/05_service_tour.py
"""

import json
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from cinerank import TrainConfig, generate_corpus, load_config, load_dataset, train
from cinerank.mf import save_checkpoint
from cinerank.service import build_state, create_app

root = Path(tempfile.mkdtemp(prefix="cinerank-demo-"))
paths = generate_corpus(root / "data", seed=21, n_users=50, n_movies=400, n_ratings=4000)
(root / "cinerank.toml").write_text(f"""
[data]
ratings = "{paths.ratings}"
movies = "{paths.movies}"
links = "{paths.links}"
snapshot = "{paths.snapshot}"

[cache]
checkpoint = "{root}/cache/model.npz"
metadata = "{root}/cache/metadata.jsonl"

[run]
seed = 21
""", encoding="utf-8")

config = load_config(root / "cinerank.toml", env={})
dataset = load_dataset(config.data.ratings, config.data.movies, config.data.links)
model = train(dataset.ratings, TrainConfig(factors=16, epochs=8, seed=21), "svd")
Path(config.cache.checkpoint).parent.mkdir(parents=True)
save_checkpoint(model, config.cache.checkpoint)

# feature mock in place of a live chat-completions server
client = TestClient(create_app(build_state(config, llm_spec="mock:feature")))


def show(label, response, keys=None):
    body = response.json()
    if keys:
        body = {k: body[k] for k in keys if k in body}
    print(f"\n{label} -> {response.status_code}")
    print(json.dumps(body, indent=2)[:600])


show("GET /api/v1/health", client.get("/api/v1/health"))

# fuzzy search tolerates typos
title = sorted(dataset.movies.values(), key=lambda m: m.movie_id)[10].title
typo = (title[:3] + title[4:]).lower()
print(f"\nsearching for {typo!r} (actual title: {title!r})")
found = client.get("/api/v1/search", params={"q": typo})
show(f"GET /api/v1/search?q={typo}", found)

# build a profile draft, then ask for recommendations against it
favorite = found.json()["results"][0]["movie_id"]
draft = {
    "preference_text": "I want windswept adventure with a melancholy streak.",
    "favorites": [favorite],
    "year_min": 1990,
    "year_max": 2020,
}
show("POST /api/v1/profile", client.post("/api/v1/profile", json=draft))
show("POST /api/v1/recommend (manual profile)",
     client.post("/api/v1/recommend", json={"profile": draft, "n": 3}))

user = sorted(dataset.user_ids())[0]
show(f"POST /api/v1/recommend (user {user})",
     client.post("/api/v1/recommend", json={"user_id": user, "n": 3}))

show(f"GET /api/v1/movies/{favorite}", client.get(f"/api/v1/movies/{favorite}"))

# validation errors come back as structured 4xx bodies
bad = client.post("/api/v1/profile", json={"preference_text": "x", "year_min": 1995})
show("POST /api/v1/profile (mid-decade start)", bad)
