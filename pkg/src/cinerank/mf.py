"""Biased matrix factorization trained by SGD, with an implicit-feedback variant.

Two model kinds are supported:

* ``svd``   -- r_hat = mu + b_u + b_i + q_i . p_u
* ``svdpp`` -- r_hat = mu + b_u + b_i + q_i . (p_u + |N(u)|^-1/2 * sum_{j in N(u)} y_j)

Training visits ratings in a seeded shuffled order each epoch, so two runs
with the same seed produce bitwise-identical parameters.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .data import Rating
from .errors import EmptyDataset

RATING_MIN = 0.5
RATING_MAX = 5.0

SVD = "svd"
SVDPP = "svdpp"

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    factors: int = 100
    epochs: int = 20
    learning_rate: float = 0.005
    regularization: float = 0.02
    seed: int = 0
    init_std: float = 0.1

    def __post_init__(self):
        if self.factors < 1:
            raise ValueError("factors must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.regularization < 0:
            raise ValueError("regularization must be >= 0")


class MfModel:
    """Trained latent-factor model. Immutable after training; safe to share."""

    def __init__(
        self,
        kind: str,
        mean: float,
        user_ids: list[int],
        item_ids: list[int],
        user_bias: np.ndarray,
        item_bias: np.ndarray,
        user_factors: np.ndarray,
        item_factors: np.ndarray,
        implicit_factors: np.ndarray | None,
        user_items: dict[int, np.ndarray],
        config: TrainConfig,
        fingerprint: str = "",
    ):
        if kind not in (SVD, SVDPP):
            raise ValueError(f"unknown model kind {kind!r}")
        if (implicit_factors is not None) != (kind == SVDPP):
            raise ValueError("implicit factors present iff kind is svdpp")
        self.kind = kind
        self.mean = float(mean)
        self.user_ids = list(user_ids)
        self.item_ids = list(item_ids)
        self.user_index = {u: i for i, u in enumerate(user_ids)}
        self.item_index = {m: i for i, m in enumerate(item_ids)}
        self.user_bias = user_bias
        self.item_bias = item_bias
        self.user_factors = user_factors
        self.item_factors = item_factors
        self.implicit_factors = implicit_factors
        self.user_items = user_items
        self.config = config
        self.fingerprint = fingerprint

    @property
    def n_users(self) -> int:
        return len(self.user_ids)

    @property
    def n_items(self) -> int:
        return len(self.item_ids)

    def _user_vector(self, uidx: int) -> np.ndarray:
        """Effective user vector: p_u, plus the scaled implicit-item sum for svdpp."""
        p = self.user_factors[uidx]
        if self.kind == SVDPP:
            rated = self.user_items.get(self.user_ids[uidx])
            if rated is not None and len(rated):
                p = p + self.implicit_factors[rated].sum(axis=0) / np.sqrt(len(rated))
        return p


def train(ratings: list[Rating], config: TrainConfig, kind: str = SVD) -> MfModel:
    """Fit the model by SGD on squared error with L2 regularization.

    Deterministic for a fixed config.seed: initialization and the per-epoch
    visit order both come from the same seeded generator.
    """
    if not ratings:
        raise EmptyDataset("cannot train on zero ratings")
    if kind not in (SVD, SVDPP):
        raise ValueError(f"unknown model kind {kind!r}")

    user_ids: list[int] = []
    item_ids: list[int] = []
    user_index: dict[int, int] = {}
    item_index: dict[int, int] = {}
    for r in ratings:
        if r.user_id not in user_index:
            user_index[r.user_id] = len(user_ids)
            user_ids.append(r.user_id)
        if r.movie_id not in item_index:
            item_index[r.movie_id] = len(item_ids)
            item_ids.append(r.movie_id)

    n_users, n_items, f = len(user_ids), len(item_ids), config.factors
    u_idx = np.array([user_index[r.user_id] for r in ratings], dtype=np.int64)
    i_idx = np.array([item_index[r.movie_id] for r in ratings], dtype=np.int64)
    values = np.array([r.value for r in ratings], dtype=np.float64)

    rng = np.random.default_rng(config.seed)
    mu = float(values.mean())
    bu = np.zeros(n_users)
    bi = np.zeros(n_items)
    p = rng.normal(0.0, config.init_std, size=(n_users, f))
    q = rng.normal(0.0, config.init_std, size=(n_items, f))
    y = rng.normal(0.0, config.init_std, size=(n_items, f)) if kind == SVDPP else None

    rated_lists: dict[int, list[int]] = {}
    for r in ratings:
        rated_lists.setdefault(user_index[r.user_id], []).append(item_index[r.movie_id])
    rated = {u: np.array(items, dtype=np.int64) for u, items in rated_lists.items()}

    lr = config.learning_rate
    reg = config.regularization
    for _ in range(config.epochs):
        order = rng.permutation(len(ratings))
        for k in order:
            u, i, r_ui = u_idx[k], i_idx[k], values[k]
            if kind == SVDPP:
                n_u = rated[u]
                scale = 1.0 / np.sqrt(len(n_u))
                impl = y[n_u].sum(axis=0) * scale
                pu_eff = p[u] + impl
            else:
                pu_eff = p[u]
            err = r_ui - (mu + bu[u] + bi[i] + q[i] @ pu_eff)

            bu[u] += lr * (err - reg * bu[u])
            bi[i] += lr * (err - reg * bi[i])
            qi_old = q[i].copy()
            q[i] += lr * (err * pu_eff - reg * q[i])
            p[u] += lr * (err * qi_old - reg * p[u])
            if kind == SVDPP:
                y[n_u] += lr * (err * scale * qi_old - reg * y[n_u])

    user_items = {user_ids[u]: idx for u, idx in rated.items()}
    return MfModel(
        kind=kind, mean=mu, user_ids=user_ids, item_ids=item_ids,
        user_bias=bu, item_bias=bi, user_factors=p, item_factors=q,
        implicit_factors=y, user_items=user_items, config=config,
    )


def clamp_rating(value: float) -> float:
    return min(RATING_MAX, max(RATING_MIN, value))


def predict(model: MfModel, user_id: int, movie_id: int) -> float:
    """Predicted rating, clamped to the rating scale.

    Unknown users or items fall back to the global mean plus whichever
    biases are known.
    """
    uidx = model.user_index.get(user_id)
    iidx = model.item_index.get(movie_id)
    score = model.mean
    if uidx is not None:
        score += model.user_bias[uidx]
    if iidx is not None:
        score += model.item_bias[iidx]
    if uidx is not None and iidx is not None:
        score += float(model.item_factors[iidx] @ model._user_vector(uidx))
    return clamp_rating(float(score))


def score_all_items(model: MfModel, user_id: int) -> np.ndarray:
    """Clamped predicted ratings for every item the model knows, in item order."""
    uidx = model.user_index.get(user_id)
    scores = model.mean + model.item_bias
    if uidx is not None:
        scores = scores + model.user_bias[uidx] + model.item_factors @ model._user_vector(uidx)
    return np.clip(scores, RATING_MIN, RATING_MAX)


def top_candidates(
    model: MfModel,
    user_id: int,
    pool_size: int,
    exclude: set[int] | frozenset[int] = frozenset(),
) -> list[tuple[int, float]]:
    """Top-scoring (movie_id, predicted rating) pairs for one user.

    Ordered by prediction descending, ties by ascending movie_id; excluded
    movies never appear. Returns min(pool_size, catalog - excluded) pairs.
    """
    if pool_size < 1:
        raise ValueError("pool_size must be >= 1")
    scores = score_all_items(model, user_id)
    ids = np.array(model.item_ids, dtype=np.int64)
    if exclude:
        keep = np.array([m not in exclude for m in model.item_ids], dtype=bool)
        scores, ids = scores[keep], ids[keep]
    # lexsort: last key is primary
    order = np.lexsort((ids, -scores))[:pool_size]
    return [(int(ids[k]), float(scores[k])) for k in order]


def single_rating_gradients(
    mu: float, bu: float, bi: float, p: np.ndarray, q: np.ndarray, reg: float, r: float,
) -> dict[str, np.ndarray | float]:
    """Analytic gradients of the per-rating objective
    L = 1/2 * ((r - r_hat)^2 + reg * (bu^2 + bi^2 + |p|^2 + |q|^2)).

    One SGD step applies theta -= lr * grad(theta) for each parameter,
    which is exactly the update rule the trainer uses.
    """
    err = r - (mu + bu + bi + q @ p)
    return {
        "bu": -err + reg * bu,
        "bi": -err + reg * bi,
        "p": -err * q + reg * p,
        "q": -err * p + reg * q,
    }


def save_checkpoint(model: MfModel, path) -> None:
    """Write a versioned checkpoint bundling parameters, config, and fingerprint."""
    meta = {
        "version": CHECKPOINT_VERSION,
        "kind": model.kind,
        "mean": model.mean,
        "config": asdict(model.config),
        "fingerprint": model.fingerprint,
    }
    flat_items = np.concatenate([model.user_items[u] for u in model.user_ids]) \
        if model.user_items else np.zeros(0, dtype=np.int64)
    offsets = np.cumsum([0] + [len(model.user_items[u]) for u in model.user_ids])
    arrays = {
        "meta_json": np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8),
        "user_ids": np.array(model.user_ids, dtype=np.int64),
        "item_ids": np.array(model.item_ids, dtype=np.int64),
        "user_bias": model.user_bias,
        "item_bias": model.item_bias,
        "user_factors": model.user_factors,
        "item_factors": model.item_factors,
        "rated_flat": flat_items,
        "rated_offsets": offsets,
    }
    if model.implicit_factors is not None:
        arrays["implicit_factors"] = model.implicit_factors
    with open(path, "wb") as fh:
        np.savez_compressed(fh, **arrays)


def load_checkpoint(path) -> MfModel:
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta_json"]).decode())
        if meta["version"] != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta['version']}")
        user_ids = [int(u) for u in data["user_ids"]]
        item_ids = [int(m) for m in data["item_ids"]]
        offsets = data["rated_offsets"]
        flat = data["rated_flat"]
        user_items = {
            u: flat[offsets[k]:offsets[k + 1]].copy()
            for k, u in enumerate(user_ids)
        }
        return MfModel(
            kind=meta["kind"],
            mean=meta["mean"],
            user_ids=user_ids,
            item_ids=item_ids,
            user_bias=data["user_bias"].copy(),
            item_bias=data["item_bias"].copy(),
            user_factors=data["user_factors"].copy(),
            item_factors=data["item_factors"].copy(),
            implicit_factors=data["implicit_factors"].copy() if "implicit_factors" in data else None,
            user_items=user_items,
            config=TrainConfig(**meta["config"]),
            fingerprint=meta["fingerprint"],
        )


def training_mse(model: MfModel, ratings: list[Rating]) -> float:
    """Mean squared error of unclamped predictions over a rating list."""
    total = 0.0
    for r in ratings:
        uidx = model.user_index.get(r.user_id)
        iidx = model.item_index.get(r.movie_id)
        score = model.mean
        if uidx is not None:
            score += model.user_bias[uidx]
        if iidx is not None:
            score += model.item_bias[iidx]
        if uidx is not None and iidx is not None:
            score += float(model.item_factors[iidx] @ model._user_vector(uidx))
        total += (r.value - score) ** 2
    return total / len(ratings)
