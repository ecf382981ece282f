import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from pytest import approx

from cinerank.data import Rating
from cinerank.errors import EmptyDataset
from cinerank.mf import (
    SVD,
    SVDPP,
    MfModel,
    TrainConfig,
    load_checkpoint,
    predict,
    save_checkpoint,
    single_rating_gradients,
    top_candidates,
    train,
    training_mse,
)


def toy_model(
    mean=3.0,
    item_ids=(101, 102, 103),
    item_bias=(1.1, 0.9, -1.0),
    user_bias=(0.0,),
    factors=2,
    kind=SVD,
    user_factors=None,
    item_factors=None,
):
    """Hand-built model with known parameters; factors default to zero."""
    n_items = len(item_ids)
    n_users = len(user_bias)
    p = np.zeros((n_users, factors)) if user_factors is None else np.asarray(user_factors, float)
    q = np.zeros((n_items, factors)) if item_factors is None else np.asarray(item_factors, float)
    return MfModel(
        kind=kind,
        mean=mean,
        user_ids=list(range(1, n_users + 1)),
        item_ids=list(item_ids),
        user_bias=np.asarray(user_bias, float),
        item_bias=np.asarray(item_bias, float),
        user_factors=p,
        item_factors=q,
        implicit_factors=np.zeros((n_items, factors)) if kind == SVDPP else None,
        user_items={},
        config=TrainConfig(factors=factors, epochs=1),
    )


def half_step_ratings(n=50, n_users=10, n_items=10, seed=11):
    rng = np.random.default_rng(seed)
    out, seen = [], set()
    while len(out) < n:
        u = int(rng.integers(1, n_users + 1))
        m = int(rng.integers(1, n_items + 1))
        if (u, m) in seen:
            continue
        seen.add((u, m))
        value = rng.integers(1, 11) / 2
        out.append(Rating(u, m, float(value), len(out)))
    return out


class TestPredict:
    def test_zero_parameters_predict_global_mean(self):
        model = toy_model(mean=3.21, item_bias=(0.0, 0.0, 0.0))
        for m in (101, 102, 103):
            assert predict(model, 1, m) == approx(3.21)

    def test_unknown_user_and_item_fall_back_to_mean(self):
        model = toy_model(mean=3.4)
        assert predict(model, 999, 888) == approx(3.4)

    def test_unknown_item_keeps_user_bias(self):
        model = toy_model(mean=3.0, user_bias=(0.25,))
        assert predict(model, 1, 888) == approx(3.25)

    def test_raw_score_above_scale_clamps_to_five(self):
        model = toy_model(mean=3.0, user_bias=(2.0,), item_bias=(1.3, 0.0, 0.0))
        assert predict(model, 1, 101) == 5.0

    def test_known_pair_matches_hand_computation(self):
        # 3.0 + 0.5 - 0.2 + (0.3*0.1 + (-0.4)*0.2) = 3.25
        model = toy_model(
            mean=3.0,
            user_bias=(0.5,),
            item_ids=(101,),
            item_bias=(-0.2,),
            user_factors=[[0.1, 0.2]],
            item_factors=[[0.3, -0.4]],
        )
        assert predict(model, 1, 101) == approx(3.25)

    @given(st.floats(-50, 50), st.floats(-50, 50))
    def test_prediction_always_on_rating_scale(self, bu, bi):
        model = toy_model(mean=3.0, user_bias=(bu,), item_ids=(101,), item_bias=(bi,))
        assert 0.5 <= predict(model, 1, 101) <= 5.0


class TestTraining:
    def test_empty_ratings_rejected(self):
        with pytest.raises(EmptyDataset):
            train([], TrainConfig())

    def test_single_point_converges(self):
        ratings = [Rating(1, 1, 4.0, 0)]
        model = train(ratings, TrainConfig(factors=4, epochs=200, seed=3))
        assert predict(model, 1, 1) == approx(4.0, abs=0.1)

    def test_same_seed_bitwise_identical(self):
        ratings = half_step_ratings()
        cfg = TrainConfig(factors=8, epochs=3, seed=7)
        a = train(ratings, cfg)
        b = train(ratings, cfg)
        assert np.array_equal(a.user_factors, b.user_factors)
        assert np.array_equal(a.item_factors, b.item_factors)
        assert np.array_equal(a.user_bias, b.user_bias)
        assert np.array_equal(a.item_bias, b.item_bias)

    def test_different_seed_differs(self):
        ratings = half_step_ratings()
        a = train(ratings, TrainConfig(factors=8, epochs=3, seed=7))
        b = train(ratings, TrainConfig(factors=8, epochs=3, seed=8))
        assert not np.array_equal(a.user_factors, b.user_factors)

    def test_mse_monotone_decreasing_at_small_lr(self):
        ratings = half_step_ratings(n=50)
        # epochs=k shares the rng trajectory with epochs=k+1, so these are
        # snapshots of one training run
        mses = [
            training_mse(train(ratings, TrainConfig(factors=8, epochs=k, learning_rate=0.001, seed=5)), ratings)
            for k in range(1, 6)
        ]
        for earlier, later in zip(mses, mses[1:]):
            assert later < earlier

    def test_svdpp_with_zero_implicit_equals_svd(self):
        ratings = half_step_ratings(n=30, n_users=5, n_items=6)
        svd = train(ratings, TrainConfig(factors=4, epochs=2, seed=9))
        user_items = {u: np.array(sorted(
            svd.item_index[m] for m in {r.movie_id for r in ratings if r.user_id == u}
        )) for u in svd.user_ids}
        svdpp = MfModel(
            kind=SVDPP,
            mean=svd.mean,
            user_ids=svd.user_ids,
            item_ids=svd.item_ids,
            user_bias=svd.user_bias,
            item_bias=svd.item_bias,
            user_factors=svd.user_factors,
            item_factors=svd.item_factors,
            implicit_factors=np.zeros_like(svd.item_factors),
            user_items=user_items,
            config=svd.config,
        )
        for u in svd.user_ids:
            for m in svd.item_ids:
                assert predict(svdpp, u, m) == approx(predict(svd, u, m))

    def test_svdpp_trains_and_predicts(self):
        ratings = [Rating(1, 1, 4.0, 0), Rating(1, 2, 4.0, 1)]
        model = train(ratings, TrainConfig(factors=4, epochs=300, seed=3), kind=SVDPP)
        assert predict(model, 1, 1) == approx(4.0, abs=0.1)
        assert predict(model, 1, 2) == approx(4.0, abs=0.1)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            train([Rating(1, 1, 4.0, 0)], TrainConfig(), kind="nmf")

    def test_bad_config_rejected(self):
        with pytest.raises(ValueError):
            TrainConfig(factors=0)
        with pytest.raises(ValueError):
            TrainConfig(learning_rate=0.0)


class TestGradients:
    def test_analytic_matches_central_finite_differences(self):
        """Per-rating objective on a 2-user/2-item fixture, every parameter."""
        reg = 0.02
        mu = 3.5
        rng = np.random.default_rng(2)
        fixtures = [
            (0.3, -0.1, rng.normal(size=3), rng.normal(size=3), 4.5),
            (-0.2, 0.4, rng.normal(size=3), rng.normal(size=3), 1.0),
            (0.0, 0.0, rng.normal(size=3), rng.normal(size=3), 3.0),
            (0.7, -0.6, rng.normal(size=3), rng.normal(size=3), 5.0),
        ]

        def loss(bu, bi, p, q, r):
            err = r - (mu + bu + bi + q @ p)
            return 0.5 * (err**2 + reg * (bu**2 + bi**2 + p @ p + q @ q))

        h = 1e-6
        for bu, bi, p, q, r in fixtures:
            grads = single_rating_gradients(mu, bu, bi, p, q, reg, r)
            fd_bu = (loss(bu + h, bi, p, q, r) - loss(bu - h, bi, p, q, r)) / (2 * h)
            fd_bi = (loss(bu, bi + h, p, q, r) - loss(bu, bi - h, p, q, r)) / (2 * h)
            assert grads["bu"] == approx(fd_bu, rel=1e-4)
            assert grads["bi"] == approx(fd_bi, rel=1e-4)
            for k in range(3):
                dp = np.zeros(3)
                dp[k] = h
                fd_pk = (loss(bu, bi, p + dp, q, r) - loss(bu, bi, p - dp, q, r)) / (2 * h)
                fd_qk = (loss(bu, bi, p, q + dp, r) - loss(bu, bi, p, q - dp, r)) / (2 * h)
                assert grads["p"][k] == approx(fd_pk, rel=1e-4)
                assert grads["q"][k] == approx(fd_qk, rel=1e-4)


class TestTopCandidates:
    def test_three_item_toy_order(self):
        # scores: 101 -> 4.1, 102 -> 3.9, 103 -> 2.0; stored out of order
        model = toy_model(item_ids=(103, 101, 102), item_bias=(-1.0, 1.1, 0.9))
        got = top_candidates(model, 1, pool_size=3)
        assert [(m, approx(s)) for m, s in got] == [
            (101, approx(4.1)),
            (102, approx(3.9)),
            (103, approx(2.0)),
        ]

    def test_ties_broken_by_ascending_movie_id(self):
        model = toy_model(item_ids=(30, 10, 20), item_bias=(0.4, 0.4, 0.4))
        got = [m for m, _ in top_candidates(model, 1, pool_size=3)]
        assert got == [10, 20, 30]

    def test_exclusions_never_appear(self):
        model = toy_model()
        got = [m for m, _ in top_candidates(model, 1, pool_size=3, exclude={101, 103})]
        assert got == [102]

    def test_exclude_all_gives_empty(self):
        model = toy_model()
        assert top_candidates(model, 1, pool_size=3, exclude={101, 102, 103}) == []

    def test_pool_size_truncates(self):
        model = toy_model()
        assert len(top_candidates(model, 1, pool_size=2)) == 2

    def test_pool_size_must_be_positive(self):
        with pytest.raises(ValueError):
            top_candidates(toy_model(), 1, pool_size=0)

    def test_unknown_user_falls_back_to_item_popularity_order(self):
        model = toy_model(item_ids=(103, 101, 102), item_bias=(-1.0, 1.1, 0.9))
        got = [m for m, _ in top_candidates(model, 999, pool_size=3)]
        assert got == [101, 102, 103]


class TestCheckpoint:
    @pytest.mark.parametrize("kind", [SVD, SVDPP])
    def test_round_trip(self, tmp_path, kind):
        ratings = half_step_ratings(n=30, n_users=5, n_items=6)
        model = train(ratings, TrainConfig(factors=4, epochs=2, seed=1), kind=kind)
        model.fingerprint = "abc123"
        path = tmp_path / "model.npz"
        save_checkpoint(model, path)
        loaded = load_checkpoint(path)
        assert loaded.kind == kind
        assert loaded.mean == model.mean
        assert loaded.config == model.config
        assert loaded.fingerprint == "abc123"
        assert np.array_equal(loaded.user_factors, model.user_factors)
        for u in model.user_ids:
            for m in model.item_ids:
                assert predict(loaded, u, m) == predict(model, u, m)

    def test_version_check(self, tmp_path):
        model = train(half_step_ratings(n=10, n_users=3, n_items=4), TrainConfig(factors=2, epochs=1))
        path = tmp_path / "model.npz"
        save_checkpoint(model, path)
        import json

        with np.load(path) as data:
            meta = json.loads(bytes(data["meta_json"]).decode())
            arrays = {k: data[k] for k in data.files}
        meta["version"] = 99
        arrays["meta_json"] = np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)
        with open(path, "wb") as fh:
            np.savez(fh, **arrays)
        with pytest.raises(ValueError):
            load_checkpoint(path)
