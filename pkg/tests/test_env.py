import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from alpolicy import env, kernels, svm
from alpolicy.data import Dataset, make_trial_split
from alpolicy.env import EpisodeState, expert_feature_matrix
from alpolicy.errors import EpisodeDoneError, InvalidActionError, InvalidBudgetError

from conftest import make_blobs, manual_split


def test_initial_counts():
    ds = make_blobs(100)
    st_ = EpisodeState(ds, make_trial_split(ds, 0), 20)
    assert (st_.n_pool, len(st_.labelled), st_.t) == (48, 2, 0)
    assert len(st_.acc_history) == 1


def test_budget_too_large():
    ds = make_blobs(100)
    with pytest.raises(InvalidBudgetError):
        EpisodeState(ds, make_trial_split(ds, 0), 49)
    EpisodeState(ds, make_trial_split(ds, 0), 48)


def test_initial_accuracy_is_deterministic():
    ds = make_blobs(100)
    split = make_trial_split(ds, 1)
    assert env.init_episode(ds, split).acc_history == env.init_episode(ds, split).acc_history


def test_budget_zero_is_done_immediately(blobs, blobs_split):
    s = EpisodeState(blobs, blobs_split, 0)
    assert s.done and len(s.acc_history) == 1
    with pytest.raises(EpisodeDoneError):
        s.step(0)


def test_expert_feature_examples():
    # L={(0,0)}, U={(3,4),(6,8)}: distances 5 and 10
    dist = kernels.min_distances(np.array([[3.0, 4.0], [6.0, 8.0]]), np.array([[0.0, 0.0]]))
    np.testing.assert_allclose(dist, [5.0, 10.0])
    feats = expert_feature_matrix(np.array([0.0, 2.0]), dist)
    np.testing.assert_allclose(feats[:, 1], [0.5, 1.0])
    assert feats[0, 0] == 1.0  # on the boundary: maximal uncertainty
    assert 0.0 < feats[1, 0] < 1.0


def test_expert_features_when_all_distances_zero():
    feats = expert_feature_matrix(np.array([0.1, -0.1]), np.zeros(2))
    assert feats[:, 1].tolist() == [0.0, 0.0]


def test_expert_features_bounds_and_farthest(blobs, blobs_split):
    s = EpisodeState(blobs, blobs_split, 10)
    for _ in range(5):
        f = s.expert_features()
        assert f.shape == (s.n_pool, 2)
        assert f.min() >= 0.0 and f.max() <= 1.0
        assert f[np.argmax(s.min_distances()), 1] == 1.0
        s.step(0)


def test_step_moves_one_instance(blobs, blobs_split):
    s = EpisodeState(blobs, blobs_split, 5)
    n_pool, n_lab = s.n_pool, len(s.labelled)
    idx = int(s.pool[3])
    _, r = env.step(s, 3)
    assert s.n_pool == n_pool - 1 and len(s.labelled) == n_lab + 1
    assert idx in s.labelled and idx not in s.pool
    assert r == s.acc_history[1] - s.acc_history[0]


def test_invalid_actions(blobs, blobs_split):
    s = EpisodeState(blobs, blobs_split, 2)
    with pytest.raises(InvalidActionError):
        s.step(s.n_pool)
    with pytest.raises(InvalidActionError):
        s.step(-1)
    s.step(0)
    s.step(0)
    with pytest.raises(EpisodeDoneError):
        s.step(0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 1000), st.lists(st.integers(0, 10_000), min_size=12, max_size=12))
def test_episode_invariants(trial, picks):
    ds = make_blobs(60, seed=trial % 7)
    s = EpisodeState(ds, make_trial_split(ds, trial), 12)
    rewards = []
    for p in picks:
        rewards.append(s.step(p % s.n_pool))
        assert not set(s.labelled.tolist()) & set(s.pool.tolist())
        assert len(s.labelled) == 2 + s.t and len(s.acc_history) == s.t + 1
        # incremental min-distances match a brute-force recomputation
        brute = np.linalg.norm(ds.X[s.pool][:, None, :] - ds.X[s.labelled][None, :, :], axis=2).min(axis=1)
        np.testing.assert_allclose(s.min_distances(), brute, atol=1e-12)
    assert all(-1.0 <= r <= 1.0 for r in rewards)
    assert len(set(s.queried)) == len(s.queried)  # no index queried twice
    assert sum(rewards) == pytest.approx(s.acc_history[-1] - s.acc_history[0], abs=1e-12)


def test_zero_reward_when_refit_is_unchanged():
    # querying an exact copy of a labelled negative: class weights rescale so
    # the balanced objective and therefore the model are unchanged
    X = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 0.0], [0.9, 0.1], [0.1, 0.8], [0.2, 0.2], [0.8, 0.9], [0.6, 0.5]])
    y = np.array([-1.0, 1.0, -1.0, -1.0, 1.0, -1.0, 1.0, 1.0])
    ds = Dataset("dup", X, y)
    split = manual_split(pool=[0, 1, 2, 3], test=[4, 5, 6, 7], initial=[0, 1])
    s = EpisodeState(ds, split, 1)
    before = svm.predict(s.model, X[s.test])
    r = s.step(0)  # pool position 0 is instance 2, the duplicate
    after = svm.predict(s.model, X[s.test])
    assert np.array_equal(before, after)  # brute-force check of every test sign
    assert r == 0.0


def test_features_track_the_labelled_set(blobs, blobs_split):
    s = EpisodeState(blobs, blobs_split, 3)
    before = s.min_distances()
    q = int(np.argmax(before))
    target = blobs.X[s.pool[q]]
    s.step(q)
    after = s.min_distances()
    # the queried point's nearest remaining neighbour must now be closer
    d_new = np.linalg.norm(blobs.X[s.pool] - target, axis=1)
    nn = int(np.argmin(d_new))
    assert after[nn] == pytest.approx(min(np.delete(before, q)[nn], d_new[nn]))
    assert after[nn] <= np.delete(before, q)[nn]


def test_augmented_shape(blobs, blobs_split):
    s = EpisodeState(blobs, blobs_split, 3)
    Z_u, Z_l = s.augmented()
    assert Z_u.shape == (s.n_pool, blobs.d_raw + 2)
    assert Z_l.shape == (2, blobs.d_raw + 2)
    assert np.all(Z_l[:, -1] == 0.0)
