"""Hand-designed query strategies: random, uncertainty, furthest-first and query-by-bagging."""
from __future__ import annotations

import enum

import numpy as np

from . import svm
from .data import Dataset, TrialSplit, derive_seed
from .env import EpisodeState
from .errors import EmptyPoolError

QBB_COMMITTEE = 5
BOOTSTRAP_RETRIES = 100


class StrategyKind(str, enum.Enum):
    RANDOM = "random"
    UNCERTAINTY = "uncertainty"
    DFF = "dff"
    QBB = "qbb"


def _check_pool(state):
    if state.n_pool == 0:
        raise EmptyPoolError("no unlabelled instances left to query")


def select_random(state: EpisodeState, rng_seed: int) -> int:
    _check_pool(state)
    return int(np.random.default_rng(rng_seed).integers(state.n_pool))


def select_uncertainty(state: EpisodeState) -> int:
    _check_pool(state)
    return int(np.argmin(np.abs(state.pool_decision())))


def select_dff(state: EpisodeState) -> int:
    _check_pool(state)
    return int(np.argmax(state.min_distances()))


def _bootstrap(rng, y):
    m = len(y)
    for _ in range(BOOTSTRAP_RETRIES):
        idx = rng.integers(m, size=m)
        if np.any(y[idx] > 0) and np.any(y[idx] < 0):
            return idx
    return np.arange(m)


def vote_entropy(pos_votes, committee_size):
    p = np.asarray(pos_votes, dtype=np.float64) / committee_size
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(np.where(p > 0, p * np.log(p), 0.0) + np.where(p < 1, (1 - p) * np.log(1 - p), 0.0))
    return h


def rank_disagreement(pos_votes, mean_decision, committee_size) -> int:
    """Highest vote entropy; ties go to smaller |mean decision|, then lowest position."""
    h = vote_entropy(pos_votes, committee_size)
    order = np.lexsort((np.arange(len(h)), np.abs(mean_decision), -h))
    return int(order[0])


def select_qbb(state: EpisodeState, committee_size: int = QBB_COMMITTEE, rng_seed: int = 0) -> int:
    _check_pool(state)
    if committee_size < 2:
        raise ValueError("committee needs at least two members")
    rng = np.random.default_rng(rng_seed)
    X_l = state.ds.X[state.labelled]
    y_l = state.ds.y[state.labelled]
    X_u = state.ds.X[state.pool]
    votes = np.zeros(state.n_pool, dtype=np.int64)
    dec_sum = np.zeros(state.n_pool)
    for _ in range(committee_size):
        idx = _bootstrap(rng, y_l)
        member = svm.fit(X_l[idx], y_l[idx])
        dec = member.decision(X_u)
        votes += dec >= 0
        dec_sum += dec
    return rank_disagreement(votes, dec_sum / committee_size, committee_size)


def select(state: EpisodeState, strategy, rng_seed: int = 0) -> int:
    kind = StrategyKind(strategy)
    if kind is StrategyKind.RANDOM:
        return select_random(state, rng_seed)
    if kind is StrategyKind.UNCERTAINTY:
        return select_uncertainty(state)
    if kind is StrategyKind.DFF:
        return select_dff(state)
    return select_qbb(state, QBB_COMMITTEE, rng_seed)


def run_episode(ds: Dataset, split: TrialSplit, strategy, budget: int = 20, seed: int = 0) -> list[float]:
    state = EpisodeState(ds, split, budget)
    kind = StrategyKind(strategy)
    while not state.done:
        action = select(state, kind, derive_seed("query", seed, kind.value, state.t))
        state.step(action)
    return list(state.acc_history)
