"""Pool-based active learning episode.

The state holds the labelled set, the ordered unlabelled pool, the fitted
base learner and the accuracy history. Actions are positions in the current
pool; querying moves that instance into the labelled set, refits the SVM and
pays the change in test accuracy as reward.
"""
from __future__ import annotations

import numpy as np

from . import kernels, svm
from .data import Dataset, TrialSplit
from .errors import EpisodeDoneError, InvalidActionError, InvalidBudgetError

DEFAULT_BUDGET = 20


class EpisodeState:
    def __init__(self, ds: Dataset, split: TrialSplit, budget: int = DEFAULT_BUDGET):
        initial = np.asarray(split.initial_labelled, dtype=np.int64)
        pool = np.asarray(split.pool_indices, dtype=np.int64)
        n_unlabelled = len(pool) - len(initial)
        if budget < 0 or budget > n_unlabelled:
            raise InvalidBudgetError(f"budget {budget} exceeds the {n_unlabelled} unlabelled pool instances")
        self.ds = ds
        self.split = split
        self.budget = int(budget)
        self.labelled = initial.copy()
        self.pool = pool[~np.isin(pool, initial)]
        self.test = np.asarray(split.test_indices, dtype=np.int64)
        self.t = 0
        self.queried: list[int] = []
        # distance of each pool instance to its nearest labelled instance
        self._min_dist = kernels.min_distances(ds.X[self.pool], ds.X[self.labelled])
        self._refit()
        self.acc_history = [self._test_accuracy()]

    # -- learner -----------------------------------------------------------
    def _refit(self):
        self.model = svm.fit(self.ds.X[self.labelled], self.ds.y[self.labelled])

    def _test_accuracy(self):
        return svm.accuracy(self.model, self.ds.X[self.test], self.ds.y[self.test])

    @property
    def done(self) -> bool:
        return self.t >= self.budget or len(self.pool) == 0

    @property
    def n_pool(self) -> int:
        return len(self.pool)

    # -- observations ------------------------------------------------------
    def pool_decision(self) -> np.ndarray:
        return self.model.decision(self.ds.X[self.pool])

    def min_distances(self) -> np.ndarray:
        return self._min_dist.copy()

    def expert_features(self) -> np.ndarray:
        """|U_t| x 2 matrix of [uncertainty, normalised furthest-first distance]."""
        return expert_feature_matrix(self.pool_decision(), self._min_dist)

    def labelled_expert_features(self) -> np.ndarray:
        # labelled points sit at distance 0 from the labelled set
        dec = self.model.decision(self.ds.X[self.labelled])
        return expert_feature_matrix(dec, np.zeros(len(self.labelled)))

    def augmented(self):
        """(Z_u, Z_l): raw rescaled features with the two expert columns appended."""
        X = self.ds.X
        Z_u = np.hstack([X[self.pool], self.expert_features()])
        Z_l = np.hstack([X[self.labelled], self.labelled_expert_features()])
        return Z_u, Z_l

    # -- transition --------------------------------------------------------
    def step(self, action: int) -> float:
        if self.done:
            raise EpisodeDoneError(f"episode finished after {self.t} queries")
        action = int(action)
        if not 0 <= action < len(self.pool):
            raise InvalidActionError(f"action {action} outside pool of size {len(self.pool)}")
        idx = int(self.pool[action])
        self.pool = np.delete(self.pool, action)
        dist = np.delete(self._min_dist, action)
        self.labelled = np.append(self.labelled, idx)
        self.queried.append(idx)
        if len(self.pool):
            fresh = kernels.min_distances(self.ds.X[self.pool], self.ds.X[idx : idx + 1])
            dist = np.minimum(dist, fresh)
        self._min_dist = dist
        self._refit()
        self.t += 1
        acc = self._test_accuracy()
        reward = acc - self.acc_history[-1]
        self.acc_history.append(acc)
        return reward


def expert_feature_matrix(decision, min_dist):
    unc = 1.0 - 2.0 * np.abs(svm.sigmoid(decision) - 0.5)
    top = float(min_dist.max()) if len(min_dist) else 0.0
    dff = min_dist / top if top > 0 else np.zeros_like(min_dist)
    return np.column_stack([unc, dff])


def init_episode(ds: Dataset, split: TrialSplit, budget: int = DEFAULT_BUDGET) -> EpisodeState:
    return EpisodeState(ds, split, budget)


def expert_features(state: EpisodeState) -> np.ndarray:
    return state.expert_features()


def step(state: EpisodeState, action: int):
    """Apply ``action`` in place; returns ``(state, reward)``."""
    reward = state.step(action)
    return state, reward
