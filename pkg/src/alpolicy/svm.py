"""Class-balanced L2-regularised linear SVM used as the active learner's base classifier.

The fitted model minimises

    lam/2 |w|^2 + (1/m) sum_i c_{y_i} max(0, 1 - y_i (w.x_i + b)),   c_y = m / (2 m_y)

with an unregularised bias. The default solver is an exact SMO dual solve with
a fixed working-set rule; the alternative is a fixed-length full-batch
subgradient run (step 1/(lam (t+1)) from w=0, b=0). Both are deterministic.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import EmptyEvaluationError, MissingClassError, ShapeError

LAMBDA = 0.01
N_ITER = 500
SMO_TOL = 1e-9
SOLVERS = ("smo", "subgradient")


@dataclass(frozen=True)
class LinearModel:
    w: np.ndarray
    b: float

    def decision(self, X) -> np.ndarray:
        """Vectorised ``w.x + b`` over the rows of ``X``."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.w.shape[0]:
            raise ShapeError(f"expected (*, {self.w.shape[0]}) inputs, got {X.shape}")
        return X @ self.w + self.b


def fit(X, y, lam=LAMBDA, n_iter=N_ITER, solver="smo") -> LinearModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ShapeError(f"X {X.shape} and y {y.shape} disagree")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise MissingClassError("labelled set must contain both classes")
    if solver == "smo":
        w, b = kernels.svm_fit_smo(X, y, lam, SMO_TOL)
    elif solver == "subgradient":
        w, b = kernels.svm_fit_subgradient(X, y, lam, n_iter)
    else:
        raise ValueError(f"unknown solver {solver!r}; choose from {SOLVERS}")
    return LinearModel(w=w, b=b)


def objective(model: LinearModel, X, y, lam=LAMBDA) -> float:
    """The class-weighted regularised hinge objective the solver descends."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    m = len(y)
    n_pos = np.count_nonzero(y > 0)
    weights = np.where(y > 0, m / (2.0 * n_pos), m / (2.0 * (m - n_pos)))
    hinge = np.maximum(0.0, 1.0 - y * model.decision(X))
    return 0.5 * lam * float(model.w @ model.w) + float(weights @ hinge) / m


def decision_value(model: LinearModel, x) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != model.w.shape:
        raise ShapeError(f"instance has shape {x.shape}, model expects {model.w.shape}")
    return float(x @ model.w + model.b)


def sigmoid(v):
    v = np.asarray(v, dtype=np.float64)
    # exp of a non-positive argument only, so no overflow in either tail
    e = np.exp(-np.abs(v))
    return np.where(v >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def posterior(model: LinearModel, x) -> float:
    return float(sigmoid(decision_value(model, x)))


def predict(model: LinearModel, X) -> np.ndarray:
    """Signs of the decision values; exact zeros predict +1."""
    return np.where(model.decision(X) >= 0.0, 1.0, -1.0)


def accuracy(model: LinearModel, X, y) -> float:
    y = np.asarray(y, dtype=np.float64)
    if y.size == 0:
        raise EmptyEvaluationError("cannot score an empty test set")
    return float(np.mean(predict(model, X) == y))
