"""Dimension-wise dataset embeddings fed to the meta network.

Each column j of the augmented matrix Z is described by 120 numbers:

    [hist10(Z_u[:, j]), hist10(Z_l[:, j]), hist10x10(Z[:, j], posterior)]

where ``hist10`` counts values into 10 equal-width bins on [0, 1] (1.0 falls in
the last bin) normalised to proportions, and the joint histogram counts
(value bin f, posterior bin p) into slot ``10 * f + p`` over U and L together.
"""
from __future__ import annotations

import numpy as np

from . import kernels, svm
from .errors import DomainError, ShapeError

N_BINS = 10
EMBED_DIM = 2 * N_BINS + N_BINS * N_BINS
DOMAIN_TOL = 1e-9


def _check_unit(values, what):
    if values.size and (values.min() < -DOMAIN_TOL or values.max() > 1.0 + DOMAIN_TOL):
        raise DomainError(f"{what} must lie in [0, 1]; got range [{values.min()}, {values.max()}]")


def representative_embedding(values) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    _check_unit(values, "feature values")
    return kernels.column_histograms(values.reshape(-1, 1), N_BINS)[0]


def discriminative_embedding(values, posteriors) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    posteriors = np.asarray(posteriors, dtype=np.float64).reshape(-1)
    if values.shape != posteriors.shape:
        raise ShapeError(f"{values.shape[0]} values but {posteriors.shape[0]} posteriors")
    _check_unit(values, "feature values")
    _check_unit(posteriors, "posteriors")
    return kernels.joint_histograms(values.reshape(-1, 1), posteriors, N_BINS)[0]


def embed_columns(Z_u, Z_l, post_u, post_l) -> np.ndarray:
    """d x 120 embedding from augmented pool/labelled matrices and their posteriors."""
    Z_u = np.asarray(Z_u, dtype=np.float64)
    Z_l = np.asarray(Z_l, dtype=np.float64)
    if Z_u.shape[1] != Z_l.shape[1]:
        raise ShapeError(f"pool has {Z_u.shape[1]} columns, labelled set {Z_l.shape[1]}")
    Z_all = np.vstack([Z_u, Z_l])
    post = np.concatenate([np.asarray(post_u, dtype=np.float64), np.asarray(post_l, dtype=np.float64)])
    if post.shape[0] != Z_all.shape[0]:
        raise ShapeError("one posterior per instance is required")
    _check_unit(Z_all, "augmented features")
    _check_unit(post, "posteriors")
    return np.hstack(
        [
            kernels.column_histograms(Z_u, N_BINS),
            kernels.column_histograms(Z_l, N_BINS),
            kernels.joint_histograms(Z_all, post, N_BINS),
        ]
    )


def build_dimension_embedding(state, Z=None) -> np.ndarray:
    """Embedding of the current episode state.

    ``Z`` may be the ``(Z_u, Z_l)`` pair from ``state.augmented()`` when the
    caller already has it.
    """
    Z_u, Z_l = state.augmented() if Z is None else Z
    post_u = svm.sigmoid(state.pool_decision())
    post_l = svm.sigmoid(state.model.decision(state.ds.X[state.labelled]))
    return embed_columns(Z_u, Z_l, post_u, post_l)
