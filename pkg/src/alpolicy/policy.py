"""Meta network (encoder/decoder weight synthesis) and the shared per-instance policy trunk.

The meta network maps every 120-d column embedding through two small MLPs
(120 -> 100 -> 100, ReLU hidden, linear output). Stacking the encoder outputs
row-wise gives the d x 100 matrix ``W_e``; stacking the decoder outputs
column-wise gives the 100 x d matrix ``W_d``. The policy then scores each pool
instance z as ``trunk(relu(z @ W_e))`` with one set of trunk weights shared by
all rows (100 -> 50 -> 10 -> 1) and takes a softmax over the pool.

``SingleRL`` swaps the synthesised encoder for one learned 2 x 100 matrix over
the two expert features, so one parameter set works for any dataset.
"""
from __future__ import annotations

import numpy as np

from .diffcore import Tape, Tensor
from .embeddings import EMBED_DIM
from .errors import EmptyPoolError, InvalidDistributionError, ShapeError

HIDDEN = 100  # k: width of the synthesised encoding
TRUNK = (HIDDEN, 50, 10, 1)

META_PARAMS = ("enc.W1", "enc.b1", "enc.W2", "enc.b2", "dec.W1", "dec.b1", "dec.W2", "dec.b2")
TRUNK_PARAMS = ("trunk.W1", "trunk.b1", "trunk.W2", "trunk.b2", "trunk.W3", "trunk.b3")
MODEL_KINDS = ("meta", "single")


def _glorot(rng, fan_in, fan_out):
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=(fan_in, fan_out))


def init_params(seed: int, kind: str = "meta") -> dict:
    """Glorot-uniform weights, zero biases. ``kind`` is "meta" or "single"."""
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}")
    rng = np.random.default_rng(seed)
    p = {}
    if kind == "meta":
        for side in ("enc", "dec"):
            p[f"{side}.W1"] = _glorot(rng, EMBED_DIM, HIDDEN)
            p[f"{side}.b1"] = np.zeros((1, HIDDEN))
            p[f"{side}.W2"] = _glorot(rng, HIDDEN, HIDDEN)
            p[f"{side}.b2"] = np.zeros((1, HIDDEN))
    else:
        p["single.W0"] = _glorot(rng, 2, HIDDEN)
    for i, (fi, fo) in enumerate(zip(TRUNK[:-1], TRUNK[1:]), 1):
        p[f"trunk.W{i}"] = _glorot(rng, fi, fo)
        p[f"trunk.b{i}"] = np.zeros((1, fo))
    return p


def model_kind(params: dict) -> str:
    return "single" if "single.W0" in params else "meta"


def _mlp(tape, P, side, emb):
    h = tape.relu(tape.add_bias(tape.matmul(emb, P[f"{side}.W1"]), P[f"{side}.b1"]))
    return tape.add_bias(tape.matmul(h, P[f"{side}.W2"]), P[f"{side}.b2"])


def meta_forward(tape: Tape, P: dict, emb):
    """Synthesise ``(W_e, W_d)`` from a d x 120 embedding."""
    emb = emb if isinstance(emb, Tensor) else Tensor(emb)
    if emb.shape[1] != EMBED_DIM:
        raise ShapeError(f"embedding must have {EMBED_DIM} columns, got {emb.shape}")
    W_e = _mlp(tape, P, "enc", emb)
    W_d = tape.transpose(_mlp(tape, P, "dec", emb))
    return W_e, W_d


def encode(tape: Tape, W_e, Z_u):
    Z_u = Z_u if isinstance(Z_u, Tensor) else Tensor(Z_u)
    if Z_u.shape[0] == 0:
        raise EmptyPoolError("policy needs at least one pool instance")
    return tape.relu(tape.matmul(Z_u, W_e))


def trunk_probs(tape: Tape, P: dict, u):
    h = u
    n_layers = len(TRUNK) - 1
    for i in range(1, n_layers + 1):
        h = tape.add_bias(tape.matmul(h, P[f"trunk.W{i}"]), P[f"trunk.b{i}"])
        if i < n_layers:
            h = tape.relu(h)
    return tape.row_softmax(tape.transpose(h))


def policy_forward(tape: Tape, P: dict, W_e, Z_u):
    """1 x N query probabilities over the pool rows of ``Z_u``."""
    return trunk_probs(tape, P, encode(tape, W_e, Z_u))


def reconstruction_loss(tape: Tape, W_e, W_d, Z_u, u=None):
    """Mean squared error of ``relu(Z_u W_e) W_d`` against ``Z_u``."""
    Z_u = Z_u if isinstance(Z_u, Tensor) else Tensor(Z_u)
    if u is None:
        u = encode(tape, W_e, Z_u)
    return tape.mse(tape.matmul(u, W_d), Z_u)


def singlerl_forward(tape: Tape, P: dict, Xi):
    Xi = Xi if isinstance(Xi, Tensor) else Tensor(Xi)
    if Xi.shape[1] != 2:
        raise ShapeError(f"SingleRL consumes the two expert features, got {Xi.shape[1]} columns")
    return policy_forward(tape, P, P["single.W0"], Xi)


def step_graph(tape: Tape, P: dict, emb, Z_u):
    """Forward pass for one decision.

    Returns ``(probs, recon)``; ``recon`` is None for SingleRL parameter sets,
    whose input is the last two columns (the expert features) of ``Z_u``.
    """
    if "single.W0" in P:
        Z_u = Z_u.value if isinstance(Z_u, Tensor) else np.asarray(Z_u)
        return singlerl_forward(tape, P, Z_u[:, -2:]), None
    W_e, W_d = meta_forward(tape, P, emb)
    Z_t = Z_u if isinstance(Z_u, Tensor) else Tensor(Z_u)
    u = encode(tape, W_e, Z_t)
    return trunk_probs(tape, P, u), reconstruction_loss(tape, W_e, W_d, Z_t, u)


def sample_action(probabilities, mode: str = "sample", rng_seed=None) -> int:
    """Draw from the categorical (``mode="sample"``) or take the first argmax."""
    p = np.asarray(probabilities, dtype=np.float64).reshape(-1)
    if p.size == 0 or np.any(~np.isfinite(p)) or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-6:
        raise InvalidDistributionError("probabilities must be finite, non-negative and sum to 1")
    if mode == "argmax":
        return int(np.argmax(p))
    if mode != "sample":
        raise ValueError(f"unknown mode {mode!r}")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    cdf = np.cumsum(p)
    return int(min(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"), p.size - 1))
