"""Multi-task REINFORCE training of the query policy, plus checkpoint I/O.

Objective per episode (ascent): standardised return times the log-probability
of each chosen query, plus ``(lambda_entropy * H_t - lambda_recon * A_t) / T``
per step. Per-step gradients g_t are smoothed with
``G_t = (1 - alpha) G_{t-1} + alpha g_t`` and G_T is the episode gradient.
Because R_hat is only known once the whole batch has finished, the recursion
is run separately for the log-probability part and the auxiliary part and the
two are combined afterwards (the recursion is linear, so this is exact).
"""
from __future__ import annotations

import dataclasses
import hashlib
import io
import json
import logging
import os
import struct
import time
from dataclasses import dataclass, field

import numpy as np

from . import policy, svm
from .data import Dataset, derive_seed, make_trial_split
from .diffcore import AdamState, Tape, adam_step, backward_channels
from .embeddings import embed_columns
from .env import EpisodeState
from .errors import ChecksumError, ConfigError, InsufficientGroupError, VersionError

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
MAGIC = b"ALPCKPT\x00"


@dataclass(frozen=True)
class TrainConfig:
    gamma: float = 0.99
    lambda_recon: float = 0.03
    lambda_entropy: float = 0.005
    alpha: float = 0.005
    lr: float = 0.001
    batch_episodes: int = 32
    datasets_per_batch: int = 4
    iterations: int = 50_000
    budget: int = 20
    base_seed: int = 0
    model: str = "meta"
    log_every: int = 100
    checkpoint_every: int = 1000

    def __post_init__(self):
        for name in ("gamma", "lambda_recon", "lambda_entropy", "alpha", "lr"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if not 0 < self.alpha <= 1:
            raise ConfigError("alpha must lie in (0, 1]")
        if self.batch_episodes < 1 or self.datasets_per_batch < 1:
            raise ConfigError("batch_episodes and datasets_per_batch must be positive")
        if self.batch_episodes % self.datasets_per_batch:
            raise ConfigError("batch_episodes must be divisible by datasets_per_batch")
        if self.iterations < 0 or self.budget < 1:
            raise ConfigError("iterations must be >= 0 and budget >= 1")
        if self.model not in policy.MODEL_KINDS:
            raise ConfigError(f"model must be one of {policy.MODEL_KINDS}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> bytes:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).digest()


@dataclass
class Trajectory:
    dataset: str
    actions: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    log_probs: list = field(default_factory=list)
    entropies: list = field(default_factory=list)
    recon_losses: list = field(default_factory=list)
    acc_history: list = field(default_factory=list)
    # smoothed gradients of the log-prob and auxiliary terms
    grad_logp: dict = field(default_factory=dict)
    grad_aux: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.actions)


@dataclass
class Checkpoint:
    params: dict
    adam: AdamState
    iteration: int
    config: TrainConfig
    version: int = FORMAT_VERSION


# -- observation --------------------------------------------------------------
def observe(state: EpisodeState):
    """Augmented pool matrix and the d x 120 embedding of the current state."""
    X = state.ds.X
    X_u, X_l = X[state.pool], X[state.labelled]
    dec_u = state.model.decision(X_u)
    dec_l = state.model.decision(X_l)
    post_u, post_l = svm.sigmoid(dec_u), svm.sigmoid(dec_l)
    unc_u = 1.0 - 2.0 * np.abs(post_u - 0.5)
    unc_l = 1.0 - 2.0 * np.abs(post_l - 0.5)
    dist = state.min_distances()
    top = dist.max() if dist.size else 0.0
    dff = dist / top if top > 0 else np.zeros_like(dist)
    Z_u = np.column_stack([X_u, unc_u, dff])
    Z_l = np.column_stack([X_l, unc_l, np.zeros(len(X_l))])
    return Z_u, embed_columns(Z_u, Z_l, post_u, post_l)


# -- returns ----------------------------------------------------------------
def discounted_return(rewards, gamma: float) -> float:
    total, disc = 0.0, 1.0
    for r in rewards:
        total += disc * float(r)
        disc *= gamma
    return total


def standardize_returns(groups: dict) -> dict:
    """Per-group ``(R - mean) / (std + 1e-8)``; near-constant groups map to zeros."""
    out = {}
    for key, vals in groups.items():
        r = np.asarray(vals, dtype=np.float64)
        if r.size < 2:
            raise InsufficientGroupError(f"group {key!r} has {r.size} episode(s); need at least 2")
        sd = r.std()
        out[key] = np.zeros_like(r) if sd < 1e-12 else (r - r.mean()) / (sd + 1e-8)
    return out


# -- rollouts ---------------------------------------------------------------
def collect_episode(params: dict, ds: Dataset, split, config: TrainConfig, rng_seed) -> Trajectory:
    """Stochastic rollout that accumulates the smoothed per-step gradients."""
    rng = np.random.default_rng(rng_seed)
    state = EpisodeState(ds, split, config.budget)
    T = config.budget
    a = config.alpha
    traj = Trajectory(dataset=ds.name)
    g_lp = {k: np.zeros_like(v) for k, v in params.items()}
    g_aux = {k: np.zeros_like(v) for k, v in params.items()}
    while not state.done:
        Z_u, emb = observe(state)
        tape = Tape()
        P = tape.params(params)
        probs, recon = policy.step_graph(tape, P, emb, Z_u)
        action = policy.sample_action(probs.value[0], "sample", rng)
        logp = tape.pick_log(probs, action)
        negent = tape.neg_entropy(probs)
        # G_T = sum_t alpha (1 - alpha)^(T - t) g_t, so each step's seeds carry
        # their final smoothing weight and accumulate straight into G_T
        w = a * (1.0 - a) ** (T - 1 - state.t)
        aux_roots = [(negent, -w * config.lambda_entropy / T)]
        if recon is not None:
            aux_roots.append((recon, -w * config.lambda_recon / T))
        backward_channels(tape, [[(logp, w)], aux_roots], into=[g_lp, g_aux])
        traj.actions.append(action)
        traj.log_probs.append(logp.item())
        traj.entropies.append(-negent.item())
        traj.recon_losses.append(recon.item() if recon is not None else 0.0)
        traj.rewards.append(state.step(action))
    traj.acc_history = list(state.acc_history)
    traj.grad_logp, traj.grad_aux = g_lp, g_aux
    return traj


def episode_gradient(traj: Trajectory, standardized_return: float, config: TrainConfig = None) -> dict:
    """Ascent direction G_T for one episode."""
    return {k: standardized_return * traj.grad_logp[k] + traj.grad_aux[k] for k in traj.grad_logp}


def run_policy_episode(params: dict, ds: Dataset, split, budget: int = 20, mode: str = "argmax", rng_seed=0):
    """Drive one episode with a learned policy; returns the accuracy history."""
    rng = np.random.default_rng(rng_seed)
    state = EpisodeState(ds, split, budget)
    while not state.done:
        Z_u, emb = observe(state)
        tape = Tape(record=False)
        probs, _ = policy.step_graph(tape, tape.params(params), emb, Z_u)
        state.step(policy.sample_action(probs.value[0], mode, rng))
    return list(state.acc_history)


# -- training loop ----------------------------------------------------------
def _batch_plan(config: TrainConfig, names: list, iteration: int):
    rng = np.random.default_rng(derive_seed("batch", config.base_seed, iteration))
    k = min(config.datasets_per_batch, len(names))
    chosen = [names[i] for i in rng.choice(len(names), size=k, replace=False)]
    per, extra = divmod(config.batch_episodes, k)
    plan = []
    for j, name in enumerate(chosen):
        plan.extend([name] * (per + (1 if j < extra else 0)))
    return plan


def _rollout_job(args):
    params, ds, config, iteration, slot = args
    split_seed = derive_seed("train-split", config.base_seed)
    split = make_trial_split(ds, iteration * config.batch_episodes + slot, split_seed)
    return collect_episode(params, ds, split, config, derive_seed("episode", config.base_seed, iteration, ds.name, slot))


def init_checkpoint(config: TrainConfig) -> Checkpoint:
    params = policy.init_params(derive_seed("init", config.base_seed), config.model)
    return Checkpoint(params, AdamState.zeros_like(params, lr=config.lr), 0, config)


def train_iteration(ckpt: Checkpoint, datasets: dict, executor=None) -> tuple[Checkpoint, dict]:
    config = ckpt.config
    names = sorted(datasets)
    plan = _batch_plan(config, names, ckpt.iteration)
    for name in set(plan):
        if plan.count(name) < 2:
            raise InsufficientGroupError(f"batch gives dataset {name!r} a single episode; raise batch_episodes")
    jobs = [(ckpt.params, datasets[name], config, ckpt.iteration, slot) for slot, name in enumerate(plan)]
    mapper = executor.map if executor is not None else map
    trajs = list(mapper(_rollout_job, jobs))
    returns = [discounted_return(t.rewards, config.gamma) for t in trajs]
    groups = {}
    for slot, t in enumerate(trajs):
        groups.setdefault(t.dataset, []).append(slot)
    std = standardize_returns({k: [returns[s] for s in v] for k, v in groups.items()})
    r_hat = np.zeros(len(trajs))
    for k, slots in groups.items():
        r_hat[slots] = std[k]
    total = {k: np.zeros_like(v) for k, v in ckpt.params.items()}
    for slot, t in enumerate(trajs):  # fixed episode order
        for k, g in episode_gradient(t, r_hat[slot], config).items():
            total[k] += g
    descent = {k: -g / len(trajs) for k, g in total.items()}
    params, adam = adam_step(ckpt.params, descent, ckpt.adam)
    stats = {
        "iteration": ckpt.iteration + 1,
        "mean_return": float(np.mean(returns)),
        "mean_recon": float(np.mean([np.mean(t.recon_losses) for t in trajs])),
        "mean_entropy": float(np.mean([np.mean(t.entropies) for t in trajs])),
    }
    return Checkpoint(params, adam, ckpt.iteration + 1, config), stats


def train(config: TrainConfig, source_datasets: dict, checkpoint_out=None, resume: Checkpoint = None,
          executor=None, history: list = None) -> Checkpoint:
    if not source_datasets:
        raise ConfigError("training needs at least one source dataset")
    for ds in source_datasets.values():
        make_trial_split(ds, 0, derive_seed("train-split", config.base_seed))  # fail fast on unsplittable data
    ckpt = resume if resume is not None else init_checkpoint(config)
    t0 = time.perf_counter()
    window = []
    while ckpt.iteration < config.iterations:
        ckpt, stats = train_iteration(ckpt, source_datasets, executor)
        window.append(stats)
        if history is not None:
            history.append(stats)
        if config.log_every and ckpt.iteration % config.log_every == 0:
            log.info(
                "iter %d  return %.4f  recon %.5f  entropy %.4f  (%.1fs)",
                ckpt.iteration,
                np.mean([s["mean_return"] for s in window]),
                np.mean([s["mean_recon"] for s in window]),
                np.mean([s["mean_entropy"] for s in window]),
                time.perf_counter() - t0,
            )
            window = []
        if checkpoint_out and config.checkpoint_every and ckpt.iteration % config.checkpoint_every == 0:
            save_checkpoint(ckpt, checkpoint_out)
    if checkpoint_out:
        save_checkpoint(ckpt, checkpoint_out)
    return ckpt


# -- checkpoint format ------------------------------------------------------
# header: magic(8) version(u32) config digest(32) iteration(u64) config-json(u32 len + bytes)
# directory: count(u32), then per tensor name(u16 len + utf8) ndim(u8) dims(u32 each) float64 LE values
# trailer: sha256 over everything before it
def _pack_tensor(buf, name, arr):
    arr = np.ascontiguousarray(arr, dtype="<f8")
    raw = name.encode("utf-8")
    buf.write(struct.pack("<H", len(raw)))
    buf.write(raw)
    buf.write(struct.pack("<B", arr.ndim))
    buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
    buf.write(arr.tobytes())


def dumps_checkpoint(ckpt: Checkpoint) -> bytes:
    cfg = json.dumps(ckpt.config.to_dict(), sort_keys=True).encode("utf-8")
    adam_meta = {"step": ckpt.adam.step, "lr": ckpt.adam.lr, "beta1": ckpt.adam.beta1,
                 "beta2": ckpt.adam.beta2, "eps": ckpt.adam.eps}
    blob = json.dumps({"config": json.loads(cfg), "adam": adam_meta}, sort_keys=True).encode("utf-8")
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", ckpt.version))
    buf.write(ckpt.config.digest())
    buf.write(struct.pack("<Q", ckpt.iteration))
    buf.write(struct.pack("<I", len(blob)))
    buf.write(blob)
    tensors = []
    for k in sorted(ckpt.params):
        tensors += [("param/" + k, ckpt.params[k]), ("adam.m/" + k, ckpt.adam.m[k]), ("adam.v/" + k, ckpt.adam.v[k])]
    buf.write(struct.pack("<I", len(tensors)))
    for name, arr in tensors:
        _pack_tensor(buf, name, arr)
    body = buf.getvalue()
    return body + hashlib.sha256(body).digest()


def loads_checkpoint(data: bytes) -> Checkpoint:
    if len(data) < len(MAGIC) + 4 + 32 + 8 + 4 + 32:
        raise ChecksumError("checkpoint truncated")
    body, digest = data[:-32], data[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise ChecksumError("checkpoint checksum mismatch (corrupt or truncated file)")
    view = io.BytesIO(body)
    if view.read(len(MAGIC)) != MAGIC:
        raise ChecksumError("not a checkpoint file")
    (version,) = struct.unpack("<I", view.read(4))
    if version != FORMAT_VERSION:
        raise VersionError(f"checkpoint format {version}, this build reads {FORMAT_VERSION}")
    cfg_digest = view.read(32)
    (iteration,) = struct.unpack("<Q", view.read(8))
    (blob_len,) = struct.unpack("<I", view.read(4))
    meta = json.loads(view.read(blob_len).decode("utf-8"))
    config = TrainConfig(**meta["config"])
    if config.digest() != cfg_digest:
        raise ChecksumError("config digest does not match the stored configuration")
    (count,) = struct.unpack("<I", view.read(4))
    tensors = {}
    for _ in range(count):
        (nlen,) = struct.unpack("<H", view.read(2))
        name = view.read(nlen).decode("utf-8")
        (ndim,) = struct.unpack("<B", view.read(1))
        shape = struct.unpack(f"<{ndim}I", view.read(4 * ndim))
        size = int(np.prod(shape)) if ndim else 1
        tensors[name] = np.frombuffer(view.read(8 * size), dtype="<f8").astype(np.float64).reshape(shape)
    pick = lambda prefix: {k[len(prefix):]: v for k, v in tensors.items() if k.startswith(prefix)}  # noqa: E731
    a = meta["adam"]
    adam = AdamState(pick("adam.m/"), pick("adam.v/"), a["step"], a["lr"], a["beta1"], a["beta2"], a["eps"])
    return Checkpoint(pick("param/"), adam, iteration, config, version)


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    data = dumps_checkpoint(ckpt)
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        return loads_checkpoint(fh.read())
