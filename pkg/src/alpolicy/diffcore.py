"""Reverse-mode differentiation over dense float64 matrices.

Only the handful of operations the policy and meta networks need are
provided. Every value is a 2-D array; scalars are 1x1. Operations are
methods on a ``Tape``, which records them in execution order (and therefore
in topological order) whenever an input requires a gradient::

    tape = Tape()
    p = tape.params({"W": W})
    loss = tape.mse(tape.relu(tape.matmul(x, p["W"])), target)
    grads = backward(tape, loss)        # {"W": dLoss/dW}
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyInputError, InvalidStepError, ShapeError

LOG_FLOOR = 1e-300


class Tensor:
    __slots__ = ("value", "requires_grad", "name")

    def __init__(self, value, requires_grad=False, name=None):
        value = np.asarray(value, dtype=np.float64)
        if value.ndim == 0:
            value = value.reshape(1, 1)
        elif value.ndim == 1:
            value = value.reshape(1, -1)
        elif value.ndim != 2:
            raise ShapeError(f"tensors are 2-D, got shape {value.shape}")
        self.value = value
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def item(self) -> float:
        if self.value.size != 1:
            raise ShapeError(f"item() on a {self.shape} tensor")
        return float(self.value[0, 0])

    def __repr__(self):
        return f"Tensor(shape={self.shape}, name={self.name!r})"


def _right_mul(g, m):
    """``g @ m`` for a (channels, r, c) gradient using one 2-D product."""
    nc, r, c = g.shape
    return (g.reshape(nc * r, c) @ m).reshape(nc, r, m.shape[1])


def _left_mul(m, g):
    """``m @ g`` for a (channels, r, c) gradient using one 2-D product."""
    nc, r, c = g.shape
    if nc == 1:
        return (m @ g[0])[None]
    out = m @ g.transpose(1, 0, 2).reshape(r, nc * c)
    return out.reshape(m.shape[0], nc, c).transpose(1, 0, 2)


def _t(x):
    return x if isinstance(x, Tensor) else Tensor(x)


@dataclass
class _Record:
    out: Tensor
    inputs: tuple
    grad_fn: object  # (upstream gradient, needs-grad flags) -> tuple of input gradients


@dataclass
class Tape:
    record: bool = True
    records: list = field(default_factory=list)
    leaves: dict = field(default_factory=dict)

    def params(self, arrays: dict) -> dict:
        """Wrap named arrays as gradient-carrying leaves."""
        out = {}
        for name, value in arrays.items():
            t = Tensor(value, requires_grad=self.record, name=name)
            out[name] = t
            if self.record:
                self.leaves[name] = t
        return out

    def _emit(self, value, inputs, grad_fn):
        needs = self.record and any(x.requires_grad for x in inputs)
        out = Tensor(value, requires_grad=needs)
        if needs:
            self.records.append(_Record(out, inputs, grad_fn))
        return out

    # -- operations ---------------------------------------------------------
    def matmul(self, a, b):
        a, b = _t(a), _t(b)
        if a.shape[1] != b.shape[0]:
            raise ShapeError(f"matmul {a.shape} @ {b.shape}")
        av, bv = a.value, b.value
        return self._emit(
            av @ bv,
            (a, b),
            lambda g, need: (_right_mul(g, bv.T) if need[0] else None, _left_mul(av.T, g) if need[1] else None),
        )

    def add_bias(self, a, bias):
        a, bias = _t(a), _t(bias)
        if bias.shape != (1, a.shape[1]):
            raise ShapeError(f"bias {bias.shape} does not fit {a.shape}")
        return self._emit(a.value + bias.value, (a, bias), lambda g, need: (g, g.sum(axis=-2, keepdims=True)))

    def relu(self, a):
        a = _t(a)
        mask = a.value > 0
        return self._emit(np.where(mask, a.value, 0.0), (a,), lambda g, need: (g * mask,))

    def row_softmax(self, a):
        a = _t(a)
        if a.shape[1] == 0:
            raise EmptyInputError("softmax over an empty row")
        z = a.value - a.value.max(axis=1, keepdims=True)
        e = np.exp(z)
        p = e / e.sum(axis=1, keepdims=True)
        return self._emit(p, (a,), lambda g, need: (p * (g - (g * p).sum(axis=-1, keepdims=True)),))

    def neg_entropy(self, p):
        """Sum of p*log(p) over all entries (0 log 0 = 0); minus the entropy."""
        p = _t(p)
        pv = p.value
        pos = pv > 0
        logp = np.where(pos, np.log(np.where(pos, pv, 1.0)), 0.0)
        dlog = np.where(pos, logp + 1.0, 0.0)
        return self._emit((pv * logp).sum(), (p,), lambda g, need: (g * dlog,))

    def mse(self, a, b):
        a, b = _t(a), _t(b)
        if a.shape != b.shape:
            raise ShapeError(f"mse {a.shape} vs {b.shape}")
        diff = a.value - b.value
        n = diff.size

        def grad(g, need):
            ga = g * (2.0 / n) * diff
            return ga, (-ga if need[1] else None)

        return self._emit(np.mean(diff * diff), (a, b), grad)

    def scale(self, a, c):
        a = _t(a)
        c = float(c)
        return self._emit(c * a.value, (a,), lambda g, need: (c * g,))

    def add(self, a, b):
        a, b = _t(a), _t(b)
        if a.shape != b.shape:
            raise ShapeError(f"add {a.shape} + {b.shape}")
        return self._emit(a.value + b.value, (a, b), lambda g, need: (g, g))

    def concat_cols(self, a, b):
        a, b = _t(a), _t(b)
        if a.shape[0] != b.shape[0]:
            raise ShapeError(f"concat rows {a.shape[0]} != {b.shape[0]}")
        k = a.shape[1]
        return self._emit(np.hstack([a.value, b.value]), (a, b), lambda g, need: (g[..., :k], g[..., k:]))

    def transpose(self, a):
        a = _t(a)
        return self._emit(a.value.T.copy(), (a,), lambda g, need: (np.swapaxes(g, -1, -2),))

    def sum_all(self, a):
        a = _t(a)
        shape = a.shape
        return self._emit(a.value.sum(), (a,), lambda g, need: (g * np.ones(shape),))

    def pick_log(self, p, index: int):
        """log p[0, index] of a single-row probability tensor."""
        p = _t(p)
        if p.shape[0] != 1 or not 0 <= index < p.shape[1]:
            raise ShapeError(f"cannot pick column {index} of a {p.shape} tensor")
        val = max(p.value[0, index], LOG_FLOOR)

        def grad(g, need):
            out = np.zeros(g.shape[:-2] + p.shape)
            out[..., 0, index] = g[..., 0, 0] / val
            return (out,)

        return self._emit(np.log(val), (p,), grad)


def backward(tape: Tape, loss, seed: float = 1.0) -> dict:
    """Gradients of ``seed * loss`` for every leaf created by ``tape.params``.

    ``loss`` may also be a list of ``(tensor, weight)`` pairs, in which case the
    weighted sum is differentiated in a single sweep.
    """
    roots = [(loss, seed)] if isinstance(loss, Tensor) else list(loss)
    return backward_channels(tape, [roots])[0]


def backward_channels(tape: Tape, channels: list, into: list = None) -> list:
    """Several independent gradients in one reverse sweep.

    ``channels`` is a list of root lists, each a list of ``(scalar tensor, weight)``.
    Upstream gradients carry a leading channel axis, so every record is visited
    once however many channels there are. Returns one gradient dict per channel;
    when ``into`` (one dict per channel) is given the gradients are added to it
    in place and it is returned instead.
    """
    nc = len(channels)
    grads = {}
    for c, roots in enumerate(channels):
        for t, w in roots:
            if t.shape != (1, 1):
                raise ShapeError(f"loss must be scalar, got {t.shape}")
            g = grads.setdefault(id(t), np.zeros((nc, 1, 1)))
            g[c] += float(w)
    for rec in reversed(tape.records):
        g = grads.pop(id(rec.out), None)
        if g is None:
            continue
        need = tuple(inp.requires_grad for inp in rec.inputs)
        for inp, gi in zip(rec.inputs, rec.grad_fn(g, need)):
            if gi is None or not inp.requires_grad:
                continue
            key = id(inp)
            prev = grads.get(key)
            grads[key] = gi if prev is None else prev + gi
    out = into if into is not None else [{} for _ in range(nc)]
    for name, leaf in tape.leaves.items():
        g = grads.get(id(leaf))
        for c in range(nc):
            if into is not None:
                if g is not None:
                    out[c][name] += g[c]
            elif g is None:
                out[c][name] = np.zeros_like(leaf.value)
            else:
                out[c][name] = g[c] if g[c].shape == leaf.shape else np.broadcast_to(g[c], leaf.shape).copy()
    return out


# -- optimiser --------------------------------------------------------------
@dataclass
class AdamState:
    m: dict
    v: dict
    step: int = 0
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: dict, **kw) -> "AdamState":
        return cls(
            m={k: np.zeros_like(v) for k, v in params.items()},
            v={k: np.zeros_like(v) for k, v in params.items()},
            **kw,
        )


def adam_step(params: dict, grads: dict, state: AdamState):
    """One bias-corrected Adam descent step. Returns ``(new_params, new_state)``."""
    t = state.step + 1
    new_params, new_m, new_v = {}, {}, {}
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    for k, p in params.items():
        g = grads[k]
        if g.shape != p.shape or state.m[k].shape != p.shape:
            raise ShapeError(f"{k}: gradient {g.shape} / state {state.m[k].shape} vs parameter {p.shape}")
        m = state.beta1 * state.m[k] + (1.0 - state.beta1) * g
        v = state.beta2 * state.v[k] + (1.0 - state.beta2) * g * g
        new_params[k] = p - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        new_m[k], new_v[k] = m, v
    new_state = AdamState(new_m, new_v, t, state.lr, state.beta1, state.beta2, state.eps)
    return new_params, new_state


# -- gradient checking ------------------------------------------------------
def finite_diff_check(fn, params: dict, h: float = 1e-5, atol: float = 1e-6) -> float:
    """Max relative error between ``backward`` and central differences.

    ``fn(tape, p)`` builds the scalar loss from the wrapped parameters ``p``.
    The per-entry error is ``|a - n| / max(|a|, |n|, atol)``.
    """
    if not h > 0:
        raise InvalidStepError(f"finite-difference step must be positive, got {h}")
    tape = Tape()
    analytic = backward(tape, fn(tape, tape.params(params)))

    def value(arrays):
        quiet = Tape(record=False)
        return fn(quiet, quiet.params(arrays)).item()

    worst = 0.0
    for name, p in params.items():
        p = np.asarray(p, dtype=np.float64)
        for idx in np.ndindex(p.shape):
            up = dict(params)
            dn = dict(params)
            pu, pd = p.copy(), p.copy()
            pu[idx] += h
            pd[idx] -= h
            up[name], dn[name] = pu, pd
            numeric = (value(up) - value(dn)) / (2.0 * h)
            a = analytic[name].reshape(p.shape)[idx]
            err = abs(a - numeric) / max(abs(a), abs(numeric), atol)
            worst = max(worst, err)
    return worst
