import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from alpolicy.diffcore import (
    AdamState,
    Tape,
    Tensor,
    adam_step,
    backward,
    backward_channels,
    finite_diff_check,
)
from alpolicy.errors import EmptyInputError, InvalidStepError, ShapeError


def _rng(seed=0):
    return np.random.default_rng(seed)


# -- forward ops ------------------------------------------------------------------
def test_relu_example():
    assert Tape().relu(np.array([[-1.0, 2.0]])).value.tolist() == [[0.0, 2.0]]


def test_softmax_of_constant_row():
    p = Tape().row_softmax(np.full((1, 3), 7.5)).value
    np.testing.assert_allclose(p, [[1 / 3] * 3])


def test_mse_of_identical_inputs():
    A = _rng().random((3, 4))
    assert Tape().mse(A, A).item() == 0.0


def test_softmax_empty_row():
    with pytest.raises(EmptyInputError):
        Tape().row_softmax(np.zeros((1, 0)))


@pytest.mark.parametrize("op, args", [
    ("matmul", (np.zeros((2, 3)), np.zeros((2, 3)))),
    ("add_bias", (np.zeros((2, 3)), np.zeros((1, 2)))),
    ("mse", (np.zeros((2, 3)), np.zeros((3, 2)))),
    ("add", (np.zeros((2, 3)), np.zeros((2, 2)))),
    ("concat_cols", (np.zeros((2, 3)), np.zeros((3, 3)))),
])
def test_shape_errors(op, args):
    with pytest.raises(ShapeError):
        getattr(Tape(), op)(*args)


def test_tensor_rejects_three_dimensions():
    with pytest.raises(ShapeError):
        Tensor(np.zeros((2, 2, 2)))


def test_neg_entropy_with_zero_probability():
    v = Tape().neg_entropy(np.array([[0.0, 0.5, 0.5]])).item()
    assert v == pytest.approx(np.log(0.5))


def test_quiet_tape_records_nothing():
    t = Tape(record=False)
    P = t.params({"W": np.ones((2, 2))})
    t.relu(t.matmul(np.ones((1, 2)), P["W"]))
    assert t.records == [] and t.leaves == {}


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(1, 9)),
              elements=st.floats(-50, 50, allow_nan=False)))
def test_softmax_rows_sum_to_one(A):
    p = Tape().row_softmax(A).value
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-9)
    assert np.all(p > 0)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 12), st.integers(0, 10_000))
def test_softmax_log_likelihood_gradient_is_p_minus_onehot(n, seed):
    rng = _rng(seed)
    z = rng.normal(size=(1, n))
    k = int(rng.integers(n))
    tape = Tape()
    P = tape.params({"z": z})
    p = tape.row_softmax(P["z"])
    g = backward(tape, tape.pick_log(p, k))["z"]
    onehot = np.zeros((1, n))
    onehot[0, k] = 1.0
    np.testing.assert_allclose(-g, p.value - onehot, atol=1e-9)


# -- backward --------------------------------------------------------------------
def test_linear_map_gradient_equals_input():
    x = np.array([[0.5], [-2.0], [3.0]])
    tape = Tape()
    P = tape.params({"W": _rng().random((2, 3))})
    g = backward(tape, tape.sum_all(tape.matmul(P["W"], x)))["W"]
    np.testing.assert_array_equal(g, np.tile(x.T, (2, 1)))


def test_unused_parameter_gets_zero_gradient():
    tape = Tape()
    P = tape.params({"W": np.ones((2, 2)), "unused": np.ones((3, 1))})
    g = backward(tape, tape.sum_all(P["W"]))
    assert np.array_equal(g["unused"], np.zeros((3, 1)))


def test_non_scalar_loss_rejected():
    tape = Tape()
    P = tape.params({"W": np.ones((2, 2))})
    with pytest.raises(ShapeError):
        backward(tape, tape.relu(P["W"]))


def test_mse_relu_matches_finite_differences():
    rng = _rng(1)
    x, target = rng.normal(size=(4, 3)), rng.normal(size=(4, 2))

    def fn(tape, P):
        return tape.mse(tape.relu(tape.matmul(x, P["W"])), target)

    assert finite_diff_check(fn, {"W": rng.normal(size=(3, 2))}, h=1e-5) < 1e-4


def _op_graphs():
    rng = _rng(7)
    A, B = rng.normal(size=(3, 4)), rng.normal(size=(4, 2))
    T = rng.normal(size=(3, 2))
    return {
        "matmul": lambda t, P: t.sum_all(t.matmul(P["A"], P["B"])),
        "add_bias": lambda t, P: t.mse(t.add_bias(P["A"], P["b"]), A),
        "relu": lambda t, P: t.sum_all(t.relu(t.matmul(P["A"], P["B"]))),
        "row_softmax": lambda t, P: t.pick_log(t.row_softmax(t.matmul(P["r"], P["B"])), 1),
        "neg_entropy": lambda t, P: t.neg_entropy(t.row_softmax(t.matmul(P["r"], P["B"]))),
        "mse": lambda t, P: t.mse(t.matmul(P["A"], P["B"]), T),
        "scale": lambda t, P: t.sum_all(t.scale(t.relu(P["A"]), -2.5)),
        "add": lambda t, P: t.mse(t.add(P["A"], P["A2"]), A),
        "concat_cols": lambda t, P: t.mse(t.concat_cols(P["A"], P["A2"]), np.hstack([A, A])),
        "transpose": lambda t, P: t.mse(t.transpose(P["A"]), A.T * 2),
    }, {
        "A": A + 0.1, "B": B, "A2": rng.normal(size=(3, 4)), "b": rng.normal(size=(1, 4)),
        "r": rng.normal(size=(1, 4)),
    }


@pytest.mark.parametrize("name", sorted(_op_graphs()[0]))
def test_every_op_passes_finite_differences(name):
    graphs, params = _op_graphs()
    assert finite_diff_check(graphs[name], params, h=1e-5) < 1e-4


def test_backward_channels_matches_separate_sweeps():
    rng = _rng(3)
    x = rng.normal(size=(5, 3))

    def build():
        tape = Tape()
        P = tape.params({"W": rng_w, "V": rng_v})
        h = tape.relu(tape.matmul(x, P["W"]))
        p = tape.row_softmax(tape.transpose(tape.matmul(h, P["V"])))
        return tape, tape.pick_log(p, 2), tape.neg_entropy(p), tape.mse(h, np.ones_like(h.value))

    rng_w, rng_v = rng.normal(size=(3, 4)), rng.normal(size=(4, 1))
    tape, lp, ne, mse = build()
    both = backward_channels(tape, [[(lp, 0.7)], [(ne, -0.2), (mse, 0.3)]])
    tape1, lp1, _, _ = build()
    tape2, _, ne2, mse2 = build()
    one = backward(tape1, lp1, 0.7)
    two = backward(tape2, [(ne2, -0.2), (mse2, 0.3)])
    for k in ("W", "V"):
        np.testing.assert_allclose(both[0][k], one[k], atol=1e-14)
        np.testing.assert_allclose(both[1][k], two[k], atol=1e-14)
    acc = [{k: np.ones_like(v) for k, v in one.items()}, {k: np.zeros_like(v) for k, v in one.items()}]
    tape3, lp3, ne3, mse3 = build()
    backward_channels(tape3, [[(lp3, 0.7)], [(ne3, -0.2), (mse3, 0.3)]], into=acc)
    np.testing.assert_allclose(acc[0]["W"], one["W"] + 1.0, atol=1e-14)


# -- Adam --------------------------------------------------------------------------
def test_adam_zero_gradient_keeps_parameters():
    p = {"W": _rng().normal(size=(2, 3))}
    new, _ = adam_step(p, {"W": np.zeros((2, 3))}, AdamState.zeros_like(p))
    np.testing.assert_array_equal(new["W"], p["W"])


def test_adam_first_step_is_signed_learning_rate():
    p = {"W": np.zeros((2, 3))}
    g = _rng(2).normal(size=(2, 3))
    new, state = adam_step(p, {"W": g}, AdamState.zeros_like(p))
    np.testing.assert_allclose(new["W"], -np.sign(g) * 0.001, atol=1e-6)
    assert state.step == 1


def test_adam_is_deterministic():
    p = {"W": _rng().normal(size=(2, 2))}
    g = {"W": _rng(1).normal(size=(2, 2))}
    s = AdamState.zeros_like(p)
    a, _ = adam_step(p, g, s)
    b, _ = adam_step(p, g, s)
    assert a["W"].tobytes() == b["W"].tobytes()


def test_adam_shape_mismatch():
    p = {"W": np.zeros((2, 3))}
    with pytest.raises(ShapeError):
        adam_step(p, {"W": np.zeros((3, 2))}, AdamState.zeros_like(p))


def test_adam_defaults():
    s = AdamState.zeros_like({"W": np.zeros(1)})
    assert (s.lr, s.beta1, s.beta2, s.eps) == (0.001, 0.9, 0.999, 1e-8)


# -- finite differences ---------------------------------------------------------------
def test_quadratic_is_exact():
    C = _rng(4).normal(size=(3, 3))

    def fn(tape, P):
        return tape.sum_all(tape.matmul(tape.matmul(tape.transpose(P["x"]), C), P["x"]))

    assert finite_diff_check(fn, {"x": _rng(5).normal(size=(3, 1))}) < 1e-7


@pytest.mark.parametrize("h", [0.0, -1e-5])
def test_invalid_step(h):
    with pytest.raises(InvalidStepError):
        finite_diff_check(lambda t, P: t.sum_all(P["x"]), {"x": np.ones((1, 1))}, h=h)
