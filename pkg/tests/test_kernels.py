import json
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from alpolicy import kernels

from conftest import REPO

compiled = pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled extension not built")
PY = kernels.get_backend("python")


def _cy():
    return kernels.get_backend("cython")


def _labelled(rng, m, d):
    X = rng.random((m, d))
    y = np.where(np.arange(m) % 2 == 0, -1.0, 1.0)
    rng.shuffle(y)
    return X, y


@compiled
@settings(max_examples=40, deadline=None)
@given(st.integers(0, 60), st.integers(1, 9), st.integers(0, 10_000))
def test_histogram_parity(n, d, seed):
    rng = np.random.default_rng(seed)
    Z = rng.random((n, d))
    Z[rng.random((n, d)) < 0.1] = 1.0
    post = rng.random(n)
    np.testing.assert_array_equal(_cy().column_histograms(Z, 10), PY.column_histograms(Z, 10))
    np.testing.assert_array_equal(_cy().joint_histograms(Z, post, 10), PY.joint_histograms(Z, post, 10))


@compiled
@settings(max_examples=40, deadline=None)
@given(st.integers(1, 40), st.integers(0, 12), st.integers(1, 9), st.integers(0, 10_000))
def test_min_distance_parity(n, m, d, seed):
    rng = np.random.default_rng(seed)
    A, B = rng.random((n, d)), rng.random((m, d))
    np.testing.assert_allclose(_cy().min_distances(A, B), PY.min_distances(A, B), rtol=1e-12)


@compiled
@settings(max_examples=25, deadline=None)
@given(st.integers(2, 24), st.integers(1, 8), st.integers(0, 10_000))
def test_smo_parity(m, d, seed):
    X, y = _labelled(np.random.default_rng(seed), m, d)
    wc, bc = _cy().svm_fit_smo(X, y, 0.01, 1e-9, 100_000)
    wp, bp = PY.svm_fit_smo(X, y, 0.01, 1e-9, 100_000)
    np.testing.assert_allclose(wc, wp, atol=1e-7)
    assert bc == pytest.approx(bp, abs=1e-7)


@compiled
@settings(max_examples=15, deadline=None)
@given(st.integers(2, 24), st.integers(1, 8), st.integers(0, 10_000))
def test_subgradient_parity(m, d, seed):
    X, y = _labelled(np.random.default_rng(seed), m, d)
    wc, bc = _cy().svm_fit_subgradient(X, y, 0.01, 300)
    wp, bp = PY.svm_fit_subgradient(X, y, 0.01, 300)
    np.testing.assert_allclose(wc, wp, atol=1e-9)
    assert bc == pytest.approx(bp, abs=1e-9)


def test_active_backend_is_reported():
    assert kernels.BACKEND in ("cython", "python")
    assert kernels.get_backend() is (PY if kernels.BACKEND == "python" else _cy())
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


def test_environment_forces_fallback():
    env = dict(os.environ, ALPOLICY_PURE_PYTHON="1")
    r = subprocess.run([sys.executable, "-c", "import alpolicy.kernels as k; print(k.BACKEND)"],
                       capture_output=True, text=True, env=env, cwd=REPO)
    assert r.stdout.strip() == "python"


def test_wrappers_accept_non_contiguous_input():
    Z = np.asfortranarray(np.random.default_rng(0).random((7, 3)))
    assert kernels.column_histograms(Z).shape == (3, 10)
    assert kernels.min_distances(Z[::2], Z[1::2]).shape == (4,)


def test_min_distance_to_empty_set():
    assert np.all(np.isinf(kernels.min_distances(np.zeros((3, 2)), np.zeros((0, 2)))))


@compiled
def test_benchmark_script_runs(tmp_path):
    out = tmp_path / "bench.json"
    r = subprocess.run([sys.executable, os.path.join(REPO, "benchmarks", "bench_kernels.py"), "--repeat", "2",
                        "--json", str(out)], capture_output=True, text=True, cwd=REPO)
    assert r.returncode == 0, r.stderr
    rows = json.loads(out.read_text())
    assert {row["kernel"] for row in rows} == {"svm_fit_smo", "svm_fit_subgradient", "column_histograms",
                                              "joint_histograms", "min_distances"}
    assert all(row["max_abs_diff"] < 1e-6 for row in rows)
