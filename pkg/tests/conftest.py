import os

import numpy as np
import pytest

from alpolicy.data import Dataset, TrialSplit, make_trial_split, rescale_features

REPO = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DATA_DIR = os.path.join(REPO, "data")
MANIFEST = os.path.join(DATA_DIR, "manifest.csv")

# criterion -> (passed, detail); printed after the run by pytest_terminal_summary
ACCEPTANCE = {}


def make_blobs(n=60, d=4, seed=0, name="blobs", shift=1.5):
    """Two overlapping Gaussian classes, rescaled to [0, 1]."""
    rng = np.random.default_rng(seed)
    y = np.where(np.arange(n) % 2 == 0, -1.0, 1.0)
    X = rng.normal(size=(n, d)) + shift * y[:, None] * np.linspace(1.0, 0.2, d)
    return Dataset(name=name, X=rescale_features(X), y=y, labels=("a", "b"))


def manual_split(pool, test, initial):
    return TrialSplit(0, np.asarray(pool, dtype=np.int64), np.asarray(test, dtype=np.int64),
                      np.asarray(initial, dtype=np.int64))


@pytest.fixture
def blobs():
    return make_blobs()


@pytest.fixture
def blobs_split(blobs):
    return make_trial_split(blobs, 0, 0)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{key} {'PASS' if ok else 'FAIL'}: {detail}")
