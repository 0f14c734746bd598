"""Dataset loading, min-max rescaling and seeded pool/test trial splits."""
from __future__ import annotations

import csv
import hashlib
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateDatasetError,
    DegenerateSplitError,
    InvalidDataError,
    MalformedFileError,
    UnsupportedTaskError,
)

SPLIT_RETRIES = 100


@dataclass(frozen=True, eq=False)
class Dataset:
    name: str
    X: np.ndarray
    y: np.ndarray
    labels: tuple = ()  # raw label text for (-1, +1)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d_raw(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class TrialSplit:
    trial_index: int
    pool_indices: np.ndarray
    test_indices: np.ndarray
    initial_labelled: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))


@dataclass(frozen=True)
class ManifestEntry:
    name: str
    path: str
    format: str = "csv"
    label_column: int = -1


def derive_seed(*parts) -> int:
    """Stable 64-bit seed from an arbitrary tuple of ints/strings."""
    h = hashlib.blake2b(digest_size=8)
    for p in parts:
        h.update(repr(p).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "little")


def rescale_features(X_raw) -> np.ndarray:
    X = np.asarray(X_raw, dtype=np.float64)
    if X.ndim != 2:
        raise InvalidDataError(f"expected a 2-D matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidDataError("feature matrix contains non-finite values")
    if X.shape[0] == 0:
        return X.copy()
    lo = X.min(axis=0)
    span = X.max(axis=0) - lo
    out = np.zeros_like(X)
    live = span > 0
    out[:, live] = (X[:, live] - lo[live]) / span[live]
    # guard against 1 + 1ulp after division
    return np.clip(out, 0.0, 1.0)


def _read_csv(path, label_column):
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or all(not tok.strip() for tok in row):
                continue
            rows.append((lineno, [tok.strip() for tok in row]))
    if not rows:
        raise MalformedFileError(f"{path}: no data rows")
    width = len(rows[0][1])
    if width < 2:
        raise MalformedFileError(f"{path}: need at least one feature and a label column")
    col = label_column if label_column >= 0 else width + label_column
    if not 0 <= col < width:
        raise MalformedFileError(f"{path}: label column {label_column} out of range")
    feats, labels = [], []
    for lineno, row in rows:
        if len(row) != width:
            raise MalformedFileError(f"{path}:{lineno}: expected {width} fields, got {len(row)}")
        try:
            feats.append([float(tok) for j, tok in enumerate(row) if j != col])
        except ValueError as exc:
            raise MalformedFileError(f"{path}:{lineno}: {exc}") from None
        labels.append(row[col])
    return np.array(feats, dtype=np.float64), labels


def _read_libsvm(path):
    entries, labels = [], []
    d = 0
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            labels.append(tokens[0])
            row = {}
            for tok in tokens[1:]:
                try:
                    idx, val = tok.split(":")
                    idx = int(idx)
                    row[idx] = float(val)
                except ValueError:
                    raise MalformedFileError(f"{path}:{lineno}: bad token {tok!r}") from None
                if idx < 1:
                    raise MalformedFileError(f"{path}:{lineno}: feature index must be >= 1")
                d = max(d, idx)
            entries.append(row)
    if not entries:
        raise MalformedFileError(f"{path}: no data rows")
    X = np.zeros((len(entries), d))
    for i, row in enumerate(entries):
        for idx, val in row.items():
            X[i, idx - 1] = val
    return X, labels


def load_dataset(path, schema=None, name=None, min_per_class=2) -> Dataset:
    """Load a binary classification file and rescale its features into [0, 1].

    ``schema`` is a ``ManifestEntry`` or a dict with ``format`` ("csv" or
    "libsvm") and ``label_column``. The smaller raw label maps to -1.
    """
    if schema is None:
        schema = {}
    if isinstance(schema, ManifestEntry):
        fmt, label_column = schema.format, schema.label_column
        name = name or schema.name
    else:
        fmt = schema.get("format", "csv")
        label_column = int(schema.get("label_column", -1))
    if name is None:
        name = os.path.splitext(os.path.basename(str(path)))[0]
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    if fmt == "csv":
        X_raw, labels = _read_csv(path, label_column)
    elif fmt == "libsvm":
        X_raw, labels = _read_libsvm(path)
    else:
        raise MalformedFileError(f"unknown format {fmt!r}")

    classes = sorted(set(labels))
    if len(classes) > 2:
        raise UnsupportedTaskError(f"{name}: {len(classes)} classes, only binary tasks are supported")
    if len(classes) < 2:
        raise DegenerateDatasetError(f"{name}: a single class present")
    y = np.array([-1.0 if lab == classes[0] else 1.0 for lab in labels])
    for cls, sign in zip(classes, (-1.0, 1.0)):
        if np.count_nonzero(y == sign) < min_per_class:
            raise DegenerateDatasetError(f"{name}: class {cls!r} has fewer than {min_per_class} instances")
    X = rescale_features(X_raw)
    X.setflags(write=False)
    y.setflags(write=False)
    return Dataset(name=name, X=X, y=y, labels=tuple(classes))


def read_manifest(path) -> list[ManifestEntry]:
    """Parse a ``name,path,format,label_column`` manifest; paths are relative to it."""
    base = os.path.dirname(os.path.abspath(path))
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"name", "path"} - set(reader.fieldnames or ())
        if missing:
            raise MalformedFileError(f"{path}: manifest lacks columns {sorted(missing)}")
        for row in reader:
            p = row["path"].strip()
            out.append(
                ManifestEntry(
                    name=row["name"].strip(),
                    path=p if os.path.isabs(p) else os.path.join(base, p),
                    format=(row.get("format") or "csv").strip(),
                    label_column=int((row.get("label_column") or "-1").strip()),
                )
            )
    return out


def load_manifest(path, names=None, skip_missing=False) -> dict[str, Dataset]:
    out = {}
    for entry in read_manifest(path):
        if names is not None and entry.name not in names:
            continue
        if skip_missing and not os.path.exists(entry.path):
            continue
        out[entry.name] = load_dataset(entry.path, entry)
    return out


def make_trial_split(ds: Dataset, trial_index: int, base_seed: int = 0) -> TrialSplit:
    """Seeded 50/50 pool/test split with one initial labelled pool instance per class."""
    n = ds.n
    if n < 8:
        raise DegenerateSplitError(f"{ds.name}: need at least 8 instances, have {n}")
    n_pool = (n + 1) // 2
    for attempt in range(SPLIT_RETRIES + 1):
        rng = np.random.default_rng(derive_seed("split", base_seed, ds.name, trial_index, attempt))
        perm = rng.permutation(n)
        pool, test = perm[:n_pool], perm[n_pool:]
        pool_y = ds.y[pool]
        neg = np.flatnonzero(pool_y < 0)
        pos = np.flatnonzero(pool_y > 0)
        if len(neg) and len(pos):
            init = np.array([pool[rng.choice(neg)], pool[rng.choice(pos)]], dtype=np.int64)
            return TrialSplit(trial_index, pool.astype(np.int64), test.astype(np.int64), init)
    raise DegenerateSplitError(f"{ds.name}: no pool with both classes after {SPLIT_RETRIES} retries")
