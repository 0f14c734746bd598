"""Compare the compiled and numpy kernel backends on episode-sized inputs.

    python benchmarks/bench_kernels.py [--repeat 50] [--json out.json]

Each kernel is timed on both backends with identical inputs, outputs are
checked for agreement, and a speedup column is printed.
"""
import argparse
import json
import sys
import timeit

import numpy as np

from alpolicy import kernels


def _cases(rng):
    # a breast-sized pool/test split part way through an episode
    X = rng.random((342, 9))
    Z = np.column_stack([X, rng.random((342, 2))])
    post = rng.random(342)
    L = rng.random((12, 9))
    y = np.where(rng.random(12) < 0.5, -1.0, 1.0)
    y[:2] = (-1.0, 1.0)
    return {
        "svm_fit_smo": (lambda k: k.svm_fit_smo(L, y, 0.01, 1e-9, 100_000)),
        "svm_fit_subgradient": (lambda k: k.svm_fit_subgradient(L, y, 0.01, 500)),
        "column_histograms": (lambda k: k.column_histograms(Z, 10)),
        "joint_histograms": (lambda k: k.joint_histograms(Z, post, 10)),
        "min_distances": (lambda k: k.min_distances(X, L)),
    }


def _flat(out):
    if isinstance(out, tuple):
        return np.concatenate([np.ravel(np.asarray(o, dtype=float)) for o in out])
    return np.ravel(np.asarray(out, dtype=float))


def run(repeat):
    try:
        compiled = kernels.get_backend("cython")
    except ImportError:
        print("compiled backend not built; run `pip install -e . --no-build-isolation` first", file=sys.stderr)
        return None
    pure = kernels.get_backend("python")
    rows = []
    for name, call in _cases(np.random.default_rng(0)).items():
        diff = float(np.max(np.abs(_flat(call(compiled)) - _flat(call(pure)))))
        t_c = min(timeit.repeat(lambda: call(compiled), number=repeat, repeat=3)) / repeat
        t_p = min(timeit.repeat(lambda: call(pure), number=repeat, repeat=3)) / repeat
        rows.append({"kernel": name, "cython_us": t_c * 1e6, "python_us": t_p * 1e6,
                     "speedup": t_p / t_c, "max_abs_diff": diff})
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=50)
    ap.add_argument("--json", help="also write the rows as JSON")
    args = ap.parse_args(argv)
    rows = run(args.repeat)
    if rows is None:
        return 1
    print(f"{'kernel':<22}{'cython us':>12}{'python us':>12}{'speedup':>10}{'max |diff|':>13}")
    for r in rows:
        print(f"{r['kernel']:<22}{r['cython_us']:>12.1f}{r['python_us']:>12.1f}{r['speedup']:>9.1f}x{r['max_abs_diff']:>13.2e}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
