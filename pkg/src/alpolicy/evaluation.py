"""Leave-one-out evaluation, AUC scoring, comparison tables and the domain-count study.

Every method in a row sees the same trial splits: trial ``i`` on dataset ``D``
always uses ``make_trial_split(D, i, base_seed)``. AUC is the mean accuracy
after each of the ``budget`` queries, times 100.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from . import baselines, trainer
from .data import Dataset, derive_seed, make_trial_split
from .errors import ReportError, ShapeError
from .trainer import Checkpoint, TrainConfig

log = logging.getLogger(__name__)

BASELINES = {
    "RAND": baselines.StrategyKind.RANDOM,
    "US": baselines.StrategyKind.UNCERTAINTY,
    "DFF": baselines.StrategyKind.DFF,
    "QBB": baselines.StrategyKind.QBB,
}
TRAIN_METHOD = "MLP-GAL(Tr)"
TEST_METHOD = "MLP-GAL(Te)"
SINGLE_METHOD = "SingleRL"
DEFAULT_COUNTS = (1, 4, 7, 13)
DEFAULT_SUBSETS = 3


def auc(acc_history, budget: int | None = None) -> float:
    """100 x mean of Acc_1..Acc_T; Acc_0 precedes any query and is left out."""
    acc = np.asarray(acc_history, dtype=np.float64).reshape(-1)
    if budget is not None and acc.size != budget + 1:
        raise ShapeError(f"expected {budget + 1} accuracies for budget {budget}, got {acc.size}")
    if acc.size < 2:
        raise ShapeError("an accuracy history needs Acc_0 and at least one post-query value")
    return 100.0 * float(acc[1:].mean())


# -- running methods ----------------------------------------------------------
def _policy_params(source):
    if isinstance(source, Checkpoint):
        return source.params
    if isinstance(source, dict):
        return source
    return None


def _strategy(source):
    if isinstance(source, baselines.StrategyKind):
        return source
    if isinstance(source, str):
        if source in BASELINES:
            return BASELINES[source]
        return baselines.StrategyKind(source)
    raise TypeError(f"cannot evaluate a {type(source).__name__}")


def _trial_job(args):
    source, ds, trial, budget, base_seed = args
    split = make_trial_split(ds, trial, base_seed)
    params = _policy_params(source)
    if params is not None:
        return trainer.run_policy_episode(params, ds, split, budget, mode="argmax")
    kind = _strategy(source)
    return baselines.run_episode(ds, split, kind, budget, derive_seed("eval", base_seed, ds.name, trial))


def evaluate_histories(source, ds: Dataset, trials: int, budget: int = 20, base_seed: int = 0,
                       executor=None) -> list[list[float]]:
    """Accuracy histories of ``trials`` paired episodes.

    ``source`` is a ``Checkpoint``, a parameter dict, a ``StrategyKind`` or a
    baseline name ("RAND", "US", "DFF", "QBB"). Learned policies act greedily.
    """
    if trials < 0:
        raise ValueError("trials must be non-negative")
    if _policy_params(source) is None:
        _strategy(source)  # reject unknown names before any work
    jobs = [(source, ds, i, budget, base_seed) for i in range(trials)]
    mapper = executor.map if executor is not None else map
    return list(mapper(_trial_job, jobs))


def evaluate_policy(source, ds: Dataset, trials: int, budget: int = 20, base_seed: int = 0,
                    executor=None) -> list[float]:
    """Per-trial AUCs; see ``evaluate_histories`` for what ``source`` may be."""
    return [auc(h, budget) for h in evaluate_histories(source, ds, trials, budget, base_seed, executor)]


@dataclass
class MethodResult:
    """Per-trial accuracy histories of one method on one dataset."""

    dataset: str
    method: str
    histories: list = field(default_factory=list)

    @property
    def aucs(self) -> list[float]:
        return [auc(h) for h in self.histories]

    def summary(self) -> tuple[float, float]:
        return mean_and_stderr(self.aucs)

    def curve(self) -> np.ndarray:
        """Rows of (step, mean accuracy, standard error) for steps 0..T."""
        acc = np.asarray(self.histories, dtype=np.float64)
        if acc.ndim != 2 or acc.shape[0] == 0:
            raise ReportError(f"{self.dataset}/{self.method}: no histories to summarise")
        se = acc.std(axis=0, ddof=1) / np.sqrt(acc.shape[0]) if acc.shape[0] > 1 else np.zeros(acc.shape[1])
        return np.column_stack([np.arange(acc.shape[1]), acc.mean(axis=0), se])


def mean_and_stderr(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ReportError("no values to summarise")
    se = float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else 0.0
    return float(v.mean()), se


def run_method(method: str, ds: Dataset, trials: int, budget: int = 20, base_seed: int = 0,
               source=None, executor=None) -> MethodResult:
    """Evaluate a baseline by name, or a learned policy passed as ``source``."""
    src = method if source is None else source
    return MethodResult(ds.name, method, evaluate_histories(src, ds, trials, budget, base_seed, executor))


# -- comparison tables --------------------------------------------------------
@dataclass
class ReportTable:
    """Per-dataset mean AUC and standard error for each method.

    ``win_methods`` names the columns that compete for the per-row win; by
    default every column does.
    """

    methods: list
    rows: dict  # dataset -> {method: (mean, stderr)}
    win_methods: list = None

    def __post_init__(self):
        if self.win_methods is None:
            self.win_methods = list(self.methods)
        for name, row in self.rows.items():
            if set(row) != set(self.methods):
                raise ReportError(f"row {name!r} has methods {sorted(row)}, expected {sorted(self.methods)}")
        unknown = set(self.win_methods) - set(self.methods)
        if unknown:
            raise ReportError(f"win methods {sorted(unknown)} are not table columns")

    def averages(self) -> dict:
        return {m: float(np.mean([row[m][0] for row in self.rows.values()])) for m in self.methods}

    def wins(self) -> dict:
        """Strict per-row maximum wins; an exact tie splits the win evenly."""
        out = {m: 0.0 for m in self.methods}
        for row in self.rows.values():
            best = max(row[m][0] for m in self.win_methods)
            top = [m for m in self.win_methods if row[m][0] == best]
            for m in top:
                out[m] += 1.0 / len(top)
        return out

    def to_tsv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, delimiter="\t", lineterminator="\n")
        w.writerow(["dataset"] + [c for m in self.methods for c in (m, f"{m} se")])
        for name in sorted(self.rows):
            row = self.rows[name]
            w.writerow([name] + [repr(float(v)) for m in self.methods for v in row[m]])
        avg, wins = self.averages(), self.wins()
        w.writerow(["Average"] + [c for m in self.methods for c in (repr(avg[m]), "")])
        w.writerow(["Num Wins"] + [c for m in self.methods for c in (repr(wins[m]) if m in self.win_methods else "", "")])
        return buf.getvalue()

    @classmethod
    def from_tsv(cls, text: str) -> "ReportTable":
        lines = list(csv.reader(io.StringIO(text), delimiter="\t"))
        if not lines or lines[0][:1] != ["dataset"] or (len(lines[0]) - 1) % 2:
            raise ReportError("not a report table")
        methods = lines[0][1::2]
        rows, wins_line = {}, None
        for line in lines[1:]:
            if not line:
                continue
            if line[0] == "Average":
                continue
            if line[0] == "Num Wins":
                wins_line = line
                continue
            vals = [float(v) for v in line[1:]]
            rows[line[0]] = {m: (vals[2 * i], vals[2 * i + 1]) for i, m in enumerate(methods)}
        win_methods = methods if wins_line is None else [m for i, m in enumerate(methods) if wins_line[1 + 2 * i]]
        return cls(methods, rows, win_methods)

    def __eq__(self, other):
        if not isinstance(other, ReportTable):
            return NotImplemented
        return self.methods == other.methods and self.rows == other.rows and self.win_methods == other.win_methods


def compare_table(results: dict, methods: list = None, win_methods: list = None) -> ReportTable:
    """Build a table from ``{dataset: {method: MethodResult}}``.

    Every dataset must report the same set of methods.
    """
    if not results:
        raise ReportError("no results to tabulate")
    method_sets = {name: set(r) for name, r in results.items()}
    first = next(iter(method_sets.values()))
    for name, ms in method_sets.items():
        if ms != first:
            raise ReportError(f"dataset {name!r} reports {sorted(ms)}, others report {sorted(first)}")
    if methods is None:
        methods = sorted(first)
    elif set(methods) != first:
        raise ReportError(f"requested columns {methods} differ from the results' methods {sorted(first)}")
    rows = {name: {m: r[m].summary() for m in methods} for name, r in results.items()}
    return ReportTable(list(methods), rows, None if win_methods is None else [m for m in methods if m in win_methods])


def _safe(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in name)


def write_report(table: ReportTable, results: dict, out_dir, stem: str = "report") -> dict:
    """Write ``<stem>.tsv`` plus one curve file per (dataset, method). Returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {"table": os.path.join(out_dir, f"{stem}.tsv"), "curves": []}
    with open(paths["table"], "w") as fh:
        fh.write(table.to_tsv())
    curve_dir = os.path.join(out_dir, "curves")
    os.makedirs(curve_dir, exist_ok=True)
    for name in sorted(results):
        for method in sorted(results[name]):
            path = os.path.join(curve_dir, f"{_safe(name)}__{_safe(method)}.tsv")
            write_curve(results[name][method].curve(), path)
            paths["curves"].append(path)
    return paths


def write_curve(curve: np.ndarray, path) -> None:
    with open(path, "w") as fh:
        fh.write("step\tmean_accuracy\tstderr\n")
        for step, mean, se in curve:
            fh.write(f"{int(step)}\t{float(mean)!r}\t{float(se)!r}\n")


def read_curve(path) -> np.ndarray:
    return np.loadtxt(path, delimiter="\t", skiprows=1, ndmin=2)


# results files: one line per trial, "dataset method trial acc_0 ... acc_T"
def write_results(results: dict, path) -> None:
    with open(path, "w") as fh:
        for name in sorted(results):
            for method in sorted(results[name]):
                for trial, hist in enumerate(results[name][method].histories):
                    fh.write("\t".join([name, method, str(trial)] + [repr(float(a)) for a in hist]) + "\n")


def read_results(path, into: dict = None) -> dict:
    """Parse a results file, optionally merging into earlier results.

    A (dataset, method, trial) seen twice must carry the same accuracies.
    """
    out = {} if into is None else into
    seen = {}
    for name, methods in out.items():
        for method, res in methods.items():
            for trial, hist in enumerate(res.histories):
                seen[(name, method, trial)] = hist
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) < 5:
                raise ReportError(f"{path}:{lineno}: expected dataset, method, trial and accuracies")
            name, method = parts[0], parts[1]
            try:
                trial, hist = int(parts[2]), [float(a) for a in parts[3:]]
            except ValueError as exc:
                raise ReportError(f"{path}:{lineno}: {exc}") from exc
            key = (name, method, trial)
            if key in seen:
                if seen[key] != hist:
                    raise ReportError(f"{path}:{lineno}: conflicting results for {name}/{method} trial {trial}")
                continue
            res = out.setdefault(name, {}).setdefault(method, MethodResult(name, method))
            if trial != len(res.histories):
                raise ReportError(f"{path}:{lineno}: {name}/{method} trial {trial} out of order")
            res.histories.append(hist)
            seen[key] = hist
    return out


# -- leave-one-out ------------------------------------------------------------
@dataclass
class LOOResult:
    table: ReportTable
    results: dict  # held-out dataset -> {method: MethodResult}
    checkpoints: dict  # held-out dataset -> Checkpoint
    single_checkpoints: dict = field(default_factory=dict)


def _train_fold(config: TrainConfig, sources: dict, executor, ckpt_path=None):
    return trainer.train(config, sources, checkpoint_out=ckpt_path, executor=executor)


def loo_experiment(datasets: dict, config: TrainConfig, trials: int = 100, baselines_: tuple = tuple(BASELINES),
                   single: bool = True, held_out: list = None, executor=None, checkpoint_dir=None) -> LOOResult:
    """Train on all but one dataset, evaluate on the one left out, for each fold.

    MLP-GAL(Tr) is the fold checkpoint's mean over its own training datasets;
    it is reported but does not compete for wins.
    """
    if len(datasets) < 2:
        raise ValueError("leave-one-out needs at least two datasets")
    budget, seed = config.budget, config.base_seed
    folds = sorted(datasets) if held_out is None else list(held_out)
    results, ckpts, singles = {}, {}, {}
    for name in folds:
        sources = {k: v for k, v in datasets.items() if k != name}
        log.info("fold %s: training on %d datasets", name, len(sources))
        path = os.path.join(checkpoint_dir, f"fold_{_safe(name)}.ckpt") if checkpoint_dir else None
        ckpt = _train_fold(config, sources, executor, path)
        ckpts[name] = ckpt
        test_ds = datasets[name]
        row = {TEST_METHOD: run_method(TEST_METHOD, test_ds, trials, budget, seed, ckpt, executor)}
        tr = MethodResult(name, TRAIN_METHOD)
        for src in sorted(sources):
            tr.histories.extend(evaluate_histories(ckpt, sources[src], trials, budget, seed, executor))
        row[TRAIN_METHOD] = tr
        if single:
            s_cfg = dataclasses.replace(config, model="single")
            s_path = os.path.join(checkpoint_dir, f"fold_{_safe(name)}_single.ckpt") if checkpoint_dir else None
            s_ckpt = _train_fold(s_cfg, sources, executor, s_path)
            singles[name] = s_ckpt
            row[SINGLE_METHOD] = run_method(SINGLE_METHOD, test_ds, trials, budget, seed, s_ckpt, executor)
        for b in baselines_:
            row[b] = run_method(b, test_ds, trials, budget, seed, None, executor)
        results[name] = row
    methods = list(baselines_) + ([SINGLE_METHOD] if single else []) + [TRAIN_METHOD, TEST_METHOD]
    table = compare_table(results, methods, win_methods=[m for m in methods if m != TRAIN_METHOD])
    return LOOResult(table, results, ckpts, singles)


# -- domain-count study -------------------------------------------------------
@dataclass(frozen=True)
class DomainCountRow:
    count: int
    train_auc: float
    test_auc: float
    occurrences: int


def domain_subsets(names: list, count: int, subsets: int, base_seed: int = 0) -> list:
    """Source subsets for one training-domain count.

    With ``count == len(names) - 1`` this is the leave-one-out configuration
    (every dataset held out once); otherwise ``subsets`` random draws.
    """
    names = sorted(names)
    if not 1 <= count <= len(names) - 1:
        raise ValueError(f"count must lie in [1, {len(names) - 1}], got {count}")
    if count == len(names) - 1:
        return [tuple(n for n in names if n != held) for held in names]
    rng = np.random.default_rng(derive_seed("domains", base_seed, count))
    return [tuple(sorted(names[i] for i in rng.choice(len(names), size=count, replace=False)))
            for _ in range(subsets)]


def domain_count_study(datasets: dict, config: TrainConfig, counts=DEFAULT_COUNTS, subsets: int = DEFAULT_SUBSETS,
                       trials: int = 100, executor=None) -> list[DomainCountRow]:
    """Train on source subsets of each size; average train-domain and held-out AUCs."""
    names = sorted(datasets)
    budget, seed = config.budget, config.base_seed
    out = []
    for count in counts:
        train_aucs, test_aucs = [], []
        picks = domain_subsets(names, count, subsets, seed)
        for sources in picks:
            ckpt = trainer.train(config, {n: datasets[n] for n in sources}, executor=executor)
            for n in names:
                mean = float(np.mean(evaluate_policy(ckpt, datasets[n], trials, budget, seed, executor)))
                (train_aucs if n in sources else test_aucs).append(mean)
        out.append(DomainCountRow(count, float(np.mean(train_aucs)), float(np.mean(test_aucs)), len(picks)))
        log.info("count %d: train %.2f test %.2f over %d subsets", count, out[-1].train_auc, out[-1].test_auc, len(picks))
    return out


def domain_rows_to_tsv(rows: list) -> str:
    lines = ["count\ttrain_auc\ttest_auc\toccurrences"]
    lines += [f"{r.count}\t{r.train_auc!r}\t{r.test_auc!r}\t{r.occurrences}" for r in rows]
    return "\n".join(lines) + "\n"


def domain_rows_from_tsv(text: str) -> list:
    rows = []
    for line in text.strip().splitlines()[1:]:
        c, tr, te, occ = line.split("\t")
        rows.append(DomainCountRow(int(c), float(tr), float(te), int(occ)))
    return rows
