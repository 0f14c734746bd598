import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from alpolicy import evaluation, trainer
from alpolicy.baselines import StrategyKind
from alpolicy.errors import ReportError, ShapeError
from alpolicy.evaluation import MethodResult, ReportTable
from alpolicy.trainer import TrainConfig

from conftest import make_blobs

TINY = TrainConfig(batch_episodes=4, datasets_per_batch=2, iterations=1, budget=3, log_every=0, checkpoint_every=0)


# -- AUC ----------------------------------------------------------------------
def test_auc_examples():
    assert evaluation.auc([0.5] + [0.8] * 20, 20) == pytest.approx(80.0)
    assert evaluation.auc([t / 20 for t in range(21)], 20) == pytest.approx(52.5)
    assert evaluation.auc([0.1, 0.6], 1) == pytest.approx(60.0)


def test_auc_ignores_initial_accuracy():
    assert evaluation.auc([0.0, 0.7, 0.7]) == evaluation.auc([1.0, 0.7, 0.7])


def test_auc_length_errors():
    with pytest.raises(ShapeError):
        evaluation.auc([0.5] * 20, 20)
    with pytest.raises(ShapeError):
        evaluation.auc([0.5])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=2, max_size=21), st.lists(st.floats(0, 1), min_size=21, max_size=21))
def test_auc_bounds_and_monotonicity(acc, bump):
    a = evaluation.auc(acc)
    assert 0.0 <= a <= 100.0
    higher = [min(1.0, x + b) for x, b in zip(acc, bump)]
    assert evaluation.auc(higher) >= a - 1e-9


# -- evaluation runs -----------------------------------------------------------------
def test_zero_trials():
    assert evaluation.evaluate_policy("RAND", make_blobs(), 0, 5) == []


def test_evaluation_is_deterministic():
    ds = make_blobs(80)
    for src in ("RAND", StrategyKind.QBB):
        assert evaluation.evaluate_policy(src, ds, 3, 5, 7) == evaluation.evaluate_policy(src, ds, 3, 5, 7)
    params = trainer.init_checkpoint(TINY)
    assert evaluation.evaluate_policy(params, ds, 3, 5) == evaluation.evaluate_policy(params.params, ds, 3, 5)


def test_methods_share_trial_splits():
    ds = make_blobs(80)
    ck = trainer.init_checkpoint(TINY)
    hists = [evaluation.evaluate_histories(src, ds, 4, 5, 3) for src in ("RAND", "US", "DFF", "QBB", ck)]
    for trial in range(4):
        assert len({h[trial][0] for h in hists}) == 1


def test_unknown_method():
    with pytest.raises(ValueError):
        evaluation.evaluate_policy("MARGIN", make_blobs(), 2, 3)
    with pytest.raises(TypeError):
        evaluation.evaluate_policy(3.5, make_blobs(), 2, 3)


def test_method_result_summary_and_curve():
    r = MethodResult("d", "m", [[0.5, 0.6, 0.8], [0.5, 0.8, 1.0]])
    assert r.aucs == pytest.approx([70.0, 90.0])
    mean, se = r.summary()
    assert mean == pytest.approx(80.0) and se == pytest.approx(10.0)
    curve = r.curve()
    np.testing.assert_allclose(curve[:, 0], [0, 1, 2])
    np.testing.assert_allclose(curve[:, 1], [0.5, 0.7, 0.9])
    np.testing.assert_allclose(curve[:, 2], [0.0, 0.1, 0.1])
    with pytest.raises(ReportError):
        MethodResult("d", "m").curve()


# -- report tables ----------------------------------------------------------------
def _results(values: dict) -> dict:
    """{dataset: {method: [auc-ish level per trial]}} -> MethodResult histories."""
    return {d: {m: MethodResult(d, m, [[0.0, v / 100.0] for v in vs]) for m, vs in row.items()}
            for d, row in values.items()}


def test_single_method_wins_every_row():
    t = evaluation.compare_table(_results({"a": {"X": [50, 60]}, "b": {"X": [70, 70]}, "c": {"X": [10, 30]}}))
    assert t.wins() == {"X": 3.0}


def test_table_averages_and_wins():
    t = evaluation.compare_table(_results({
        "a": {"X": [50, 70], "Y": [40, 40]},
        "b": {"X": [80, 80], "Y": [90, 90]},
        "c": {"X": [30, 30], "Y": [30, 30]},
    }))
    avg = t.averages()
    assert avg["X"] == pytest.approx((60 + 80 + 30) / 3, abs=1e-9)
    assert avg["Y"] == pytest.approx((40 + 90 + 30) / 3, abs=1e-9)
    assert t.wins() == {"X": 1.5, "Y": 1.5}
    assert sum(t.wins().values()) == len(t.rows)


def test_non_competing_column():
    t = evaluation.compare_table(_results({"a": {"X": [50], "Y": [90]}}), win_methods=["X"])
    assert t.wins() == {"X": 1.0, "Y": 0.0}


def test_table_round_trip():
    t = evaluation.compare_table(_results({
        "a": {"X": [50, 71], "Y": [40, 43]},
        "b": {"X": [81, 80], "Y": [90, 91.5]},
    }), methods=["Y", "X"], win_methods=["X"])
    text = t.to_tsv()
    back = ReportTable.from_tsv(text)
    assert back == t and back.to_tsv() == text
    lines = text.splitlines()
    assert lines[0].split("\t") == ["dataset", "Y", "Y se", "X", "X se"]
    assert lines[-2].startswith("Average") and lines[-1].startswith("Num Wins")


def test_inconsistent_methods_rejected():
    with pytest.raises(ReportError):
        evaluation.compare_table(_results({"a": {"X": [50]}, "b": {"Y": [50]}}))
    with pytest.raises(ReportError):
        evaluation.compare_table({})
    with pytest.raises(ReportError):
        ReportTable.from_tsv("nonsense\n")


def test_report_files(tmp_path):
    res = _results({"a": {"X": [50, 60], "US": [55, 65]}})
    paths = evaluation.write_report(evaluation.compare_table(res), res, tmp_path)
    assert (tmp_path / "report.tsv").exists()
    assert sorted(p.split("/")[-1] for p in paths["curves"]) == ["a__US.tsv", "a__X.tsv"]
    curve = evaluation.read_curve(tmp_path / "curves" / "a__X.tsv")
    np.testing.assert_allclose(curve, res["a"]["X"].curve())


def test_results_round_trip_and_merge(tmp_path):
    res = _results({"a": {"X": [50, 60, 65]}, "b": {"X": [10, 20, 30], "Y": [1, 2, 3]}})
    path = tmp_path / "r.tsv"
    evaluation.write_results(res, path)
    back = evaluation.read_results(path)
    assert {d: {m: r.histories for m, r in row.items()} for d, row in back.items()} == \
           {d: {m: r.histories for m, r in row.items()} for d, row in res.items()}
    merged = evaluation.read_results(path, into=back)  # identical duplicates are absorbed
    assert len(merged["a"]["X"].histories) == 3


def test_results_conflicts(tmp_path):
    p = tmp_path / "r.tsv"
    p.write_text("a\tX\t0\t0.1\t0.5\na\tX\t0\t0.1\t0.6\n")
    with pytest.raises(ReportError):
        evaluation.read_results(p)
    p.write_text("a\tX\t1\t0.1\t0.5\n")
    with pytest.raises(ReportError):
        evaluation.read_results(p)
    p.write_text("a\tX\t0\n")
    with pytest.raises(ReportError):
        evaluation.read_results(p)


# -- leave-one-out and the domain study ---------------------------------------------
def _pool(k=3):
    return {f"d{i}": make_blobs(40 + 4 * i, d=2 + i % 3, seed=i, name=f"d{i}") for i in range(k)}


def test_loo_contract(tmp_path, monkeypatch):
    datasets = _pool(3)
    seen = []
    real_train = trainer.train

    def spy(config, sources, **kw):
        seen.append((config.model, sorted(sources)))
        return real_train(config, sources, **kw)

    monkeypatch.setattr(trainer, "train", spy)
    res = evaluation.loo_experiment(datasets, TINY, trials=2, baselines_=("RAND", "US"), checkpoint_dir=tmp_path)
    assert sorted(res.table.rows) == sorted(datasets)
    assert len(res.checkpoints) == len(res.single_checkpoints) == 3
    assert len(list(tmp_path.glob("fold_*.ckpt"))) == 6
    for held in datasets:
        trained_on = [s for _, s in seen if held not in s]
        assert len(trained_on) == 2  # the meta and SingleRL runs of this fold
        assert all(sorted(s) == sorted(set(datasets) - {held}) for s in trained_on)
    assert res.table.methods == ["RAND", "US", "SingleRL", "MLP-GAL(Tr)", "MLP-GAL(Te)"]
    assert "MLP-GAL(Tr)" not in res.table.win_methods
    row = res.results["d0"]
    assert len(row["MLP-GAL(Tr)"].histories) == 2 * 2  # trials x source datasets
    assert {h[0] for h in row["RAND"].histories} == {h[0] for h in row["MLP-GAL(Te)"].histories}


def test_loo_needs_two_datasets():
    with pytest.raises(ValueError):
        evaluation.loo_experiment(_pool(1), TINY, trials=1)


def test_domain_subsets():
    names = [f"n{i}" for i in range(14)]
    loo = evaluation.domain_subsets(names, 13, 3)
    assert len(loo) == 14 and all(len(s) == 13 for s in loo)
    assert {next(iter(set(names) - set(s))) for s in loo} == set(names)
    for count in (1, 4, 7):
        picks = evaluation.domain_subsets(names, count, 3, 5)
        assert len(picks) == 3 and all(len(set(p)) == count for p in picks)
        assert picks == evaluation.domain_subsets(names, count, 3, 5)
    with pytest.raises(ValueError):
        evaluation.domain_subsets(names, 14, 3)


def test_domain_study_shape():
    rows = evaluation.domain_count_study(_pool(3), TINY, counts=(1, 2), subsets=2, trials=2)
    assert [r.count for r in rows] == [1, 2]
    assert [r.occurrences for r in rows] == [2, 3]
    assert all(0.0 <= r.train_auc <= 100.0 and 0.0 <= r.test_auc <= 100.0 for r in rows)
    assert evaluation.domain_rows_from_tsv(evaluation.domain_rows_to_tsv(rows)) == rows
