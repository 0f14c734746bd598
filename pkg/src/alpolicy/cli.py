"""``alpolicy`` command line.

    alpolicy prepare        validate every dataset in the manifest
    alpolicy train          train a policy on the configured source datasets
    alpolicy eval           evaluate a checkpoint on held-out datasets
    alpolicy baseline       run the hand-designed strategies
    alpolicy loo            full leave-one-out comparison
    alpolicy study-domains  train-domain count study
    alpolicy report         rebuild tables and curves from results files

Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 configuration error.
"""
from __future__ import annotations

import argparse
import contextlib
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from . import evaluation, trainer
from .config import PRESETS, RunConfig, load_config
from .data import load_dataset, read_manifest
from .errors import ALPolicyError, ConfigError

log = logging.getLogger("alpolicy")

EXIT_FAILURE, EXIT_USAGE, EXIT_CONFIG = 1, 2, 3
COMMANDS = ("prepare", "train", "eval", "baseline", "loo", "study-domains", "report")


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--preset", choices=sorted(PRESETS), help="scaled preset applied before the config file")
    common.add_argument("--seed", type=int, help="base seed (overrides the config)")
    common.add_argument("--out", help="output directory (default runs/<command>)")
    common.add_argument("--workers", type=int, help="worker processes for rollouts and trials")
    common.add_argument("--manifest", help="dataset manifest (overrides the config)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config key")
    common.add_argument("-q", "--quiet", action="store_true", help="only log warnings")

    p = argparse.ArgumentParser(prog="alpolicy", description="Meta-learned active-learning query policies.")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")
    sub.add_parser("prepare", parents=[common], help="validate the datasets listed in the manifest")
    sub.add_parser("train", parents=[common], help="train a query policy")
    ev = sub.add_parser("eval", parents=[common], help="evaluate a trained checkpoint")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--label", default=evaluation.TEST_METHOD, help="method name used in the report")
    sub.add_parser("baseline", parents=[common], help="evaluate hand-designed strategies")
    sub.add_parser("loo", parents=[common], help="leave-one-out comparison")
    sub.add_parser("study-domains", parents=[common], help="vary the number of training domains")
    rep = sub.add_parser("report", parents=[common], help="build a table and curves from results files")
    rep.add_argument("results", nargs="+", help="results.tsv files written by eval/baseline/loo")
    return p


def _resolve(args) -> RunConfig:
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        overrides[k.strip()] = v
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.manifest is not None:
        overrides["manifest"] = args.manifest
    return load_config(args.config, args.preset, overrides)


@contextlib.contextmanager
def _executor(cfg: RunConfig):
    if cfg.workers <= 1:
        yield None
        return
    with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
        yield ex


def _load(cfg: RunConfig, names: list = None) -> dict:
    """Datasets from the manifest; explicitly requested names must all exist."""
    entries = {e.name: e for e in read_manifest(cfg.manifest)}
    wanted = names or cfg.list_field("datasets")
    if wanted:
        unknown = [n for n in wanted if n not in entries]
        if unknown:
            raise ConfigError(f"datasets not in the manifest: {unknown}")
        picked = [entries[n] for n in wanted]
    else:
        picked = list(entries.values())
    out = {}
    for e in picked:
        if not os.path.exists(e.path):
            if wanted:
                raise ALPolicyError(f"{e.name}: file {e.path} is missing")
            log.warning("skipping %s: %s is missing", e.name, e.path)
            continue
        out[e.name] = load_dataset(e.path, e)
    if not out:
        raise ALPolicyError("no datasets available")
    return out


def _write(path, text):
    with open(path, "w") as fh:
        fh.write(text)


def _emit_results(results: dict, out: str, methods: list = None, win_methods: list = None):
    evaluation.write_results(results, os.path.join(out, "results.tsv"))
    table = evaluation.compare_table(results, methods, win_methods)
    evaluation.write_report(table, results, out)
    print(table.to_tsv(), end="")
    return table


# -- subcommands --------------------------------------------------------------
def cmd_prepare(cfg, args, out):
    lines = ["name\tstatus\tn\td\tnegatives\tpositives\tdetail"]
    ok = 0
    entries = read_manifest(cfg.manifest)
    for e in entries:
        if not os.path.exists(e.path):
            lines.append(f"{e.name}\tMISSING\t\t\t\t\t{e.path}")
            continue
        try:
            ds = load_dataset(e.path, e)
        except ALPolicyError as exc:
            lines.append(f"{e.name}\tINVALID\t\t\t\t\t{exc}")
            continue
        neg = int((ds.y < 0).sum())
        lines.append(f"{e.name}\tOK\t{ds.n}\t{ds.d_raw}\t{neg}\t{ds.n - neg}\t")
        ok += 1
    text = "\n".join(lines) + "\n"
    _write(os.path.join(out, "prepare.tsv"), text)
    print(text, end="")
    print(f"{ok} of {len(entries)} datasets validated")
    return 0 if ok == len(entries) else EXIT_FAILURE


def cmd_train(cfg, args, out):
    datasets = _load(cfg)
    history = []
    path = os.path.join(out, "checkpoint.ckpt")
    with _executor(cfg) as ex:
        trainer.train(cfg.train_config(), datasets, checkpoint_out=path, executor=ex, history=history)
    keys = ("iteration", "mean_return", "mean_recon", "mean_entropy")
    _write(os.path.join(out, "train_log.tsv"),
           "\t".join(keys) + "\n" + "".join("\t".join(repr(h[k]) for k in keys) + "\n" for h in history))
    print(f"trained on {', '.join(sorted(datasets))}; checkpoint {path}")
    return 0


def _targets(cfg):
    return _load(cfg, cfg.list_field("held_out") or None)


def cmd_eval(cfg, args, out):
    ckpt = trainer.load_checkpoint(args.checkpoint)
    if ckpt.config.budget != cfg.budget:
        log.warning("checkpoint was trained with budget %d; evaluating with %d", ckpt.config.budget, cfg.budget)
    results = {}
    with _executor(cfg) as ex:
        for name, ds in sorted(_targets(cfg).items()):
            results[name] = {args.label: evaluation.run_method(args.label, ds, cfg.trials, cfg.budget, cfg.seed, ckpt, ex)}
    _emit_results(results, out)
    return 0


def cmd_baseline(cfg, args, out):
    methods = cfg.list_field("methods")
    for m in methods:
        if m not in evaluation.BASELINES:
            raise ConfigError(f"unknown baseline {m!r}; choose from {sorted(evaluation.BASELINES)}")
    results = {}
    with _executor(cfg) as ex:
        for name, ds in sorted(_load(cfg).items()):
            results[name] = {m: evaluation.run_method(m, ds, cfg.trials, cfg.budget, cfg.seed, None, ex) for m in methods}
    _emit_results(results, out, methods)
    return 0


def cmd_loo(cfg, args, out):
    datasets = _load(cfg)
    folds = cfg.list_field("held_out") or None
    ckpt_dir = os.path.join(out, "checkpoints")
    os.makedirs(ckpt_dir, exist_ok=True)
    with _executor(cfg) as ex:
        res = evaluation.loo_experiment(datasets, cfg.train_config(), cfg.trials, tuple(cfg.list_field("methods")),
                                        cfg.single, folds, ex, ckpt_dir)
    evaluation.write_results(res.results, os.path.join(out, "results.tsv"))
    evaluation.write_report(res.table, res.results, out)
    print(res.table.to_tsv(), end="")
    return 0


def cmd_study_domains(cfg, args, out):
    datasets = _load(cfg)
    with _executor(cfg) as ex:
        rows = evaluation.domain_count_study(datasets, cfg.train_config(), cfg.count_list(), cfg.subsets, cfg.trials, ex)
    text = evaluation.domain_rows_to_tsv(rows)
    _write(os.path.join(out, "domain_study.tsv"), text)
    print(text, end="")
    return 0


def cmd_report(cfg, args, out):
    results = {}
    for path in args.results:
        evaluation.read_results(path, results)
    methods = sorted({m for r in results.values() for m in r})
    wins = [m for m in methods if m != evaluation.TRAIN_METHOD]
    _emit_results(results, out, methods, wins)
    return 0


HANDLERS = {
    "prepare": cmd_prepare,
    "train": cmd_train,
    "eval": cmd_eval,
    "baseline": cmd_baseline,
    "loo": cmd_loo,
    "study-domains": cmd_study_domains,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with code 2
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        cfg = _resolve(args)
        out = args.out or os.path.join("runs", args.command)
        os.makedirs(out, exist_ok=True)
        _write(os.path.join(out, "config.resolved"), cfg.to_text())
        return HANDLERS[args.command](cfg, args, out)
    except ConfigError as exc:
        print(f"alpolicy: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ALPolicyError, OSError, ValueError) as exc:
        print(f"alpolicy: error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
