"""Command-line entry point."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from typing import List, Optional

import numpy as np

from . import __version__
from .config import load_config, resolve
from .core import BINARY, FeatureMatrix, SplitSpec, validate_dataset
from .decorrelation import DecorConfig, learn_weights
from .errors import DataError, NonConvergence, StableRulesError
from .evaluation import beta_errors, classification_metrics, regression_metrics
from .experiments import (AblationConfig, ExperimentConfig, ProfileConfig, rsweep_rows, run_ablation,
                          run_experiment, run_profiles, write_report, write_rows_csv)
from .mining import build_rule_matrix, concat_rule_matrices, mine_rules, read_rules_text, write_rules_text
from .models import (LinearModel, SvmConfig, fit_dwr, fit_linear_baseline, fit_weighted_svm,
                     fit_weighted_svr, predict)
from .selection import SelectionBounds, item_reduce, rules_selection, write_selection
from .synthesis import BiasSpec, EnvSpec, make_environment, true_beta, write_environment_csv

log = logging.getLogger("stablerules")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NONCONVERGENCE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise UsageError(message)


# --- helpers ---------------------------------------------------------------------

def _sidecar_path(path) -> str:
    """``<stem>.json`` next to the artifact, or ``<stem>.meta.json`` when the artifact is JSON itself."""
    stem, _, ext = str(path).rpartition(".")
    if not stem:
        stem, ext = str(path), ""
    return stem + (".meta.json" if ext == "json" else ".json")


def write_sidecar(path, command: str, cfg: dict, extra: Optional[dict] = None) -> str:
    """Store the resolved configuration next to an artifact."""
    meta = {"command": command, "config": cfg, "seed": cfg.get("seed"), "version": __version__}
    if extra:
        meta.update(extra)
    side = _sidecar_path(path)
    with open(side, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=str)
    return side


def read_table(path, label: Optional[str] = None):
    """Numeric CSV with header; returns (feature names, X, y, label name)."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    if label is None:
        label = next((c for c in ("y", "Y", "label") if c in header), header[-1])
    if label not in header:
        raise DataError(f"label column {label!r} not in {path}")
    try:
        data = np.array([[float(c) for c in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric cell ({exc})") from None
    j = header.index(label)
    names = [h for i, h in enumerate(header) if i != j]
    return names, np.delete(data, j, axis=1), data[:, j], label


def read_weights(path) -> np.ndarray:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    return np.array([float(r[0]) for r in rows[1:] if r], dtype=float)


def write_weights(path, w) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("weight\n")
        for v in w:
            fh.write(repr(float(v)) + "\n")


def _binary_dataset(path, label=None):
    names, X, y, _ = read_table(path, label)
    if not np.all((X == 0) | (X == 1)):
        raise DataError("rule mining needs 0/1 feature columns (see the ingestion pipeline)")
    y = np.where(y > 0, 1.0, -1.0)
    fm = FeatureMatrix(X, tuple(names), tuple([BINARY] * len(names)))
    return validate_dataset(fm, y)


def _decor_cfg(cfg) -> DecorConfig:
    return DecorConfig(cfg["degree"], cfg["gamma"], cfg["lambda_norm"], cfg["lambda_sum"],
                       cfg["max_iters"], cfg["step_size"], cfg["tolerance"])


def _env_sidecar(path) -> Optional[dict]:
    side = _sidecar_path(path)
    if not os.path.exists(side):
        return None
    with open(side, encoding="utf-8") as fh:
        meta = json.load(fh)
    return meta.get("env")


# --- commands --------------------------------------------------------------------

def cmd_synth(args, cfg):
    spec = EnvSpec(cfg["env"], cfg["n"], cfg["p"], seed=cfg["seed"], noise_std=cfg["noise_std"])
    bias = BiasSpec(cfg["r"], cfg["b_fraction"]) if cfg["r"] else None
    env = make_environment(spec, bias)
    write_environment_csv(env, args.out, {"command": "synth", "config": cfg, "seed": cfg["seed"],
                                          "version": __version__})
    return EXIT_OK


def cmd_mine(args, cfg):
    ds = _binary_dataset(args.data, args.label)
    pos, neg = mine_rules(ds, cfg["min_support"], cfg["min_confidence"], cfg["max_antecedent"])
    write_rules_text(list(pos) + list(neg), args.out)
    write_sidecar(args.out, "mine", cfg, {"data": args.data, "n_positive": len(pos), "n_negative": len(neg)})
    return EXIT_OK


def cmd_select(args, cfg):
    ds = _binary_dataset(args.data, args.label)
    rules = read_rules_text(args.rules)
    rm = build_rule_matrix(ds, rules)
    bounds = SelectionBounds(min(cfg["max_rules"], rm.width), min(cfg["min_rules"], rm.width))
    chosen = rules_selection(rm, ds.labels, bounds, seed=cfg["seed"])
    reduced = item_reduce(chosen.rules, ds, cfg["folds"], cfg["seed"])
    write_selection(reduced.rules, args.out, {"command": "select", "config": cfg, "seed": cfg["seed"],
                                              "rules_selection": chosen.provenance(),
                                              "item_reduce": reduced.provenance()})
    return EXIT_OK


def cmd_decorrelate(args, cfg):
    _, X, _, _ = read_table(args.data, args.label)
    res = learn_weights(X, _decor_cfg(cfg))
    write_weights(args.out, res.weights.w)
    write_sidecar(args.out, "decorrelate", cfg, {"data": args.data, "iterations": res.iterations,
                                                 "converged": res.converged,
                                                 "final_objective": res.final_objective})
    if not res.converged:
        log.warning("weight learning stopped at the iteration cap (%d)", res.iterations)
        return EXIT_NONCONVERGENCE
    return EXIT_OK


def cmd_train(args, cfg):
    _, X, y, _ = read_table(args.data, args.label)
    w = read_weights(args.weights) if args.weights else None
    svm = SvmConfig(C=cfg["C"], epsilon=cfg["epsilon"])
    converged = True
    kind = args.model
    if kind in ("ols", "ridge", "lasso"):
        model = fit_linear_baseline(X, y, kind, 0.0 if kind == "ols" else cfg["lam"])
    elif kind == "dwr":
        lam = cfg["dwr_lambda"] if cfg["dwr_lambda"] is not None else cfg["gamma"]
        res = fit_dwr(X, y, lam, _decor_cfg(cfg))
        model, converged = res.model, res.converged
    elif kind in ("svm", "svr"):
        if kind == "svm":
            model = fit_weighted_svm(X, np.where(y > 0, 1.0, -1.0), w, svm)
        else:
            model = fit_weighted_svr(X, y, w, svm)
        converged = model.training_meta["converged"]
    else:  # our: learn weights unless given, then weighted SVR
        if w is None:
            res = learn_weights(X, _decor_cfg(cfg))
            w, converged = res.weights.w, res.converged
        model = fit_weighted_svr(X, y, w, svm)
        converged = converged and model.training_meta["converged"]
    model.training_meta.pop("objective_history", None)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(model.to_json())
    write_sidecar(args.out, "train", cfg, {"data": args.data, "model": kind, "converged": bool(converged)})
    return EXIT_OK if converged else EXIT_NONCONVERGENCE


def cmd_evaluate(args, cfg):
    with open(args.model, encoding="utf-8") as fh:
        model = LinearModel.from_json(fh.read())
    _, X, y, _ = read_table(args.data, args.label)
    pred = predict(model, X)
    out = {"n": int(len(y))}
    if model.is_classifier:
        m = classification_metrics(pred, np.where(y > 0, 1.0, -1.0))
        out.update(accuracy=m.accuracy, precision=m.precision, recall=m.recall, f1=m.f1,
                   undefined=list(m.undefined))
    else:
        out["rmse"] = regression_metrics(pred, y)
    env = _env_sidecar(args.data)
    if env and env.get("p_total") == len(model.beta):
        split = SplitSpec.from_sizes(env["p_s"], env["p_v"])
        out.update(beta_errors(model, true_beta(env["p_s"], env["p_v"]), split).as_dict())
    text = json.dumps(out, indent=2, sort_keys=True)
    print(text)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
        write_sidecar(args.out, "evaluate", cfg, {"model": args.model, "data": args.data})
    return EXIT_OK


def _report_paths(out):
    stem = str(out).rsplit(".", 1)[0]
    return stem + ".report.json", stem


def cmd_table1(args, cfg):
    ns = args.n or [cfg["n"]]
    ps = args.m or [cfg["p"]]
    exp = ExperimentConfig(methods=tuple(args.methods) if args.methods else ExperimentConfig.methods,
                           ns=tuple(ns), ps=tuple(ps), repeats=cfg["repeats"], env=cfg["env"],
                           seed=cfg["seed"], noise_std=cfg["noise_std"], train_r=cfg["train_r"],
                           decor=_decor_cfg(cfg), our_C=cfg["C"], epsilon=cfg["epsilon"],
                           dwr_lambda=cfg["dwr_lambda"], jobs=cfg["jobs"])
    report = run_experiment(exp)
    json_path, stem = _report_paths(args.out)
    write_report(report, args.out, json_path, {stem + ".rsweep.csv": rsweep_rows(report)})
    write_sidecar(args.out, "reproduce-table1", {**cfg, "ns": list(ns), "ps": list(ps)},
                  {"failures": len(report.failures), "wall_time": report.wall_time})
    return EXIT_OK


def cmd_table2(args, cfg):
    abl = AblationConfig(gammas=tuple(args.gammas), lambdas=tuple(args.lambdas), Cs=tuple(args.Cs),
                         n=cfg["n"], p=cfg["p"], repeats=cfg["repeats"], env=cfg["env"], seed=cfg["seed"],
                         noise_std=cfg["noise_std"], train_r=cfg["train_r"], decor=_decor_cfg(cfg),
                         epsilon=cfg["epsilon"], jobs=cfg["jobs"])
    report = run_ablation(abl)
    json_path, _ = _report_paths(args.out)
    write_report(report, args.out, json_path)
    write_sidecar(args.out, "reproduce-table2", cfg, {"gammas": args.gammas, "lambdas": args.lambdas,
                                                      "Cs": args.Cs, "wall_time": report.wall_time})
    return EXIT_OK


def cmd_fig2(args, cfg):
    prof = ProfileConfig(n=cfg["n"], p=cfg["p"], seeds=args.seeds, env=cfg["env"], seed=cfg["seed"],
                         noise_std=cfg["noise_std"], train_r=cfg["train_r"], decor=_decor_cfg(cfg),
                         dwr_lambda=cfg["dwr_lambda"], jobs=cfg["jobs"])
    report = run_profiles(prof)
    json_path, stem = _report_paths(args.out)
    write_rows_csv(report.rows, args.out)
    write_rows_csv(report.per_repeat, stem + ".long.csv")
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump({"config": report.config, "rows": report.rows, "seeds": report.seeds}, fh,
                  indent=2, sort_keys=True)
    write_sidecar(args.out, "reproduce-fig2", cfg, {"seeds": args.seeds, "wall_time": report.wall_time})
    return EXIT_OK


# --- parser ----------------------------------------------------------------------

def _common(p):
    p.add_argument("--config", help="flat JSON configuration file")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, help="worker processes (default: available cores)")
    p.add_argument("-v", "--verbose", action="store_true")


def _decor_flags(p):
    p.add_argument("--gamma", type=float)
    p.add_argument("--lambda-norm", dest="lambda_norm", type=float)
    p.add_argument("--lambda-sum", dest="lambda_sum", type=float)
    p.add_argument("--degree", type=int)
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--step-size", dest="step_size", type=float)
    p.add_argument("--tolerance", type=float)


def _env_flags(p, multi=False):
    p.add_argument("--env", choices=("linear", "nonlinear"))
    if multi:
        p.add_argument("--n", type=int, nargs="+")
        p.add_argument("--m", "--p", dest="m", type=int, nargs="+", help="total feature count(s)")
    else:
        p.add_argument("--n", type=int)
        p.add_argument("--p", "--m", dest="p", type=int, help="total feature count")
    p.add_argument("--noise-std", dest="noise_std", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stablerules", description="Stable association-rule classification toolkit.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic environment CSV")
    _common(p)
    _env_flags(p)
    p.add_argument("--r", type=float, help="bias rate; omit for an unbiased sample")
    p.add_argument("--b-fraction", dest="b_fraction", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("mine", help="mine class association rules from a 0/1 CSV")
    _common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--label")
    p.add_argument("--min-support", dest="min_support", type=float)
    p.add_argument("--min-confidence", dest="min_confidence", type=float)
    p.add_argument("--max-antecedent", dest="max_antecedent", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("select", help="select rules and prune items")
    _common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--rules", required=True)
    p.add_argument("--label")
    p.add_argument("--max-rules", dest="max_rules", type=int)
    p.add_argument("--min-rules", dest="min_rules", type=int)
    p.add_argument("--folds", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("decorrelate", help="learn decorrelating sample weights")
    _common(p)
    _decor_flags(p)
    p.add_argument("--data", required=True)
    p.add_argument("--label")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_decorrelate)

    p = sub.add_parser("train", help="fit a linear model")
    _common(p)
    _decor_flags(p)
    p.add_argument("--data", required=True)
    p.add_argument("--label")
    p.add_argument("--model", required=True, choices=("ols", "ridge", "lasso", "dwr", "svm", "svr", "our"))
    p.add_argument("--weights", help="sample weights CSV for svm/svr/our")
    p.add_argument("--C", dest="C", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--lam", type=float, help="ridge / lasso penalty")
    p.add_argument("--dwr-lambda", dest="dwr_lambda", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a model on a dataset")
    _common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--label")
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("reproduce-table1", help="coefficient-error comparison across methods")
    _common(p)
    _env_flags(p, multi=True)
    _decor_flags(p)
    p.add_argument("--repeats", type=int)
    p.add_argument("--methods", nargs="+", choices=ExperimentConfig.methods)
    p.add_argument("--C", dest="C", type=float, help="margin weight of the reweighted SVR")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--dwr-lambda", dest="dwr_lambda", type=float)
    p.add_argument("--train-r", dest="train_r", type=float, help="bias rate of the training sample")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_table1)

    p = sub.add_parser("reproduce-table2", help="gamma / lambda / C ablation")
    _common(p)
    _env_flags(p)
    _decor_flags(p)
    p.add_argument("--repeats", type=int)
    p.add_argument("--gammas", type=float, nargs="+", default=[600.0, 800.0, 1000.0])
    p.add_argument("--lambdas", type=float, nargs="+", default=[0.0001, 0.0005, 0.001])
    p.add_argument("--Cs", type=float, nargs="+", default=[0.0, 0.5, 1.0])
    p.add_argument("--epsilon", type=float)
    p.add_argument("--train-r", dest="train_r", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_table2)

    p = sub.add_parser("reproduce-fig2", help="correlation profiles under each weighting")
    _common(p)
    _env_flags(p)
    _decor_flags(p)
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--dwr-lambda", dest="dwr_lambda", type=float)
    p.add_argument("--train-r", dest="train_r", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fig2)
    return parser


NON_CONFIG = {"command", "func", "config", "verbose", "out", "data", "label", "rules", "model",
              "weights", "methods", "gammas", "lambdas", "Cs", "seeds"}


def _flag_values(args) -> dict:
    flags = {k: v for k, v in vars(args).items() if k not in NON_CONFIG}
    if args.command == "reproduce-table1":
        ns, ms = flags.pop("n", None), flags.pop("m", None)
        flags["n"] = ns[0] if ns else None
        flags["p"] = ms[0] if ms else None
    return flags


def _check_paths(args):
    for attr in ("data", "rules", "model", "weights", "config"):
        path = getattr(args, attr, None)
        if attr == "model" and args.command == "train":
            continue
        if path and not os.path.exists(path):
            raise UsageError(f"--{attr} file {path!r} does not exist")
    out = getattr(args, "out", None)
    if out:
        parent = os.path.dirname(os.path.abspath(out))
        if not os.path.isdir(parent):
            raise UsageError(f"output directory {parent!r} does not exist")


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _check_paths(args)
    except UsageError as exc:
        if "does not exist" in str(exc):
            print(f"stablerules: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        file_values = load_config(args.config) if args.config else {}
        flags = _flag_values(args)
        if flags.get("jobs") is None and "jobs" not in file_values:
            flags["jobs"] = os.cpu_count() or 1
        cfg = resolve(file_values, flags)
        return args.func(args, cfg)
    except NonConvergence as exc:
        print(f"stablerules: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except DataError as exc:
        print(f"stablerules: {exc}", file=sys.stderr)
        return EXIT_DATA
    except StableRulesError as exc:  # configuration problems
        print(f"stablerules: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
