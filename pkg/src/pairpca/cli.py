"""Command line front end: ``pairpca {toygen,fit,transform,validate}``.

Exit codes: 0 success, 1 computation error, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys

import numpy as np

from .dapca import FitConfig, FitError, fit
from .dataset import DataError, Dataset, ToyConfig, generate_toy, load_csv, save_csv
from .eigen import load_model, project, save_model
from .validate import (
    direct_validate,
    mixing_score,
    reverse_validate,
    sweep,
    write_rows,
)
from .weights import WeightSpecError, parse_delta

log = logging.getLogger("pairpca")

USAGE_STAGES = {"input", "config", "weights"}


class UsageError(Exception):
    pass


def _add_fit_flags(p):
    p.add_argument("--method", choices=["pca", "spca", "sspca", "stca", "dapca"], default="dapca")
    p.add_argument("--source", help="source CSV")
    p.add_argument("--target", help="target CSV")
    p.add_argument("--labels", default="label", help="label column of the source (name or index)")
    p.add_argument("--q", type=int, default=2)
    p.add_argument("--alpha", type=str, default="1", help="within-class attraction: scalar or comma list")
    p.add_argument("--delta", type=str, default="1",
                   help="between-class repulsion: scalar, comma list R, or matrix CSV path")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=100.0)
    p.add_argument("--phi", type=float, default=0.0)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--max-iter", type=int, default=30)
    p.add_argument("--knn-space", choices=["raw", "pca"], default="raw")
    p.add_argument("--components", choices=["nonnegative", "top"], default=None)
    p.add_argument("--seed", type=int, default=42)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pairpca", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("toygen", help="generate the synthetic 3D benchmark")
    p.add_argument("--config", help="key=value file with flag defaults")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=False, default=".")
    p.add_argument("--n-source-class1", type=int, default=400)
    p.add_argument("--n-source-class2", type=int, default=200)
    p.add_argument("--n-target-class1", type=int, default=400)
    p.add_argument("--n-target-class2", type=int, default=40)
    p.add_argument("--shift2-class1", type=float, default=3.0)
    p.add_argument("--shift2-class2", type=float, default=6.0)
    p.add_argument("--variance-scale-class2", type=float, default=2.0)

    p = sub.add_parser("fit", help="fit a projection model")
    p.add_argument("--config", help="key=value file with flag defaults")
    _add_fit_flags(p)
    p.add_argument("--out", default=".", help="output directory")

    p = sub.add_parser("transform", help="project data with a fitted model")
    p.add_argument("--config", help="key=value file with flag defaults")
    p.add_argument("--model", required=False)
    p.add_argument("--input", required=False)
    p.add_argument("--labels", default=None, help="label column to carry through")
    p.add_argument("--out", default="projected.csv", help="output CSV path")

    p = sub.add_parser("validate", help="direct/reverse validation, mixing score, sweeps")
    p.add_argument("--config", help="key=value file with flag defaults")
    _add_fit_flags(p)
    p.add_argument("--target-labels", help="CSV with hidden target labels (direct validation)")
    p.add_argument("--mode", choices=["direct", "reverse", "all"], default="all")
    p.add_argument("--classifier-k", type=int, default=5)
    p.add_argument("--mixing-k", type=int, default=20)
    p.add_argument("--permutations", type=int, default=20)
    p.add_argument("--split-fraction", type=float, default=0.5)
    p.add_argument("--sweep", nargs="+", default=None, metavar="PARAM=V1,V2",
                   help="grid over alpha and gamma, e.g. alpha=0.1,1,10 gamma=1,10,100")
    p.add_argument("--out", default=".", help="output directory")
    return parser


def read_config_file(path) -> dict:
    values = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for n, line in enumerate(fh, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise UsageError(f"{path}:{n}: expected key=value")
                key, value = (s.strip() for s in line.split("=", 1))
                values[key.lstrip("-").replace("-", "_")] = value
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    return values


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        file_values = read_config_file(args.config)
        subparser = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest: a for a in subparser._actions}
        defaults = {}
        for key, value in file_values.items():
            if key not in known or key in ("config", "help"):
                raise UsageError(f"unknown config key {key!r}")
            action = known[key]
            if action.nargs == "+":
                defaults[key] = value.split()
            elif action.type is not None:
                defaults[key] = action.type(value)
            else:
                defaults[key] = value
        subparser.set_defaults(**defaults)
        # explicit flags still win over file values
        args = parser.parse_args(argv)
    return args


def _scalar_or_list(text):
    parts = [float(v) for v in str(text).split(",")]
    return parts[0] if len(parts) == 1 else np.array(parts)


def fit_config_from(args) -> FitConfig:
    try:
        delta = parse_delta(args.delta)
        alpha = _scalar_or_list(args.alpha)
    except (WeightSpecError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    return FitConfig(
        method=args.method, q=args.q, delta=delta, alpha=alpha, beta=args.beta,
        gamma=args.gamma, phi=args.phi, k=args.k, max_iterations=args.max_iter,
        knn_space=args.knn_space, components=args.components, seed=args.seed,
    )


def _label_arg(value):
    if value is None:
        return None
    return int(value) if str(value).isdigit() else value


def _load(path, labels=None, what="input"):
    if not path:
        raise UsageError(f"missing --{what}")
    return load_csv(path, _label_arg(labels))


def _write_echo(args, out_dir, name="resolved_config.txt"):
    os.makedirs(out_dir or ".", exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"command={args.command}\n")
        for key, value in sorted(vars(args).items()):
            if key in ("command", "config", "verbose"):
                continue
            if isinstance(value, list):
                value = " ".join(value)
            fh.write(f"{key.replace('_', '-')}={'' if value is None else value}\n")


def cmd_toygen(args):
    config = ToyConfig(
        seed=args.seed,
        n_source_class1=args.n_source_class1, n_source_class2=args.n_source_class2,
        n_target_class1=args.n_target_class1, n_target_class2=args.n_target_class2,
        target_shift_class1=args.shift2_class1, target_shift_class2=args.shift2_class2,
        target_variance_scale_class2=args.variance_scale_class2,
    )
    source, target, hidden = generate_toy(config)
    os.makedirs(args.out, exist_ok=True)
    save_csv(source, os.path.join(args.out, "source.csv"))
    save_csv(target, os.path.join(args.out, "target.csv"))
    with open(os.path.join(args.out, "target_labels.csv"), "w", encoding="utf-8") as fh:
        fh.write("label\n" + "".join(f"{l}\n" for l in hidden))
    _write_echo(args, args.out)
    log.info("wrote %d source and %d target rows to %s", source.n_samples, target.n_samples, args.out)
    return 0


def cmd_fit(args):
    config = fit_config_from(args)
    if args.method == "pca":
        try:
            source = _load(args.source, args.labels, "source")
        except DataError as exc:
            if "not found" not in str(exc):
                raise
            source = _load(args.source, None, "source")
    else:
        source = _load(args.source, args.labels, "source")
    target = load_csv(args.target) if args.target else None
    model = fit(source, target, config)
    os.makedirs(args.out, exist_ok=True)
    save_model(model, os.path.join(args.out, "model.txt"))
    with open(os.path.join(args.out, "diagnostics.csv"), "w", encoding="utf-8") as fh:
        fh.write("iteration,objective\n")
        for i, h in enumerate(model.diagnostics["objective"], 1):
            fh.write(f"{i},{h!r}\n")
    _write_echo(args, args.out)
    log.info("fitted %s: %d components, %d iteration(s)", model.method,
             model.n_components, model.diagnostics["iterations"])
    return 0


def cmd_transform(args):
    if not args.model:
        raise UsageError("missing --model")
    model = load_model(args.model)
    data = _load(args.input, args.labels, "input")
    if data.n_features != model.basis.shape[0]:
        raise UsageError(
            f"input has {data.n_features} features, model expects {model.basis.shape[0]}"
        )
    coords = project(model, data)
    names = [f"c{j + 1}" for j in range(coords.shape[1])]
    save_csv(Dataset(coords, data.labels, names), args.out)
    _write_echo(args, os.path.dirname(args.out), os.path.basename(args.out) + ".config.txt")
    return 0


def _read_label_file(path):
    with open(path, encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if rows and rows[0][0].strip().lower() == "label":
        rows = rows[1:]
    return np.array([r[0].strip() for r in rows])


def _parse_sweep(items):
    grid = {}
    for item in items:
        key, _, values = item.partition("=")
        if key not in ("alpha", "gamma") or not values:
            raise UsageError(f"bad sweep item {item!r}; expected alpha=... or gamma=...")
        grid[key] = [float(v) for v in values.split(",")]
    return grid


def cmd_validate(args):
    config = fit_config_from(args)
    source = _load(args.source, args.labels, "source")
    target = _load(args.target, None, "target")
    hidden = _read_label_file(args.target_labels) if args.target_labels else None
    if hidden is not None and hidden.size != target.n_samples:
        raise UsageError(f"{hidden.size} target labels for {target.n_samples} target rows")
    if args.mode == "direct" and hidden is None:
        raise UsageError("direct validation needs --target-labels")
    os.makedirs(args.out, exist_ok=True)
    _write_echo(args, args.out)

    if args.sweep:
        grid = _parse_sweep(args.sweep)
        alphas = grid.get("alpha", [float(np.atleast_1d(config.alpha)[0])])
        gammas = grid.get("gamma", [config.gamma])
        rows = sweep(source, target, hidden if args.mode != "reverse" else None, config,
                     alphas, gammas, args.classifier_k, args.split_fraction, args.seed,
                     reverse=args.mode != "direct")
        write_rows(rows, os.path.join(args.out, "sweep.csv"))
        return 0

    row = {"method": config.method}
    if hidden is not None and args.mode in ("direct", "all"):
        rep = direct_validate(source, target, hidden, config, args.classifier_k)
        row["balanced_accuracy"] = rep.balanced_accuracy
        for cls, r in sorted(rep.per_class_recall.items()):
            row[f"recall_{cls}"] = r
        row["n_components"] = rep.n_components
        row["iterations"] = rep.iterations
    if args.mode in ("reverse", "all"):
        row["self_consistency"] = reverse_validate(
            source, target, config, args.split_fraction, args.classifier_k, args.seed)
    model = fit(source, target, config)
    acc, norm = mixing_score(source.values @ model.basis, target.values @ model.basis,
                             args.mixing_k, args.permutations, args.seed)
    row["mixing_accuracy"] = acc
    row["mixing_accuracy_normalized"] = norm
    write_rows([row], os.path.join(args.out, "report.csv"))
    with open(os.path.join(args.out, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write("".join(f"{k}={v}\n" for k, v in row.items()))
    return 0


COMMANDS = {"toygen": cmd_toygen, "fit": cmd_fit, "transform": cmd_transform,
            "validate": cmd_validate}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except UsageError as exc:
        print(f"pairpca: error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, DataError, WeightSpecError) as exc:
        print(f"pairpca: error: {exc}", file=sys.stderr)
        return 2
    except FitError as exc:
        print(f"pairpca: error: {exc}", file=sys.stderr)
        return 2 if exc.stage in USAGE_STAGES else 1
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"pairpca: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
