"""Command-line interface.

Subcommands::

    stfnn simulate --scenario sim1 --seed 1 --out-dir data/sim1
    stfnn cv       --manifest data/sim1/manifest.yaml --estimator GWFNN_Gaussian --k 10 --seed 0
    stfnn train    --manifest data/sim1/manifest.yaml --estimator FNN --model-out fnn.json
    stfnn predict  --model fnn.json --curves new/curves.csv --locations new/locations.csv
    stfnn report   a/results.csv b/results.csv --out merged.csv
    stfnn run      --config experiment.yaml

Every subcommand accepts ``--config FILE``: a YAML mapping using the
experiment-config keys (see :mod:`stfnn.experiment`) plus the flat keys
``manifest``, ``estimator``, ``model``, ``curves``, ``locations``, ``out``,
``model_out``, ``log`` and ``mode``. Flags given on the command line override
the file.

Exit codes: 0 success, 2 validation error (bad input, config or usage),
3 numerical failure.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import sys
from pathlib import Path

from .errors import NumericalError, StfnnError, ValidationError

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

# flag dest -> key path in the config mapping
_PATHS = {
    "scenario": ("scenario",),
    "seed": ("seed",),
    "out_dir": ("out_dir",),
    "P": ("simulation", "P"),
    "Q": ("simulation", "Q"),
    "sigma": ("simulation", "sigma"),
    "rho": ("simulation", "rho"),
    "n_grid": ("simulation", "n_grid"),
    "k": ("cv", "k"),
    "functional_neurons": ("network", "n_functional"),
    "hidden": ("network", "hidden"),
    "activation": ("network", "activation"),
    "learning_rate": ("train", "learning_rate"),
    "max_iter": ("train", "max_iter"),
    "train_seed": ("train", "seed"),
    "fve_cutoff": ("fve_cutoff",),
    "inner_folds": ("inner_folds",),
    "estimators": ("estimators",),
}

_FLAT = ("inputs", "manifest", "estimator", "bandwidth", "grid", "model", "curves", "locations", "out", "model_out", "log", "mode")


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _k(text):
    if text == "loo":
        return "loo"
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"k must be an integer or 'loo', got {text!r}") from None


def _add_model_flags(p):
    g = p.add_argument_group("model")
    g.add_argument("--estimator", help="estimator id, e.g. FNN or GWFNN_Gaussian")
    g.add_argument("--bandwidth", type=float, help="fixed bandwidth (skips selection)")
    g.add_argument("--grid", type=_float_list, help="candidate bandwidths for selection, comma-separated")
    g.add_argument("--functional-neurons", type=int)
    g.add_argument("--hidden", type=_int_list, help="numeric hidden widths, e.g. 8,4")
    g.add_argument("--activation")
    g.add_argument("--learning-rate", type=float)
    g.add_argument("--max-iter", type=int)
    g.add_argument("--train-seed", type=int)
    g.add_argument("--fve-cutoff", type=float)
    g.add_argument("--inner-folds", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stfnn", description="Spatio-temporal functional regression experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    def cmd(name, help_):
        p = sub.add_parser(name, help=help_, argument_default=S)
        p.add_argument("--config", help="YAML config file; flags override it")
        return p

    p = cmd("simulate", "generate a simulation dataset as CSV files")
    p.add_argument("--scenario", choices=["sim1", "sim2"])
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir")
    p.add_argument("--P", type=int)
    p.add_argument("--Q", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--n-grid", type=int)

    p = cmd("cv", "cross-validate one estimator on a dataset")
    p.add_argument("--manifest")
    p.add_argument("--k", type=_k, help="number of folds, or 'loo'")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="write a one-row results.csv here")
    p.add_argument("--log", help="write the CV report as JSON here")
    _add_model_flags(p)

    p = cmd("train", "fit one estimator on a dataset and save it")
    p.add_argument("--manifest")
    p.add_argument("--model-out")
    p.add_argument("--seed", type=int)
    _add_model_flags(p)

    p = cmd("predict", "predict responses for new curves and locations")
    p.add_argument("--model")
    p.add_argument("--curves")
    p.add_argument("--locations")
    p.add_argument("--out", help="output CSV (default stdout)")
    p.add_argument("--mode", choices=["auto", "in", "out"])

    p = cmd("report", "merge results tables")
    p.add_argument("inputs", nargs="*")
    p.add_argument("--out", help="merged CSV (default stdout)")

    p = cmd("run", "run a full experiment from a config file")
    p.add_argument("config_file", nargs="?")
    p.add_argument("--out-dir")
    p.add_argument("--seed", type=int)
    p.add_argument("--k", type=_k)
    p.add_argument("--estimators", type=lambda s: [x for x in s.split(",") if x])
    return parser


def _set(d, path, value):
    for key in path[:-1]:
        if not isinstance(d.get(key), dict):
            d[key] = {}
        d = d[key]
    d[path[-1]] = value


def resolve(args: argparse.Namespace) -> dict:
    """Config file contents with command-line flags applied on top."""
    from .experiment import load_config_file

    given = dict(vars(args))
    given.pop("command", None)
    path = given.pop("config", None) or given.pop("config_file", None)
    given.pop("config_file", None)
    cfg = copy.deepcopy(load_config_file(path)) if path else {}
    base = Path(path).parent if path else Path(".")
    # relative paths inside a config file are relative to that file
    for key in ("manifest", "model", "curves", "locations", "scenario"):
        val = cfg.get(key)
        if isinstance(val, str) and key not in given and val not in ("sim1", "sim2"):
            if not Path(val).is_absolute():
                cfg[key] = str(base / val)
    for dest, value in given.items():
        if dest in _PATHS:
            _set(cfg, _PATHS[dest], value)
        elif dest in _FLAT:
            cfg[dest] = value
    return cfg


def _require(cfg, *keys):
    missing = [k for k in keys if cfg.get(k) in (None, "")]
    if missing:
        raise ValidationError("missing required setting(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))


def _experiment_config(cfg: dict, estimators):
    """Experiment config from resolved settings for a single-dataset command."""
    from .experiment import ExperimentConfig
    from .models import EstimatorSpec

    raw = {k: v for k, v in cfg.items() if k in ExperimentConfig._KEYS}
    raw["scenario"] = cfg["manifest"]
    raw["estimators"] = list(estimators)
    if cfg.get("bandwidth") is not None:
        raw.setdefault("bandwidths", {})
        for name in estimators:
            raw["bandwidths"][name] = cfg["bandwidth"]
    if cfg.get("grid") is not None:
        raw.setdefault("bandwidth_grids", {})
        for name in estimators:
            fam = EstimatorSpec.parse(name).family
            if fam is not None:
                raw["bandwidth_grids"][fam] = cfg["grid"]
    return ExperimentConfig.from_dict(raw)


def _dataset_from_manifest(path):
    from .io import DatasetManifest, ingest

    manifest = DatasetManifest.load(path)
    return manifest, ingest(manifest)


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def cmd_simulate(cfg, out):
    from .experiment import SCENARIOS
    from .io import write_dataset
    from .simgen import SimConfig, simulate

    _require(cfg, "scenario", "out_dir")
    if cfg["scenario"] not in SCENARIOS:
        raise ValidationError(f"scenario must be one of {sorted(SCENARIOS)}")
    sim = cfg.get("simulation") or {}
    try:
        config = SimConfig(scenario=SCENARIOS[cfg["scenario"]], seed=int(cfg.get("seed", 0)), **sim)
    except TypeError as exc:
        raise ValidationError(f"bad simulation settings: {exc}") from None
    path = write_dataset(simulate(config), cfg["out_dir"])
    print(f"wrote {config.n} samples; manifest {path}", file=out)


def cmd_cv(cfg, out):
    from .experiment import result_rows, run_cv, write_results, format_table, load_dataset

    _require(cfg, "manifest", "estimator")
    exp = _experiment_config(cfg, [cfg["estimator"]])
    dataset = load_dataset(exp)
    spec = exp.estimator_spec(cfg["estimator"])
    rep = run_cv(dataset, spec, exp.k, exp.seed)
    rows = result_rows([rep], seed=exp.seed)
    if cfg.get("out"):
        write_results(rows, cfg["out"])
    if cfg.get("log"):
        Path(cfg["log"]).write_text(json.dumps(rep.to_dict(), indent=1), encoding="utf-8")
    out.write(format_table(rows, [rep.rmse_pooled]))
    out.write(f"folds {rep.k}; {rep.wall_clock:.1f}s\n")


def cmd_train(cfg, out):
    from .io import save_model
    from .models import fit

    _require(cfg, "manifest", "estimator", "model_out")
    exp = _experiment_config(cfg, [cfg["estimator"]])
    manifest, dataset = _dataset_from_manifest(exp.scenario)
    spec = exp.estimator_spec(cfg["estimator"])
    model = fit(dataset, spec, seed=exp.seed)
    features = manifest.features or [f"x{r + 1}" for r in range(dataset.n_features)]
    save_model(model, cfg["model_out"], features)
    h = "" if model.spec.bandwidth is None else f" (bandwidth {model.spec.bandwidth})"
    print(f"trained {model.spec.name} on {len(dataset)} samples{h}; saved {cfg['model_out']}", file=out)


def cmd_predict(cfg, out):
    from .io import load_model, read_samples

    _require(cfg, "model", "curves", "locations")
    model, features = load_model(cfg["model"])
    grids = [b.grid for b in model.featurizer.bases]
    ids, samples, locs = read_samples(cfg["curves"], cfg["locations"], grids, features)
    if locs.shape[1] != model.locations.shape[1]:
        raise ValidationError(f"model expects {model.locations.shape[1]} coordinates, got {locs.shape[1]}")
    pred = model.predict(samples, locs, mode=cfg.get("mode", "auto"))
    target = open(cfg["out"], "w", newline="", encoding="utf-8") if cfg.get("out") else out
    try:
        w = csv.writer(target, lineterminator="\n")
        w.writerow(["sample_id", "y"])
        for sid, y in zip(ids, pred):
            w.writerow([sid, repr(float(y))])
    finally:
        if target is not out:
            target.close()


def cmd_report(cfg, out):
    from .experiment import format_table, merge_results, read_results, write_results

    inputs = cfg.get("inputs") or []
    if not inputs:
        raise ValidationError("report needs at least one results.csv")
    rows = merge_results([read_results(p) for p in inputs])
    if cfg.get("out"):
        write_results(rows, cfg["out"])
        out.write(format_table(rows))
    else:
        out.write(write_results(rows))


def cmd_run(cfg, out):
    from .experiment import ExperimentConfig, format_table, run_experiment

    exp = ExperimentConfig.from_dict(cfg)
    res = run_experiment(exp, progress=lambda line: print(line, file=sys.stderr, flush=True))
    out.write(format_table(res["rows"], [r.rmse_pooled for r in res["reports"]]))
    if exp.out_dir is not None:
        print(f"wrote {exp.out_dir / 'results.csv'} and {exp.out_dir / 'run_log.json'}", file=out)


COMMANDS = {
    "simulate": cmd_simulate,
    "cv": cmd_cv,
    "train": cmd_train,
    "predict": cmd_predict,
    "report": cmd_report,
    "run": cmd_run,
}


def _root_cause(exc):
    while hasattr(exc, "cause") and isinstance(exc.cause, BaseException):
        exc = exc.cause
    return exc


def exit_code(exc: BaseException) -> int:
    root = _root_cause(exc)
    if isinstance(root, ValidationError):
        return EXIT_VALIDATION
    if isinstance(root, NumericalError):
        return EXIT_NUMERICAL
    return EXIT_VALIDATION


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve(args)
        COMMANDS[args.command](cfg, out)
    except StfnnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code(exc)
    return EXIT_OK


def main_exit():
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
