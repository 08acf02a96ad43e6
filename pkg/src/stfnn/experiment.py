"""Experiment orchestration: config files, results tables and run logs.

A config is a YAML (or JSON) mapping::

    scenario: sim1            # sim1 | sim2 | path to a dataset manifest
    seed: 1                   # simulation, fold partition and selection seed
    simulation: {P: 10, Q: 30, sigma: 0.5, rho: 0.25, n_grid: 201}
    cv: {k: 10}               # k: loo for leave-one-out
    estimators: table1        # or a list such as [FLM, FNN, GWFNN_Gaussian]
    network: {n_functional: 4, hidden: [2], activation: tanh}
    train: {learning_rate: 0.03, max_iter: 2000, seed: 0}
    bandwidths: {GWFNN_Gaussian: 3.0}       # fixed values skip selection
    bandwidth_grids: {Gaussian: [1, 2, 4]}  # per family, else the default grid
    inner_folds: 5
    fve_cutoff: 0.99
    out_dir: results

Only ``scenario`` is required. ``run_experiment`` writes ``results.csv`` and
``run_log.json`` into ``out_dir``. The CSV holds only quantities that are
fully determined by the config, so reruns reproduce it byte for byte; timings
and the pooled-residual RMSE go to the log.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .cv import CVReport, kfold_cv, loocv
from .errors import IngestionError, StfnnError, ValidationError
from .fnn import NetworkSpec, TrainConfig
from .metrics import improvement, significance_tests
from .models import EstimatorSpec, LINEAR

TABLE1 = (
    "FLM",
    "FLM_SP",
    "GWFLM_Gaussian",
    "GWFLM_Exponential",
    "GWFLM_DoublePower",
    "SARFLM_Nearest",
    "FNN",
    "FNN_SP",
    "GWFNN_Gaussian",
    "GWFNN_Exponential",
    "GWFNN_DoublePower",
    "SARFNN_Nearest",
)

RESULTS_HEADER = ("estimator", "kernel", "bandwidth", "rmse", "imp_vs_flm", "imp_vs_fnn", "seed")

SCENARIOS = {"sim1": "heterogeneity", "sim2": "dependency"}


class ExperimentError(StfnnError):
    """A stage of an experiment failed; ``cause`` keeps the original error."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


# --------------------------------------------------------------------------
# config
# --------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    scenario: str
    seed: int = 0
    simulation: dict = field(default_factory=dict)
    k: Optional[int] = 10
    estimators: tuple = TABLE1
    network: NetworkSpec = field(default_factory=NetworkSpec)
    train: TrainConfig = field(default_factory=TrainConfig)
    bandwidths: dict = field(default_factory=dict)
    bandwidth_grids: dict = field(default_factory=dict)
    inner_folds: int = 5
    fve_cutoff: float = 0.99
    out_dir: Optional[Path] = None
    base_dir: Path = Path(".")

    _KEYS = {
        "scenario", "seed", "simulation", "cv", "estimators", "network", "train",
        "bandwidths", "bandwidth_grids", "inner_folds", "fve_cutoff", "out_dir",
    }

    @classmethod
    def from_dict(cls, raw: dict, base_dir=Path(".")) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ValidationError("experiment config must be a mapping")
        unknown = set(raw) - cls._KEYS
        if unknown:
            raise ValidationError(f"unknown config keys {sorted(unknown)}")
        if "scenario" not in raw:
            raise ValidationError("config lacks 'scenario'")
        cv = raw.get("cv") or {}
        k = cv.get("k", 10)
        if k == "loo":
            k = None
        elif not isinstance(k, int) or isinstance(k, bool):
            raise ValidationError(f"cv.k must be an integer or 'loo', got {k!r}")
        ests = raw.get("estimators", "table1")
        if ests == "table1":
            ests = TABLE1
        if isinstance(ests, str) or not ests:
            raise ValidationError("estimators must be 'table1' or a nonempty list")
        for name in ests:
            EstimatorSpec.parse(str(name))  # validates early
        net = raw.get("network") or {}
        try:
            network = NetworkSpec(
                int(net.get("n_functional", 4)),
                tuple(net.get("hidden", (2,))),
                net.get("activation", "tanh"),
            )
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"bad network section: {exc}") from None
        tr = dict(raw.get("train") or {})
        tr.setdefault("seed", int(raw.get("seed", 0)))
        try:
            train = TrainConfig(**tr)
        except TypeError as exc:
            raise ValidationError(f"bad train section: {exc}") from None
        sim = dict(raw.get("simulation") or {})
        bad = set(sim) - {"P", "Q", "sigma", "rho", "n_grid", "lower", "upper"}
        if bad:
            raise ValidationError(f"unknown simulation keys {sorted(bad)}")
        out = raw.get("out_dir")
        return cls(
            scenario=str(raw["scenario"]),
            seed=int(raw.get("seed", 0)),
            simulation=sim,
            k=k,
            estimators=tuple(str(e) for e in ests),
            network=network,
            train=train,
            bandwidths={str(a): b for a, b in (raw.get("bandwidths") or {}).items()},
            bandwidth_grids={str(a): tuple(b) for a, b in (raw.get("bandwidth_grids") or {}).items()},
            inner_folds=int(raw.get("inner_folds", 5)),
            fve_cutoff=float(raw.get("fve_cutoff", 0.99)),
            out_dir=None if out is None else Path(out),
            base_dir=Path(base_dir),
        )

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_dict(load_config_file(path), base_dir=Path(path).parent)

    def estimator_spec(self, name: str) -> EstimatorSpec:
        spec = EstimatorSpec.parse(name, fve_cutoff=self.fve_cutoff, inner_folds=self.inner_folds)
        if spec.kind not in LINEAR:
            spec = replace(spec, network=self.network, train=self.train)
        if spec.family is not None:
            h = self.bandwidths.get(name, self.bandwidths.get(spec.name))
            if h is not None:
                spec = spec.with_bandwidth(h)
            grid = self.bandwidth_grids.get(spec.family)
            if grid is not None:
                spec = replace(spec, bandwidth_grid=grid)
            spec.kernel  # validates a fixed bandwidth
        return spec

    def to_dict(self):
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "simulation": self.simulation,
            "cv": {"k": "loo" if self.k is None else self.k},
            "estimators": list(self.estimators),
            "network": {k: v for k, v in self.network.to_dict().items() if k != "extra_inputs"},
            "train": self.train.to_dict(),
            "bandwidths": self.bandwidths,
            "bandwidth_grids": {k: list(v) for k, v in self.bandwidth_grids.items()},
            "inner_folds": self.inner_folds,
            "fve_cutoff": self.fve_cutoff,
            "out_dir": None if self.out_dir is None else str(self.out_dir),
        }


def load_config_file(path) -> dict:
    try:
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise IngestionError(f"{path}: cannot read config: {exc}") from None
    except yaml.YAMLError as exc:
        raise ValidationError(f"{path}: malformed config: {exc}") from None
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ValidationError(f"{path}: config must be a mapping")
    return raw


# --------------------------------------------------------------------------
# results table
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ResultRow:
    estimator: str
    kernel: str
    bandwidth: str
    rmse: float
    imp_vs_flm: Optional[float]
    imp_vs_fnn: Optional[float]
    seed: Optional[int]


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def format_bandwidths(values) -> str:
    """Per-fold bandwidths joined with ``|``; floats written with ``repr``."""
    return "|".join(str(int(v)) if isinstance(v, (int, np.integer)) else repr(float(v)) for v in values)


def write_results(rows, path=None) -> str:
    """Write rows as CSV to ``path`` (if given) and return the text."""
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULTS_HEADER)
    for r in rows:
        w.writerow([r.estimator, r.kernel, r.bandwidth, _fmt(r.rmse), _fmt(r.imp_vs_flm), _fmt(r.imp_vs_fnn), _fmt(r.seed)])
    text = buf.getvalue()
    if path is not None:
        try:
            Path(path).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise IngestionError(f"{path}: cannot write results: {exc}") from None
    return text


def read_results(path) -> list:
    def opt_float(s, line, what):
        if s == "":
            return None
        try:
            v = float(s)
        except ValueError:
            raise IngestionError(f"{path}:{line}: {what} {s!r} is not a number") from None
        if not math.isfinite(v):
            raise IngestionError(f"{path}:{line}: {what} is not finite")
        return v

    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise IngestionError(f"{path}: {exc}") from None
    rows = []
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != RESULTS_HEADER:
            raise IngestionError(f"{path}:1: expected header {','.join(RESULTS_HEADER)}")
        for line, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(RESULTS_HEADER):
                raise IngestionError(f"{path}:{line}: expected {len(RESULTS_HEADER)} fields, got {len(rec)}")
            rmse = opt_float(rec[3], line, "rmse")
            if rmse is None:
                raise IngestionError(f"{path}:{line}: missing rmse")
            seed = None
            if rec[6] != "":
                try:
                    seed = int(rec[6])
                except ValueError:
                    raise IngestionError(f"{path}:{line}: seed {rec[6]!r} is not an integer") from None
            rows.append(
                ResultRow(rec[0], rec[1], rec[2], rmse, opt_float(rec[4], line, "imp_vs_flm"), opt_float(rec[5], line, "imp_vs_fnn"), seed)
            )
    return rows


def merge_results(tables) -> list:
    """Concatenate tables; identical duplicates collapse, conflicting ones raise."""
    out = {}
    for rows in tables:
        for r in rows:
            key = (r.estimator, r.kernel, r.seed)
            if key in out and out[key] != r:
                raise ValidationError(f"conflicting results for {key}")
            out.setdefault(key, r)
    return list(out.values())


def format_table(rows, pooled=None) -> str:
    """Aligned plain-text rendering for terminals.

    ``pooled`` optionally lists the pooled-residual RMSE of each row, shown
    as an extra column next to the fold-mean RMSE.
    """
    head = ["estimator", "kernel", "rmse"] + (["rmse_pooled"] if pooled is not None else []) + ["imp_vs_flm", "imp_vs_fnn", "seed"]
    body = []
    for i, r in enumerate(rows):
        line = [r.estimator, r.kernel or "-", f"{r.rmse:.4f}"]
        if pooled is not None:
            line.append(f"{pooled[i]:.4f}")
        line += [
            "-" if r.imp_vs_flm is None else f"{r.imp_vs_flm:.2f}%",
            "-" if r.imp_vs_fnn is None else f"{r.imp_vs_fnn:.2f}%",
            "-" if r.seed is None else str(r.seed),
        ]
        body.append(line)
    widths = [max(len(x) for x in col) for col in zip(head, *body)]
    lines = ["  ".join(x.ljust(w) for x, w in zip(line, widths)).rstrip() for line in [head] + body]
    return "\n".join(lines) + "\n"


def result_rows(reports, seed=None) -> list:
    """One row per report; IMPs are filled when FLM / FNN are among the reports."""
    by_name = {r.estimator: r for r in reports}
    flm = by_name.get("FLM")
    fnn = by_name.get("FNN")
    rows = []
    for rep in reports:
        spec = EstimatorSpec.parse(rep.estimator)
        bw = rep.selected.get("bandwidth")
        rows.append(
            ResultRow(
                spec.kind,
                spec.family or "",
                "" if bw is None else format_bandwidths(bw),
                float(rep.rmse),
                None if flm is None else improvement(flm.rmse, rep.rmse),
                None if fnn is None else improvement(fnn.rmse, rep.rmse),
                rep.seed if seed is None else seed,
            )
        )
    return rows


# --------------------------------------------------------------------------
# running
# --------------------------------------------------------------------------


def load_dataset(config: ExperimentConfig):
    from .io import ingest
    from .simgen import SimConfig, simulate

    if config.scenario in SCENARIOS:
        try:
            sim = SimConfig(scenario=SCENARIOS[config.scenario], seed=config.seed, **config.simulation)
        except TypeError as exc:
            raise ValidationError(f"bad simulation section: {exc}") from None
        return simulate(sim)
    path = Path(config.scenario)
    if not path.is_absolute():
        path = config.base_dir / path
    return ingest(path)


def run_cv(dataset, spec: EstimatorSpec, k: Optional[int], seed: int) -> CVReport:
    if k is None:
        return loocv(dataset, spec, seed=seed)
    return kfold_cv(dataset, spec, k=k, seed=seed)


def run_experiment(config, out_dir=None, progress=None) -> dict:
    """Run every configured estimator through cross-validation.

    Parameters
    ----------
    config : ExperimentConfig, dict or path
    out_dir : path, optional
        Overrides ``config.out_dir``. When neither is set nothing is written.
    progress : callable, optional
        Called with one line of text per finished estimator.

    Returns
    -------
    dict with ``rows`` (list of ResultRow), ``reports`` (list of CVReport)
    and ``log`` (the run-log mapping).
    """
    if isinstance(config, dict):
        config = ExperimentConfig.from_dict(config)
    elif not isinstance(config, ExperimentConfig):
        config = ExperimentConfig.load(config)
    out_dir = Path(out_dir) if out_dir is not None else config.out_dir

    try:
        dataset = load_dataset(config)
    except StfnnError as exc:
        raise ExperimentError("data", exc) from exc

    reports = []
    for name in config.estimators:
        try:
            spec = config.estimator_spec(name)
            rep = run_cv(dataset, spec, config.k, config.seed)
        except StfnnError as exc:
            raise ExperimentError(f"cross-validation of {name}", exc) from exc
        reports.append(rep)
        if progress is not None:
            progress(f"{rep.estimator}: rmse {rep.rmse:.4f} ({rep.wall_clock:.1f}s)")

    rows = result_rows(reports, seed=config.seed)
    log = {
        "config": config.to_dict(),
        "n_samples": len(dataset),
        "estimators": [],
    }
    by_name = {r.estimator: r for r in reports}
    for rep in reports:
        entry = rep.to_dict()
        base = "FLM" if EstimatorSpec.parse(rep.estimator).kind in LINEAR else "FNN"
        if base in by_name and base != rep.estimator:
            sig = significance_tests(rep.abs_errors, by_name[base].abs_errors)
            entry["significance_vs"] = {
                "baseline": base,
                "t_p_value": sig.t_p_value,
                "wilcoxon_p_value": sig.wilcoxon_p_value,
                "degenerate": sig.degenerate,
            }
        log["estimators"].append(entry)

    if out_dir is not None:
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
            write_results(rows, out_dir / "results.csv")
            (out_dir / "run_log.json").write_text(json.dumps(log, indent=1, default=_json_default), encoding="utf-8")
        except (OSError, StfnnError) as exc:
            raise ExperimentError("report", exc) from exc
    return {"rows": rows, "reports": reports, "log": log}


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")
