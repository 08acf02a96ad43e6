"""Acceptance suite.

Every sub-check prints one ``PASS`` or ``FAIL`` line at the contract's
tolerance, and the whole list is also written to
``acceptance_output/acceptance_report.txt``. A criterion's test fails when
any of its sub-checks fails; nothing is loosened to make a line turn green.

Criteria 1 and 2 run the full simulation studies (N=300, 10-fold CV with
nested bandwidth selection). Expect roughly 18 minutes for Simulation I
and 52 minutes for Simulation II on one core. Set
``STFNN_ACCEPTANCE_QUICK=1`` to skip those two. Criterion 3 runs only when
``STFNN_CANADA_MANIFEST`` points at an exported weather dataset manifest.
"""

import os
from pathlib import Path

import numpy as np
import pytest

from cases import network_loss, random_dataset, random_network_case
from oracles import augmented_oracle, central_difference, gwflm_exact, rook_bruteforce, trapezoid_loop, KERNELS
from stfnn import kernels as K
from stfnn.experiment import TABLE1, ExperimentConfig, run_experiment
from stfnn.fda import fpca, project_scores
from stfnn.fnn import TrainConfig, gradient_design
from stfnn.metrics import improvement
from stfnn.models import EstimatorSpec, fit, fit_gwflm
from stfnn.simgen import SimConfig, generate_covariates, generate_response_dependency, simulate, solve_dependency

OUT = Path(os.environ.get("STFNN_ACCEPTANCE_OUT", Path(__file__).resolve().parents[1] / "acceptance_output"))
QUICK = os.environ.get("STFNN_ACCEPTANCE_QUICK") == "1"
CANADA = os.environ.get("STFNN_CANADA_MANIFEST")

GWFNN_LIMIT = 45 * 60
OTHER_LIMIT = 10 * 60

LINES = []


@pytest.fixture(scope="module", autouse=True)
def _report_file():
    yield
    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / "acceptance_report.txt").write_text("\n".join(LINES) + "\n", encoding="utf-8")


class Checker:
    def __init__(self, capsys, criterion):
        self.capsys = capsys
        self.criterion = criterion
        self.failed = []

    def __call__(self, label, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  [{self.criterion}] {label}" + (f"  ({detail})" if detail else "")
        LINES.append(line)
        with self.capsys.disabled():
            print("\n" + line, end="")
        if not ok:
            self.failed.append(label)

    def skip(self, reason):
        line = f"SKIP  [{self.criterion}] {reason}"
        LINES.append(line)
        with self.capsys.disabled():
            print("\n" + line, end="")
        pytest.skip(reason)

    def finish(self):
        assert not self.failed, f"criterion {self.criterion} failed: {self.failed}"


def _runs(reports):
    return {r.estimator: r for r in reports}


def _timing_checks(check, reports):
    for rep in reports:
        limit = GWFNN_LIMIT if rep.estimator.startswith("GWFNN") else OTHER_LIMIT
        check(f"{rep.estimator} run time {rep.wall_clock / 60:.1f} min < {limit // 60} min", rep.wall_clock < limit)


def _simulation_run(name, estimators):
    cfg = {"scenario": name, "seed": 1, "cv": {"k": 10}, "estimators": list(estimators)}
    return run_experiment(ExperimentConfig.from_dict(cfg), out_dir=OUT / name)


@pytest.fixture(scope="module")
def sim1_run():
    if QUICK:
        return None
    # the two extra GWFNN kernels are not needed by any check and cost ~25 min each
    names = [n for n in TABLE1 if n not in ("GWFNN_Exponential", "GWFNN_DoublePower")]
    return _simulation_run("sim1", names)


@pytest.fixture(scope="module")
def sim2_run():
    if QUICK:
        return None
    return _simulation_run("sim2", TABLE1)


def test_criterion_1_simulation_one(capsys, sim1_run):
    check = Checker(capsys, 1)
    if sim1_run is None:
        check.skip("Simulation I run skipped (STFNN_ACCEPTANCE_QUICK=1)")
    r = _runs(sim1_run["reports"])
    flm, fnn = r["FLM"].rmse, r["FNN"].rmse
    gw, sar = r["GWFNN_Gaussian"].rmse, r["SARFNN_Nearest"].rmse
    check(f"FLM RMSE {flm:.4f} within 1.143 +/- 0.15", abs(flm - 1.143) <= 0.15)
    check(f"FNN RMSE {fnn:.4f} <= 0.75", fnn <= 0.75)
    imp = improvement(fnn, gw)
    check(f"GWFNN_Gaussian improvement over FNN {imp:.2f}% >= 10%", imp >= 10)
    imp = improvement(fnn, sar)
    check(f"SARFNN_Nearest improvement over FNN {imp:.2f}% >= 5%", imp >= 5)
    check(f"FNN {fnn:.4f} < FLM {flm:.4f}", fnn < flm)
    _timing_checks(check, sim1_run["reports"])
    check.finish()


def test_criterion_2_simulation_two(capsys, sim2_run):
    check = Checker(capsys, 2)
    if sim2_run is None:
        check.skip("Simulation II run skipped (STFNN_ACCEPTANCE_QUICK=1)")
    r = _runs(sim2_run["reports"])
    nonlinear = {n: rep.rmse for n, rep in r.items() if EstimatorSpec.parse(n).kind in ("FNN", "FNN_SP", "GWFNN", "SARFNN")}
    best = min(nonlinear, key=nonlinear.get)
    check(f"best non-linear RMSE is SARFNN_Nearest (best: {best} {nonlinear[best]:.4f})", best == "SARFNN_Nearest")
    fnn, sar = r["FNN"].rmse, r["SARFNN_Nearest"].rmse
    imp = improvement(fnn, sar)
    check(f"SARFNN_Nearest improvement over FNN {imp:.2f}% >= 3%", imp >= 3)
    flm = r["FLM"].rmse
    for fam in ("Gaussian", "Exponential", "DoublePower"):
        g = r[f"GWFLM_{fam}"].rmse
        check(f"GWFLM_{fam} RMSE {g:.4f} within FLM {flm:.4f} +/- 0.1", abs(g - flm) <= 0.1)
    check(f"FNN RMSE {fnn:.4f} <= 0.85", fnn <= 0.85)
    _timing_checks(check, sim2_run["reports"])
    check.finish()


def test_criterion_3_canada(capsys):
    check = Checker(capsys, 3)
    if not CANADA:
        check.skip("Canada weather data not supplied (set STFNN_CANADA_MANIFEST to run)")
    cfg = {
        "scenario": str(Path(CANADA).resolve()),
        "seed": 1,
        "cv": {"k": "loo"},
        "estimators": ["FLM", "FNN", "GWFLM_Gaussian", "GWFNN_Gaussian"],
        "network": {"hidden": [8, 4]},
    }
    res = run_experiment(ExperimentConfig.from_dict(cfg), out_dir=OUT / "canada")
    r = _runs(res["reports"])
    imp = improvement(r["FNN"].rmse, r["GWFNN_Gaussian"].rmse)
    check(f"GWFNN_Gaussian improvement over FNN {imp:.2f}% >= 20%", imp >= 20)
    imp = improvement(r["FLM"].rmse, r["GWFLM_Gaussian"].rmse)
    check(f"GWFLM_Gaussian improvement over FLM {imp:.2f}% >= 15%", imp >= 15)
    check("network hidden widths are 8 and 4", ExperimentConfig.from_dict(cfg).network.hidden == (8, 4))
    check.finish()


def test_criterion_4_gradient_oracle(capsys):
    check = Checker(capsys, 4)
    for kind, seed in (("FNN", 101), ("FNN_SP", 102), ("SARFNN", 103)):
        rng = np.random.default_rng(seed)
        worst, count = 0.0, 34
        for _ in range(count):
            spec, p, C, E, y = random_network_case(rng, kind)
            rw = rng.uniform(0.1, 1, y.size)
            _, g = gradient_design(p, spec, C, E, y, rw)
            fd = central_difference(lambda t: network_loss(t, p, spec, C, E, y, rw), p.flatten())
            ga = g.flatten()
            err = np.linalg.norm(ga - fd) / max(np.linalg.norm(fd), np.linalg.norm(ga), 1e-12)
            worst = max(worst, err)
        check(f"{kind} shapes: {count} configurations, worst relative error {worst:.2e} < 1e-4", worst < 1e-4)
    check.finish()


def test_criterion_5_closed_form_oracle(capsys):
    check = Checker(capsys, 5)
    rng = np.random.default_rng(55)
    worst, done = 0.0, 0
    while done < 50:
        ds = random_dataset(rng)
        fam = ["Gaussian", "Exponential", "DoublePower"][done % 3]
        dmax = K.pairwise_distances(ds.locations).max()
        h = float(dmax * rng.uniform(0.8, 2.0) if fam == "DoublePower" else rng.uniform(0.5, 10))
        u = int(rng.integers(len(ds)))
        res = fpca(ds)
        Z = np.column_stack([np.ones(len(ds)), project_scores(ds.curves(0), res.basis, res.mean)])
        w = np.array([KERNELS[fam](d, h) for d in np.linalg.norm(ds.locations - ds.locations[u], axis=1)])
        if np.sum(w > 0) <= Z.shape[1] or np.linalg.cond(Z[w > 0]) > 1e8:
            continue
        ref = gwflm_exact(Z, ds.responses, w)
        got = fit_gwflm(ds, K.KernelSpec(fam, h), u)
        worst = max(worst, np.max(np.abs(got - ref)) / max(1.0, np.max(np.abs(ref))))
        done += 1
    check(f"fit_gwflm vs exact weighted normal equations on 50 datasets: worst {worst:.2e} < 1e-8", worst < 1e-8)
    check.finish()


def test_criterion_6_degeneration(capsys):
    check = Checker(capsys, 6)
    ds = simulate(SimConfig(P=4, Q=6, seed=61))
    tr, te = ds.subset(np.arange(18)), ds.subset(np.arange(18, 24))
    cfg = TrainConfig()
    fnn = fit(tr, EstimatorSpec("FNN", train=cfg))
    gw = fit(tr, EstimatorSpec("GWFNN", family="Gaussian", bandwidth=1e12, train=cfg))
    ref_out, ref_in = fnn.predict_global(list(te.samples)), fnn.predict_global(list(tr.samples))
    d_out = np.max(np.abs(gw.predict_out_of_sample(list(te.samples), te.locations) - ref_out))
    d_in = np.max(np.abs(gw.predict_in_sample(list(tr.samples), np.arange(18)) - ref_in))
    check(f"GWFNN h=1e12 vs FNN, out-of-sample max difference {d_out:.1e} < 1e-3", d_out < 1e-3)
    check(f"GWFNN h=1e12 vs FNN, in-sample max difference {d_in:.1e} < 1e-3", d_in < 1e-3)
    sar = fit(tr, EstimatorSpec("SARFNN", family="DoublePower", bandwidth=1e-9, train=cfg))
    zero = bool(np.all(sar.sar.normalized == 0))
    same_out = np.array_equal(sar.predict_out_of_sample(list(te.samples), te.locations), ref_out)
    same_in = np.array_equal(sar.predict_in_sample(list(tr.samples), np.arange(18)), ref_in)
    check("SARFNN with an all-zero kernel matches FNN exactly", zero and same_out and same_in)
    check.finish()


def test_criterion_7_fpca(capsys):
    check = Checker(capsys, 7)
    ds = simulate(SimConfig(seed=1))
    res = fpca(ds)
    check(f"FVE(4) = {res.fve[3]:.6f} >= 0.99 (K_sel = {res.k_sel})", res.fve[3] >= 0.99)
    t = ds.grid(0).points
    psi = res.basis.functions
    gram = np.array([[trapezoid_loop(psi[a] * psi[b], t) for b in range(len(psi))] for a in range(len(psi))])
    dev = np.max(np.abs(gram - np.eye(len(psi))))
    check(f"eigenfunction Gram matrix within {dev:.1e} of identity (< 1e-6)", dev < 1e-6)
    check.finish()


def test_criterion_8_sar_algebra(capsys):
    check = Checker(capsys, 8)
    ds = simulate(SimConfig(seed=1))
    worst = 0.0
    for fam, h in (("Gaussian", 1.5), ("Exponential", 1.0), ("DoublePower", 1.5), ("Nearest", 4)):
        s = K.sar_weight_matrix(ds.locations, K.KernelSpec(fam, h, "SAR")).normalized.sum(axis=1)
        worst = max(worst, float(np.max(np.minimum(np.abs(s), np.abs(s - 1)))))
    check(f"row sums of the normalised SAR matrix are 0 or 1 (worst {worst:.1e} <= 1e-12)", worst <= 1e-12)
    M = K.rook_matrix(10, 30)
    check(f"rook matrix sum for 10x30 grid = {int(M.sum())} (expect 1120)", M.sum() == 1120 and np.array_equal(M, rook_bruteforce(10, 30)))
    cfg = SimConfig(seed=1, scenario="dependency")
    x = generate_covariates(cfg)
    y = generate_response_dependency(x, cfg)
    yt = generate_response_dependency(x, SimConfig(seed=1, scenario="dependency", rho=0.0))
    resid = float(np.max(np.abs((np.eye(300) - 0.25 * rook_bruteforce(10, 30)) @ y - yt)))
    check(f"Simulation II solver residual {resid:.1e} < 1e-10", resid < 1e-10)
    resid2 = float(np.max(np.abs((np.eye(300) - 0.25 * M) @ solve_dependency(yt, 10, 30, 0.25) - yt)))
    check(f"direct solve residual {resid2:.1e} < 1e-10", resid2 < 1e-10)
    locs = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]])
    new = np.array([0.7, 0.4])
    worst = 0.0
    for fam in ("Gaussian", "Exponential", "DoublePower"):
        spec = K.KernelSpec(fam, 2.5, "SAR")
        norm, w_os = K.augment_sar_matrix(K.sar_weight_matrix(locs, spec), new, locs, spec)
        _, ref = augmented_oracle(locs, new, fam, 2.5)
        worst = max(worst, float(np.max(np.abs(norm - ref))), float(np.max(np.abs(w_os - ref[3, :3]))))
    check(f"augmented matrix vs brute-force 3-point oracle: worst {worst:.1e} < 1e-12", worst < 1e-12)
    check.finish()


def test_criterion_9_determinism(capsys, tmp_path):
    check = Checker(capsys, 9)
    cfg = {
        "scenario": "sim2",
        "seed": 9,
        "simulation": {"P": 4, "Q": 5, "n_grid": 51},
        "cv": {"k": 4},
        "estimators": ["FLM", "FNN", "GWFLM_Gaussian", "GWFNN_Gaussian", "SARFNN_Nearest"],
        "train": {"max_iter": 200},
        "bandwidth_grids": {"Gaussian": [1.0, 3.0], "Nearest": [2, 4]},
        "inner_folds": 3,
    }
    run_experiment(dict(cfg), out_dir=tmp_path / "a")
    run_experiment(dict(cfg), out_dir=tmp_path / "b")
    a = (tmp_path / "a" / "results.csv").read_bytes()
    b = (tmp_path / "b" / "results.csv").read_bytes()
    rows = len(a.splitlines()) - 1
    check(f"rerun reproduces results.csv byte for byte ({len(a)} bytes, {rows} rows)", a == b)
    check.finish()
