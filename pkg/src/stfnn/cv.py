"""K-fold and leave-one-out cross-validation, bandwidth selection."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import NumericalError, StfnnError, ValidationError
from .fda import SpatialDataset
from .metrics import rmse


def fold_assignment(n: int, k: int, seed: Optional[int]) -> np.ndarray:
    """Fold label per sample. ``seed=None`` keeps the natural order (used for LOO)."""
    if not 1 < k <= n:
        raise ValidationError(f"need 2 <= k <= N, got k={k}, N={n}")
    order = np.arange(n)
    if seed is not None:
        order = np.random.Generator(np.random.PCG64(seed)).permutation(n)
    labels = np.empty(n, dtype=int)
    labels[order] = np.arange(n) % k
    return labels


@dataclass
class CVReport:
    """Outcome of one cross-validated estimator."""

    estimator: str
    fold_rmse: list
    rmse: float
    rmse_pooled: float
    predictions: list
    truths: list
    folds: list
    selected: dict = field(default_factory=dict)
    seed: Optional[int] = None
    k: int = 0
    wall_clock: float = 0.0

    @property
    def abs_errors(self) -> np.ndarray:
        return np.abs(np.asarray(self.predictions) - np.asarray(self.truths))

    def to_dict(self):
        return {
            "estimator": self.estimator,
            "fold_rmse": list(self.fold_rmse),
            "rmse": self.rmse,
            "rmse_pooled": self.rmse_pooled,
            "predictions": list(self.predictions),
            "truths": list(self.truths),
            "folds": list(self.folds),
            "selected": self.selected,
            "seed": self.seed,
            "k": self.k,
            "wall_clock": self.wall_clock,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


class FoldError(StfnnError):
    def __init__(self, fold, cause):
        super().__init__(f"fold {fold}: {cause}")
        self.fold = fold
        self.cause = cause


def _heldout_view(dataset: SpatialDataset, idx):
    # prediction paths only ever see covariates and locations
    sub = dataset.subset(idx)
    return list(sub.samples), np.array(sub.locations)


def cross_validate(dataset: SpatialDataset, spec, k: int = 10, seed: Optional[int] = 0, inner_seed: int = 0) -> CVReport:
    """Fit on k-1 folds, predict the held-out fold out-of-sample, repeat.

    The reported RMSE is the mean of fold RMSEs; the pooled RMSE over all
    held-out residuals is kept alongside.
    """
    from .models import fit, is_gw

    n = len(dataset)
    labels = fold_assignment(n, k, seed)
    preds = np.empty(n)
    fold_rmse = []
    selected = {}
    t0 = time.perf_counter()
    for f in range(k):
        test = np.flatnonzero(labels == f)
        train = np.flatnonzero(labels != f)
        try:
            model = fit(dataset.subset(train), spec, seed=inner_seed, local_fits=not is_gw(spec.kind))
            samples, locs = _heldout_view(dataset, test)
            p = model.predict_out_of_sample(samples, locs)
        except StfnnError as exc:
            raise FoldError(f, exc) from exc
        preds[test] = p
        fold_rmse.append(rmse(p, dataset.responses[test]))
        if model.spec.bandwidth is not None:
            selected.setdefault("bandwidth", []).append(model.spec.bandwidth)
        selected.setdefault("k_sel", []).append([b.size for b in model.featurizer.bases])
    return CVReport(
        estimator=spec.name,
        fold_rmse=fold_rmse,
        rmse=float(np.mean(fold_rmse)),
        rmse_pooled=rmse(preds, dataset.responses),
        predictions=preds.tolist(),
        truths=dataset.responses.tolist(),
        folds=labels.tolist(),
        selected=selected,
        seed=seed,
        k=k,
        wall_clock=time.perf_counter() - t0,
    )


def kfold_cv(dataset: SpatialDataset, spec, k: int = 10, seed: int = 0) -> CVReport:
    return cross_validate(dataset, spec, k, seed, inner_seed=seed)


def loocv(dataset: SpatialDataset, spec, seed: int = 0) -> CVReport:
    if len(dataset) < 2:
        raise ValidationError("leave-one-out needs at least two samples")
    return cross_validate(dataset, spec, len(dataset), None, inner_seed=seed)


def select_bandwidth(dataset: SpatialDataset, spec, grid, k: int = 5, seed: int = 0):
    """Bandwidth with the lowest k-fold CV RMSE; ties go to the smallest.

    Candidates whose fits break down numerically (e.g. a kernel so narrow
    the weighted design is singular) score ``inf``.

    Returns
    -------
    best : float or int
    table : list of (bandwidth, rmse)
    """
    grid = list(grid)
    if not grid:
        raise ValidationError("empty bandwidth grid")
    table = []
    for h in sorted(grid):
        cand = spec.with_bandwidth(h)
        try:
            score = cross_validate(dataset, cand, k, seed, inner_seed=seed).rmse
        except FoldError as exc:
            if not isinstance(exc.cause, (NumericalError, ValidationError)):
                raise
            score = float("inf")
        table.append((h, score))
    finite = [s for _, s in table if np.isfinite(s)]
    if not finite:
        raise NumericalError(f"no feasible bandwidth for {spec.name} in {grid}")
    best_score = min(finite)
    best = next(h for h, s in table if s == best_score)
    return best, table
