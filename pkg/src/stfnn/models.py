"""The eight estimators: FLM, FLM_SP, GWFLM, SARFLM, FNN, FNN_SP, GWFNN, SARFNN.

Every estimator starts from FPCA bases fitted on its training curves. Linear
models regress on centred scores; networks consume raw basis projections
(their first-layer biases absorb the mean curve).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import kernels as K
from .errors import ShapeError, SingularFitError, TrainingError, ValidationError
from .fda import BasisSystem, FunctionalSample, SpatialDataset, TimeGrid, fpca
from .fnn import FittedNetwork, NetworkSpec, TrainConfig, fit_network, sample_projections, train_batch

LINEAR = ("FLM", "FLM_SP", "GWFLM", "SARFLM")
NEURAL = ("FNN", "FNN_SP", "GWFNN", "SARFNN")
KINDS = LINEAR + NEURAL


def is_gw(kind: str) -> bool:
    return kind in ("GWFLM", "GWFNN")


def is_sar(kind: str) -> bool:
    return kind in ("SARFLM", "SARFNN")


@dataclass(frozen=True)
class EstimatorSpec:
    """What to fit.

    ``family`` names the kernel of GW and SAR kinds. ``bandwidth=None`` means
    the bandwidth is chosen by ``inner_folds``-fold cross-validation over
    ``bandwidth_grid`` (or the default grid) on the training data.
    """

    kind: str
    family: Optional[str] = None
    bandwidth: Optional[float] = None
    network: Optional[NetworkSpec] = None
    train: TrainConfig = field(default_factory=TrainConfig)
    fve_cutoff: float = 0.99
    bandwidth_grid: Optional[tuple] = None
    inner_folds: int = 5

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown estimator {self.kind!r}; choose from {KINDS}")
        needs_kernel = is_gw(self.kind) or is_sar(self.kind)
        if needs_kernel and self.family is None:
            raise ValidationError(f"{self.kind} needs a kernel family")
        if not needs_kernel and (self.family is not None or self.bandwidth is not None):
            raise ValidationError(f"{self.kind} takes no kernel")
        if needs_kernel:
            fam = K.canonical_family(self.family)
            object.__setattr__(self, "family", fam)
            if fam == "Nearest" and not is_sar(self.kind):
                raise ValidationError("the Nearest kernel is only available to SAR models")
            if self.bandwidth is not None:
                object.__setattr__(self, "bandwidth", self.kernel.bandwidth)  # validates and normalises
        if self.kind in NEURAL and self.network is None:
            object.__setattr__(self, "network", NetworkSpec())
        if self.kind in LINEAR and self.network is not None:
            raise ValidationError(f"{self.kind} takes no network spec")
        if self.bandwidth_grid is not None:
            if len(self.bandwidth_grid) == 0:
                raise ValidationError("empty bandwidth grid")
            object.__setattr__(self, "bandwidth_grid", tuple(self.bandwidth_grid))

    @classmethod
    def parse(cls, name: str, **kw) -> "EstimatorSpec":
        """``"GWFNN_Gaussian"`` -> kind GWFNN with a Gaussian kernel."""
        for kind in sorted(KINDS, key=len, reverse=True):
            if name == kind:
                return cls(kind, **kw)
            if name.startswith(kind + "_") and kind not in ("FLM_SP", "FNN_SP"):
                rest = name[len(kind) + 1 :]
                if is_gw(kind) or is_sar(kind):
                    return cls(kind, family=rest, **kw)
        raise ValidationError(f"cannot parse estimator name {name!r}")

    @property
    def name(self) -> str:
        return self.kind if self.family is None else f"{self.kind}_{self.family}"

    @property
    def flavor(self) -> str:
        return "SAR" if is_sar(self.kind) else "GW"

    @property
    def kernel(self) -> Optional[K.KernelSpec]:
        if self.family is None or self.bandwidth is None:
            return None
        return K.KernelSpec(self.family, self.bandwidth, self.flavor)

    def with_bandwidth(self, h) -> "EstimatorSpec":
        return replace(self, bandwidth=h)

    def to_dict(self):
        return {
            "kind": self.kind,
            "family": self.family,
            "bandwidth": self.bandwidth,
            "network": None if self.network is None else self.network.to_dict(),
            "train": self.train.to_dict(),
            "fve_cutoff": self.fve_cutoff,
            "bandwidth_grid": None if self.bandwidth_grid is None else list(self.bandwidth_grid),
            "inner_folds": self.inner_folds,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            d["kind"],
            d.get("family"),
            d.get("bandwidth"),
            None if d.get("network") is None else NetworkSpec.from_dict(d["network"]),
            TrainConfig.from_dict(d["train"]) if d.get("train") else TrainConfig(),
            d.get("fve_cutoff", 0.99),
            None if d.get("bandwidth_grid") is None else tuple(d["bandwidth_grid"]),
            d.get("inner_folds", 5),
        )


# --------------------------------------------------------------------------
# shared FPCA featurisation
# --------------------------------------------------------------------------


@dataclass
class Featurizer:
    """Per-feature FPCA bases and mean curves fitted on training data."""

    bases: list
    means: list

    @classmethod
    def fit(cls, dataset: SpatialDataset, fve_cutoff: float = 0.99) -> "Featurizer":
        bases, means = [], []
        for r in range(dataset.n_features):
            x = dataset.curves(r)
            if len(dataset) < 2 or np.all(x == x[0]):
                # a single training curve or identical curves carry no
                # functional signal; the feature contributes no scores
                grid = dataset.grid(r)
                bases.append(BasisSystem(grid, np.zeros((0, len(grid)))))
                means.append(x.mean(axis=0))
                continue
            res = fpca(dataset, r, fve_cutoff)
            bases.append(res.basis)
            means.append(res.mean)
        return cls(bases, means)

    @property
    def n_coef(self) -> int:
        return sum(b.size for b in self.bases)

    def projections(self, samples) -> np.ndarray:
        """Raw projections ``(n, n_coef)`` of samples or a dataset."""
        if isinstance(samples, SpatialDataset):
            blocks = []
            for r, basis in enumerate(self.bases):
                if samples.grid(r) != basis.grid:
                    raise ShapeError(f"feature {r} is not on the training grid")
                blocks.append((samples.curves(r) * basis.grid.weights) @ basis.functions.T)
            return np.hstack(blocks)
        if isinstance(samples, FunctionalSample):
            samples = [samples]
        return np.array([sample_projections(s, self.bases) for s in samples])

    @property
    def mean_projection(self) -> np.ndarray:
        return np.concatenate(
            [(m * b.grid.weights) @ b.functions.T for m, b in zip(self.means, self.bases)]
        )

    def to_dict(self):
        return {
            "features": [
                {
                    "grid": b.grid.points.tolist(),
                    "lower": b.grid.lower,
                    "upper": b.grid.upper,
                    "functions": b.functions.tolist(),
                    "eigenvalues": None if b.eigenvalues is None else b.eigenvalues.tolist(),
                    "mean": m.tolist(),
                }
                for b, m in zip(self.bases, self.means)
            ]
        }

    @classmethod
    def from_dict(cls, d):
        bases, means = [], []
        for f in d["features"]:
            grid = TimeGrid(np.array(f["grid"]), f["lower"], f["upper"])
            funcs = np.array(f["functions"], dtype=float).reshape(-1, len(grid))
            bases.append(BasisSystem(grid, funcs, f.get("eigenvalues")))
            means.append(np.array(f["mean"]))
        return cls(bases, means)


# --------------------------------------------------------------------------
# least squares helpers
# --------------------------------------------------------------------------


def _lstsq(Z, y, what="design"):
    Z = np.asarray(Z, dtype=float)
    if Z.shape[0] < Z.shape[1] or np.linalg.matrix_rank(Z) < Z.shape[1]:
        raise SingularFitError(f"rank-deficient {what} ({Z.shape[0]} x {Z.shape[1]})")
    coef, *_ = np.linalg.lstsq(Z, y, rcond=None)
    return coef


def _informative_columns(X) -> np.ndarray:
    """Mask of extra-scalar columns with nonzero variance (others duplicate the intercept)."""
    X = np.asarray(X, dtype=float)
    sd = X.std(axis=0)
    return sd > 1e-12 * np.maximum(1.0, np.abs(X).max(axis=0))


def gwflm_coefficients(Z, y, weights, location=None) -> np.ndarray:
    """Weighted least squares ``(Z'WZ)^-1 Z'Wy``, computed as OLS on sqrt(W)-scaled rows."""
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0):
        raise ValidationError("negative geographic weight")
    sw = np.sqrt(w)
    try:
        return _lstsq(sw[:, None] * Z, sw * y, "weighted design")
    except SingularFitError as exc:
        where = "" if location is None else f" at location {location}"
        raise SingularFitError(f"{exc}{where}") from None


def transform_gw_data(dataset: SpatialDataset, weights) -> SpatialDataset:
    """Scale every curve and response by ``sqrt(W_i)``."""
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.size != len(dataset):
        raise ShapeError(f"{w.size} weights for {len(dataset)} samples")
    if np.any(w < 0):
        raise ValidationError("negative geographic weight")
    sw = np.sqrt(w)
    samples = [
        FunctionalSample(s.grids, tuple(v * sw[i] for v in s.values))
        for i, s in enumerate(dataset.samples)
    ]
    return SpatialDataset(tuple(samples), dataset.responses * sw, dataset.locations, dataset.ids)


# --------------------------------------------------------------------------
# trained model
# --------------------------------------------------------------------------


@dataclass
class TrainedModel:
    """A fitted estimator with everything needed for in- and out-of-sample prediction."""

    spec: EstimatorSpec
    featurizer: Featurizer
    locations: np.ndarray
    responses: np.ndarray
    projections: np.ndarray
    coef: Optional[np.ndarray] = None
    extra_mask: Optional[np.ndarray] = None
    local_coef: Optional[np.ndarray] = None
    network: Optional[FittedNetwork] = None
    local_networks: Optional[list] = None
    sar: Optional[K.SarWeights] = None
    bandwidth_scores: Optional[list] = None

    @property
    def kind(self) -> str:
        return self.spec.kind

    @property
    def kernel(self) -> Optional[K.KernelSpec]:
        return self.spec.kernel

    @property
    def n_train(self) -> int:
        return self.responses.size

    # -- design helpers ---------------------------------------------------

    def _scores(self, C):
        return C - self.featurizer.mean_projection

    def _linear_design(self, C, extras=None):
        cols = [np.ones((C.shape[0], 1)), self._scores(C)]
        if extras is not None:
            cols.append(np.asarray(extras, dtype=float)[:, self.extra_mask])
        return np.hstack(cols)

    def sar_covariate_in_sample(self, index) -> np.ndarray:
        index = np.atleast_1d(np.asarray(index, dtype=int))
        return self.sar.normalized[index] @ self.responses

    def sar_covariate_out_of_sample(self, locations) -> np.ndarray:
        locs = np.atleast_2d(np.asarray(locations, dtype=float))
        out = []
        for loc in locs:
            _, w_os = K.augment_sar_matrix(self.sar, loc, self.locations, self.kernel)
            out.append(w_os @ self.responses)
        return np.array(out)

    # -- prediction --------------------------------------------------------

    def _check_index(self, index):
        index = np.atleast_1d(np.asarray(index, dtype=int))
        if np.any(index < 0) or np.any(index >= self.n_train):
            raise ValidationError(f"unknown training location index in {index.tolist()}")
        return index

    def _as_samples(self, samples):
        if isinstance(samples, FunctionalSample):
            return [samples]
        if isinstance(samples, SpatialDataset):
            return samples
        return list(samples)

    def predict_global(self, samples, locations=None) -> np.ndarray:
        """Prediction for models whose parameters do not depend on location."""
        C = self.featurizer.projections(self._as_samples(samples))
        kind = self.kind
        locs = None if locations is None else np.atleast_2d(np.asarray(locations, dtype=float))
        if kind == "FLM":
            return self._linear_design(C) @ self.coef
        if kind == "FLM_SP":
            return self._linear_design(C, locs) @ self.coef
        if kind == "FNN":
            return self.network.predict_design(C)
        if kind == "FNN_SP":
            return self.network.predict_design(C, locs)
        raise ValidationError(f"{kind} predictions depend on location; use in/out-of-sample paths")

    def predict_in_sample(self, samples, index) -> np.ndarray:
        """Predict new covariates observed at training locations ``index``."""
        samples = self._as_samples(samples)
        index = self._check_index(index)
        C = self.featurizer.projections(samples)
        if C.shape[0] != index.size:
            raise ShapeError("one location index per sample required")
        kind = self.kind
        if kind in ("FLM", "FNN"):
            return self.predict_global(samples)
        if kind in ("FLM_SP", "FNN_SP"):
            return self.predict_global(samples, self.locations[index])
        if kind == "GWFLM":
            return np.einsum("ij,ij->i", self._linear_design(C), self.local_coef[index])
        if kind == "GWFNN":
            if self.local_networks is None:
                raise ValidationError("model was fitted without per-location networks")
            return np.array([self.local_networks[u].predict_design(C[i : i + 1])[0] for i, u in enumerate(index)])
        sar = self.sar_covariate_in_sample(index)
        if kind == "SARFLM":
            return self._linear_design(C, sar[:, None]) @ self.coef
        return self.network.predict_design(C, sar[:, None])

    def predict_out_of_sample(self, samples, locations) -> np.ndarray:
        """Predict new covariates at locations not in the training set.

        GW kinds refit on the training rows weighted with respect to each new
        location (one fresh network per location for GWFNN). SAR kinds border
        the weight matrix with the new location; no refitting.
        """
        samples = self._as_samples(samples)
        locs = np.atleast_2d(np.asarray(locations, dtype=float))
        if locs.shape[1] != self.locations.shape[1]:
            locs = locs.reshape(-1, self.locations.shape[1])
        C = self.featurizer.projections(samples)
        if C.shape[0] != locs.shape[0]:
            raise ShapeError("one location per sample required")
        kind = self.kind
        if kind in ("FLM", "FNN"):
            return self.predict_global(samples)
        if kind in ("FLM_SP", "FNN_SP"):
            return self.predict_global(samples, locs)
        if is_sar(kind):
            sar = self.sar_covariate_out_of_sample(locs)
            if kind == "SARFLM":
                return self._linear_design(C, sar[:, None]) @ self.coef
            return self.network.predict_design(C, sar[:, None])
        W = np.array([K.gw_weight_vector(self.locations, loc, self.kernel) for loc in locs])
        dead = np.flatnonzero(W.sum(axis=1) <= 1e-300)
        if dead.size:
            raise ValidationError(
                f"all training weights vanish for new location {locs[dead[0]].tolist()}; increase the bandwidth"
            )
        if kind == "GWFLM":
            Z = self._linear_design(self.projections)
            coefs = [gwflm_coefficients(Z, self.responses, w, location=tuple(loc)) for w, loc in zip(W, locs)]
            return np.einsum("ij,ij->i", self._linear_design(C), np.array(coefs))
        nets = _train_gw_networks(self.projections, self.responses, W, self.spec.network, self.spec.train)
        return np.array([net.predict_design(C[i : i + 1])[0] for i, net in enumerate(nets)])

    def predict(self, samples, locations, mode: str = "auto") -> np.ndarray:
        """Dispatch per sample: in-sample if the location matches a training location exactly."""
        samples = list(self._as_samples(samples))
        locs = np.atleast_2d(np.asarray(locations, dtype=float)).reshape(len(samples), -1)
        if mode not in ("auto", "in", "out"):
            raise ValidationError("mode must be 'auto', 'in' or 'out'")
        match = np.full(len(samples), -1)
        if mode != "out":
            d = K.pairwise_distances(locs, self.locations)
            for i in range(len(samples)):
                hit = np.flatnonzero(d[i] == 0)
                if hit.size:
                    match[i] = hit[0]
            if mode == "in" and np.any(match < 0):
                raise ValidationError("some locations are not training locations")
        out = np.empty(len(samples))
        ins = np.flatnonzero(match >= 0)
        outs = np.flatnonzero(match < 0)
        if ins.size:
            out[ins] = self.predict_in_sample([samples[i] for i in ins], match[ins])
        if outs.size:
            out[outs] = self.predict_out_of_sample([samples[i] for i in outs], locs[outs])
        return out

    # -- serialisation -----------------------------------------------------

    def to_dict(self):
        opt = lambda a: None if a is None else np.asarray(a).tolist()  # noqa: E731
        return {
            "format": "stfnn-model",
            "version": 1,
            "estimator": self.spec.to_dict(),
            "featurizer": self.featurizer.to_dict(),
            "locations": self.locations.tolist(),
            "responses": self.responses.tolist(),
            "projections": self.projections.tolist(),
            "coef": opt(self.coef),
            "extra_mask": opt(self.extra_mask),
            "local_coef": opt(self.local_coef),
            "network": None if self.network is None else self.network.to_dict(),
            "local_networks": None
            if self.local_networks is None
            else [n.to_dict() for n in self.local_networks],
            "sar": None
            if self.sar is None
            else {"raw": self.sar.raw.tolist(), "normalized": self.sar.normalized.tolist()},
            "bandwidth_scores": self.bandwidth_scores,
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != "stfnn-model":
            raise ValidationError("not a model file")
        arr = lambda a, dt=float: None if a is None else np.array(a, dtype=dt)  # noqa: E731
        n_train = len(d["responses"])
        return cls(
            EstimatorSpec.from_dict(d["estimator"]),
            Featurizer.from_dict(d["featurizer"]),
            np.array(d["locations"], dtype=float),
            np.array(d["responses"], dtype=float),
            np.array(d["projections"], dtype=float).reshape(n_train, -1),
            arr(d["coef"]),
            arr(d["extra_mask"], bool),
            arr(d["local_coef"]),
            None if d["network"] is None else FittedNetwork.from_dict(d["network"]),
            None if d["local_networks"] is None else [FittedNetwork.from_dict(n) for n in d["local_networks"]],
            None
            if d["sar"] is None
            else K.SarWeights(np.array(d["sar"]["raw"], dtype=float), np.array(d["sar"]["normalized"], dtype=float)),
            d.get("bandwidth_scores"),
        )


# --------------------------------------------------------------------------
# fitting
# --------------------------------------------------------------------------


def _train_gw_networks(C, y, W, network: NetworkSpec, config: TrainConfig, chunk: int = 512) -> list:
    """One network per weight row, trained on sqrt(W)-transformed data."""
    W = np.atleast_2d(W)
    sw = np.sqrt(W)
    nets = []
    for start in range(0, W.shape[0], chunk):
        s = sw[start : start + chunk]
        try:
            res = train_batch(C, s * y[None, :], network, config, scale=s)
        except TrainingError as exc:
            raise TrainingError(f"geographically weighted fit failed: {exc}", exc.iteration) from None
        nets.extend(FittedNetwork(network, p) for p in res.params)
    return nets


def _base(dataset: SpatialDataset, spec: EstimatorSpec) -> TrainedModel:
    feat = Featurizer.fit(dataset, spec.fve_cutoff)
    C = feat.projections(dataset)
    return TrainedModel(spec, feat, np.array(dataset.locations), np.array(dataset.responses), C)


def _fit_linear(model: TrainedModel, extras=None) -> TrainedModel:
    y = model.responses
    if extras is not None:
        model.extra_mask = _informative_columns(extras)
    Z = model._linear_design(model.projections, extras)
    if Z.shape[0] < Z.shape[1]:
        raise SingularFitError(f"{Z.shape[0]} samples cannot identify {Z.shape[1]} coefficients")
    model.coef = _lstsq(Z, y)
    return model


def fit_flm(dataset: SpatialDataset, fve_cutoff: float = 0.99, spec: Optional[EstimatorSpec] = None) -> TrainedModel:
    """Least squares of Y on FPCA scores of every feature plus intercept."""
    spec = spec or EstimatorSpec("FLM", fve_cutoff=fve_cutoff)
    return _fit_linear(_base(dataset, spec))


def fit_flm_sp(dataset: SpatialDataset, fve_cutoff: float = 0.99, spec: Optional[EstimatorSpec] = None) -> TrainedModel:
    """FLM with the coordinates as extra scalar columns."""
    spec = spec or EstimatorSpec("FLM_SP", fve_cutoff=fve_cutoff)
    return _fit_linear(_base(dataset, spec), dataset.locations)


def fit_fnn(dataset: SpatialDataset, network: Optional[NetworkSpec] = None, config: Optional[TrainConfig] = None, spec=None) -> TrainedModel:
    spec = spec or EstimatorSpec("FNN", network=network, train=config or TrainConfig())
    model = _base(dataset, spec)
    model.network = fit_network(model.projections, model.responses, spec.network.with_extra_inputs(0), spec.train)
    return model


def fit_fnn_sp(dataset: SpatialDataset, network: Optional[NetworkSpec] = None, config: Optional[TrainConfig] = None, spec=None) -> TrainedModel:
    spec = spec or EstimatorSpec("FNN_SP", network=network, train=config or TrainConfig())
    model = _base(dataset, spec)
    net = spec.network.with_extra_inputs(dataset.dim)
    model.network = fit_network(model.projections, model.responses, net, spec.train, E=dataset.locations)
    return model


def fit_gwflm(dataset: SpatialDataset, kernel: K.KernelSpec, target: int, fve_cutoff: float = 0.99) -> np.ndarray:
    """Location-specific coefficients ``(intercept, score coefs)`` for training location ``target``."""
    model = _base(dataset, EstimatorSpec("GWFLM", family=kernel.family, bandwidth=kernel.bandwidth, fve_cutoff=fve_cutoff))
    Z = model._linear_design(model.projections)
    w = K.gw_weight_vector(dataset.locations, dataset.locations[target], kernel)
    return gwflm_coefficients(Z, model.responses, w, location=target)


def fit_gwflm_model(dataset: SpatialDataset, kernel: K.KernelSpec, fve_cutoff: float = 0.99, spec=None) -> TrainedModel:
    spec = spec or EstimatorSpec("GWFLM", family=kernel.family, bandwidth=kernel.bandwidth, fve_cutoff=fve_cutoff)
    model = _base(dataset, spec)
    Z = model._linear_design(model.projections)
    W = _gw_weight_matrix(model.locations, kernel)
    model.local_coef = np.array([gwflm_coefficients(Z, model.responses, w, location=u) for u, w in enumerate(W)])
    return model


def _gw_weight_matrix(locations, kernel: K.KernelSpec) -> np.ndarray:
    return np.asarray(K.kernel_weight(kernel, K.pairwise_distances(locations)), dtype=float)


def fit_gwfnn(
    dataset: SpatialDataset,
    kernel: K.KernelSpec,
    network: Optional[NetworkSpec] = None,
    config: Optional[TrainConfig] = None,
    spec=None,
    local_fits: bool = True,
) -> TrainedModel:
    """One network per training location on sqrt(W)-transformed data.

    With ``local_fits=False`` only the training data are stored, which is all
    out-of-sample prediction needs.
    """
    spec = spec or EstimatorSpec(
        "GWFNN", family=kernel.family, bandwidth=kernel.bandwidth, network=network, train=config or TrainConfig()
    )
    model = _base(dataset, spec)
    if local_fits:
        W = _gw_weight_matrix(model.locations, kernel)
        model.local_networks = _train_gw_networks(
            model.projections, model.responses, W, spec.network.with_extra_inputs(0), spec.train
        )
    return model


def fit_sarflm(dataset: SpatialDataset, kernel: K.KernelSpec, fve_cutoff: float = 0.99, spec=None) -> TrainedModel:
    """Least squares of Y on intercept, FPCA scores and the SAR covariate ``W~ Y``."""
    spec = spec or EstimatorSpec("SARFLM", family=kernel.family, bandwidth=kernel.bandwidth, fve_cutoff=fve_cutoff)
    model = _base(dataset, spec)
    model.sar = K.sar_weight_matrix(model.locations, kernel)
    sar = model.sar.normalized @ model.responses
    return _fit_linear(model, sar[:, None])


def fit_sarfnn(dataset: SpatialDataset, kernel: K.KernelSpec, network=None, config=None, spec=None) -> TrainedModel:
    """One network fed the temporal covariates and the scalar SAR covariate."""
    spec = spec or EstimatorSpec(
        "SARFNN", family=kernel.family, bandwidth=kernel.bandwidth, network=network, train=config or TrainConfig()
    )
    model = _base(dataset, spec)
    model.sar = K.sar_weight_matrix(model.locations, kernel)
    sar = model.sar.normalized @ model.responses
    model.network = fit_network(
        model.projections, model.responses, spec.network.with_extra_inputs(1), spec.train, E=sar[:, None]
    )
    return model


def fit(dataset: SpatialDataset, spec: EstimatorSpec, *, seed: int = 0, local_fits: bool = True) -> TrainedModel:
    """Fit any estimator; a missing bandwidth is selected by inner cross-validation."""
    bandwidth_scores = None
    if (is_gw(spec.kind) or is_sar(spec.kind)) and spec.bandwidth is None:
        from .cv import select_bandwidth

        grid = spec.bandwidth_grid or tuple(K.default_bandwidth_grid(spec.family, dataset.locations))
        k = min(spec.inner_folds, len(dataset))
        best, table = select_bandwidth(dataset, spec, grid, k=k, seed=seed)
        spec = spec.with_bandwidth(best)
        bandwidth_scores = [[h, s] for h, s in table]
    kind = spec.kind
    if kind == "FLM":
        model = fit_flm(dataset, spec=spec)
    elif kind == "FLM_SP":
        model = fit_flm_sp(dataset, spec=spec)
    elif kind == "FNN":
        model = fit_fnn(dataset, spec=spec)
    elif kind == "FNN_SP":
        model = fit_fnn_sp(dataset, spec=spec)
    elif kind == "GWFLM":
        model = fit_gwflm_model(dataset, spec.kernel, spec=spec)
    elif kind == "GWFNN":
        model = fit_gwfnn(dataset, spec.kernel, spec=spec, local_fits=local_fits)
    elif kind == "SARFLM":
        model = fit_sarflm(dataset, spec.kernel, spec=spec)
    else:
        model = fit_sarfnn(dataset, spec.kernel, spec=spec)
    model.bandwidth_scores = bandwidth_scores
    return model


# -- per-sample convenience wrappers matching the documented operations ----


def predict_gw_in_sample(model: TrainedModel, sample: FunctionalSample, u: int) -> float:
    return float(model.predict_in_sample([sample], [u])[0])


def predict_gw_out_of_sample(model: TrainedModel, sample: FunctionalSample, location) -> float:
    return float(model.predict_out_of_sample([sample], [location])[0])


def predict_sar_in_sample(model: TrainedModel, sample: FunctionalSample, l: int) -> float:  # noqa: E741
    return float(model.predict_in_sample([sample], [l])[0])


def predict_sar_out_of_sample(model: TrainedModel, sample: FunctionalSample, location) -> float:
    return float(model.predict_out_of_sample([sample], [location])[0])
