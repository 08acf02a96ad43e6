"""Functional data containers, trapezoidal quadrature and FPCA bases."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateDataError, ShapeError, ValidationError


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Strictly increasing observation times inside ``[lower, upper]``.

    Parameters
    ----------
    points : array_like
        Time stamps, at least two, strictly increasing.
    lower, upper : float, optional
        Bounds of the compact time interval. Default to the first and last
        point.
    """

    points: np.ndarray
    lower: Optional[float] = None
    upper: Optional[float] = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise ShapeError("a time grid needs at least 2 points")
        if not np.all(np.isfinite(pts)):
            raise ShapeError("time grid contains non-finite values")
        if np.any(np.diff(pts) <= 0):
            raise ShapeError("time grid must be strictly increasing")
        lo = float(pts[0]) if self.lower is None else float(self.lower)
        hi = float(pts[-1]) if self.upper is None else float(self.upper)
        if pts[0] < lo or pts[-1] > hi:
            raise ShapeError(f"time grid leaves the interval [{lo}, {hi}]")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def uniform(cls, lower: float, upper: float, n: int) -> "TimeGrid":
        return cls(np.linspace(lower, upper, n), lower, upper)

    def __len__(self):
        return self.points.size

    def __eq__(self, other):
        if not isinstance(other, TimeGrid):
            return NotImplemented
        return (
            self.lower == other.lower
            and self.upper == other.upper
            and np.array_equal(self.points, other.points)
        )

    __hash__ = None

    @cached_property
    def weights(self) -> np.ndarray:
        """Trapezoid quadrature weights, so that ``weights @ f`` integrates ``f``."""
        dt = np.diff(self.points)
        w = np.zeros_like(self.points)
        w[:-1] += dt / 2
        w[1:] += dt / 2
        w.setflags(write=False)
        return w


def trapezoid_integrate(values, grid: TimeGrid) -> float:
    """Trapezoidal approximation of the integral of ``values`` over ``grid``."""
    values = np.asarray(values, dtype=float)
    if values.shape[-1:] != (len(grid),):
        raise ShapeError(
            f"{values.shape[-1] if values.ndim else 0} values for a grid of {len(grid)} points"
        )
    return values @ grid.weights


def inner_product(f, g, grid: TimeGrid, grid_g: Optional[TimeGrid] = None) -> float:
    """L2 inner product of two curves observed on the same grid."""
    if grid_g is not None and grid_g != grid:
        raise ShapeError("curves live on different grids")
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    if f.shape != g.shape:
        raise ShapeError(f"curve shapes differ: {f.shape} vs {g.shape}")
    return trapezoid_integrate(f * g, grid)


@dataclass(frozen=True, eq=False)
class FunctionalSample:
    """Curves of one subject, one ``(grid, values)`` pair per feature."""

    grids: tuple
    values: tuple

    def __post_init__(self):
        grids = tuple(self.grids)
        values = []
        if len(grids) != len(self.values) or not grids:
            raise ShapeError("need one grid per feature and at least one feature")
        for g, v in zip(grids, self.values):
            v = np.array(v, dtype=float)
            if v.shape != (len(g),):
                raise ShapeError(f"curve of shape {v.shape} on a grid of {len(g)} points")
            if not np.all(np.isfinite(v)):
                raise ShapeError("curve values must be finite")
            v.setflags(write=False)
            values.append(v)
        object.__setattr__(self, "grids", grids)
        object.__setattr__(self, "values", tuple(values))

    @property
    def n_features(self) -> int:
        return len(self.grids)

    def __eq__(self, other):
        if not isinstance(other, FunctionalSample):
            return NotImplemented
        return self.grids == other.grids and all(
            np.array_equal(a, b) for a, b in zip(self.values, other.values)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class SpatialDataset:
    """Functional covariates, scalar responses and locations of N subjects.

    Curves of a given feature share one grid across subjects, which is what
    ingestion produces; the per-feature curve matrices are exposed through
    :meth:`curves`.
    """

    samples: tuple
    responses: np.ndarray
    locations: np.ndarray
    ids: Optional[tuple] = None

    def __post_init__(self):
        samples = tuple(self.samples)
        y = np.array(self.responses, dtype=float).reshape(-1)
        loc = np.array(self.locations, dtype=float)
        if loc.ndim == 1:
            loc = loc[:, None]
        n = len(samples)
        if n == 0 or y.size != n or loc.shape[0] != n:
            raise ShapeError(
                f"{n} samples, {y.size} responses and {loc.shape[0]} locations"
            )
        if not np.all(np.isfinite(loc)):
            raise ShapeError("locations must be finite")
        if not np.all(np.isfinite(y)):
            raise ShapeError("responses must be finite")
        r = samples[0].n_features
        for s in samples:
            if s.n_features != r:
                raise ShapeError("every sample must carry the same number of features")
        ids = tuple(range(n)) if self.ids is None else tuple(self.ids)
        if len(ids) != n:
            raise ShapeError("one id per sample required")
        y.setflags(write=False)
        loc.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "responses", y)
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "ids", ids)

    @classmethod
    def from_arrays(cls, grids: Sequence[TimeGrid], curves: Sequence[np.ndarray], responses, locations, ids=None):
        """Build from per-feature ``(N, M_r)`` curve matrices."""
        curves = [np.asarray(c, dtype=float) for c in curves]
        n = curves[0].shape[0]
        samples = [
            FunctionalSample(tuple(grids), tuple(c[i] for c in curves)) for i in range(n)
        ]
        return cls(tuple(samples), responses, locations, ids)

    def __len__(self):
        return len(self.samples)

    @property
    def n_features(self) -> int:
        return self.samples[0].n_features

    @property
    def dim(self) -> int:
        return self.locations.shape[1]

    def grid(self, feature: int) -> TimeGrid:
        g = self.samples[0].grids[feature]
        for s in self.samples[1:]:
            if s.grids[feature] is not g and s.grids[feature] != g:
                raise ShapeError(f"feature {feature} is not on a common grid")
        return g

    def curves(self, feature: int) -> np.ndarray:
        self.grid(feature)
        return np.stack([s.values[feature] for s in self.samples])

    def subset(self, index) -> "SpatialDataset":
        index = np.asarray(index, dtype=int)
        return SpatialDataset(
            tuple(self.samples[i] for i in index),
            self.responses[index],
            self.locations[index],
            tuple(self.ids[i] for i in index),
        )

    def with_responses(self, responses) -> "SpatialDataset":
        return SpatialDataset(self.samples, responses, self.locations, self.ids)

    def __eq__(self, other):
        if not isinstance(other, SpatialDataset):
            return NotImplemented
        return (
            self.ids == other.ids
            and np.array_equal(self.responses, other.responses)
            and np.array_equal(self.locations, other.locations)
            and all(a == b for a, b in zip(self.samples, other.samples))
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class BasisSystem:
    """K functions on a shared grid, rows of ``functions``."""

    grid: TimeGrid
    functions: np.ndarray
    eigenvalues: Optional[np.ndarray] = None
    orthonormal: bool = True

    def __post_init__(self):
        f = np.array(self.functions, dtype=float)
        if f.ndim == 1:
            f = f[None, :]
        if f.ndim != 2 or f.shape[1] != len(self.grid):
            raise ShapeError(f"basis of shape {f.shape} on a grid of {len(self.grid)} points")
        f.setflags(write=False)
        object.__setattr__(self, "functions", f)
        if self.eigenvalues is not None:
            ev = np.array(self.eigenvalues, dtype=float)
            ev.setflags(write=False)
            object.__setattr__(self, "eigenvalues", ev)

    @property
    def size(self) -> int:
        return self.functions.shape[0]

    def gram(self) -> np.ndarray:
        return (self.functions * self.grid.weights) @ self.functions.T


def fourier_basis(grid: TimeGrid, n_basis: int, period: Optional[float] = None) -> BasisSystem:
    """Orthonormal Fourier basis (constant, sin, cos, ...) over the grid's interval."""
    span = grid.upper - grid.lower
    period = span if period is None else period
    t = (grid.points - grid.lower) / period
    funcs = [np.full_like(t, 1.0)]
    k = 1
    while len(funcs) < n_basis:
        funcs.append(np.sqrt(2) * np.sin(2 * np.pi * k * t))
        funcs.append(np.sqrt(2) * np.cos(2 * np.pi * k * t))
        k += 1
    funcs = np.array(funcs[:n_basis]) / np.sqrt(span)
    return BasisSystem(grid, funcs, orthonormal=True)


@dataclass(frozen=True)
class FPCAResult:
    mean: np.ndarray
    basis: BasisSystem
    k_sel: int
    eigenvalues: np.ndarray = field(repr=False)

    @property
    def fve(self) -> np.ndarray:
        """Cumulative fraction of variance explained by the first K components."""
        return fraction_variance_explained(self.eigenvalues)


def fraction_variance_explained(eigenvalues) -> np.ndarray:
    ev = np.clip(np.asarray(eigenvalues, dtype=float), 0, None)
    return np.cumsum(ev) / ev.sum()


def _orient(psi: np.ndarray, weights: np.ndarray) -> np.ndarray:
    # deterministic sign: positive integral, else positive first significant value
    scale = np.max(np.abs(psi))
    s = psi @ weights
    if abs(s) > 1e-8 * scale * weights.sum():
        return psi if s > 0 else -psi
    j = np.flatnonzero(np.abs(psi) > 1e-8 * scale)[0]
    return psi if psi[j] > 0 else -psi


def fpca(dataset: SpatialDataset, feature_index: int = 0, fve_cutoff: float = 0.99) -> FPCAResult:
    """Functional PCA of one feature on its common grid.

    The covariance operator is discretised with trapezoid weights ``w`` and the
    symmetric matrix ``W^1/2 C W^1/2`` is diagonalised, so the eigenfunctions
    ``W^-1/2 u`` are orthonormal under the same quadrature.

    Parameters
    ----------
    dataset : SpatialDataset
    feature_index : int
    fve_cutoff : float
        Keep the smallest number of components whose cumulative explained
        variance reaches this fraction.

    Returns
    -------
    FPCAResult
        Mean curve, basis of ``k_sel`` eigenfunctions and all eigenvalues.
    """
    if not 0 < fve_cutoff <= 1:
        raise ValidationError("fve_cutoff must lie in (0, 1]")
    if len(dataset) < 2:
        raise DegenerateDataError("FPCA needs at least two curves")
    grid = dataset.grid(feature_index)
    x = dataset.curves(feature_index)
    return fpca_curves(x, grid, fve_cutoff)


def fpca_curves(x: np.ndarray, grid: TimeGrid, fve_cutoff: float = 0.99) -> FPCAResult:
    x = np.asarray(x, dtype=float)
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / (x.shape[0] - 1)
    w = grid.weights
    sw = np.sqrt(w)
    a = sw[:, None] * cov * sw[None, :]
    a = (a + a.T) / 2
    evals, evecs = np.linalg.eigh(a)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0, None)
    evecs = evecs[:, order]
    total = evals.sum()
    if not total > 1e-12 * max(1.0, np.abs(x).max() ** 2 * w.sum()):
        raise DegenerateDataError("all curves are identical; total variance is zero")
    fve = np.cumsum(evals) / total
    k_sel = int(np.searchsorted(fve, fve_cutoff - 1e-12) + 1)
    k_sel = min(k_sel, int(np.sum(evals > 0)))
    psi = evecs[:, :k_sel].T / sw
    psi = np.array([_orient(p, w) for p in psi])
    mean.setflags(write=False)
    return FPCAResult(mean, BasisSystem(grid, psi, evals[:k_sel]), k_sel, evals)


def project_scores(sample, basis: BasisSystem, mean=None, feature: int = 0) -> np.ndarray:
    """Inner products of the (optionally centred) curve with each basis function.

    ``sample`` is either a :class:`FunctionalSample` or a plain value vector
    (or an ``(n, M)`` stack of them) on ``basis.grid``.
    """
    if isinstance(sample, FunctionalSample):
        if sample.grids[feature] != basis.grid:
            raise ShapeError("sample and basis are on different grids")
        x = sample.values[feature]
    else:
        x = np.asarray(sample, dtype=float)
    if x.shape[-1] != len(basis.grid):
        raise ShapeError(f"curve has {x.shape[-1]} points, basis grid {len(basis.grid)}")
    if mean is not None:
        x = x - mean
    return (x * basis.grid.weights) @ basis.functions.T


def evaluate_param_function(beta, basis: BasisSystem) -> np.ndarray:
    """Parameter curve ``sum_k beta_k psi_k(t)`` on the basis grid."""
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (basis.size,):
        raise ShapeError(f"{beta.size} coefficients for {basis.size} basis functions")
    return beta @ basis.functions


def reconstruct(scores, basis: BasisSystem, mean) -> np.ndarray:
    return np.asarray(mean) + np.asarray(scores) @ basis.functions
