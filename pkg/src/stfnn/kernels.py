"""Spatial distances, kernel weights and spatial autoregressive weight matrices."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import ShapeError, ValidationError

FAMILIES = ("Gaussian", "Exponential", "DoublePower", "Nearest")
_ALIASES = {"expo": "Exponential", "exp": "Exponential", "bisquare": "DoublePower"}


def canonical_family(name: str) -> str:
    low = name.lower()
    for fam in FAMILIES:
        if fam.lower() == low:
            return fam
    if low in _ALIASES:
        return _ALIASES[low]
    raise ValidationError(f"unknown kernel family {name!r}; choose from {FAMILIES}")


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family, bandwidth and flavour.

    ``flavor="GW"`` kernels equal 1 at distance 0 and weight samples around
    a regression point. ``flavor="SAR"`` kernels are forced to 0 at distance 0
    so a location never borrows its own response. ``Nearest`` takes an integer
    neighbour count as bandwidth and is SAR-only.
    """

    family: str
    bandwidth: float
    flavor: Literal["GW", "SAR"] = "GW"

    def __post_init__(self):
        fam = canonical_family(self.family)
        object.__setattr__(self, "family", fam)
        if self.flavor not in ("GW", "SAR"):
            raise ValidationError(f"flavor must be 'GW' or 'SAR', got {self.flavor!r}")
        if fam == "Nearest":
            if self.flavor != "SAR":
                raise ValidationError("the Nearest kernel is only defined for SAR models")
            if int(self.bandwidth) != self.bandwidth or self.bandwidth < 1:
                raise ValidationError("Nearest bandwidth must be a positive integer")
            object.__setattr__(self, "bandwidth", int(self.bandwidth))
        elif not (np.isfinite(self.bandwidth) and self.bandwidth > 0):
            raise ValidationError("bandwidth must be positive and finite")
        else:
            object.__setattr__(self, "bandwidth", float(self.bandwidth))

    def with_bandwidth(self, h) -> "KernelSpec":
        return KernelSpec(self.family, h, self.flavor)


def euclidean_distance(a, b) -> float:
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if a.shape != b.shape:
        raise ShapeError(f"location dimensions differ: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.sum((a - b) ** 2)))


def pairwise_distances(a, b=None) -> np.ndarray:
    """Euclidean distance matrix between the rows of ``a`` and ``b``."""
    a = np.asarray(a, dtype=float)
    a = a[:, None] if a.ndim == 1 else a
    b = a if b is None else np.asarray(b, dtype=float)
    b = b[:, None] if b.ndim == 1 else b
    if a.shape[1] != b.shape[1]:
        raise ShapeError(f"location dimensions differ: {a.shape[1]} vs {b.shape[1]}")
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt(np.sum(diff**2, axis=-1))


def kernel_weight(spec: KernelSpec, w):
    """Kernel value(s) for distance(s) ``w``; vectorised over arrays.

    Nearest needs the whole distance vector and is handled by
    :func:`nearest_weights`.
    """
    w_arr = np.asarray(w, dtype=float)
    if np.any(w_arr < 0) or np.any(np.isnan(w_arr)):
        raise ValidationError("distances must be nonnegative")
    h = spec.bandwidth
    if spec.family == "Gaussian":
        k = np.exp(-0.5 * (w_arr / h) ** 2)
    elif spec.family == "Exponential":
        k = np.exp(-0.5 * w_arr / h)
    elif spec.family == "DoublePower":
        k = np.where(w_arr < h, (1 - (w_arr / h) ** 2) ** 2, 0.0)
    else:
        raise ValidationError("Nearest kernel weights need the full distance vector")
    if spec.flavor == "SAR":
        k = np.where(w_arr == 0, 0.0, k)
    return float(k) if np.ndim(w) == 0 else k


def _nearest_positive(d: np.ndarray, h: int) -> np.ndarray:
    out = np.zeros_like(d)
    cand = np.flatnonzero(d > 0)
    out[cand[np.lexsort((cand, d[cand]))][:h]] = 1.0
    return out


def nearest_weights(distances, h: int) -> np.ndarray:
    """1 for the ``h`` smallest positive distances, 0 elsewhere.

    Zero distances (the point itself) never count. Ties at the cut are broken
    by ascending index, so at most ``h`` entries are set.
    """
    d = np.asarray(distances, dtype=float)
    if not 1 <= h <= d.size - 1:
        raise ValidationError(f"Nearest bandwidth {h} outside [1, {d.size - 1}]")
    return _nearest_positive(d, h)


def kernel_vector(spec: KernelSpec, distances) -> np.ndarray:
    """Kernel weights of a vector of distances to one reference point."""
    d = np.asarray(distances, dtype=float)
    if spec.family == "Nearest":
        return _nearest_positive(d, spec.bandwidth)
    return np.asarray(kernel_weight(spec, d), dtype=float)


def gw_weight_vector(locations, target_location, spec: KernelSpec) -> np.ndarray:
    """Geographic weights of every sample with respect to one target location."""
    if spec.flavor != "GW":
        raise ValidationError("gw_weight_vector needs a GW-flavoured kernel")
    loc = np.asarray(locations, dtype=float)
    loc = loc[:, None] if loc.ndim == 1 else loc
    target = np.atleast_1d(np.asarray(target_location, dtype=float))
    d = pairwise_distances(loc, target[None, :])[:, 0]
    return kernel_vector(spec, d)


def row_normalize(mat) -> np.ndarray:
    """Scale rows to sum to one; all-zero rows stay zero."""
    mat = np.asarray(mat, dtype=float)
    s = mat.sum(axis=1, keepdims=True)
    return np.divide(mat, s, out=np.zeros_like(mat), where=s > 0)


@dataclass(frozen=True, eq=False)
class SarWeights:
    raw: np.ndarray
    normalized: np.ndarray


def _sar_raw(spec: KernelSpec, dist: np.ndarray) -> np.ndarray:
    if spec.family == "Nearest":
        if spec.bandwidth > dist.shape[0] - 1:
            raise ValidationError(
                f"Nearest bandwidth {spec.bandwidth} outside [1, {dist.shape[0] - 1}]"
            )
        out = np.array([_nearest_positive(row, spec.bandwidth) for row in dist])
    else:
        out = kernel_weight(spec, dist)
    np.fill_diagonal(out, 0.0)
    return out


def sar_weight_matrix(locations, spec: KernelSpec) -> SarWeights:
    """Raw kernel matrix with zero diagonal and its row-normalised version."""
    if spec.flavor != "SAR":
        raise ValidationError("sar_weight_matrix needs a SAR-flavoured kernel")
    loc = np.asarray(locations, dtype=float)
    loc = loc[:, None] if loc.ndim == 1 else loc
    if loc.shape[0] < 2:
        raise ValidationError("a SAR weight matrix needs at least two locations")
    raw = _sar_raw(spec, pairwise_distances(loc))
    return SarWeights(raw, row_normalize(raw))


def augment_sar_matrix(trained: SarWeights, new_location, locations, spec: KernelSpec):
    """Border the training kernel matrix with a new location.

    Returns
    -------
    normalized : ndarray, shape (N+1, N+1)
        Row-normalised bordered matrix, new location last.
    w_os : ndarray, shape (N,)
        Normalised last row restricted to the training columns.
    """
    loc = np.asarray(locations, dtype=float)
    loc = loc[:, None] if loc.ndim == 1 else loc
    new = np.atleast_1d(np.asarray(new_location, dtype=float))
    if new.shape[0] != loc.shape[1]:
        raise ShapeError("new location has the wrong dimension")
    n = loc.shape[0]
    if trained.raw.shape != (n, n):
        raise ShapeError("trained weight matrix does not match the training locations")
    d = pairwise_distances(loc, new[None, :])[:, 0]
    col = kernel_vector(spec, d)
    big = np.zeros((n + 1, n + 1))
    big[:n, :n] = trained.raw
    big[:n, n] = col
    big[n, :n] = col
    norm = row_normalize(big)
    return norm, norm[n, :n].copy()


def rook_matrix(P: int, Q: int) -> np.ndarray:
    """Edge adjacency of a row-major P x Q cell grid."""
    if P < 1 or Q < 1:
        raise ValidationError("grid dimensions must be positive")
    n = P * Q
    m = np.zeros((n, n))
    idx = np.arange(n).reshape(P, Q)
    right = (idx[:, :-1].ravel(), idx[:, 1:].ravel())
    down = (idx[:-1, :].ravel(), idx[1:, :].ravel())
    for a, b in (right, down):
        m[a, b] = 1.0
        m[b, a] = 1.0
    return m


def median_max_distance(locations) -> tuple:
    d = pairwise_distances(locations)
    off = d[np.triu_indices(d.shape[0], 1)]
    return float(np.median(off)), float(off.max())


def default_bandwidth_grid(family: str, locations) -> list:
    """Candidate bandwidths used when none are given."""
    fam = canonical_family(family)
    n = np.asarray(locations).shape[0]
    if fam == "Nearest":
        cands = {1, 2, 4, 8, n // 4, n // 2}
        return sorted({min(max(c, 1), n - 1) for c in cands}) if n > 1 else []
    med, mx = median_max_distance(locations)
    lo, hi = 0.1 * med, 2 * mx
    if lo <= 0:
        lo = hi / 100 if hi > 0 else 1.0
        hi = max(hi, 1.0)
    return [float(h) for h in np.geomspace(lo, hi, 8)]
