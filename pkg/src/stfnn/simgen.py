"""Seeded generators for the two grid simulations.

Subjects sit on a P x Q grid of unit cells, one per cell, at coordinates
``(p, q)``. Covariates are random-phase combinations of four Fourier
functions on ``[0, 10]``.

* heterogeneity: ``Y_i = alpha(p_i, q_i) + int cos(t - X_i(t) - 5) dt + eps_i``
* dependency: ``Y = (I - rho M)^-1 (int cos(t - X(t) - 5) dt + eps)`` with the
  rook adjacency ``M``.

Randomness comes from PCG64 streams spawned from ``SeedSequence(seed)``:
stream 0 draws the phases, stream 1 the noise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import NumericalError, ValidationError
from .fda import SpatialDataset, TimeGrid, trapezoid_integrate
from .kernels import rook_matrix


@dataclass(frozen=True)
class SimConfig:
    P: int = 10
    Q: int = 30
    lower: float = 0.0
    upper: float = 10.0
    n_grid: int = 201
    sigma: float = 0.5
    rho: float = 0.25
    scenario: Literal["heterogeneity", "dependency"] = "heterogeneity"
    seed: int = 0

    def __post_init__(self):
        if self.P < 1 or self.Q < 1:
            raise ValidationError("P and Q must be positive")
        if self.sigma < 0:
            raise ValidationError("sigma must be nonnegative")
        if self.n_grid < 2 or not self.upper > self.lower:
            raise ValidationError("need at least 2 grid points on a nonempty interval")
        if self.scenario not in ("heterogeneity", "dependency"):
            raise ValidationError(f"unknown scenario {self.scenario!r}")

    @property
    def n(self) -> int:
        return self.P * self.Q

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid.uniform(self.lower, self.upper, self.n_grid)

    def streams(self):
        phase, noise = np.random.SeedSequence(self.seed).spawn(2)
        return np.random.Generator(np.random.PCG64(phase)), np.random.Generator(np.random.PCG64(noise))


def cell_indices(i: int, P: int, Q: int) -> tuple:
    """1-based row-major cell ``(p, q)`` of 1-based subject ``i``."""
    if not 1 <= i <= P * Q:
        raise ValidationError(f"subject {i} outside 1..{P * Q}")
    return (i - 1) // Q + 1, (i - 1) % Q + 1


def cell_locations(P: int, Q: int) -> np.ndarray:
    return np.array([cell_indices(i, P, Q) for i in range(1, P * Q + 1)], dtype=float)


def alpha(p, q):
    """Spatially varying intercept ``1 + (p + q) / 6``."""
    return 1 + (np.asarray(p, dtype=float) + np.asarray(q, dtype=float)) / 6


def fourier_functions(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    r2 = np.sqrt(2.0)
    return np.array(
        [
            r2 * np.sin(2 * np.pi * t),
            r2 * np.cos(2 * np.pi * t),
            r2 * np.sin(4 * np.pi * t),
            r2 * np.cos(4 * np.pi * t),
        ]
    )


def covariate_coefficients(config: SimConfig) -> np.ndarray:
    """``(N, 4)`` coefficients ``cos U, sin U, cos U', sin U'``."""
    rng, _ = config.streams()
    u = rng.uniform(0, 2 * np.pi, config.n)
    u2 = rng.uniform(0, 2 * np.pi, config.n)
    return np.column_stack([np.cos(u), np.sin(u), np.cos(u2), np.sin(u2)])


def generate_covariates(config: SimConfig) -> np.ndarray:
    """``(N, n_grid)`` covariate curves on ``config.grid``."""
    return covariate_coefficients(config) @ fourier_functions(config.grid.points)


def _temporal_part(curves: np.ndarray, grid: TimeGrid) -> np.ndarray:
    t = grid.points
    return trapezoid_integrate(np.cos(t[None, :] - curves - 5), grid)


def _noise(config: SimConfig) -> np.ndarray:
    _, rng = config.streams()
    return rng.normal(0.0, 1.0, config.n) * config.sigma


def generate_response_heterogeneity(curves, config: SimConfig) -> np.ndarray:
    curves = np.asarray(curves, dtype=float)
    loc = cell_locations(config.P, config.Q)
    return alpha(loc[:, 0], loc[:, 1]) + _temporal_part(curves, config.grid) + _noise(config)


def solve_dependency(y_tilde, P: int, Q: int, rho: float) -> np.ndarray:
    """Solve ``(I - rho M) Y = y_tilde`` for the rook matrix ``M``."""
    M = rook_matrix(P, Q)
    n = M.shape[0]
    if rho != 0:
        radius = np.max(np.abs(np.linalg.eigvalsh(M)))
        if abs(rho) * radius >= 1:
            raise NumericalError(f"rho={rho} makes I - rho M singular or explosive (radius {radius:.4f})")
    A = np.eye(n) - rho * M
    try:
        return np.linalg.solve(A, np.asarray(y_tilde, dtype=float))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"singular spatial system: {exc}") from None


def generate_response_dependency(curves, config: SimConfig) -> np.ndarray:
    curves = np.asarray(curves, dtype=float)
    y_tilde = _temporal_part(curves, config.grid) + _noise(config)
    return solve_dependency(y_tilde, config.P, config.Q, config.rho)


def simulate(config: SimConfig) -> SpatialDataset:
    curves = generate_covariates(config)
    if config.scenario == "heterogeneity":
        y = generate_response_heterogeneity(curves, config)
    else:
        y = generate_response_dependency(curves, config)
    return SpatialDataset.from_arrays(
        [config.grid], [curves], y, cell_locations(config.P, config.Q), ids=tuple(range(1, config.n + 1))
    )


def export_dataset(dataset: SpatialDataset, out_dir, feature_names=None):
    """Write the CSV trio plus a manifest; returns the manifest path."""
    from .io import write_dataset

    return write_dataset(dataset, out_dir, feature_names)
