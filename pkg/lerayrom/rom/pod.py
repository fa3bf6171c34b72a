"""Proper orthogonal decomposition by the method of snapshots."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping

import numpy as np
import pandas as pd
from scipy import linalg

from lerayrom.exceptions import ContractViolation, MissingArtifactError, PodError

from .snapshots import SnapshotMatrix, dof_weights, load_snapshots, save_snapshots

logger = logging.getLogger(__name__)

__all__ = [
    "PodBasis",
    "compute_basis",
    "correlation_matrix",
    "cumulative_table",
    "load_basis",
    "projection_error",
    "save_basis",
]

RANK_CUTOFF = 1e-12


def correlation_matrix(snapshots: SnapshotMatrix, volumes: np.ndarray) -> np.ndarray:
    """``C_ij = (S_i, S_j)`` in the area-weighted L2 product."""

    if snapshots.n_snapshots == 0:
        raise PodError(f"no snapshots of '{snapshots.name}' to decompose")
    weights = dof_weights(volumes, snapshots.ncomp)
    if weights.size != snapshots.n_dofs:
        raise ContractViolation(f"'{snapshots.name}' does not match the {len(volumes)}-cell weights")
    s = snapshots.values
    c = s.T @ (weights[:, None] * s)
    return 0.5 * (c + c.T)


@dataclass(frozen=True)
class PodBasis:
    """Orthonormal modes as columns of ``modes`` plus the full spectrum."""

    field: str
    modes: np.ndarray
    eigenvalues: np.ndarray
    fingerprint: str
    ncomp: int = 1
    eigenvectors: np.ndarray | None = None

    @property
    def n_modes(self) -> int:
        return self.modes.shape[1]

    @property
    def n_dofs(self) -> int:
        return self.modes.shape[0]

    @property
    def energy(self) -> np.ndarray:
        """Cumulative energy fractions over the whole spectrum."""

        total = self.eigenvalues.sum()
        if total <= 0.0:
            return np.ones_like(self.eigenvalues)
        return np.cumsum(self.eigenvalues) / total

    def mode(self, i: int) -> np.ndarray:
        column = self.modes[:, i]
        return column.reshape(-1, 2) if self.ncomp == 2 else column.copy()

    def truncate(self, n: int) -> "PodBasis":
        if not 0 <= n <= self.n_modes:
            raise PodError(f"'{self.field}' basis has {self.n_modes} modes, {n} requested")
        return replace(self, modes=self.modes[:, :n].copy())

    def project(self, values: np.ndarray, volumes: np.ndarray) -> np.ndarray:
        """Coefficients ``(zeta_i, values)`` of a flattened field or a matrix of columns."""

        weights = dof_weights(volumes, self.ncomp)
        values = np.asarray(values, dtype=np.float64)
        coeffs = self.modes.T @ (weights[:, None] * values.reshape(self.n_dofs, -1))
        return coeffs[:, 0] if values.size == self.n_dofs else coeffs

    def reconstruct(self, coefficients: np.ndarray) -> np.ndarray:
        return self.modes @ np.asarray(coefficients, dtype=np.float64)

    def as_snapshots(self) -> SnapshotMatrix:
        return SnapshotMatrix(
            f"{self.field}_modes", self.modes, np.arange(1, self.n_modes + 1, dtype=np.float64), self.fingerprint, self.ncomp
        )


def _fix_sign(mode: np.ndarray, weights: np.ndarray) -> float:
    weighted = np.abs(weights * mode)
    scale = weighted.max()
    if scale == 0.0:
        return 1.0
    first = np.flatnonzero(weighted > 1e-8 * scale)[0]
    return 1.0 if mode[first] > 0.0 else -1.0


def _orthonormalize(modes: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Two passes of weighted Gram-Schmidt in mode order."""

    out = modes.copy()
    for _ in range(2):
        for i in range(out.shape[1]):
            previous = out[:, :i]
            out[:, i] -= previous @ (previous.T @ (weights * out[:, i]))
            out[:, i] /= np.sqrt(np.sum(weights * out[:, i] ** 2))
    return out


def compute_basis(
    c: np.ndarray,
    snapshots: SnapshotMatrix,
    volumes: np.ndarray,
    energy_target: float | None = None,
    mode_count: int | None = None,
) -> PodBasis:
    """Modes from the eigenpairs of ``c``, chosen by energy or by count."""

    if (energy_target is None) == (mode_count is None):
        raise ContractViolation("give exactly one of energy_target and mode_count")
    if energy_target is not None and not 0.0 < energy_target <= 1.0:
        raise ContractViolation(f"energy target {energy_target} outside (0, 1]")
    if mode_count is not None and mode_count < 0:
        raise ContractViolation("mode count must be non-negative")
    if c.shape != (snapshots.n_snapshots, snapshots.n_snapshots):
        raise ContractViolation("correlation matrix does not belong to these snapshots")

    eigenvalues, eigenvectors = linalg.eigh(c)
    eigenvalues = eigenvalues[::-1].copy()
    eigenvectors = eigenvectors[:, ::-1].copy()
    lam1 = max(eigenvalues[0], 0.0)
    if eigenvalues[-1] < -RANK_CUTOFF * max(lam1, 1.0):
        logger.warning("%s: correlation matrix has eigenvalue %.3e, clipped to zero", snapshots.name, eigenvalues[-1])
    eigenvalues = np.clip(eigenvalues, 0.0, None)
    rank = int(np.sum(eigenvalues > RANK_CUTOFF * lam1)) if lam1 > 0.0 else 0

    if mode_count is not None:
        if mode_count > rank:
            raise PodError(f"'{snapshots.name}': {mode_count} modes requested, numerical rank is {rank}")
        n = mode_count
    else:
        if rank == 0:
            raise PodError(f"'{snapshots.name}': all snapshots vanish")
        energy = np.cumsum(eigenvalues) / eigenvalues.sum()
        n = min(int(np.searchsorted(energy, energy_target - 1e-14)) + 1, rank)

    weights = dof_weights(volumes, snapshots.ncomp)
    modes = snapshots.values @ eigenvectors[:, :n] / np.sqrt(eigenvalues[:n])
    modes = _orthonormalize(modes, weights)
    for i in range(n):
        sign = _fix_sign(modes[:, i], weights)
        modes[:, i] *= sign
        eigenvectors[:, i] *= sign

    logger.info("POD %s: %d of %d modes, rank %d", snapshots.name, n, snapshots.n_snapshots, rank)
    return PodBasis(snapshots.name, modes, eigenvalues, snapshots.fingerprint, snapshots.ncomp, eigenvectors)


def projection_error(snapshots: SnapshotMatrix, basis: PodBasis, volumes: np.ndarray, k: int) -> float:
    """``(sum_j ||S_j - P_k S_j||^2)^(1/2)`` for the first ``k`` modes."""

    weights = dof_weights(volumes, snapshots.ncomp)
    modes = basis.modes[:, :k]
    residual = snapshots.values - modes @ (modes.T @ (weights[:, None] * snapshots.values))
    return float(np.sqrt(np.sum(weights[:, None] * residual**2)))


def cumulative_table(bases: Mapping[str, PodBasis], rows: int = 4) -> pd.DataFrame:
    """Cumulative eigenvalue fractions for ``k = 1..rows``, one column per field."""

    data = {}
    for name, basis in bases.items():
        energy = basis.energy
        column = np.full(rows, np.nan)
        column[: min(rows, energy.size)] = energy[:rows]
        data[name] = column
    return pd.DataFrame(data, index=pd.Index(range(1, rows + 1), name="k"))


def save_basis(basis: PodBasis, directory: str | os.PathLike) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    modes_path = save_snapshots(basis.as_snapshots(), directory / f"{basis.field}.lrsnap")
    spectrum_path = directory / f"{basis.field}_eigenvalues.csv"
    pd.DataFrame(
        {
            "k": np.arange(1, basis.eigenvalues.size + 1),
            "eigenvalue": basis.eigenvalues,
            "cumulative_energy": basis.energy,
        }
    ).to_csv(spectrum_path, index=False, float_format="%.17g")
    return [modes_path, spectrum_path]


def load_basis(directory: str | os.PathLike, field: str) -> PodBasis:
    directory = Path(directory)
    matrix = load_snapshots(directory / f"{field}.lrsnap")
    spectrum_path = directory / f"{field}_eigenvalues.csv"
    if not spectrum_path.exists():
        raise MissingArtifactError(spectrum_path)
    spectrum = pd.read_csv(spectrum_path)
    return PodBasis(field, matrix.values, spectrum["eigenvalue"].to_numpy(), matrix.fingerprint, matrix.ncomp)
