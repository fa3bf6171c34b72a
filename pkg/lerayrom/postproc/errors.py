"""Relative L2 errors of reduced solutions and of force coefficient histories."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid

from lerayrom.exceptions import ContractViolation

logger = logging.getLogger(__name__)

__all__ = ["ErrorSeries", "ErrorValue", "NORM_FLOOR", "coefficient_errors", "error_series", "relative_error"]

NORM_FLOOR = 1e-14


@dataclass(frozen=True)
class ErrorValue:
    value: float
    absolute: bool = False


def relative_error(fom: np.ndarray, rom: np.ndarray, weights: np.ndarray, floor: float = NORM_FLOOR) -> ErrorValue:
    """``||fom - rom|| / ||fom||`` in the weighted L2 norm.

    When ``||fom|| <= floor`` the absolute error is returned and flagged.
    """

    fom = np.asarray(fom, dtype=np.float64).ravel()
    rom = np.asarray(rom, dtype=np.float64).ravel()
    weights = np.asarray(weights, dtype=np.float64).ravel()
    if not fom.shape == rom.shape == weights.shape:
        raise ContractViolation(f"fields live on different meshes ({fom.shape}, {rom.shape}, {weights.shape})")
    difference = float(np.sqrt(np.sum(weights * (fom - rom) ** 2)))
    norm = float(np.sqrt(np.sum(weights * fom**2)))
    if norm <= floor:
        return ErrorValue(difference, True)
    return ErrorValue(difference / norm, False)


@dataclass(frozen=True)
class ErrorSeries:
    field: str
    times: np.ndarray
    values: np.ndarray
    absolute: np.ndarray

    def summary(self) -> dict[str, float]:
        """min/avg/max over the entries that are true relative errors."""

        relative = self.values[~self.absolute]
        if relative.size == 0:
            return {"min": float("nan"), "avg": float("nan"), "max": float("nan")}
        return {"min": float(relative.min()), "avg": float(relative.mean()), "max": float(relative.max())}

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"t": self.times, f"E_{self.field}": self.values, f"absolute_{self.field}": self.absolute})


def error_series(
    field: str,
    times: Sequence[float],
    fom: np.ndarray,
    rom: np.ndarray,
    weights: np.ndarray,
) -> ErrorSeries:
    """Errors per snapshot column of ``fom`` and ``rom`` (``n_dofs x n_times``)."""

    fom = np.asarray(fom)
    rom = np.asarray(rom)
    if fom.shape != rom.shape or fom.shape[1] != len(times):
        raise ContractViolation(f"{field}: snapshot matrices {fom.shape} and {rom.shape} do not match {len(times)} times")
    values = [relative_error(fom[:, k], rom[:, k], weights) for k in range(fom.shape[1])]
    flagged = np.array([v.absolute for v in values], dtype=bool)
    if flagged.any():
        logger.warning("%s: %d near-zero reference norm(s), absolute error reported", field, int(flagged.sum()))
    return ErrorSeries(field, np.asarray(times, dtype=np.float64), np.array([v.value for v in values]), flagged)


def coefficient_errors(
    fom: pd.DataFrame,
    rom: pd.DataFrame,
    columns: Sequence[str] = ("c_d", "c_l"),
    floor: float = NORM_FLOOR,
) -> dict[str, float]:
    """Relative L2-in-time errors by trapezoidal quadrature on the shared grid.

    A FOM history whose norm is at most ``floor`` gets the absolute error.
    """

    t_fom = fom["t"].to_numpy()
    t_rom = rom["t"].to_numpy()
    if t_fom.shape != t_rom.shape or not np.allclose(t_fom, t_rom, rtol=0.0, atol=1e-9):
        raise ContractViolation("coefficient series are on different time grids")
    out = {}
    for column in columns:
        f = fom[column].to_numpy()
        r = rom[column].to_numpy()
        difference = float(np.sqrt(trapezoid((f - r) ** 2, t_fom)))
        norm = float(np.sqrt(trapezoid(f**2, t_fom)))
        if norm <= floor:
            logger.warning("%s: near-zero reference history, absolute error reported", column)
            out[column] = difference
        else:
            out[column] = difference / norm
    return out
