"""Comparison tables written by the ``offline`` and ``compare`` commands."""

from __future__ import annotations

import os
from pathlib import Path
from typing import Mapping

import numpy as np
import pandas as pd

from .errors import ErrorSeries, coefficient_errors

__all__ = ["coefficient_comparison", "coefficient_table", "error_table", "timing_table", "write_csv"]

PROJECTIONS = {"xy": ("c_d", "c_l"), "tn": ("c_d_tn", "c_l_tn")}


def write_csv(frame: pd.DataFrame, path: str | os.PathLike, index: bool = False) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=index, float_format="%.12e", lineterminator="\n")
    return path


def error_table(series: Mapping[str, Mapping[str, ErrorSeries]]) -> pd.DataFrame:
    """One row per mode and field with min/avg/max of the relative errors."""

    rows = []
    for mode, by_field in series.items():
        for name, errors in by_field.items():
            rows.append({"mode": mode, "field": name, **errors.summary()})
    return pd.DataFrame(rows, columns=["mode", "field", "min", "avg", "max"])


def coefficient_table(fom: pd.DataFrame, rom: Mapping[str, pd.DataFrame]) -> pd.DataFrame:
    rows = []
    for mode, forces in rom.items():
        for projection, (drag, lift) in PROJECTIONS.items():
            errors = coefficient_errors(fom, forces, (drag, lift))
            rows.append({"mode": mode, "projection": projection, "E_cd": errors[drag], "E_cl": errors[lift]})
    return pd.DataFrame(rows, columns=["mode", "projection", "E_cd", "E_cl"])


def coefficient_comparison(fom: pd.DataFrame, rom: pd.DataFrame) -> pd.DataFrame:
    """FOM and ROM force coefficients side by side on the step grid."""

    columns = [name for pair in PROJECTIONS.values() for name in pair]
    merged = fom[["t", *columns]].rename(columns={c: f"{c}_fom" for c in columns})
    for c in columns:
        merged[f"{c}_rom"] = rom[c].to_numpy()
    return merged


def timing_table(fom_seconds: float, online_seconds: Mapping[str, float]) -> pd.DataFrame:
    rows = [
        {
            "mode": mode,
            "fom_seconds": fom_seconds,
            "online_seconds": seconds,
            "speedup": fom_seconds / seconds if seconds > 0 else np.inf,
        }
        for mode, seconds in online_seconds.items()
    ]
    return pd.DataFrame(rows, columns=["mode", "fom_seconds", "online_seconds", "speedup"])
