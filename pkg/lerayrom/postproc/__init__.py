from .aero import AeroCoefficients, AeroReference, aero_coefficients
from .errors import NORM_FLOOR, ErrorSeries, ErrorValue, coefficient_errors, error_series, relative_error
from .tables import coefficient_comparison, coefficient_table, error_table, timing_table, write_csv

__all__ = [
    "AeroCoefficients",
    "AeroReference",
    "ErrorSeries",
    "ErrorValue",
    "NORM_FLOOR",
    "aero_coefficients",
    "coefficient_comparison",
    "coefficient_errors",
    "coefficient_table",
    "error_series",
    "error_table",
    "relative_error",
    "timing_table",
    "write_csv",
]
