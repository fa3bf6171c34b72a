"""Exception hierarchy shared by the numerical packages and the pipeline."""

from __future__ import annotations

from typing import Sequence


class LerayRomError(Exception):
    """Base class for every error raised by lerayrom."""


class ConfigError(LerayRomError):
    """Run configuration failed parsing or validation."""

    def __init__(self, message: str, errors: dict | None = None):
        super().__init__(message)
        self.errors = errors or {}


class ContractViolation(LerayRomError, ValueError):
    """A caller passed arguments outside an operation's preconditions."""


# Mesh -------------------------------------------------------------------------


class MeshError(LerayRomError):
    """Base class for mesh generation, parsing and validation failures."""


class MeshGenerationError(MeshError):
    pass


class MeshFormatError(MeshError):
    """Malformed mesh file; ``line`` is 1-based."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class MeshValidationError(MeshError):
    pass


# Numerics ---------------------------------------------------------------------


class NumericalError(LerayRomError):
    """Base class for failures that map to exit code 3."""


class SolverError(NumericalError):
    """A linear solve did not converge."""

    def __init__(self, label: str, residuals: Sequence[float], message: str = ""):
        self.label = label
        self.residuals = list(residuals)
        last = self.residuals[-1] if self.residuals else float("nan")
        text = message or f"{label} solve did not converge (last residual {last:.3e})"
        super().__init__(text)


class SingularCouplingError(NumericalError):
    pass


class BlowUpError(NumericalError):
    """Non-finite values appeared in ``field`` at simulation time ``time``."""

    def __init__(self, field: str, time: float):
        super().__init__(f"non-finite values in field '{field}' at t={time:.6g}")
        self.field = field
        self.time = time


class PodError(NumericalError):
    pass


class EnrichmentError(NumericalError):
    pass


# Artifacts --------------------------------------------------------------------


class ArtifactError(LerayRomError):
    pass


class FingerprintError(ArtifactError):
    def __init__(self, expected: str, actual: str, what: str = "mesh"):
        super().__init__(
            f"{what} fingerprint mismatch: expected {expected[:12]}, got {actual[:12]}"
        )
        self.expected = expected
        self.actual = actual


class SnapshotFormatError(ArtifactError):
    pass


class MissingArtifactError(ArtifactError):
    def __init__(self, path, hint: str = "python manage.py offline"):
        super().__init__(f"missing artifact {path}; run `{hint}` first")
        self.path = path
        self.hint = hint


class StageError(LerayRomError):
    """A pipeline stage failed; ``cause`` is the original exception."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause

    @property
    def is_numerical(self) -> bool:
        return isinstance(self.cause, NumericalError)
