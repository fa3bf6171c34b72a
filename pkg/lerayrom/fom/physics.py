"""Physical parameters, the inlet law and boundary roles of the channel flow."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from lerayrom.exceptions import ContractViolation
from lerayrom.fv import BoundaryCondition, BoundarySet
from lerayrom.mesh import Mesh

__all__ = ["FlowBoundaries", "InletLaw", "PhysicsConfig", "SolverSettings", "bdf_coefficients"]


@dataclass(frozen=True)
class PhysicsConfig:
    rho: float = 1.0
    mu: float = 1e-3
    alpha: float = 0.0032
    dt: float = 4e-4
    t0: float = 0.0
    t_end: float = 8.0

    def __post_init__(self) -> None:
        if not (self.rho > 0 and self.mu > 0 and self.dt > 0):
            raise ContractViolation("rho, mu and dt must be positive")
        if self.alpha < 0:
            raise ContractViolation("filter radius alpha must be non-negative")
        if not self.t_end >= self.t0:
            raise ContractViolation("t_end must not precede t0")

    @property
    def filter_viscosity(self) -> float:
        """Generalized-Stokes viscosity of the filter step, rho alpha^2 / dt."""

        return self.rho * self.alpha**2 / self.dt

    @property
    def n_steps(self) -> int:
        steps = (self.t_end - self.t0) / self.dt
        if abs(steps - round(steps)) > 1e-6 * max(1.0, steps):
            raise ContractViolation("dt must divide the time interval")
        return int(round(steps))

    def time(self, step: int) -> float:
        return self.t0 + step * self.dt


def bdf_coefficients(first_step: bool) -> tuple[float, float, float, float, float]:
    """``(a0, c1, c2, e1, e2)`` so that ``du/dt ~ (a0 u^{n+1} - c1 u^n - c2 u^{n-1}) / dt``
    and the convecting velocity is ``e1 u^n + e2 u^{n-1}``.

    The first step falls back to backward Euler with ``u^{-1} := u^0``.
    """

    if first_step:
        return 1.0, 1.0, 0.0, 1.0, 0.0
    return 1.5, 2.0, -0.5, 2.0, -1.0


@dataclass(frozen=True)
class SolverSettings:
    piso_correctors: int = 2
    non_orthogonal_correctors: int = 1
    simplec_max_iterations: int = 50
    simplec_tolerance: float = 1e-7
    pressure_tolerance: float = 1e-8
    momentum_tolerance: float = 1e-7

    def __post_init__(self) -> None:
        if self.piso_correctors < 1 or self.simplec_max_iterations < 1 or self.non_orthogonal_correctors < 0:
            raise ContractViolation("corrector and iteration counts must be positive")
        for name in ("simplec_tolerance", "pressure_tolerance", "momentum_tolerance"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ContractViolation(f"{name} must lie in (0, 1)")


@dataclass(frozen=True)
class InletLaw:
    """Parabolic inlet profile with mean speed ``amplitude * sin(pi t / period)``.

    ``period=None`` gives a steady inlet.
    """

    height: float = 0.41
    amplitude: float = 1.0
    period: float | None = 8.0
    bottom: float = 0.0

    def coefficient(self, t: float) -> float:
        if self.period is None:
            return 1.0
        return math.sin(math.pi * t / self.period)

    def profile(self, centres: np.ndarray) -> np.ndarray:
        y = centres[:, 1] - self.bottom
        ux = self.amplitude * 6.0 * y * (self.height - y) / self.height**2
        return np.column_stack([ux, np.zeros_like(ux)])

    def value(self, centres: np.ndarray, t: float) -> np.ndarray:
        return self.coefficient(t) * self.profile(centres)

    @property
    def peak_speed(self) -> float:
        return 1.5 * self.amplitude

    def reynolds(self, t: float, diameter: float, rho: float, mu: float) -> float:
        return rho * abs(self.amplitude * self.coefficient(t)) * diameter / mu


@dataclass(frozen=True)
class FlowBoundaries:
    """Maps mesh patches to inlet, outlet and no-slip wall roles."""

    inlet: tuple[str, ...] = ("inlet",)
    outlet: tuple[str, ...] = ("outlet",)
    walls: tuple[str, ...] = ("walls", "cylinder")
    inlet_law: InletLaw = field(default_factory=InletLaw)

    @property
    def dirichlet(self) -> tuple[str, ...]:
        return self.inlet + self.walls

    def check(self, mesh: Mesh) -> None:
        named = self.inlet + self.outlet + self.walls
        missing = set(mesh.patch_names) - set(named)
        unknown = set(named) - set(mesh.patch_names)
        if missing or unknown or len(set(named)) != len(named):
            raise ContractViolation(
                f"boundary roles do not match mesh patches (unassigned {sorted(missing)}, unknown {sorted(unknown)})"
            )
        if not self.outlet:
            raise ContractViolation("at least one outlet patch fixes the pressure level")

    def _velocity(self, inlet: BoundaryCondition) -> BoundarySet:
        conditions = {name: inlet for name in self.inlet}
        conditions.update({name: BoundaryCondition.fixed_value(0.0) for name in self.walls})
        conditions.update({name: BoundaryCondition.zero_gradient() for name in self.outlet})
        return BoundarySet(conditions)

    def velocity(self) -> BoundarySet:
        """Time-dependent inlet data of the full-order velocities."""

        return self._velocity(BoundaryCondition.fixed_value(self.inlet_law.value))

    def lifting_velocity(self) -> BoundarySet:
        """Inlet profile with unit temporal coefficient."""

        return self._velocity(BoundaryCondition.fixed_value(lambda centres, t: self.inlet_law.profile(centres)))

    def homogeneous_velocity(self) -> BoundarySet:
        return self._velocity(BoundaryCondition.fixed_value(0.0))

    def pressure(self) -> BoundarySet:
        conditions = {name: BoundaryCondition.zero_gradient() for name in self.dirichlet}
        conditions.update({name: BoundaryCondition.fixed_value(0.0) for name in self.outlet})
        return BoundarySet(conditions)

    def no_slip_everywhere(self) -> BoundarySet:
        return BoundarySet({name: BoundaryCondition.fixed_value(0.0) for name in self.dirichlet + self.outlet})
