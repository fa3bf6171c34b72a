"""Full-order runs from rest with scheduled snapshot collection."""

from __future__ import annotations

import logging
import time as wallclock
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import pandas as pd

from lerayrom.exceptions import ContractViolation, NumericalError
from lerayrom.fv import Field
from lerayrom.mesh import Mesh
from lerayrom.postproc.aero import AeroReference, aero_coefficients

from .physics import FlowBoundaries, PhysicsConfig, SolverSettings
from .stepper import EvolveFilterSolver, FomState

logger = logging.getLogger(__name__)

__all__ = ["HISTORY_COLUMNS", "FomRun", "run_fom", "snapshot_steps"]

HISTORY_COLUMNS = ["t", "c_d", "c_l", "c_d_tn", "c_l_tn", "max_u", "continuity"]
SNAPSHOT_FIELDS = ("v", "u", "q", "q_bar")


@dataclass
class FomRun:
    times: np.ndarray
    snapshots: dict[str, np.ndarray]
    history: pd.DataFrame
    wall_time: float
    final_state: FomState

    @property
    def n_snapshots(self) -> int:
        return len(self.times)


def snapshot_steps(physics: PhysicsConfig, times: Sequence[float]) -> list[int]:
    """Step indices of the snapshot times; each must be a whole number of steps in (t0, T]."""

    steps = []
    n_steps = physics.n_steps
    for t in times:
        exact = (t - physics.t0) / physics.dt
        step = int(round(exact))
        if abs(exact - step) > 1e-6 * max(1.0, exact):
            raise ContractViolation(f"snapshot time {t} is not a multiple of dt={physics.dt}")
        if not 0 < step <= n_steps:
            raise ContractViolation(f"snapshot time {t} lies outside ({physics.t0}, {physics.t_end}]")
        steps.append(step)
    if sorted(set(steps)) != steps:
        raise ContractViolation("snapshot times must be strictly increasing")
    return steps


def run_fom(
    physics: PhysicsConfig,
    mesh: Mesh,
    boundaries: FlowBoundaries,
    schedule: Sequence[float],
    settings: SolverSettings | None = None,
    reference: AeroReference | None = None,
    on_step: Callable[[FomState], None] | None = None,
) -> FomRun:
    """Evolve-Filter run from rest to ``t_end``.

    Snapshots of ``v, u, q, q_bar`` are taken at the scheduled times; drag and
    lift are evaluated every step when the mesh has the reference patch.
    """

    wanted = snapshot_steps(physics, schedule)
    solver = EvolveFilterSolver(mesh, physics, boundaries, settings)
    reference = reference or AeroReference()
    with_forces = mesh.has_patch(reference.patch)
    state = FomState.at_rest(mesh, physics.t0)

    snapshots = {name: [] for name in SNAPSHOT_FIELDS}
    rows: list[list[float]] = []
    started = wallclock.perf_counter()
    n_steps = physics.n_steps
    logger.info("FOM run: %d steps of dt=%g on %d cells, %d snapshots", n_steps, physics.dt, mesh.n_cells, len(wanted))
    position = 0
    for _ in range(n_steps):
        try:
            state = solver.step(state)
        except NumericalError:
            logger.error("FOM step %d failed at t=%.6g", state.step + 1, physics.time(state.step + 1))
            raise
        if with_forces:
            coeffs = aero_coefficients(
                Field(mesh, state.u, solver.velocity_bcs, "u", state.t),
                Field(mesh, state.q, solver.pressure_bcs, "q", state.t),
                physics.rho,
                physics.mu,
                reference,
            )
            forces = [coeffs.c_d, coeffs.c_l, coeffs.c_d_tn, coeffs.c_l_tn]
        else:
            forces = [np.nan] * 4
        speed = np.hypot(state.u[:, 0], state.u[:, 1])
        rows.append([state.t, *forces, float(speed.max()), state.continuity])

        if position < len(wanted) and state.step == wanted[position]:
            for name in SNAPSHOT_FIELDS:
                snapshots[name].append(getattr(state, name).copy())
            position += 1
        if on_step is not None:
            on_step(state)
        if state.step % 500 == 0:
            logger.info("t=%.4f max|u|=%.4f continuity=%.2e", state.t, speed.max(), state.continuity)

    wall_time = wallclock.perf_counter() - started
    stacked = {
        name: np.array(values) if values else np.zeros((0, mesh.n_cells) + ((2,) if name in ("v", "u") else ()))
        for name, values in snapshots.items()
    }
    return FomRun(
        times=np.array([physics.time(step) for step in wanted], dtype=np.float64),
        snapshots=stacked,
        history=pd.DataFrame(rows, columns=HISTORY_COLUMNS),
        wall_time=wall_time,
        final_state=state,
    )
