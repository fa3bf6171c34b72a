"""Online time stepping of the reduced Evolve-Filter model.

Each step solves two small dense systems: the evolve momentum coupled with
either the reduced continuity equation (``nos``, ``sup1``, ``sup2``) or the
reduced pressure Poisson equation (``ppe``), then the filter system coupled the
same way.  The convecting coefficients are extrapolated, so no nonlinear
iteration is needed.
"""

from __future__ import annotations

import logging
import time as wallclock
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
import pandas as pd
from scipy import linalg

from lerayrom.exceptions import ContractViolation
from lerayrom.fom.physics import bdf_coefficients
from lerayrom.fom.runner import snapshot_steps

from .assembly import ReducedOperators, RomSpaces, convection_matrix
from .snapshots import LiftingFunction, SnapshotMatrix, dof_weights
from .supremizer import StabilizationMode

logger = logging.getLogger(__name__)

__all__ = ["ReducedModel", "RomRun", "RomState", "init_state", "reconstruct", "run_rom"]

ILL_CONDITIONED = 1e12


@dataclass(frozen=True)
class RomState:
    t: float
    step: int
    beta: np.ndarray
    gamma: np.ndarray
    beta_bar: np.ndarray
    gamma_bar: np.ndarray
    beta_bar_prev: np.ndarray

    @classmethod
    def at_rest(cls, ops: ReducedOperators, t0: float = 0.0) -> "RomState":
        return cls(
            t0, 0, np.zeros(ops.n_v), np.zeros(ops.n_q), np.zeros(ops.n_u), np.zeros(ops.n_q_bar), np.zeros(ops.n_u)
        )


def _project(modes: np.ndarray, ncomp: int, values: np.ndarray | None, volumes: np.ndarray) -> np.ndarray:
    if values is None or modes.shape[1] == 0:
        return np.zeros(modes.shape[1])
    weights = dof_weights(volumes, ncomp)
    gram = modes.T @ (weights[:, None] * modes)
    return linalg.solve(gram, modes.T @ (weights * np.asarray(values, dtype=np.float64).ravel()), assume_a="pos")


def init_state(
    spaces: RomSpaces,
    volumes: np.ndarray,
    lifting: LiftingFunction,
    t0: float = 0.0,
    v0: np.ndarray | None = None,
    u0: np.ndarray | None = None,
    q0: np.ndarray | None = None,
    q_bar0: np.ndarray | None = None,
) -> RomState:
    """L2 projections of the initial fields; missing fields start at rest.

    Velocities are homogenized with the lifting at ``t0`` first.
    """

    chi = lifting.values
    v_hom = None if v0 is None else np.asarray(v0) - lifting.v_bc(t0) * chi
    u_hom = None if u0 is None else np.asarray(u0) - lifting.u_bc(t0) * chi
    beta_bar = _project(spaces.filter.modes, 2, u_hom, volumes)
    return RomState(
        t0,
        0,
        _project(spaces.evolve.modes, 2, v_hom, volumes),
        _project(spaces.pressure.modes, 1, q0, volumes),
        beta_bar,
        _project(spaces.filter_pressure.modes, 1, q_bar0, volumes),
        beta_bar.copy(),
    )


@dataclass
class RomRun:
    mode: StabilizationMode
    times: np.ndarray
    coefficients: dict[str, np.ndarray]
    trajectory: pd.DataFrame
    forces: pd.DataFrame
    wall_time: float
    final_state: RomState
    diverged_at: float | None = None


class ReducedModel:
    """Dense reduced systems of one stabilization mode."""

    def __init__(self, ops: ReducedOperators):
        self.ops = ops
        self.mode = ops.mode
        self.physics = ops.physics
        self.law = ops.inlet_law
        physics = self.physics
        self.mu_bar = physics.filter_viscosity
        self._ppe = ops.mode is StabilizationMode.PPE
        self._warned = False

        rho, dt = physics.rho, physics.dt
        top = np.hstack([rho / dt * ops["Mb"] - self.mu_bar * ops["Ab"], ops["Bb"]])
        if self._ppe:
            bottom = np.hstack([-self.mu_bar * ops["Nb"], ops["Db"]])
        else:
            bottom = np.hstack([ops["Pb"], np.zeros((ops.n_q_bar, ops.n_q_bar))])
        self._filter_matrix = np.vstack([top, bottom])
        self._filter_condition = self._condition(self._filter_matrix)

    @staticmethod
    def _condition(matrix: np.ndarray) -> float:
        if matrix.size == 0:
            return 1.0
        if not np.all(np.isfinite(matrix)):
            return float("inf")
        with np.errstate(all="ignore"):
            return float(np.linalg.cond(matrix))

    def _solve(self, matrix: np.ndarray, rhs: np.ndarray, label: str, t: float) -> np.ndarray:
        if matrix.size == 0:
            return np.zeros(0)
        try:
            return linalg.solve(matrix, rhs)
        except (linalg.LinAlgError, ValueError):
            if not self._warned:
                logger.warning("%s: singular %s system at t=%.6g, continuing with NaN", self.mode.value, label, t)
                self._warned = True
            return np.full(rhs.shape, np.nan)

    def evolve_system(self, state: RomState, t_new: float) -> tuple[np.ndarray, np.ndarray]:
        ops, physics = self.ops, self.physics
        rho, mu, dt = physics.rho, physics.mu, physics.dt
        a0, c1, c2, e1, e2 = bdf_coefficients(state.step == 0)
        ubc_n = self.law.coefficient(state.t)
        ubc_prev = self.law.coefficient(state.t - dt)
        vbc_new = self.law.coefficient(t_new)
        transport = e1 * state.beta_bar + e2 * state.beta_bar_prev
        ubc_star = e1 * ubc_n + e2 * ubc_prev
        history = c1 * state.beta_bar + c2 * state.beta_bar_prev
        ubc_history = c1 * ubc_n + c2 * ubc_prev

        momentum = (
            rho * a0 / dt * ops["M"]
            + rho * (convection_matrix(ops["G"], transport) + ubc_star * ops["g_chi_conv"])
            - mu * ops["A"]
        )
        rhs_v = rho / dt * (ops["Mt"] @ history + ubc_history * ops["m_chi"]) - vbc_new * (
            rho * a0 / dt * ops["m_chi"] + rho * (ops["g_lift_mod"] @ transport + ubc_star * ops["g_ll"]) - mu * ops["a_chi"]
        )
        if self._ppe:
            coupling = (
                rho * (convection_matrix(ops["J"], transport) + ubc_star * ops["j_chi_conv"])
                - mu * ops["N"]
                + rho * a0 / dt * ops["F"]
            )
            pressure_block = ops["D"]
            rhs_q = rho / dt * (ops["Fb"] @ history + ubc_history * ops["f_chi"]) - vbc_new * (
                rho * (ops["j_lift_mod"] @ transport + ubc_star * ops["j_ll"]) - mu * ops["n_chi"] + rho * a0 / dt * ops["f_chi"]
            )
        else:
            coupling = ops["P"]
            pressure_block = np.zeros((ops.n_q, ops.n_q))
            rhs_q = -vbc_new * ops["p_chi"]
        matrix = np.vstack([np.hstack([momentum, ops["B"]]), np.hstack([coupling, pressure_block])])
        return matrix, np.concatenate([rhs_v, rhs_q])

    def step_evolve(self, state: RomState, t_new: float) -> tuple[np.ndarray, np.ndarray, float]:
        matrix, rhs = self.evolve_system(state, t_new)
        x = self._solve(matrix, rhs, "evolve", t_new)
        return x[: self.ops.n_v], x[self.ops.n_v :], self._condition(matrix)

    def filter_system(self, beta: np.ndarray, t_new: float) -> tuple[np.ndarray, np.ndarray]:
        ops = self.ops
        rho, dt = self.physics.rho, self.physics.dt
        vbc = self.law.coefficient(t_new)
        ubc = vbc
        rhs_u = rho / dt * (ops["Mt"].T @ beta + vbc * ops["mb_chi"]) - ubc * (
            rho / dt * ops["mb_chi"] - self.mu_bar * ops["ab_chi"]
        )
        rhs_q = self.mu_bar * ubc * ops["nb_chi"] if self._ppe else -ubc * ops["pb_chi"]
        return self._filter_matrix, np.concatenate([rhs_u, rhs_q])

    def step_filter(self, beta: np.ndarray, t_new: float) -> tuple[np.ndarray, np.ndarray, float]:
        matrix, rhs = self.filter_system(beta, t_new)
        x = self._solve(matrix, rhs, "filter", t_new)
        return x[: self.ops.n_u], x[self.ops.n_u :], self._filter_condition

    def step(self, state: RomState) -> tuple[RomState, float, float]:
        t_new = self.physics.time(state.step + 1)
        beta, gamma, cond_evolve = self.step_evolve(state, t_new)
        beta_bar, gamma_bar, cond_filter = self.step_filter(beta, t_new)
        new_state = replace(
            state,
            t=t_new,
            step=state.step + 1,
            beta=beta,
            gamma=gamma,
            beta_bar=beta_bar,
            gamma_bar=gamma_bar,
            beta_bar_prev=state.beta_bar,
        )
        return new_state, cond_evolve, cond_filter

    def forces(self, state: RomState) -> np.ndarray:
        """``(c_d, c_l, c_d_tn, c_l_tn)`` of the filtered velocity and evolve pressure."""

        ops = self.ops
        return (
            self.law.coefficient(state.t) * ops["aero_chi"]
            + state.beta_bar @ ops["aero_u"]
            + state.gamma @ ops["aero_q"]
        )

    def run(
        self,
        state: RomState | None = None,
        n_steps: int | None = None,
        record_times: Sequence[float] = (),
    ) -> RomRun:
        physics, ops = self.physics, self.ops
        state = state or RomState.at_rest(ops, physics.t0)
        n_steps = physics.n_steps - state.step if n_steps is None else n_steps
        if n_steps < 0:
            raise ContractViolation("step count must be non-negative")
        wanted = snapshot_steps(physics, record_times) if len(record_times) else []

        names = ("beta", "gamma", "beta_bar", "gamma_bar")
        recorded = {name: [] for name in names}
        rows: list[np.ndarray] = []
        force_rows: list[np.ndarray] = []
        diverged_at = None
        position = 0
        worst = self._filter_condition
        logger.info("%s ROM: %d steps, system sizes %d and %d", self.mode.value, n_steps, ops.n_v + ops.n_q, ops.n_u + ops.n_q_bar)
        started = wallclock.perf_counter()
        for _ in range(n_steps):
            state, cond_evolve, cond_filter = self.step(state)
            worst = max(worst, cond_evolve)
            rows.append(
                np.concatenate([[state.t], state.beta, state.gamma, state.beta_bar, state.gamma_bar, [cond_evolve, cond_filter]])
            )
            force_rows.append(np.concatenate([[state.t], self.forces(state)]))
            if diverged_at is None and not np.all(np.isfinite(state.beta_bar)):
                diverged_at = state.t
                logger.warning("%s ROM diverged at t=%.6g", self.mode.value, state.t)
            while position < len(wanted) and state.step == wanted[position]:
                for name in names:
                    recorded[name].append(getattr(state, name).copy())
                position += 1
        wall_time = wallclock.perf_counter() - started
        if worst > ILL_CONDITIONED:
            logger.warning("%s ROM systems are ill-conditioned (condition number above %.0e)", self.mode.value, ILL_CONDITIONED)

        columns = (
            ["t"]
            + [f"beta_{i}" for i in range(ops.n_v)]
            + [f"gamma_{i}" for i in range(ops.n_q)]
            + [f"beta_bar_{i}" for i in range(ops.n_u)]
            + [f"gamma_bar_{i}" for i in range(ops.n_q_bar)]
            + ["cond_evolve", "cond_filter"]
        )
        sizes = {"beta": ops.n_v, "gamma": ops.n_q, "beta_bar": ops.n_u, "gamma_bar": ops.n_q_bar}
        return RomRun(
            mode=self.mode,
            times=np.array([physics.time(step) for step in wanted[:position]], dtype=np.float64),
            coefficients={
                name: np.array(values).reshape(len(values), sizes[name]) for name, values in recorded.items()
            },
            trajectory=pd.DataFrame(np.array(rows).reshape(len(rows), len(columns)), columns=columns),
            forces=pd.DataFrame(np.array(force_rows).reshape(len(force_rows), 5), columns=["t", "c_d", "c_l", "c_d_tn", "c_l_tn"]),
            wall_time=wall_time,
            final_state=state,
            diverged_at=diverged_at,
        )


def run_rom(
    ops: ReducedOperators,
    record_times: Sequence[float] = (),
    state: RomState | None = None,
    n_steps: int | None = None,
) -> RomRun:
    return ReducedModel(ops).run(state, n_steps, record_times)


def reconstruct(run: RomRun, spaces: RomSpaces, lifting: LiftingFunction) -> dict[str, SnapshotMatrix]:
    """Full-order ``v, u, q, q_bar`` at the recorded times."""

    chi = lifting.values.ravel()
    v_bc = np.array([lifting.v_bc(t) for t in run.times])
    fingerprint = lifting.fingerprint
    c = run.coefficients
    return {
        "v": SnapshotMatrix("v", spaces.evolve.modes @ c["beta"].T + np.outer(chi, v_bc), run.times, fingerprint, 2),
        "u": SnapshotMatrix("u", spaces.filter.modes @ c["beta_bar"].T + np.outer(chi, v_bc), run.times, fingerprint, 2),
        "q": SnapshotMatrix("q", spaces.pressure.modes @ c["gamma"].T, run.times, fingerprint, 1),
        "q_bar": SnapshotMatrix("q_bar", spaces.filter_pressure.modes @ c["gamma_bar"].T, run.times, fingerprint, 1),
    }
