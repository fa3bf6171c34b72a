"""Offline stages, online runs and the FOM/ROM comparison.

The offline pipeline is a fixed sequence of stages.  A stage is skipped when
the manifest shows it completed with the same input hash and all its outputs
are intact, unless a stage it depends on ran in this invocation.  The input
hash covers the configuration values the stage reads and the output digests
of its upstream stages.
"""

from __future__ import annotations

import json
import logging
import time as wallclock
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable

import pandas as pd
from django.db import DatabaseError

from lerayrom.exceptions import MissingArtifactError, StageError
from lerayrom.fom import run_fom
from lerayrom.mesh import Mesh, quality, save_mesh
from lerayrom.postproc import (
    coefficient_comparison,
    coefficient_table,
    error_series,
    error_table,
    timing_table,
    write_csv,
)
from lerayrom.rom import (
    LiftingFunction,
    OperatorAssembler,
    RomRun,
    SnapshotMatrix,
    SnapshotSet,
    StabilizationMode,
    SupremizerSet,
    SupremizerSolver,
    build_lifting,
    build_spaces,
    compute_basis,
    correlation_matrix,
    cumulative_table,
    homogenize,
    load_snapshots,
    reconstruct,
    run_rom,
    save_basis,
    save_snapshots,
)

from .artifacts import SNAPSHOT_FIELDS, SUPREMIZER_FIELDS, Manifest, Workspace, file_digest, output_lock
from .config import RunConfig, config_hash
from .models import PipelineRun, StageRecord

logger = logging.getLogger(__name__)

__all__ = ["STAGES", "AuditTrail", "OfflinePipeline", "StageResult", "run_compare", "run_offline", "run_online"]


@dataclass(frozen=True)
class StageSpec:
    name: str
    depends: tuple[str, ...]


STAGES = (
    StageSpec("mesh", ()),
    StageSpec("lifting", ("mesh",)),
    StageSpec("fom", ("mesh",)),
    StageSpec("pod", ("fom", "lifting")),
    StageSpec("supremizers", ("fom",)),
    StageSpec("operators", ("mesh", "lifting", "pod", "supremizers")),
)


@dataclass
class StageResult:
    name: str
    status: str
    input_hash: str
    outputs: dict[str, str] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    duration: float = 0.0


class AuditTrail:
    """Mirrors pipeline activity into :class:`PipelineRun` / :class:`StageRecord` rows.

    The audit is best effort: a missing or unmigrated database disables it
    with a warning instead of failing the numerical work.
    """

    def __init__(self, command: str, config: RunConfig, mode: str = ""):
        self.run: PipelineRun | None = None
        try:
            self.run = PipelineRun.objects.create(
                command=command,
                output_dir=str(config.output_path),
                config_hash=config_hash(config),
                mode=mode,
            )
        except DatabaseError as exc:
            logger.warning("stage audit disabled: %s", exc)

    def stage(self, result: StageResult) -> None:
        if self.run is None:
            return
        try:
            StageRecord.objects.create(
                run=self.run,
                stage=result.name,
                status=result.status,
                input_hash=result.input_hash,
                outputs=result.outputs,
                duration=result.duration,
                metadata=result.metadata,
            )
        except DatabaseError as exc:
            logger.warning("could not record stage %s: %s", result.name, exc)

    def finish(self, error: BaseException | None = None) -> None:
        if self.run is None:
            return
        status = PipelineRun.Status.FAILED if error else PipelineRun.Status.SUCCEEDED
        try:
            self.run.finish(status, str(error) if error else "")
        except DatabaseError as exc:
            logger.warning("could not close pipeline run: %s", exc)


class OfflinePipeline:
    """mesh, lifting, FOM snapshots, POD, supremizers and reduced operators."""

    def __init__(self, config: RunConfig, audit: AuditTrail | None = None):
        self.config = config
        self.workspace = Workspace(config.output_path)
        self.boundaries = config.boundaries()
        self.audit = audit

    # Lazily loaded upstream artifacts ------------------------------------------

    @cached_property
    def mesh(self) -> Mesh:
        return self.workspace.load_mesh()

    @cached_property
    def lifting(self) -> LiftingFunction:
        return self.workspace.load_lifting(self.boundaries.inlet_law)

    @cached_property
    def snapshots(self) -> SnapshotSet:
        return self.workspace.load_fom_snapshots(self.mesh)

    def _inputs(self, stage: str) -> dict:
        config = self.config
        data = config.to_dict()
        pod = data["pod"]
        if stage == "mesh":
            return data["mesh"]
        if stage == "lifting":
            return {"inlet": data["inlet"], "height": config.mesh.geometry.height}
        if stage == "fom":
            return {
                "physics": data["physics"],
                "inlet": data["inlet"],
                "schedule": data["schedule"],
                "solver": data["solver"],
                "height": config.mesh.geometry.height,
            }
        if stage == "pod":
            return {name: pod[name] for name in ("energy_target", *SNAPSHOT_FIELDS)}
        if stage == "supremizers":
            return {
                "non_orthogonal_correctors": config.solver.non_orthogonal_correctors,
                "modes": list(config.pod.supremizer_modes(config.modes)),
            }
        return {
            "physics": data["physics"],
            "inlet": data["inlet"],
            "modes": data["modes"],
            "counts": {mode: list(config.pod.supremizer_counts(mode)) for mode in config.modes},
        }

    def run(self, force: bool = False) -> list[StageResult]:
        manifest = Manifest(self.workspace.root)
        manifest.config_hash = config_hash(self.config)
        reran: set[str] = set()
        results = []
        for spec in STAGES:
            input_hash = config_hash(
                {"inputs": self._inputs(spec.name), "upstream": {dep: manifest.outputs(dep) for dep in spec.depends}}
            )
            if not force and not reran.intersection(spec.depends) and manifest.is_current(spec.name, input_hash):
                entry = manifest.entry(spec.name)
                result = StageResult(spec.name, "skipped", input_hash, entry["outputs"], entry.get("metadata", {}))
                logger.info("stage %s is up to date", spec.name)
            else:
                result = self._execute(spec.name, input_hash, manifest)
                reran.add(spec.name)
            results.append(result)
            if self.audit:
                self.audit.stage(result)
        self.write_energy_table()
        return results

    def _execute(self, name: str, input_hash: str, manifest: Manifest) -> StageResult:
        runner: Callable[[], tuple[list[Path], dict]] = getattr(self, f"_stage_{name}")
        logger.info("stage %s: running", name)
        started = wallclock.perf_counter()
        try:
            outputs, metadata = runner()
        except Exception as exc:
            manifest.fail(name, input_hash, exc)
            if self.audit:
                self.audit.stage(
                    StageResult(name, "failed", input_hash, {}, {"error": str(exc)}, wallclock.perf_counter() - started)
                )
            logger.error("stage %s failed: %s", name, exc)
            raise StageError(name, exc) from exc
        duration = wallclock.perf_counter() - started
        entry = manifest.record(name, input_hash, outputs, metadata)
        logger.info("stage %s: done in %.1f s", name, duration)
        return StageResult(name, "completed", input_hash, entry["outputs"], entry["metadata"], duration)

    # Stages ----------------------------------------------------------------------

    def _stage_mesh(self) -> tuple[list[Path], dict]:
        mesh = self.config.mesh.build()
        self.boundaries.check(mesh)
        path = save_mesh(mesh, self.workspace.mesh_path)
        self.__dict__["mesh"] = mesh
        return [path], {"fingerprint": mesh.fingerprint, **quality(mesh).as_dict()}

    def _stage_lifting(self) -> tuple[list[Path], dict]:
        lifting = build_lifting(self.mesh, self.boundaries)
        path = self.workspace.lifting_path
        path.parent.mkdir(parents=True, exist_ok=True)
        save_snapshots(lifting.as_snapshots(), path)
        self.__dict__["lifting"] = lifting
        return [path], {"divergence": lifting.divergence}

    def _stage_fom(self) -> tuple[list[Path], dict]:
        config, mesh = self.config, self.mesh
        run = run_fom(
            config.physics, mesh, self.boundaries, config.schedule.times(), config.solver, config.aero_reference()
        )
        snapshots = SnapshotSet(
            {
                name: SnapshotMatrix.from_fields(name, run.snapshots[name], run.times, mesh.fingerprint)
                for name in SNAPSHOT_FIELDS
            },
            mesh.cell_volumes,
        )
        outputs = snapshots.save(self.workspace.fom_dir)
        outputs.append(write_csv(run.history, self.workspace.history_path))
        self.__dict__["snapshots"] = snapshots
        return outputs, {
            "wall_time": run.wall_time,
            "n_steps": config.physics.n_steps,
            "n_snapshots": run.n_snapshots,
            "max_continuity": float(run.history["continuity"].abs().max()),
        }

    def _stage_pod(self) -> tuple[list[Path], dict]:
        pod, volumes = self.config.pod, self.mesh.cell_volumes
        outputs, counts = [], {}
        for name in SNAPSHOT_FIELDS:
            matrix = self.snapshots[name]
            if matrix.ncomp == 2:
                matrix = homogenize(matrix, self.lifting)
            count = pod.count(name)
            basis = compute_basis(
                correlation_matrix(matrix, volumes),
                matrix,
                volumes,
                energy_target=None if count is not None else pod.energy_target,
                mode_count=count,
            )
            outputs += save_basis(basis, self.workspace.pod_dir)
            counts[name] = basis.n_modes
        logger.info("POD mode counts: %s", counts)
        return outputs, {"modes": counts}

    def _stage_supremizers(self) -> tuple[list[Path], dict]:
        solver = SupremizerSolver.for_flow(self.mesh, self.boundaries, self.config.solver)
        supremizers = SupremizerSet.from_pressures(self.snapshots["q"], self.snapshots["q_bar"], solver)
        directory = self.workspace.supremizer_dir
        directory.mkdir(parents=True, exist_ok=True)
        outputs = [save_snapshots(getattr(supremizers, name), directory / f"{name}.lrsnap") for name in SUPREMIZER_FIELDS]
        volumes = self.mesh.cell_volumes
        counts = dict(zip(SUPREMIZER_FIELDS, self.config.pod.supremizer_modes(self.config.modes)))
        for name in SUPREMIZER_FIELDS:
            matrix = getattr(supremizers, name)
            basis = compute_basis(correlation_matrix(matrix, volumes), matrix, volumes, mode_count=counts[name])
            outputs += save_basis(basis, self.workspace.supremizer_pod_dir)
        return outputs, {"modes": counts}

    def _stage_operators(self) -> tuple[list[Path], dict]:
        config, mesh = self.config, self.mesh
        bases = self.workspace.load_bases()
        assembler = OperatorAssembler(mesh, config.physics, self.boundaries, self.lifting, config.aero_reference())
        outputs, metadata = [], {}
        for mode in config.stabilization_modes:
            spaces = build_spaces(mode, bases, mesh.cell_volumes, *config.pod.supremizer_counts(mode))
            ops = assembler.assemble(spaces)
            outputs.append(ops.save(self.workspace.operators_path(mode.value)))
            metadata[mode.value] = {
                "evolve": spaces.evolve.n,
                "filter": spaces.filter.n,
                "inf_sup_sigma_min": ops.metadata["inf_sup_sigma_min"],
                "mass_condition": ops.metadata["mass_condition"],
            }
        return outputs, metadata

    def write_energy_table(self) -> Path:
        """Cumulative eigenvalue fractions of every basis, ``k = 1..4``."""

        bases = self.workspace.load_bases()
        table = cumulative_table({name: bases[name] for name in SNAPSHOT_FIELDS + SUPREMIZER_FIELDS})
        return write_csv(table, self.workspace.energy_table_path, index=True)


def run_offline(config: RunConfig, force: bool = False) -> list[StageResult]:
    audit = AuditTrail(PipelineRun.Command.OFFLINE, config)
    error = None
    try:
        with output_lock(config.output_path):
            return OfflinePipeline(config, audit).run(force=force)
    except Exception as exc:
        error = exc
        raise
    finally:
        audit.finish(error)


# Online ------------------------------------------------------------------------

ONLINE_SUMMARY = "summary.json"


@dataclass
class OnlineResult:
    mode: StabilizationMode
    directory: Path
    wall_time: float
    diverged_at: float | None
    reused: bool = False


def _online(config: RunConfig, workspace: Workspace, mode: StabilizationMode) -> OnlineResult:
    ops_path = workspace.operators_path(mode.value)
    ops = workspace.load_operators(mode.value)
    mesh = workspace.load_mesh()
    lifting = workspace.load_lifting(config.boundaries().inlet_law)
    spaces = build_spaces(mode, workspace.load_bases(), mesh.cell_volumes, *config.pod.supremizer_counts(mode))
    ops.check_spaces(spaces)

    run: RomRun = run_rom(ops, record_times=config.schedule.times())
    directory = workspace.online_dir(mode.value)
    write_csv(run.trajectory, directory / "trajectory.csv")
    write_csv(run.forces, directory / "forces.csv")
    for name, matrix in reconstruct(run, spaces, lifting).items():
        save_snapshots(matrix, directory / f"{name}.lrsnap")
    summary = {
        "mode": mode.value,
        "operators": file_digest(ops_path),
        "wall_time": run.wall_time,
        "diverged_at": run.diverged_at,
        "steps": int(run.final_state.step),
    }
    (directory / ONLINE_SUMMARY).write_text(json.dumps(summary, sort_keys=True, indent=2), encoding="utf-8")
    logger.info("%s online loop: %.3f s for %d steps", mode.value, run.wall_time, run.final_state.step)
    return OnlineResult(mode, directory, run.wall_time, run.diverged_at)


def _current_online(config: RunConfig, workspace: Workspace, mode: StabilizationMode) -> OnlineResult:
    """Reuse online outputs produced from the current operator file, else rerun."""

    directory = workspace.online_dir(mode.value)
    summary_path = directory / ONLINE_SUMMARY
    ops_path = workspace.operators_path(mode.value)
    if summary_path.exists() and ops_path.exists():
        summary = json.loads(summary_path.read_text(encoding="utf-8"))
        complete = all((directory / f"{name}.lrsnap").exists() for name in SNAPSHOT_FIELDS)
        if complete and summary.get("operators") == file_digest(ops_path):
            return OnlineResult(mode, directory, summary["wall_time"], summary["diverged_at"], reused=True)
    return _online(config, workspace, mode)


def run_online(config: RunConfig, mode: StabilizationMode | str) -> OnlineResult:
    mode = StabilizationMode(mode)
    workspace = Workspace(config.output_path)
    audit = AuditTrail(PipelineRun.Command.ONLINE, config, mode.value)
    error = None
    try:
        with output_lock(config.output_path):
            return _online(config, workspace, mode)
    except Exception as exc:
        error = exc
        raise
    finally:
        audit.finish(error)


# Comparison -------------------------------------------------------------------

def _fom_wall_time(workspace: Workspace) -> float:
    entry = Manifest(workspace.root).entry("fom")
    if not entry or entry.get("status") != "completed":
        raise MissingArtifactError(workspace.root / "manifest.json")
    return float(entry["metadata"]["wall_time"])


def run_compare(config: RunConfig) -> dict[str, Path]:
    """Write error, coefficient and timing tables for every configured mode.

    Online results are rerun for modes whose stored outputs are missing or
    stem from an older operator file.
    """

    workspace = Workspace(config.output_path)
    audit = AuditTrail(PipelineRun.Command.COMPARE, config)
    error = None
    try:
        with output_lock(config.output_path):
            return _compare(config, workspace)
    except Exception as exc:
        error = exc
        raise
    finally:
        audit.finish(error)


def _compare(config: RunConfig, workspace: Workspace) -> dict[str, Path]:
    mesh = workspace.load_mesh()
    fom = workspace.load_fom_snapshots(mesh)
    if not workspace.history_path.exists():
        raise MissingArtifactError(workspace.history_path)
    history = pd.read_csv(workspace.history_path)
    fom_seconds = _fom_wall_time(workspace)
    out = workspace.compare_dir

    series, forces, online_seconds, written = {}, {}, {}, {}
    for mode in config.stabilization_modes:
        result = _current_online(config, workspace, mode)
        if result.diverged_at is not None:
            logger.warning("%s ROM diverged at t=%.6g; its errors are not finite", mode.value, result.diverged_at)
        by_field = {}
        for name in SNAPSHOT_FIELDS:
            rom = load_snapshots(result.directory / f"{name}.lrsnap")
            by_field[name] = error_series(name, fom.times, fom[name].values, rom.values, fom.weights(name))
        series[mode.value] = by_field
        frame = pd.DataFrame({"t": fom.times})
        for errors in by_field.values():
            frame = frame.merge(errors.to_frame(), on="t")
        written[f"errors_{mode.value}"] = write_csv(frame, out / f"errors_{mode.value}.csv")

        forces[mode.value] = pd.read_csv(result.directory / "forces.csv")
        written[f"coefficients_{mode.value}"] = write_csv(
            coefficient_comparison(history, forces[mode.value]), out / f"coefficients_{mode.value}.csv"
        )
        online_seconds[mode.value] = result.wall_time

    written["table2_errors"] = write_csv(error_table(series), out / "table2_errors.csv")
    written["table3_coefficients"] = write_csv(coefficient_table(history, forces), out / "table3_coefficients.csv")
    written["timing"] = write_csv(timing_table(fom_seconds, online_seconds), out / "timing.csv")
    return written
