"""Run configuration: JSON document, presets and the validated dataclasses.

A configuration file is a JSON object with the sections ``mesh``,
``physics``, ``inlet``, ``schedule``, ``pod``, ``solver`` plus the top-level
keys ``modes`` and ``output_dir``.  ``"extends": "<preset>"`` merges the file
over a bundled preset.  The full schema is documented in
``docs/configuration.md``.
"""

from __future__ import annotations

import copy
import hashlib
import json
import logging
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping

import numpy as np
from django.conf import settings

from lerayrom.exceptions import ConfigError
from lerayrom.fom import FlowBoundaries, InletLaw, PhysicsConfig, SolverSettings
from lerayrom.mesh import ChannelGeometry, Mesh, generate_cylinder_mesh, load_mesh
from lerayrom.postproc import AeroReference
from lerayrom.rom import StabilizationMode

from .forms import InletForm, MeshForm, PhysicsForm, PodForm, RunForm, ScheduleForm, SolverForm

logger = logging.getLogger(__name__)

__all__ = [
    "InletConfig",
    "MeshConfig",
    "PodConfig",
    "RunConfig",
    "ScheduleConfig",
    "canonical_json",
    "config_hash",
    "load_config",
    "validate_config",
]

SECTIONS = ("mesh", "physics", "inlet", "schedule", "pod", "solver")
_MAX_EXTENDS_DEPTH = 8


@dataclass(frozen=True)
class MeshConfig:
    source: str = "generate"
    path: str | None = None
    target_cells: int = 15900
    refinement_bias: float = 2.0
    geometry: ChannelGeometry = field(default_factory=ChannelGeometry)

    def build(self) -> Mesh:
        if self.source == "file":
            return load_mesh(self.path)
        return generate_cylinder_mesh(self.target_cells, self.refinement_bias, self.geometry)

    def to_dict(self) -> dict:
        g = self.geometry
        return {
            "source": self.source,
            "path": self.path,
            "target_cells": self.target_cells,
            "refinement_bias": self.refinement_bias,
            "length": g.length,
            "height": g.height,
            "centre_x": g.centre[0],
            "centre_y": g.centre[1],
            "radius": g.radius,
        }

    @classmethod
    def from_cleaned(cls, data: Mapping[str, Any]) -> "MeshConfig":
        geometry = ChannelGeometry(data["length"], data["height"], (data["centre_x"], data["centre_y"]), data["radius"])
        return cls(data["source"], data["path"] or None, data["target_cells"], data["refinement_bias"], geometry)


@dataclass(frozen=True)
class InletConfig:
    amplitude: float = 1.0
    period: float | None = 8.0


@dataclass(frozen=True)
class ScheduleConfig:
    start: float = 0.1
    stop: float = 8.0
    interval: float = 0.1

    @property
    def n_snapshots(self) -> int:
        return int(round((self.stop - self.start) / self.interval)) + 1

    def times(self) -> np.ndarray:
        return self.start + self.interval * np.arange(self.n_snapshots, dtype=np.float64)


@dataclass(frozen=True)
class PodConfig:
    energy_target: float | None = 0.99
    v: int | None = None
    u: int | None = None
    q: int | None = None
    q_bar: int | None = None
    sup1_s: int = 4
    sup1_s_bar: int = 3
    sup2_s: int = 2
    sup2_s_bar: int = 1

    def count(self, field_name: str) -> int | None:
        return getattr(self, field_name)

    def supremizer_counts(self, mode: StabilizationMode | str) -> tuple[int, int]:
        mode = StabilizationMode(mode)
        if not mode.enriched:
            return 0, 0
        return getattr(self, f"{mode.value}_s"), getattr(self, f"{mode.value}_s_bar")

    def supremizer_modes(self, modes) -> tuple[int, int]:
        """Largest ``s`` and ``s_bar`` counts any requested variant needs."""

        counts = [self.supremizer_counts(mode) for mode in modes]
        return max((c[0] for c in counts), default=0), max((c[1] for c in counts), default=0)


@dataclass(frozen=True)
class RunConfig:
    mesh: MeshConfig = field(default_factory=MeshConfig)
    physics: PhysicsConfig = field(default_factory=PhysicsConfig)
    inlet: InletConfig = field(default_factory=InletConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    pod: PodConfig = field(default_factory=PodConfig)
    modes: tuple[str, ...] = tuple(mode.value for mode in StabilizationMode)
    solver: SolverSettings = field(default_factory=SolverSettings)
    output_dir: str = "runs/paper"

    @property
    def output_path(self) -> Path:
        return Path(self.output_dir)

    @property
    def stabilization_modes(self) -> tuple[StabilizationMode, ...]:
        return tuple(StabilizationMode(mode) for mode in self.modes)

    def boundaries(self) -> FlowBoundaries:
        g = self.mesh.geometry
        law = InletLaw(height=g.height, amplitude=self.inlet.amplitude, period=self.inlet.period)
        return FlowBoundaries(inlet_law=law)

    def aero_reference(self) -> AeroReference:
        return AeroReference(velocity=self.inlet.amplitude, length=2.0 * self.mesh.geometry.radius)

    def section(self, name: str) -> Any:
        return self.to_dict()[name]

    def to_dict(self) -> dict:
        return {
            "mesh": self.mesh.to_dict(),
            "physics": asdict(self.physics),
            "inlet": asdict(self.inlet),
            "schedule": asdict(self.schedule),
            "pod": asdict(self.pod),
            "solver": asdict(self.solver),
            "modes": list(self.modes),
            "output_dir": self.output_dir,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RunConfig":
        return validate_config(data)


def canonical_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(data: Any) -> str:
    """SHA-256 of the canonical JSON of ``data`` (a config, section or dict)."""

    if isinstance(data, RunConfig):
        data = data.to_dict()
    return hashlib.sha256(canonical_json(data).encode("utf-8")).hexdigest()


def _merge(base: dict, override: Mapping) -> dict:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _form_errors(form) -> dict:
    return {name: [str(message) for message in messages] for name, messages in form.errors.items()}


def validate_config(data: Mapping[str, Any]) -> RunConfig:
    """Run every section through its form and build a :class:`RunConfig`.

    Missing keys fall back to the defaults of :class:`RunConfig`.  All
    problems are collected and raised together as one :class:`ConfigError`.
    """

    if not isinstance(data, Mapping):
        raise ConfigError("configuration must be a JSON object")
    unknown = set(data) - set(SECTIONS) - {"modes", "output_dir", "extends"}
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(sorted(unknown))}", {"keys": sorted(unknown)})
    for name in SECTIONS:
        if name in data and not isinstance(data[name], Mapping):
            raise ConfigError(f"section '{name}' must be an object")
    merged = _merge(RunConfig().to_dict(), {k: v for k, v in data.items() if k != "extends"})

    errors: dict[str, dict] = {}

    def check(name: str, form) -> dict | None:
        unexpected = set(merged[name]) - set(form.fields) if name in SECTIONS else set()
        if form.is_valid() and not unexpected:
            return form.cleaned_data
        section_errors = _form_errors(form)
        for key in sorted(unexpected):
            section_errors[key] = ["Unknown key."]
        errors[name] = section_errors
        return None

    mesh = check("mesh", MeshForm(merged["mesh"]))
    physics = check("physics", PhysicsForm(merged["physics"]))
    inlet = check("inlet", InletForm(merged["inlet"]))
    schedule_form = ScheduleForm(merged["schedule"], physics=physics)
    schedule = check("schedule", schedule_form)
    n_snapshots = schedule_form.n_snapshots if schedule is not None else None
    pod = check("pod", PodForm(merged["pod"], n_snapshots=n_snapshots))
    solver = check("solver", SolverForm(merged["solver"]))
    run = check("run", RunForm({"modes": merged["modes"], "output_dir": merged["output_dir"]}))

    if errors:
        detail = "; ".join(
            f"{section}.{key}: {' '.join(messages)}" if key != "__all__" else f"{section}: {' '.join(messages)}"
            for section, section_errors in errors.items()
            for key, messages in section_errors.items()
        )
        raise ConfigError(f"invalid configuration: {detail}", errors)

    def pick(cls, cleaned: Mapping[str, Any]):
        return cls(**{f.name: cleaned[f.name] for f in fields(cls)})

    return RunConfig(
        mesh=MeshConfig.from_cleaned(mesh),
        physics=pick(PhysicsConfig, physics),
        inlet=pick(InletConfig, inlet),
        schedule=pick(ScheduleConfig, schedule),
        pod=pick(PodConfig, pod),
        modes=tuple(run["modes"]),
        solver=pick(SolverSettings, solver),
        output_dir=run["output_dir"],
    )


def preset_path(name: str) -> Path:
    return Path(settings.LERAYROM_PRESET_DIR) / f"{name}.json"


def _read_json(path: Path) -> dict:
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"configuration file {path} does not exist")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}")
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: configuration must be a JSON object")
    return data


def _resolve(path: Path, depth: int = 0) -> dict:
    if depth > _MAX_EXTENDS_DEPTH:
        raise ConfigError("'extends' chain is too deep or cyclic")
    data = _read_json(path)
    parent = data.get("extends")
    if parent is None:
        return data
    if not isinstance(parent, str):
        raise ConfigError("'extends' must name a preset")
    base = _resolve(preset_path(parent), depth + 1)
    base.pop("extends", None)
    return _merge(base, {k: v for k, v in data.items() if k != "extends"})


def load_config(source: str | os.PathLike | None = None) -> RunConfig:
    """Load a configuration file or bundled preset by name.

    ``None`` selects ``settings.LERAYROM_DEFAULT_PRESET``.  A non-empty
    ``settings.LERAYROM_OUTPUT_DIR`` replaces the configured output directory.
    """

    source = source or settings.LERAYROM_DEFAULT_PRESET
    path = Path(source)
    if not path.suffix and not path.exists():
        path = preset_path(str(source))
    config = validate_config(_resolve(path))
    override = settings.LERAYROM_OUTPUT_DIR
    if override:
        logger.info("output directory overridden by LERAYROM_OUTPUT_DIR: %s", override)
        config = replace(config, output_dir=override)
    return config
