"""Layout of an output directory, its manifest and the single-writer lock.

::

    <output_dir>/
        manifest.json              per-stage input hash and output digests
        mesh/mesh.txt
        lifting/chi.lrsnap
        fom/{v,u,q,q_bar}.lrsnap   raw full-order snapshots
        fom/history.csv            per-step forces and diagnostics
        pod/<field>.lrsnap         modes (velocities homogenized)
        pod/<field>_eigenvalues.csv
        supremizers/{s,s_bar}.lrsnap
        supremizers/pod/...        supremizer bases
        operators/<mode>.lrops
        table1_energy.csv
        online/<mode>/...
        compare/...
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Mapping, Sequence

from django.utils import timezone

from lerayrom.exceptions import ArtifactError, MissingArtifactError, SnapshotFormatError
from lerayrom.fom import InletLaw
from lerayrom.mesh import Mesh, load_mesh
from lerayrom.rom import LiftingFunction, PodBasis, ReducedOperators, SnapshotSet, load_basis, load_snapshots

logger = logging.getLogger(__name__)

__all__ = ["LOCK_NAME", "MANIFEST_VERSION", "Manifest", "Workspace", "file_digest", "output_lock"]

LOCK_NAME = ".lerayrom.lock"
MANIFEST_NAME = "manifest.json"
MANIFEST_VERSION = 1
SNAPSHOT_FIELDS = ("v", "u", "q", "q_bar")
SUPREMIZER_FIELDS = ("s", "s_bar")


def file_digest(path: str | os.PathLike) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


@contextmanager
def output_lock(root: str | os.PathLike) -> Iterator[Path]:
    """Hold ``<root>/.lerayrom.lock`` for the duration of the block."""

    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    path = root / LOCK_NAME
    try:
        fd = os.open(path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        owner = path.read_text(encoding="ascii", errors="replace").strip() or "unknown"
        raise ArtifactError(
            f"{root} is in use by process {owner}; delete {path} if that process no longer runs"
        ) from None
    try:
        os.write(fd, str(os.getpid()).encode("ascii"))
        os.close(fd)
        yield path
    finally:
        path.unlink(missing_ok=True)


class Manifest:
    """``manifest.json``: what each stage read and wrote.

    Stage entries carry ``status``, ``input_hash``, ``outputs`` (relative
    path to SHA-256), ``metadata`` and ``updated_at``.  The file is rewritten
    after every stage so an aborted pipeline leaves a partial manifest.
    """

    def __init__(self, root: str | os.PathLike):
        self.root = Path(root)
        self.path = self.root / MANIFEST_NAME
        self.stages: dict[str, dict] = {}
        self.config_hash = ""
        if self.path.exists():
            try:
                data = json.loads(self.path.read_text(encoding="utf-8"))
            except json.JSONDecodeError as exc:
                raise SnapshotFormatError(f"{self.path}: unreadable manifest ({exc.msg})") from exc
            if data.get("version") != MANIFEST_VERSION:
                logger.warning("ignoring manifest with version %s", data.get("version"))
            else:
                self.stages = data.get("stages", {})
                self.config_hash = data.get("config_hash", "")

    def entry(self, stage: str) -> dict | None:
        return self.stages.get(stage)

    def outputs(self, stage: str) -> dict[str, str]:
        entry = self.stages.get(stage)
        return dict(entry["outputs"]) if entry else {}

    def is_current(self, stage: str, input_hash: str) -> bool:
        """Completed with the same inputs, and every output still has its recorded digest."""

        entry = self.stages.get(stage)
        if not entry or entry.get("status") != "completed" or entry.get("input_hash") != input_hash:
            return False
        for relative, digest in entry["outputs"].items():
            path = self.root / relative
            if not path.is_file() or file_digest(path) != digest:
                logger.info("%s: output %s is missing or modified", stage, relative)
                return False
        return True

    def record(self, stage: str, input_hash: str, outputs: Sequence[Path], metadata: Mapping | None = None) -> dict:
        entry = {
            "status": "completed",
            "input_hash": input_hash,
            "outputs": {path.relative_to(self.root).as_posix(): file_digest(path) for path in outputs},
            "metadata": dict(metadata or {}),
            "updated_at": timezone.now().isoformat(),
        }
        self.stages[stage] = entry
        self.save()
        return entry

    def fail(self, stage: str, input_hash: str, error: BaseException) -> None:
        self.stages[stage] = {
            "status": "failed",
            "input_hash": input_hash,
            "outputs": {},
            "metadata": {"error": str(error)},
            "updated_at": timezone.now().isoformat(),
        }
        self.save()

    def save(self) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        payload = {"version": MANIFEST_VERSION, "config_hash": self.config_hash, "stages": self.stages}
        tmp = self.path.with_name(self.path.name + ".tmp")
        tmp.write_text(json.dumps(payload, sort_keys=True, indent=2), encoding="utf-8")
        os.replace(tmp, self.path)


@dataclass(frozen=True)
class Workspace:
    """Artifact paths under one output directory plus typed loaders."""

    root: Path

    @property
    def mesh_path(self) -> Path:
        return self.root / "mesh" / "mesh.txt"

    @property
    def lifting_path(self) -> Path:
        return self.root / "lifting" / "chi.lrsnap"

    @property
    def fom_dir(self) -> Path:
        return self.root / "fom"

    @property
    def history_path(self) -> Path:
        return self.fom_dir / "history.csv"

    @property
    def pod_dir(self) -> Path:
        return self.root / "pod"

    @property
    def supremizer_dir(self) -> Path:
        return self.root / "supremizers"

    @property
    def supremizer_pod_dir(self) -> Path:
        return self.supremizer_dir / "pod"

    @property
    def energy_table_path(self) -> Path:
        return self.root / "table1_energy.csv"

    def operators_path(self, mode: str) -> Path:
        return self.root / "operators" / f"{mode}.lrops"

    def online_dir(self, mode: str) -> Path:
        return self.root / "online" / mode

    @property
    def compare_dir(self) -> Path:
        return self.root / "compare"

    def _require(self, path: Path) -> Path:
        if not path.exists():
            raise MissingArtifactError(path)
        return path

    def load_mesh(self) -> Mesh:
        return load_mesh(self._require(self.mesh_path))

    def load_lifting(self, law: InletLaw) -> LiftingFunction:
        return LiftingFunction.from_snapshots(load_snapshots(self.lifting_path), law)

    def load_fom_snapshots(self, mesh: Mesh) -> SnapshotSet:
        return SnapshotSet.load(self.fom_dir, SNAPSHOT_FIELDS, mesh)

    def load_bases(self) -> dict[str, PodBasis]:
        bases = {name: load_basis(self.pod_dir, name) for name in SNAPSHOT_FIELDS}
        bases.update({name: load_basis(self.supremizer_pod_dir, name) for name in SUPREMIZER_FIELDS})
        return bases

    def load_operators(self, mode: str) -> ReducedOperators:
        return ReducedOperators.load(self.operators_path(mode))
