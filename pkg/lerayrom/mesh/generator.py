"""Parametric quadrilateral meshes.

``generate_cylinder_mesh`` lays a Cartesian lattice over the channel and
replaces the square block around the cylinder with an O-grid collar.  The
collar's radial lines leave the cylinder along its normal and arrive at the
block boundary close to the lattice direction, which keeps non-orthogonality
low on both sides.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from lerayrom.exceptions import ContractViolation, MeshGenerationError

from .geometry import Mesh, build_mesh

logger = logging.getLogger(__name__)

__all__ = [
    "ChannelGeometry",
    "CYLINDER_PATCHES",
    "RECTANGLE_PATCHES",
    "generate_cylinder_mesh",
    "generate_rectangle_mesh",
    "radial_fractions",
]

CYLINDER_PATCHES = ("inlet", "outlet", "walls", "cylinder")
RECTANGLE_PATCHES = ("left", "right", "bottom", "top")

# Radial cells per unit of collar thickness, relative to the lattice spacing.
_RADIAL_DENSITY = 1.5


@dataclass(frozen=True)
class ChannelGeometry:
    length: float = 2.2
    height: float = 0.41
    centre: tuple[float, float] = (0.2, 0.2)
    radius: float = 0.05

    @property
    def area(self) -> float:
        return self.length * self.height - math.pi * self.radius**2

    @property
    def clearance(self) -> float:
        cx, cy = self.centre
        return min(cx, self.length - cx, cy, self.height - cy)

    def collar_half_width(self) -> float:
        if self.radius <= 0.0 or self.length <= 0.0 or self.height <= 0.0:
            raise MeshGenerationError("channel and cylinder dimensions must be positive")
        if self.radius >= self.clearance:
            raise MeshGenerationError("cylinder is not strictly inside the channel")
        return min(2.0 * self.radius, 0.5 * (self.radius + self.clearance))


def radial_fractions(n: int, bias: float) -> np.ndarray:
    """Geometric grading of ``[0, 1]`` into ``n`` cells, last/first ratio ``bias``."""

    if n < 1:
        raise ContractViolation("need at least one radial cell")
    if bias == 1.0 or n == 1:
        return np.linspace(0.0, 1.0, n + 1)
    ratio = bias ** (1.0 / (n - 1))
    steps = ratio ** np.arange(n + 1)
    return (steps - 1.0) / (steps[-1] - 1.0)


def _segment(start: float, stop: float, count: int) -> np.ndarray:
    return np.linspace(start, stop, count + 1)


def _count(length: float, h: float) -> int:
    return max(1, math.ceil(length / h - 1e-9))


def generate_cylinder_mesh(
    target_cells: int = 15900,
    refinement_bias: float = 2.0,
    geometry: ChannelGeometry | None = None,
) -> Mesh:
    """Channel-with-cylinder mesh of roughly ``target_cells`` quadrilaterals."""

    if target_cells < 100:
        raise ContractViolation("target_cells must be at least 100")
    if refinement_bias < 1.0:
        raise ContractViolation("refinement_bias must be >= 1")
    geometry = geometry or ChannelGeometry()
    b = geometry.collar_half_width()
    r = geometry.radius
    cx, cy = geometry.centre
    L, H = geometry.length, geometry.height

    estimated = L * H - 4.0 * b * b + 4.0 * _RADIAL_DENSITY * 2.0 * b * (b - r)
    h = math.sqrt(estimated / target_cells)

    n_side = max(4, math.ceil(2.0 * b / h - 1e-9))
    n_radial = max(2, math.ceil(_RADIAL_DENSITY * (b - r) / h - 1e-9))
    x0, x1, y0, y1 = cx - b, cx + b, cy - b, cy + b
    xs = np.concatenate([
        _segment(0.0, x0, _count(x0, h))[:-1],
        _segment(x0, x1, n_side)[:-1],
        _segment(x1, L, _count(L - x1, h)),
    ])
    ys = np.concatenate([
        _segment(0.0, y0, _count(y0, h))[:-1],
        _segment(y0, y1, n_side)[:-1],
        _segment(y1, H, _count(H - y1, h)),
    ])
    i0 = _count(x0, h)
    i1 = i0 + n_side
    j0 = _count(y0, h)
    j1 = j0 + n_side
    nx, ny = len(xs) - 1, len(ys) - 1

    points: list[tuple[float, float]] = []
    lattice = -np.ones((nx + 1, ny + 1), dtype=np.int64)
    for i in range(nx + 1):
        for j in range(ny + 1):
            if i0 < i < i1 and j0 < j < j1:
                continue
            lattice[i, j] = len(points)
            points.append((xs[i], ys[j]))

    cells: list[tuple[int, ...]] = []
    for i in range(nx):
        for j in range(ny):
            if i0 <= i < i1 and j0 <= j < j1:
                continue
            cells.append((lattice[i, j], lattice[i + 1, j], lattice[i + 1, j + 1], lattice[i, j + 1]))

    # Collar perimeter, counter-clockwise from the lower-left block corner.
    perimeter: list[tuple[int, int, tuple[float, float]]] = []
    perimeter += [(i0 + m, j0, (0.0, -1.0)) for m in range(n_side)]
    perimeter += [(i1, j0 + m, (1.0, 0.0)) for m in range(n_side)]
    perimeter += [(i1 - m, j1, (0.0, 1.0)) for m in range(n_side)]
    perimeter += [(i0, j1 - m, (-1.0, 0.0)) for m in range(n_side)]

    fractions = radial_fractions(n_radial, refinement_bias)
    h00 = 2 * fractions**3 - 3 * fractions**2 + 1
    h10 = fractions**3 - 2 * fractions**2 + fractions
    h01 = -2 * fractions**3 + 3 * fractions**2
    h11 = fractions**3 - fractions**2

    centre = np.array([cx, cy])
    rings = np.empty((len(perimeter), n_radial + 1), dtype=np.int64)
    for k, (i, j, side_normal) in enumerate(perimeter):
        end = np.array([xs[i], ys[j]])
        ray = (end - centre) / np.linalg.norm(end - centre)
        start = centre + r * ray
        if side_normal[1] == 0.0:
            offset = abs(end[1] - cy)
        else:
            offset = abs(end[0] - cx)
        blend = (offset / b) ** 2
        arrival = (1.0 - blend) * np.asarray(side_normal) + blend * ray
        arrival /= np.linalg.norm(arrival)
        chord = np.linalg.norm(end - start)
        curve = (
            h00[:, None] * start
            + h10[:, None] * chord * ray
            + h01[:, None] * end
            + h11[:, None] * chord * arrival
        )
        for level in range(n_radial):
            rings[k, level] = len(points)
            points.append((curve[level, 0], curve[level, 1]))
        rings[k, n_radial] = lattice[i, j]

    n_ring = len(perimeter)
    for k in range(n_ring):
        nxt = (k + 1) % n_ring
        for level in range(n_radial):
            cells.append((rings[k, level], rings[k, level + 1], rings[nxt, level + 1], rings[nxt, level]))

    tol = 1e-9 * max(L, H)

    def classify(centre_xy: np.ndarray) -> str:
        x, y = centre_xy
        if abs(x) < tol:
            return "inlet"
        if abs(x - L) < tol:
            return "outlet"
        if abs(y) < tol or abs(y - H) < tol:
            return "walls"
        if math.hypot(x - cx, y - cy) <= r + tol:
            return "cylinder"
        raise MeshGenerationError(f"boundary face at ({x:.6g}, {y:.6g}) matches no patch")

    mesh = build_mesh(np.array(points), cells, classify, CYLINDER_PATCHES)
    logger.info(
        "Generated cylinder mesh: %d cells (target %d), h_min=%.3e, h_max=%.3e",
        mesh.n_cells, target_cells, mesh.h_min, mesh.h_max,
    )
    return mesh


def generate_rectangle_mesh(
    nx: int,
    ny: int,
    lx: float = 1.0,
    ly: float = 1.0,
    origin: tuple[float, float] = (0.0, 0.0),
) -> Mesh:
    """Uniform Cartesian mesh with patches ``left``, ``right``, ``bottom``, ``top``."""

    if nx < 1 or ny < 1 or lx <= 0.0 or ly <= 0.0:
        raise ContractViolation("rectangle mesh needs positive extents and cell counts")
    ox, oy = origin
    xs = ox + np.linspace(0.0, lx, nx + 1)
    ys = oy + np.linspace(0.0, ly, ny + 1)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    points = np.column_stack([gx.ravel(), gy.ravel()])

    def vid(i: int, j: int) -> int:
        return i * (ny + 1) + j

    cells = [
        (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1))
        for j in range(ny)
        for i in range(nx)
    ]
    tol = 1e-9 * max(lx, ly)

    def classify(centre_xy: np.ndarray) -> str:
        x, y = centre_xy
        if abs(x - ox) < tol:
            return "left"
        if abs(x - ox - lx) < tol:
            return "right"
        if abs(y - oy) < tol:
            return "bottom"
        return "top"

    return build_mesh(points, cells, classify, RECTANGLE_PATCHES)
