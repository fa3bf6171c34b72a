from .generator import ChannelGeometry, generate_cylinder_mesh, generate_rectangle_mesh
from .geometry import Mesh, Patch, build_mesh
from .io import load_mesh, save_mesh
from .quality import QualityReport, quality

__all__ = [
    "ChannelGeometry",
    "Mesh",
    "Patch",
    "QualityReport",
    "build_mesh",
    "generate_cylinder_mesh",
    "generate_rectangle_mesh",
    "load_mesh",
    "quality",
    "save_mesh",
]
