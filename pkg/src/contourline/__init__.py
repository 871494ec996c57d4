"""Occluding-contour line drawings from triangle meshes."""

from .errors import ContourlineError
from .extraction import ContourSet, build_dual_index, extract
from .mesh import Camera, Mesh, load_mesh
from .pipeline import CameraSpec, JobConfig, run
from .viewgraph import ViewGraph, build_view_graph

__all__ = ["Camera", "CameraSpec", "ContourSet", "ContourlineError", "JobConfig", "Mesh",
           "ViewGraph", "build_dual_index", "build_view_graph", "extract", "load_mesh", "run"]
__version__ = "0.1.0"
