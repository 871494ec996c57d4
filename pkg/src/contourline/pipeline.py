"""End-to-end job: mesh -> curves -> View Graph -> visibility -> strokes -> SVG."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import extraction, interpolated, stylize, viewgraph, visibility
from .errors import DegenerateGeometry
from .mesh import Camera, default_perturbation, load_mesh, perturb_generic

logger = logging.getLogger(__name__)

EXTRACT_METHODS = ("brute", "dual", "random", "interpolated")
VISIBILITY_MODES = ("ray", "propagate", "qi", "vote")
STAGES = ("build_segments", "detect_curtain_folds", "detect_surface_intersections",
          "detect_bifurcations", "intersect_image_space", "mark_locally_invisible", "visibility")


@dataclass
class CameraSpec:
    kind: str = "perspective"
    vector: tuple = (0.0, 0.0, 5.0)     # center (perspective) or direction (orthographic)
    look_at: tuple = (0.0, 0.0, 0.0)
    up: tuple = (0.0, 1.0, 0.0)
    focal: float = 1.0

    @classmethod
    def parse(cls, text, **kw):
        """``persp:x,y,z`` (camera center) or ``ortho:dx,dy,dz`` (view direction)."""
        kind, _, rest = text.partition(":")
        kinds = {"persp": "perspective", "perspective": "perspective",
                 "ortho": "orthographic", "orthographic": "orthographic"}
        if kind not in kinds or not rest:
            raise ValueError(f"camera spec must look like persp:x,y,z or ortho:x,y,z, got {text!r}")
        vec = tuple(float(x) for x in rest.split(","))
        if len(vec) != 3:
            raise ValueError(f"camera spec needs three coordinates, got {text!r}")
        return cls(kinds[kind], vec, **kw)

    def build(self):
        fwd = (np.asarray(self.look_at, float) - self.vector if self.kind == "perspective"
               else np.asarray(self.vector, float))
        up = np.asarray(self.up, float)
        if np.linalg.norm(np.cross(fwd, up)) <= 1e-12 * np.linalg.norm(fwd) * np.linalg.norm(up):
            up = np.array([0.0, 0.0, 1.0]) if abs(fwd[2]) < abs(fwd[1]) else np.array([0.0, 1.0, 0.0])
        if self.kind == "perspective":
            return Camera.perspective(self.vector, self.look_at, up, self.focal)
        return Camera.orthographic(self.vector, self.look_at, up)


@dataclass
class JobConfig:
    input: str
    out: str = "out.svg"
    camera: CameraSpec = field(default_factory=CameraSpec)
    extract: str = "brute"
    visibility: str | None = None        # default: qi for mesh contours, vote for interpolated
    votes: int = 3
    threshold_px: float = 15.0
    canvas_px: int = stylize.DEFAULT_CANVAS
    style: str | None = None
    seed: int = 0
    num_seeds: int | None = None
    index: str | None = None
    hidden_lines: bool = False
    split_near: bool = False
    allow_reorient: bool = False
    perturb: bool = False
    retries: int = 3
    smooth: bool = True
    junction_lock: bool = True
    policy: str = "default"
    dump_viewgraph: str | None = None
    dump_chains: str | None = None
    stats_path: str | None = None
    threads: int | None = None

    def __post_init__(self):
        if self.extract not in EXTRACT_METHODS:
            raise ValueError(f"extraction method must be one of {EXTRACT_METHODS}")
        if self.visibility is not None and self.visibility not in VISIBILITY_MODES:
            raise ValueError(f"visibility mode must be one of {VISIBILITY_MODES}")
        if self.threads is None:
            env = os.environ.get("CONTOURLINE_THREADS")
            self.threads = int(env) if env else (os.cpu_count() or 1)

    @property
    def visibility_mode(self):
        if self.visibility is not None:
            return self.visibility
        return "vote" if self.extract == "interpolated" else "qi"


@dataclass
class Result:
    mesh: object
    camera: Camera
    graph: viewgraph.ViewGraph
    chains: list
    strokes: list
    svg: str
    counters: dict
    simplification: dict
    attempts: int = 1


def compute_curves(mesh, camera, config):
    if config.extract == "interpolated":
        fld = interpolated.vertex_normals(mesh)
        curve = interpolated.extract_interpolated(mesh, camera, fld)
        kr = interpolated.radial_curvature(mesh, camera, fld)
        curve.curtain_folds = interpolated.interpolated_curtain_folds(curve, kr)
        return curve
    index = None
    if config.extract == "dual":
        index = _dual_index(mesh, config.index)
    return extraction.extract(mesh, camera, config.extract, index=index,
                              num_seeds=config.num_seeds, seed=config.seed)


def _dual_index(mesh, path):
    if path and Path(path).exists():
        try:
            return extraction.DualIndex.load(path, mesh)
        except ValueError as exc:
            logger.warning("rebuilding dual index: %s", exc)
    index = extraction.build_dual_index(mesh)
    if path:
        index.save(path)
    return index


def analyse(mesh, camera, config, accel=None):
    """Steps 1-6: curves, View Graph and resolved visibility."""
    curves = compute_curves(mesh, camera, config)
    graph = viewgraph.build_view_graph(curves, mesh, camera, split_near=config.split_near,
                                       method=config.extract)
    accel = accel or visibility.RayAccel(mesh)
    visibility.resolve(graph, accel, config.visibility_mode, votes=config.votes)
    visibility.require_resolved(graph)
    graph.check_links()
    order = [s for s in graph.stage_log if s in STAGES]
    if order != list(STAGES):
        raise AssertionError(f"pipeline stages out of order: {order}")
    return curves, graph, accel


def render(graph, config, accel=None, style=None):
    canvas = stylize.Canvas.for_graph(graph, config.canvas_px)
    chains = stylize.build_chains(graph, config.policy, canvas, accel=accel)
    simp = stylize.simplify_topology(chains, graph, config.threshold_px)
    strokes = stylize.stylize(chains, style, smooth=config.smooth,
                              junction_lock=config.junction_lock,
                              hidden_lines=config.hidden_lines)
    svg = stylize.emit_svg(strokes, style, canvas, hidden_lines=config.hidden_lines)
    return chains, strokes, svg, simp


def counters(mesh, curves, graph, chains):
    c = {"vertices": int(len(mesh.vertices)), "faces": int(len(mesh.faces)),
         "edges": int(len(mesh.edges))}
    if isinstance(curves, extraction.ContourSet):
        c["contour_edges"] = int(len(curves.contour_edges))
        c["boundary_edges"] = int(len(curves.boundary_edges))
    else:
        c["contour_edges"] = int(len(curves.segments))
        c["boundary_edges"] = int(mesh.is_boundary.sum())
    c["segments"] = len(graph.segments)
    c["singularities"] = graph.count_kinds()
    for key in ("ray_tests", "propagated_segments", "qi_conflicts"):
        c[key] = int(graph.stats.get(key, 0))
    c["chains"] = sum(1 for ch in chains if ch.visible and not ch.removed)
    c["visible_segments"] = sum(1 for s in graph.segments.values() if s.visible)
    return c


def run(config):
    """Run a job; raises package errors (the CLI maps them to exit codes)."""
    if not Path(config.input).is_file():
        raise FileNotFoundError(f"cannot read {config.input}")
    mesh = load_mesh(config.input, allow_reorient=config.allow_reorient)
    camera = config.camera.build()
    style = stylize.Style.load(config.style) if config.style else stylize.Style()
    work = perturb_generic(mesh, default_perturbation(mesh), config.seed) if config.perturb else mesh
    attempt = 0
    while True:
        try:
            curves, graph, accel = analyse(work, camera, config)
            break
        except DegenerateGeometry as exc:
            attempt += 1
            if attempt > config.retries:
                raise
            logger.warning("degenerate configuration (%s); perturbing (attempt %d)", exc, attempt)
            work = perturb_generic(mesh, default_perturbation(mesh) * attempt,
                                   config.seed + attempt)
    chains, strokes, svg, simp = render(graph, config, accel, style)
    cnt = counters(work, curves, graph, chains)
    cnt["perturbation_attempts"] = attempt
    cnt["simplify_iterations"] = simp["iterations"]
    cnt["threads"] = config.threads
    _write(config.out, svg)
    if config.dump_viewgraph:
        _write(config.dump_viewgraph, _json(graph.to_json()))
    if config.dump_chains:
        _write(config.dump_chains, _json({"chains": [c.to_dict() for c in chains]}))
    if config.stats_path:
        _write(config.stats_path, _json(cnt))
    return Result(work, camera, graph, chains, strokes, svg, cnt, simp, attempt + 1)


def _json(obj):
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def _write(path, text):
    p = Path(path)
    if p.parent and not p.parent.exists():
        raise FileNotFoundError(f"output directory {p.parent} does not exist")
    p.write_text(text)
