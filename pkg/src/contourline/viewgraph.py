"""View Graph: projected curve segments linked through typed singularities.

Construction follows the classic hidden-line pipeline: segments per curve
edge, then curtain folds, surface intersections (Y-junctions),
bifurcations, and finally image-space intersections (T-junctions), where
the far segment is split.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import predicates as pr
from .errors import DegenerateDepthTie, ZeroOrientation
from .extraction import ContourSet
from .interpolated import InterpolatedCurve
from .mesh import project_many
from .sweep import brute_force_crossings, sweep_crossings

logger = logging.getLogger(__name__)

SCHEMA = "vg-1"


class CurveType(str, Enum):
    CONTOUR = "contour"
    BOUNDARY = "boundary"
    INTERPOLATED = "interpolated-contour"


class Visibility(str, Enum):
    UNKNOWN = "unknown"
    VISIBLE = "visible"
    INVISIBLE = "invisible"


class SingularityKind(str, Enum):
    IMAGE = "image-space-intersection"
    SURFACE = "surface-intersection"
    CONTOUR_FOLD = "contour-curtain-fold"
    BOUNDARY_FOLD = "boundary-curtain-fold"
    BIFURCATION = "bifurcation"


@dataclass(eq=False)
class Segment:
    """Piece ``[t0, t1]`` of a straight 3D carrier ``a -> b``.

    Mesh-curve carriers are mesh edges oriented from the lower vertex
    index; interpolated carriers join two edge crossings within a face.
    ``tail`` is the ``t0`` end, ``head`` the ``t1`` end.  Links are
    ``("seg", id, end)``, ``("sing", id)`` or None.
    """
    id: int
    kind: CurveType
    a: np.ndarray
    b: np.ndarray
    t0: float
    t1: float
    p0: np.ndarray
    p1: np.ndarray
    q0: np.ndarray
    q1: np.ndarray
    edge: int = -1
    face: int = -1
    v0: int = -1            # mesh vertex at the tail, if any
    v1: int = -1
    key0: tuple = None      # logical endpoint identity for linking
    key1: tuple = None
    tail: tuple = None
    head: tuple = None
    parent: int = -1
    convexity: int = 0
    local_invisible: bool = False
    visibility: Visibility = Visibility.UNKNOWN
    qi: int | None = None
    chain: int = -1
    source_index: int = -1  # face-segment index for interpolated curves

    def point(self, t):
        return self.a + t * (self.b - self.a)

    def end_link(self, end):
        return self.tail if end == 0 else self.head

    def set_end(self, end, link):
        if end == 0:
            self.tail = link
        else:
            self.head = link

    @property
    def is_mesh_curve(self):
        return self.kind is not CurveType.INTERPOLATED

    @property
    def visible(self):
        return self.visibility is Visibility.VISIBLE


@dataclass
class Ref:
    seg: int
    end: int | None     # None: the segment passes through (T-junction near side)
    role: str
    local: int | None = None
    t: float | None = None  # carrier parameter of a pass-through reference


@dataclass(eq=False)
class Singularity:
    id: int
    kind: SingularityKind
    anchor2d: np.ndarray
    anchor3d: np.ndarray
    refs: list
    vertex: int = -1
    extra: dict = field(default_factory=dict)

    def refs_of(self, seg):
        return [r for r in self.refs if r.seg == seg]


class ViewGraph:
    def __init__(self, mesh, camera, method="brute"):
        self.mesh = mesh
        self.camera = camera
        self.method = method
        self.segments = {}
        self.singularities = {}
        self._next_seg = 0
        self._next_sing = 0
        self.stats = {"ray_tests": 0, "propagated_segments": 0, "qi_conflicts": 0}
        self.stage_log = []
        self.vertex_pieces = {}
        self.vertex_local = {}
        self.crossings = []
        self.chains = []
        lo, hi = mesh.bbox
        centre = 0.5 * (lo + hi)
        self.reach = 4.0 * (mesh.diagonal + float(np.linalg.norm(centre - camera.origin))) + 1.0
        self._sing_of_seg = {}

    # -- bookkeeping --------------------------------------------------------

    def add_segment(self, **kw):
        seg = Segment(id=self._next_seg, **kw)
        self._next_seg += 1
        self.segments[seg.id] = seg
        return seg

    def add_singularity(self, kind, anchor2d, anchor3d, refs, vertex=-1, **extra):
        s = Singularity(self._next_sing, kind, np.asarray(anchor2d, float),
                        np.asarray(anchor3d, float), list(refs), vertex, dict(extra))
        self._next_sing += 1
        self.singularities[s.id] = s
        for r in s.refs:
            self._sing_of_seg.setdefault(r.seg, set()).add(s.id)
            if r.end is not None:
                self.segments[r.seg].set_end(r.end, ("sing", s.id))
        return s

    def link(self, a, ea, b, eb):
        self.segments[a].set_end(ea, ("seg", b, eb))
        self.segments[b].set_end(eb, ("seg", a, ea))

    def unlink(self, a, ea):
        lk = self.segments[a].end_link(ea)
        if lk is not None and lk[0] == "seg":
            self.segments[lk[1]].set_end(lk[2], None)
        self.segments[a].set_end(ea, None)

    def eye(self, p):
        return self.camera.eye(p, self.reach)

    def ordered(self):
        return [self.segments[k] for k in sorted(self.segments)]

    def by_kind(self, kind):
        return [s for s in self.singularities.values() if s.kind is kind]

    def count_kinds(self):
        out = {k.value: 0 for k in SingularityKind}
        for s in self.singularities.values():
            out[s.kind.value] += 1
        return out

    # -- splitting ------------------------------------------------------------

    def split(self, seg_id, params):
        """Split a segment at increasing parameters (in its carrier's space).

        Returns the children in order.  Existing links and singularity
        references on the outer ends move to the first and last child.
        """
        seg = self.segments.pop(seg_id)
        ts = [seg.t0] + list(params) + [seg.t1]
        pts3 = [seg.p0] + [seg.point(t) for t in params] + [seg.p1]
        inner2 = project_many(self.camera, np.array(pts3[1:-1])) [0] if params else []
        pts2 = [seg.q0] + list(inner2) + [seg.q1]
        children = []
        for k in range(len(ts) - 1):
            c = self.add_segment(
                kind=seg.kind, a=seg.a, b=seg.b, t0=ts[k], t1=ts[k + 1], p0=pts3[k],
                p1=pts3[k + 1], q0=np.asarray(pts2[k]), q1=np.asarray(pts2[k + 1]),
                edge=seg.edge, face=seg.face,
                v0=seg.v0 if k == 0 else -1, v1=seg.v1 if k == len(ts) - 2 else -1,
                key0=seg.key0 if k == 0 else None, key1=seg.key1 if k == len(ts) - 2 else None,
                parent=seg.parent if seg.parent >= 0 else seg.id, convexity=seg.convexity,
                local_invisible=seg.local_invisible, visibility=seg.visibility, qi=seg.qi,
                source_index=seg.source_index)
            children.append(c)
        first, last = children[0], children[-1]
        for end, child, cend in ((0, first, 0), (1, last, 1)):
            lk = seg.end_link(end)
            child.set_end(cend, lk)
            if lk is not None and lk[0] == "seg":
                if lk[1] == seg_id:
                    # Self-loop (a one-segment cycle): reconnect to the other child.
                    other = last if end == 0 else first
                    child.set_end(cend, ("seg", other.id, 1 - cend))
                else:
                    self.segments[lk[1]].set_end(lk[2], ("seg", child.id, cend))
        for sid in self._sing_of_seg.pop(seg_id, set()):
            s = self.singularities[sid]
            for r in s.refs:
                if r.seg != seg_id:
                    continue
                if r.end == 0:
                    r.seg = first.id
                elif r.end == 1:
                    r.seg = last.id
                else:
                    r.seg = _child_at(children, r.t).id if r.t is not None else first.id
                self._sing_of_seg.setdefault(r.seg, set()).add(sid)
        # Only the segment's own end vertices can reference it.
        for v in {seg.v0, seg.v1} - {-1}:
            pieces = self.vertex_pieces.get(v, [])
            for i, (sid, end) in enumerate(pieces):
                if sid == seg_id:
                    pieces[i] = (first.id if end == 0 else last.id, end)
            for i, item in enumerate(self.vertex_local.get(v) or []):
                if item[0] == seg_id:
                    self.vertex_local[v][i] = (first.id if item[1] == 0 else last.id,) + tuple(item[1:])
        return children

    # -- traversal ------------------------------------------------------------

    def link_components(self, ids=None):
        """Maximal runs joined by direct segment-segment links, in walk order."""
        ids = sorted(self.segments) if ids is None else sorted(ids)
        allowed = set(ids)
        seen = set()
        runs = []
        for sid in ids:
            if sid in seen:
                continue
            # Walk backwards to a run start (or detect a cycle).
            cur, cur_end = sid, 0
            start = (sid, 0)
            closed = False
            while True:
                lk = self.segments[cur].end_link(cur_end)
                if lk is None or lk[0] != "seg" or lk[1] not in allowed:
                    break
                cur, cur_end = lk[1], 1 - lk[2]
                if (cur, cur_end) == start or cur == sid:
                    closed = True
                    break
            if closed:
                cur, forward_end = sid, 1
            else:
                forward_end = 1 - cur_end
            order = []
            flags = []
            while True:
                seen.add(cur)
                order.append(cur)
                flags.append(forward_end == 1)
                lk = self.segments[cur].end_link(forward_end)
                if lk is None or lk[0] != "seg" or lk[1] not in allowed or lk[1] in seen:
                    break
                cur, forward_end = lk[1], 1 - lk[2]
            runs.append((order, flags, closed))
        return runs

    def check_links(self):
        """Assert head/tail links are mutual and singularity refs resolve."""
        for s in self.segments.values():
            for end in (0, 1):
                lk = s.end_link(end)
                if lk is None:
                    continue
                if lk[0] == "seg":
                    o = self.segments[lk[1]]
                    if o.end_link(lk[2]) != ("seg", s.id, end):
                        raise AssertionError(f"segment {s.id} end {end}: one-way link")
                elif lk[1] not in self.singularities:
                    raise AssertionError(f"segment {s.id}: dangling singularity {lk[1]}")
        for sg in self.singularities.values():
            for r in sg.refs:
                if r.seg not in self.segments:
                    raise AssertionError(f"singularity {sg.id} references a removed segment")
                if r.end is not None and self.segments[r.seg].end_link(r.end) != ("sing", sg.id):
                    raise AssertionError(f"singularity {sg.id}: segment {r.seg} not attached")

    # -- output ---------------------------------------------------------------

    def to_json(self):
        def link(lk):
            if lk is None:
                return None
            if lk[0] == "seg":
                return {"segment": lk[1], "end": "tail" if lk[2] == 0 else "head"}
            return {"singularity": lk[1]}

        def pt(q, p):
            return {"2d": [float(q[0]), float(q[1])], "3d": [float(x) for x in p]}

        segs = []
        for s in self.ordered():
            segs.append({
                "id": s.id, "type": s.kind.value, "p0": pt(s.q0, s.p0), "p1": pt(s.q1, s.p1),
                "tail": link(s.tail), "head": link(s.head), "visibility": s.visibility.value,
                "qi": _effective_qi(s),
                "source": {"edge": s.edge, "face": s.face, "t0": s.t0, "t1": s.t1,
                           "parent": s.parent, "convexity": s.convexity}})
        sings = []
        for k in sorted(self.singularities):
            g = self.singularities[k]
            sings.append({
                "id": g.id, "kind": g.kind.value,
                "anchor": {"2d": [float(x) for x in g.anchor2d],
                           "3d": [float(x) for x in g.anchor3d]},
                "vertex": g.vertex,
                "incident": [{"segment": r.seg, "end": None if r.end is None else
                              ("tail" if r.end == 0 else "head"), "role": r.role,
                              "local": r.local} for r in g.refs],
                "flags": {k2: v for k2, v in sorted(g.extra.items())
                          if isinstance(v, (bool, int, float, str))}})
        return {"schema": SCHEMA, "method": self.method, "mesh": self.mesh.hash,
                "camera": self.camera.to_dict(), "segments": segs, "singularities": sings,
                "counters": {k: self.stats.get(k, 0) for k in
                             ("ray_tests", "propagated_segments", "qi_conflicts")},
                "stages": list(self.stage_log)}


def _effective_qi(s):
    if s.qi is None:
        return None
    return max(s.qi, 1) if s.local_invisible else s.qi


def _child_at(children, t):
    for c in children:
        if c.t0 <= t <= c.t1:
            return c
    return children[-1]


# ---------------------------------------------------------------------------
# Step 1: segments

def build_segments(curves, mesh, camera, method=None, graph=None):
    """One segment per curve edge (or interpolated face segment), linked where
    exactly two pieces meet."""
    if graph is None:
        graph = ViewGraph(mesh, camera, method or getattr(curves, "method", "interpolated"))
    P = mesh.vertices
    if isinstance(curves, ContourSet):
        conv = dict(zip(curves.contour_edges.tolist(), curves.convexity.tolist()))
        items = [(int(e), CurveType.CONTOUR) for e in curves.contour_edges]
        items += [(int(e), CurveType.BOUNDARY) for e in curves.boundary_edges]
        _add_edge_segments(graph, items, conv)
    elif isinstance(curves, InterpolatedCurve):
        items = [(int(e), CurveType.BOUNDARY) for e in np.flatnonzero(mesh.is_boundary)]
        _add_edge_segments(graph, items, {})
        _add_interp_segments(graph, curves)
    else:
        raise TypeError(f"cannot build segments from {type(curves).__name__}")
    graph.stage_log.append("build_segments")
    return graph


def _add_edge_segments(graph, items, conv):
    mesh, camera = graph.mesh, graph.camera
    P = mesh.vertices
    verts = np.unique(mesh.edges[[e for e, _ in items]].reshape(-1)) if items else np.zeros(0, int)
    q = {}
    if len(verts):
        xy, _ = project_many(camera, P[verts])
        q = {int(v): xy[k] for k, v in enumerate(verts)}
    items = sorted(items)
    for e, kind in items:
        a, b = (int(x) for x in mesh.edges[e])
        graph.add_segment(kind=kind, a=P[a], b=P[b], t0=0.0, t1=1.0, p0=P[a], p1=P[b],
                          q0=q[a], q1=q[b], edge=e, v0=a, v1=b, key0=("v", a), key1=("v", b),
                          convexity=int(conv.get(e, 0)))
    pieces = graph.vertex_pieces
    for s in graph.ordered():
        if s.is_mesh_curve:
            pieces.setdefault(s.v0, []).append((s.id, 0))
            pieces.setdefault(s.v1, []).append((s.id, 1))
    for v in sorted(pieces):
        ps = pieces[v]
        if len(ps) == 2:
            (a, ea), (b, eb) = ps
            graph.link(a, ea, b, eb)


def _add_interp_segments(graph, curve):
    mesh, camera = graph.mesh, graph.camera
    edges = sorted(curve.edge_point)
    q = {}
    if edges:
        xy, _ = project_many(camera, np.array([curve.edge_point[e] for e in edges]))
        q = {e: xy[k] for k, e in enumerate(edges)}
    by_edge = {}
    for k, (f, ea, eb) in enumerate(curve.segments.tolist()):
        pa, pb = curve.edge_point[ea], curve.edge_point[eb]
        s = graph.add_segment(kind=CurveType.INTERPOLATED, a=pa, b=pb, t0=0.0, t1=1.0, p0=pa,
                              p1=pb, q0=q[ea], q1=q[eb], face=f, key0=("e", ea),
                              key1=("e", eb), source_index=k)
        by_edge.setdefault(ea, []).append((s.id, 0))
        by_edge.setdefault(eb, []).append((s.id, 1))
    graph.interp_ends = by_edge
    graph.interp_curve = curve
    for e in sorted(by_edge):
        ps = by_edge[e]
        if len(ps) == 2:
            (a, ea), (b, eb) = ps
            graph.link(a, ea, b, eb)


# ---------------------------------------------------------------------------
# Local occlusion at mesh vertices

def _local_counts(graph, v):
    """One-ring overlap count L for each curve piece leaving vertex ``v``."""
    mesh = graph.mesh
    P = mesh.vertices
    p = P[v]
    eye = graph.eye(p)
    out = []
    ring = mesh.vertex_faces(v)
    for sid, end in graph.vertex_pieces[v]:
        s = graph.segments[sid]
        w = s.v1 if end == 0 else s.v0
        if w < 0:
            a, b = mesh.edges[s.edge]
            w = int(b) if a == v else int(a)
        adj = set(mesh.edge_faces[s.edge].tolist())
        n = 0
        for f in ring.tolist():
            if f in adj:
                continue
            tri = [int(x) for x in mesh.faces[f]]
            k = tri.index(v)
            qv, rv = tri[(k + 1) % 3], tri[(k + 2) % 3]
            if pr.edge_occluded_by_face(p, P[w], P[qv], P[rv], eye):
                n += 1
        out.append((sid, end, n))
    return out


def compute_vertex_locals(graph, strict=False):
    """One-ring overlap counts at every curve vertex of degree >= 2.

    An exact zero in the overlap test raises ZeroOrientation when ``strict``;
    otherwise the vertex is recorded as inconclusive (None).
    """
    inconclusive = 0
    for v in sorted(graph.vertex_pieces):
        if len(graph.vertex_pieces[v]) < 2:
            continue
        try:
            graph.vertex_local[v] = _local_counts(graph, v)
        except ZeroOrientation:
            if strict:
                raise
            inconclusive += 1
            graph.vertex_local[v] = None
    if inconclusive:
        logger.warning("local overlap test inconclusive at %d vertices", inconclusive)
    graph.stats["inconclusive_vertices"] = inconclusive


def _vertex_anchor(graph, v):
    xy, _ = project_many(graph.camera, graph.mesh.vertices[v][None])
    return xy[0], graph.mesh.vertices[v]


# ---------------------------------------------------------------------------
# Steps 2-4

def detect_curtain_folds(graph, mesh=None, camera=None):
    """Unlink degree-2 mesh vertices where visibility can change locally.

    Contours: convex meets concave, or the one-ring hides one side only.
    Boundaries: exactly one side is hidden by a one-ring face.
    Interpolated curves: split at the recorded radial-curvature markers.
    """
    if not graph.vertex_local:
        compute_vertex_locals(graph)
    for v in sorted(graph.vertex_pieces):
        pieces = graph.vertex_pieces[v]
        if len(pieces) != 2:
            continue
        sa, sb = (graph.segments[sid] for sid, _ in pieces)
        if sa.kind is not sb.kind:
            continue
        local = graph.vertex_local.get(v)
        la, lb = (None, None) if local is None else (local[0][2], local[1][2])
        kind = (SingularityKind.CONTOUR_FOLD if sa.kind is CurveType.CONTOUR
                else SingularityKind.BOUNDARY_FOLD)
        if sa.kind is CurveType.CONTOUR and sa.convexity != sb.convexity:
            near = 0 if sa.convexity > sb.convexity else 1
        elif local is None or la != lb:
            near = 0 if (la is None or la < lb) else 1
        else:
            continue
        (a, ea), (b, eb) = pieces
        graph.unlink(a, ea)
        refs = [(a, ea, la), (b, eb, lb)]
        n_ref, f_ref = refs[near], refs[1 - near]
        xy, p = _vertex_anchor(graph, v)
        graph.add_singularity(kind, xy, p, [Ref(n_ref[0], n_ref[1], "near", n_ref[2]),
                                            Ref(f_ref[0], f_ref[1], "far", f_ref[2])],
                              vertex=v, inconclusive=local is None,
                              increment=None if local is None else f_ref[2] - n_ref[2])
    curve = getattr(graph, "interp_curve", None)
    if curve is not None:
        _split_interp_folds(graph, curve)
    graph.stage_log.append("detect_curtain_folds")
    return graph


def _split_interp_folds(graph, curve):
    by_source = {s.source_index: s.id for s in graph.segments.values()
                 if s.kind is CurveType.INTERPOLATED}
    graph.fold_windows = []
    for cf in curve.curtain_folds:
        sid = by_source[cf.segment]
        first, second = graph.split(sid, [cf.s])
        near, far = (first, second) if cf.near_first else (second, first)
        ne, fe = (1, 0) if cf.near_first else (0, 1)
        xy, _ = project_many(graph.camera, cf.point[None])
        sg = graph.add_singularity(SingularityKind.CONTOUR_FOLD, xy[0], cf.point,
                                   [Ref(near.id, ne, "near"), Ref(far.id, fe, "far")],
                                   face=cf.face)
        graph.fold_windows.append(sg.id)


def detect_surface_intersections(graph, mesh=None):
    """Y-junctions where contours meet boundaries (by shared vertex or edge)."""
    for v in sorted(graph.vertex_pieces):
        pieces = graph.vertex_pieces[v]
        kinds = {graph.segments[sid].kind for sid, _ in pieces}
        if not (CurveType.CONTOUR in kinds and CurveType.BOUNDARY in kinds):
            continue
        local = graph.vertex_local.get(v)
        refs = []
        for k, (sid, end) in enumerate(pieces):
            graph.unlink(sid, end)
            refs.append(Ref(sid, end, graph.segments[sid].kind.value,
                            None if local is None else local[k][2]))
        xy, p = _vertex_anchor(graph, v)
        graph.add_singularity(SingularityKind.SURFACE, xy, p, refs, vertex=v,
                              inconclusive=local is None)
    curve = getattr(graph, "interp_curve", None)
    if curve is not None:
        mesh = graph.mesh
        boundary_seg = {s.edge: s.id for s in graph.segments.values()
                        if s.kind is CurveType.BOUNDARY}
        for e in sorted(graph.interp_ends):
            if not mesh.is_boundary[e]:
                continue
            (sid, end), = [(s, en) for s, en in graph.interp_ends[e]
                           if s in graph.segments] or [_resolve_interp_end(graph, e)]
            bid = boundary_seg[e]
            t = curve.edge_t[e]
            lower, upper = graph.split(bid, [t])
            p = curve.edge_point[e]
            graph.add_singularity(SingularityKind.SURFACE, graph.segments[sid].q1 if end
                                  else graph.segments[sid].q0, p,
                                  [Ref(sid, end, "contour"), Ref(lower.id, 1, "boundary"),
                                   Ref(upper.id, 0, "boundary")], edge=int(e))
    graph.stage_log.append("detect_surface_intersections")
    return graph


def _resolve_interp_end(graph, e):
    for s in graph.segments.values():
        if s.key0 == ("e", e):
            return s.id, 0
        if s.key1 == ("e", e):
            return s.id, 1
    raise KeyError(e)


def detect_bifurcations(graph, mesh=None):
    """Vertices with three or more contour pieces and no boundary."""
    for v in sorted(graph.vertex_pieces):
        pieces = graph.vertex_pieces[v]
        kinds = [graph.segments[sid].kind for sid, _ in pieces]
        if CurveType.BOUNDARY in kinds or len(pieces) < 3:
            continue
        local = graph.vertex_local.get(v)
        refs = []
        for k, (sid, end) in enumerate(pieces):
            graph.unlink(sid, end)
            refs.append(Ref(sid, end, "contour", None if local is None else local[k][2]))
        xy, p = _vertex_anchor(graph, v)
        graph.add_singularity(SingularityKind.BIFURCATION, xy, p, refs, vertex=v,
                              inconclusive=local is None)
    graph.stage_log.append("detect_bifurcations")
    return graph


# ---------------------------------------------------------------------------
# Step 5: image-space intersections

def _fold_window_pairs(graph):
    """Segments within two links of each interpolated curtain fold."""
    windows = []
    for sid in getattr(graph, "fold_windows", []):
        sg = graph.singularities[sid]
        members = set()
        for r in sg.refs:
            cur, end = r.seg, 1 - r.end
            for _ in range(2):
                members.add(cur)
                lk = graph.segments[cur].end_link(end)
                if lk is None or lk[0] != "seg":
                    break
                cur, end = lk[1], 1 - lk[2]
        windows.append(members)
    return windows


def _logically_adjacent(a, b, mesh):
    if a.is_mesh_curve and b.is_mesh_curve:
        return bool({a.v0, a.v1, *mesh.edges[a.edge]} & {*mesh.edges[b.edge]}) or a.edge == b.edge
    keys_a = {a.key0, a.key1} - {None}
    keys_b = {b.key0, b.key1} - {None}
    if keys_a & keys_b:
        return True
    if not a.is_mesh_curve and not b.is_mesh_curve:
        return a.face == b.face
    m, other = (a, b) if a.is_mesh_curve else (b, a)
    return ("e", m.edge) in ({other.key0, other.key1} - {None})


def _forward_depth(camera, p):
    return float(np.dot(p - camera.center, camera._normal))


def _param3d(camera, seg, s):
    """Carrier parameter of the 3D point projecting to 2D parameter ``s``."""
    if camera.is_perspective:
        za, zb = _forward_depth(camera, seg.p0), _forward_depth(camera, seg.p1)
        mu = s * za / ((1.0 - s) * zb + s * za)
    else:
        mu = s
    return seg.t0 + mu * (seg.t1 - seg.t0)


def _depth(camera, p):
    if camera.is_perspective:
        return float(np.linalg.norm(p - camera.center))
    return float(np.dot(p - camera.origin, camera.direction))


def _side_counts(graph, near, far, x_near):
    """Faces of the near edge lying on the tail / head side of the far segment."""
    if not near.is_mesh_curve:
        return None, None
    mesh = graph.mesh
    P = mesh.vertices
    a, b = mesh.edges[near.edge]
    A, B = P[a], P[b]
    eye = graph.eye(x_near)
    counts = [0, 0]
    for f in mesh.edge_faces[near.edge]:
        if f < 0:
            continue
        opp = next(int(x) for x in mesh.faces[f] if x != a and x != b)
        for k, d in enumerate((far.p0, far.p1)):
            if pr.same_side(A, B, eye, d, P[opp]):
                counts[k] += 1
    return counts[0], counts[1]


def intersect_image_space(graph, camera=None, *, split_near=False, use_brute_force=False):
    """Find proper image crossings, order them by depth, split far segments."""
    camera = graph.camera
    segs = graph.ordered()
    arr = np.array([[s.q0[0], s.q0[1], s.q1[0], s.q1[1]] for s in segs]).reshape(-1, 4)
    if use_brute_force:
        pairs = [(i, j, None) for i, j in brute_force_crossings(arr)]
    else:
        pairs = sweep_crossings(arr, graph.stats)
    windows = _fold_window_pairs(graph)
    records = []
    for i, j, _ in pairs:
        si, sj = segs[i], segs[j]
        if _logically_adjacent(si, sj, graph.mesh):
            continue
        if any(si.id in w and sj.id in w for w in windows):
            graph.stats["suppressed_fold_crossings"] = graph.stats.get(
                "suppressed_fold_crossings", 0) + 1
            continue
        s, t = pr.crossing_parameters(si.q0, si.q1, sj.q0, sj.q1)
        li, lj = _param3d(camera, si, s), _param3d(camera, sj, t)
        xi, xj = si.point(li), sj.point(lj)
        di, dj = _depth(camera, xi), _depth(camera, xj)
        if abs(di - dj) <= 1e-9 * max(abs(di), abs(dj), 1e-300):
            raise DegenerateDepthTie(f"segments {si.id} and {sj.id} cross at equal depth")
        if di < dj:
            near, far, ln, lf, xn, xf = si, sj, li, lj, xi, xj
        else:
            near, far, ln, lf, xn, xf = sj, si, lj, li, xj, xi
        n_tail, n_head = _side_counts(graph, near, far, xn)
        q = si.q0 + s * (si.q1 - si.q0)
        records.append(dict(near=near.id, far=far.id, ln=ln, lf=lf, xn=xn, xf=xf, q=q,
                            n_tail=n_tail, n_head=n_head))
    # Split each segment once at all of its crossing parameters.
    cuts = {}
    for r in records:
        cuts.setdefault(r["far"], []).append(r["lf"])
        if split_near:
            cuts.setdefault(r["near"], []).append(r["ln"])
    children = {}
    for sid in sorted(cuts):
        ts = sorted(set(cuts[sid]))
        children[sid] = graph.split(sid, ts)
    for r in records:
        fc = children[r["far"]]
        k = next(i for i, c in enumerate(fc[:-1]) if c.t1 == r["lf"])
        lower, upper = fc[k], fc[k + 1]
        if r["n_tail"] is None:
            roles = ("far", "far")
        elif r["n_tail"] > r["n_head"]:
            roles = ("far-occluded", "far-unoccluded")
        elif r["n_tail"] < r["n_head"]:
            roles = ("far-unoccluded", "far-occluded")
        else:
            roles = ("far", "far")
        refs = [Ref(lower.id, 1, roles[0], r["n_tail"]), Ref(upper.id, 0, roles[1], r["n_head"])]
        if r["near"] in children:
            nc = children[r["near"]]
            if split_near:
                k = next(i for i, c in enumerate(nc[:-1]) if c.t1 == r["ln"])
                refs = [Ref(nc[k].id, 1, "near"), Ref(nc[k + 1].id, 0, "near")] + refs
            else:
                refs = [Ref(_child_at(nc, r["ln"]).id, None, "near", t=r["ln"])] + refs
        else:
            refs = [Ref(r["near"], None, "near", t=r["ln"])] + refs
        near_seg = graph.segments[refs[0].seg]
        graph.add_singularity(SingularityKind.IMAGE, r["q"], r["xn"], refs,
                              far_point=r["xf"].tolist(), near_kind=near_seg.kind.value)
    graph.crossings = records
    graph.stats["image_crossings"] = len(records)
    graph.stage_log.append("intersect_image_space")
    return graph


def build_view_graph(curves, mesh, camera, *, split_near=False, method=None, strict=True):
    """Steps 1-5: segments and every singularity.

    With ``strict`` a degenerate local overlap test raises ZeroOrientation
    so the caller can perturb the mesh and retry.
    """
    g = build_segments(curves, mesh, camera, method=method)
    compute_vertex_locals(g, strict=strict)
    detect_curtain_folds(g)
    detect_surface_intersections(g)
    detect_bifurcations(g)
    intersect_image_space(g, split_near=split_near)
    return g
