"""Curve visibility: ray tests, chain propagation, Quantitative Invisibility.

QI here is the geometric occluder count: the number of mesh faces crossed
by the segment from a curve point to the eye, ignoring faces adjacent to
the curve's own edge.  A segment is visible iff its QI is zero and it is
not locally invisible (a concave contour, or a boundary on a back face).

Propagation uses two exact local rules, both derived from the one-ring
overlap predicate:

* at a mesh vertex p, QI(e) - L_p(e) is the same for every curve piece e
  leaving p, where L_p(e) counts one-ring faces of p hiding e near p;
* at an image crossing, the far curve's QI jumps by the difference in the
  number of near-edge faces lying on either side.
"""

from __future__ import annotations

import logging
from collections import deque

import numpy as np

from .bvh import build_bvh, count_crossings
from .errors import GrazingHit, InconsistentQI, UnresolvedVisibility
from .mesh import BehindCamera, facing_signs, project_many
from .viewgraph import CurveType, SingularityKind, Visibility

logger = logging.getLogger(__name__)

_RETRY_PARAMS = (0.5, 0.5 + 0.1373, 0.5 - 0.2171, 0.5 + 0.3119)


class RayAccel:
    """BVH over the mesh triangles plus exclusion helpers."""

    def __init__(self, mesh, bvh=None):
        self.mesh = mesh
        self.bvh = bvh if bvh is not None else build_bvh(mesh)

    def edge_faces(self, edge):
        f = self.mesh.edge_faces[edge]
        return f[f >= 0]

    def face_neighbourhood(self, face):
        """Faces sharing at least one vertex with ``face``."""
        m = self.mesh
        return np.unique(np.concatenate([m.vertex_faces(v) for v in m.faces[face]]))


def _eye_points(camera, points, reach):
    if camera.is_perspective:
        return np.broadcast_to(camera.center, points.shape).copy()
    return points - reach * camera.direction


def ray_test(accel, mesh, camera, p, exclusions=(), reach=None):
    """Occluder count between surface point ``p`` and the eye."""
    p = np.asarray(p, float).reshape(1, 3)
    if reach is None:
        reach = 4.0 * (mesh.diagonal + float(np.linalg.norm(p[0] - camera.origin))) + 1.0
    counts, grazing = count_crossings(accel.bvh, mesh, p, _eye_points(camera, p, reach),
                                      [np.asarray(exclusions, dtype=np.int64)])
    if grazing[0]:
        raise GrazingHit("ray meets a triangle edge exactly")
    return int(counts[0])


def segment_qi(graph, accel, seg_ids):
    """Ray-test QI at the midpoint of each segment (retrying off grazing hits)."""
    mesh, camera = graph.mesh, graph.camera
    seg_ids = list(seg_ids)
    out = {}
    if not seg_ids:
        return out
    segs = [graph.segments[i] for i in seg_ids]
    excl = []
    for s in segs:
        if s.is_mesh_curve:
            excl.append(accel.edge_faces(s.edge))
        else:
            excl.append(accel.face_neighbourhood(s.face))
    pending = np.arange(len(segs))
    for attempt, u in enumerate(_RETRY_PARAMS):
        pts = np.array([segs[k].point(segs[k].t0 + u * (segs[k].t1 - segs[k].t0))
                        for k in pending])
        counts, grazing = count_crossings(accel.bvh, mesh, pts,
                                          _eye_points(camera, pts, graph.reach),
                                          [excl[k] for k in pending])
        graph.stats["ray_tests"] += len(pending)
        for k, c, g in zip(pending, counts, grazing):
            if not g:
                out[seg_ids[k]] = int(c)
        pending = pending[grazing]
        if not len(pending):
            return out
    raise GrazingHit(f"segment {seg_ids[pending[0]]}: every retry grazed a triangle edge")


# ---------------------------------------------------------------------------

def mark_locally_invisible(graph, mesh=None, camera=None):
    """Concave contours and boundaries on back faces can never be visible."""
    mesh, camera = graph.mesh, graph.camera
    signs = None
    marked = 0
    for s in graph.segments.values():
        if s.kind is CurveType.CONTOUR and s.convexity < 0:
            s.local_invisible = True
        elif s.kind is CurveType.BOUNDARY:
            if signs is None:
                signs = facing_signs(mesh, camera)
            s.local_invisible = bool(signs[mesh.edge_faces[s.edge, 0]] < 0)
        if s.local_invisible:
            s.visibility = Visibility.INVISIBLE
            marked += 1
    graph.stats["locally_invisible"] = marked
    graph.stage_log.append("mark_locally_invisible")
    return graph


def _resolve(seg, qi):
    seg.qi = qi
    seg.visibility = (Visibility.VISIBLE if qi == 0 and not seg.local_invisible
                      else Visibility.INVISIBLE)


def propagate_visibility(graph, accel, mesh=None, camera=None, mode="per-chain",
                         skip_known=True):
    """Resolve every segment by ray tests, per segment or per linked chain."""
    if mode == "per-segment":
        ids = [s.id for s in graph.ordered() if not (skip_known and s.local_invisible)]
        qi = segment_qi(graph, accel, ids)
        for s in graph.ordered():
            if s.id in qi:
                _resolve(s, qi[s.id])
            else:
                s.visibility = Visibility.INVISIBLE
    elif mode == "per-chain":
        runs = graph.link_components()
        todo = []
        for order, _, _ in runs:
            segs = [graph.segments[i] for i in order]
            if skip_known and all(s.local_invisible for s in segs):
                for s in segs:
                    s.visibility = Visibility.INVISIBLE
                continue
            todo.append(order)
        qi = segment_qi(graph, accel, [order[len(order) // 2] for order in todo])
        for order in todo:
            val = qi[order[len(order) // 2]]
            for sid in order:
                _resolve(graph.segments[sid], val)
            graph.stats["propagated_segments"] += len(order) - 1
    else:
        raise ValueError(f"unknown propagation mode {mode!r}")
    graph.stats["visibility_chains"] = len(graph.link_components()) if mode == "per-chain" else 0
    graph.stage_log.append("visibility")
    return graph


# ---------------------------------------------------------------------------
# Quantitative Invisibility

def qi_constraints(graph):
    """Edges (a, b, d) meaning QI(b) = QI(a) + d."""
    cons = []
    for s in graph.ordered():
        for end in (0, 1):
            lk = s.end_link(end)
            if lk is not None and lk[0] == "seg" and s.id < lk[1]:
                cons.append((s.id, lk[1], 0))
    for sg in graph.singularities.values():
        if sg.kind is SingularityKind.IMAGE:
            near = [r for r in sg.refs if r.role == "near"]
            far = [r for r in sg.refs if r.role.startswith("far")]
            for r in near[1:]:
                cons.append((near[0].seg, r.seg, 0))
            if len(far) == 2 and far[0].local is not None and far[1].local is not None:
                cons.append((far[0].seg, far[1].seg, far[1].local - far[0].local))
        else:
            refs = [r for r in sg.refs if r.local is not None]
            if sg.extra.get("inconclusive") or len(refs) != len(sg.refs):
                continue
            for r in refs[1:]:
                cons.append((refs[0].seg, r.seg, r.local - refs[0].local))
    return cons


def _bbox_seeds(graph):
    """Absolute QI from the image-extremal mesh vertices (nothing can hide them)."""
    mesh = graph.mesh
    try:
        xy, _ = project_many(graph.camera, mesh.vertices)
    except BehindCamera:
        return {}
    seeds = {}
    for axis in (0, 1):
        for v in (int(np.argmin(xy[:, axis])), int(np.argmax(xy[:, axis]))):
            local = graph.vertex_local.get(v)
            if not local:
                continue
            others = np.delete(xy[:, axis], v)
            if len(others) and (xy[v, axis] == others.min() or xy[v, axis] == others.max()):
                continue                      # tie: not strictly extremal
            for sid, end, n in local:
                if sid in graph.segments:
                    seeds[sid] = n
    return seeds


def propagate_qi(graph, accel, mesh=None, camera=None):
    """Seed one QI per connected component, then propagate exactly."""
    if any(s.kind is CurveType.INTERPOLATED for s in graph.segments.values()):
        raise ValueError("QI propagation is not defined for interpolated contours")
    adj = {sid: [] for sid in graph.segments}
    for a, b, d in qi_constraints(graph):
        adj[a].append((b, d))
        adj[b].append((a, -d))
    seeds = _bbox_seeds(graph)
    seen = set()
    components = []
    for sid in sorted(adj):
        if sid in seen:
            continue
        comp, rel = [], {sid: 0}
        queue = deque([sid])
        seen.add(sid)
        conflict = None
        while queue:
            a = queue.popleft()
            comp.append(a)
            for b, d in adj[a]:
                if b not in rel:
                    rel[b] = rel[a] + d
                    seen.add(b)
                    queue.append(b)
                elif rel[b] != rel[a] + d and conflict is None:
                    conflict = (b, rel[b], rel[a] + d)
        components.append((sorted(comp), rel, conflict))
    # One ray test per component lacking a bounding-box seed.
    need = []
    for comp, rel, conflict in components:
        if conflict is None and not any(s in seeds for s in comp):
            need.append(comp[0])
    tested = segment_qi(graph, accel, need)
    graph.stats["qi_components"] = len(components)
    fallback = []
    for comp, rel, conflict in components:
        try:
            if conflict is not None:
                raise InconsistentQI(*conflict)
            anchors = [(s, seeds[s]) for s in comp if s in seeds]
            if not anchors:
                anchors = [(comp[0], tested[comp[0]])]
            base = anchors[0][1] - rel[anchors[0][0]]
            for s, val in anchors[1:]:
                if base + rel[s] != val:
                    raise InconsistentQI(s, base + rel[s], val)
            values = {s: base + rel[s] for s in comp}
            bad = [s for s, v in values.items() if v < 0]
            if bad:
                raise InconsistentQI(bad[0], values[bad[0]], 0)
        except InconsistentQI as exc:
            logger.warning("QI conflict, falling back to ray tests: %s", exc)
            graph.stats["qi_conflicts"] += 1
            graph.stats.setdefault("qi_conflict_details", []).append(str(exc))
            fallback.extend(comp)
            continue
        for s, v in values.items():
            _resolve(graph.segments[s], v)
        graph.stats["propagated_segments"] += len(comp) - 1
    if fallback:
        qi = segment_qi(graph, accel, fallback)
        for s in fallback:
            _resolve(graph.segments[s], qi[s])
    graph.stage_log.append("visibility")
    return graph


# ---------------------------------------------------------------------------
# Voting (interpolated contours)

def interpolated_visibility(graph, accel, mesh=None, camera=None, votes_per_chain=3):
    """Majority vote of ray tests from the nearest vertices of contour faces."""
    mesh, camera = graph.mesh, graph.camera
    runs = graph.link_components()
    P = mesh.vertices
    for order, _, _ in runs:
        segs = [graph.segments[i] for i in order]
        if all(s.is_mesh_curve for s in segs):
            if all(s.local_invisible for s in segs):
                continue
            mid = order[len(order) // 2]
            val = segment_qi(graph, accel, [mid])[mid]
            for s in segs:
                _resolve(s, val)
            continue
        faces = []
        for s in segs:
            if not s.is_mesh_curve and (not faces or faces[-1] != s.face):
                faces.append(s.face)
        k = min(votes_per_chain, len(faces))
        picks = [faces[int(i)] for i in np.linspace(0, len(faces) - 1, k).round().astype(int)] \
            if k > 1 else [faces[len(faces) // 2]]
        pts, excl = [], []
        for f in picks:
            tri = mesh.faces[f]
            d = np.linalg.norm(camera.view_vectors(P[tri]), axis=1) if camera.is_perspective \
                else P[tri] @ camera.direction
            pts.append(P[tri[int(np.argmin(d))]])
            excl.append(accel.face_neighbourhood(f))
        pts = np.array(pts)
        counts, grazing = count_crossings(accel.bvh, mesh, pts,
                                          _eye_points(camera, pts, graph.reach), excl)
        graph.stats["ray_tests"] += len(pts)
        valid = ~grazing
        ayes = int(((counts == 0) & valid).sum())
        visible = ayes * 2 > int(valid.sum())
        for s in segs:
            s.qi = 0 if visible else None
            s.visibility = Visibility.VISIBLE if visible and not s.local_invisible \
                else Visibility.INVISIBLE
        graph.stats["vote_chains"] = graph.stats.get("vote_chains", 0) + 1
    graph.stage_log.append("visibility")
    return graph


# ---------------------------------------------------------------------------

def require_resolved(graph):
    bad = [s.id for s in graph.segments.values() if s.visibility is Visibility.UNKNOWN]
    if bad:
        raise UnresolvedVisibility(f"{len(bad)} segments unresolved (first {bad[0]})")


def visible_polylines(graph):
    """2D polylines of maximal visible runs (debug output)."""
    require_resolved(graph)
    visible = {s.id for s in graph.segments.values() if s.visible}
    # Join across singularities where exactly two visible ends meet.
    bridges = {}
    for sg in graph.singularities.values():
        ends = [(r.seg, r.end) for r in sg.refs if r.end is not None and r.seg in visible]
        if len(ends) == 2:
            (a, ea), (b, eb) = ends
            bridges[(a, ea)] = (b, eb)
            bridges[(b, eb)] = (a, ea)

    def nxt(sid, end):
        lk = graph.segments[sid].end_link(end)
        if lk is not None and lk[0] == "seg" and lk[1] in visible:
            return lk[1], lk[2]
        return bridges.get((sid, end))

    seen = set()
    out = []
    for sid in sorted(visible):
        if sid in seen:
            continue
        # Rewind to a start.
        cur, end = sid, 0
        loop = False
        while True:
            n = nxt(cur, end)
            if n is None:
                break
            cur, end = n[0], 1 - n[1]
            if cur == sid:
                loop = True
                break
        cur, fwd = (sid, 1) if loop else (cur, 1 - end)
        pts = []
        while True:
            seen.add(cur)
            s = graph.segments[cur]
            a, b = (s.q0, s.q1) if fwd == 1 else (s.q1, s.q0)
            if not pts:
                pts.append(a)
            pts.append(b)
            n = nxt(cur, fwd)
            if n is None or n[0] in seen:
                break
            cur, fwd = n[0], 1 - n[1]
        out.append((np.array(pts), loop))
    return out


def resolve(graph, accel, mode="qi", votes=3):
    """Run step 6 with the named strategy."""
    mark_locally_invisible(graph)
    if mode == "ray":
        return propagate_visibility(graph, accel, mode="per-segment")
    if mode == "propagate":
        return propagate_visibility(graph, accel, mode="per-chain")
    if mode == "qi":
        return propagate_qi(graph, accel)
    if mode == "vote":
        return interpolated_visibility(graph, accel, votes_per_chain=votes)
    raise ValueError(f"unknown visibility mode {mode!r}")
