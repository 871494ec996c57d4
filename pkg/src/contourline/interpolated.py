"""Interpolated contours: the zero set of a per-vertex orientation field.

Vertex normals are area-weighted face normals.  With g(p) = (p - c) . n
(or v . n for an orthographic view) at each vertex and linear interpolation
along edges, every face whose vertices disagree in sign holds exactly one
contour segment, so the curves are closed loops or end on the boundary.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import DegenerateFacing, DegenerateTangent, ZeroNormal

logger = logging.getLogger(__name__)


@dataclass
class VertexField:
    normals: np.ndarray
    g: np.ndarray | None = None
    kappa_r: np.ndarray | None = None
    unreliable: np.ndarray | None = None
    fallback_vertices: list = field(default_factory=list)


@dataclass
class CurtainFold:
    face: int
    segment: int        # index into InterpolatedCurve.segments
    s: float            # parameter along the segment (from its first edge end)
    point: np.ndarray
    near_first: bool    # True if the part before ``s`` has positive radial curvature


@dataclass
class InterpolatedCurve:
    """Per-face zero-crossing segments of g.

    ``segments[k] = (face, edge_a, edge_b)``; the endpoints are the crossing
    points of the two edges, stored once per edge in ``edge_point``.
    ``chains`` lists segment indices in curve order with a closed flag.
    """
    mesh: object
    g: np.ndarray
    edge_t: dict
    edge_point: dict
    segments: np.ndarray
    chains: list
    curtain_folds: list = field(default_factory=list)

    def segment_points(self, k):
        _, ea, eb = self.segments[k]
        return self.edge_point[int(ea)], self.edge_point[int(eb)]

    @property
    def num_loops(self):
        return sum(1 for _, closed in self.chains if closed)

    def edge_degrees(self):
        """Number of segments ending on each crossed edge."""
        deg = {}
        for _, ea, eb in self.segments:
            deg[int(ea)] = deg.get(int(ea), 0) + 1
            deg[int(eb)] = deg.get(int(eb), 0) + 1
        return deg


def vertex_normals(mesh):
    """Area-weighted unit vertex normals (angle-weighted where that vanishes)."""
    raw = mesh.raw_normals            # |raw| = 2 * area, so raw / 2 = A_j n_j
    nv = len(mesh.vertices)
    acc = np.zeros((nv, 3))
    for k in range(3):
        np.add.at(acc, mesh.faces[:, k], raw)
    norm = np.linalg.norm(acc, axis=1)
    fallback = []
    bad = np.flatnonzero(norm == 0)
    for v in bad:
        n = _angle_weighted(mesh, v)
        if n is None:
            raise ZeroNormal(int(v))
        logger.warning("vertex %d: area-weighted normal vanishes, using angle weights", v)
        acc[v] = n
        norm[v] = 1.0
        fallback.append(int(v))
    return VertexField(acc / norm[:, None], fallback_vertices=fallback)


def _angle_weighted(mesh, v):
    acc = np.zeros(3)
    for f in mesh.vertex_faces(v):
        tri = mesh.faces[f]
        k = int(np.flatnonzero(tri == v)[0])
        p = mesh.vertices[tri[k]]
        a = mesh.vertices[tri[(k + 1) % 3]] - p
        b = mesh.vertices[tri[(k + 2) % 3]] - p
        cosang = np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b))
        acc += np.arccos(np.clip(cosang, -1, 1)) * mesh.face_normals[f]
    n = np.linalg.norm(acc)
    return None if n == 0 else acc / n


def orientation_field(mesh, camera, fld):
    """g(p) = (p - c) . n per vertex; v . n for orthographic cameras."""
    if camera.is_perspective:
        g = np.einsum("ij,ij->i", mesh.vertices - camera.center, fld.normals)
    else:
        g = fld.normals @ camera.direction
    zero = np.flatnonzero(g == 0)
    if len(zero):
        raise DegenerateFacing(f"orientation field vanishes at vertex {int(zero[0])}")
    fld.g = g
    return g


def extract_interpolated(mesh, camera, fld=None):
    if fld is None:
        fld = vertex_normals(mesh)
    return curve_from_field(mesh, orientation_field(mesh, camera, fld))


def curve_from_field(mesh, g):
    """Zero set of the per-vertex scalar ``g`` (no zero entries) as segments."""
    g = np.asarray(g, float)
    E = mesh.edges
    ga, gb = g[E[:, 0]], g[E[:, 1]]
    crossed = np.flatnonzero((ga > 0) != (gb > 0))
    t = ga[crossed] / (ga[crossed] - gb[crossed])
    edge_t = dict(zip(crossed.tolist(), t.tolist()))
    P = mesh.vertices
    pts = P[E[crossed, 0]] + t[:, None] * (P[E[crossed, 1]] - P[E[crossed, 0]])
    edge_point = {e: pts[k] for k, e in enumerate(crossed.tolist())}
    is_crossed = np.zeros(len(E), dtype=bool)
    is_crossed[crossed] = True
    fe = mesh.face_edges
    hit = is_crossed[fe]
    rows = np.flatnonzero(hit.any(axis=1))
    segs = []
    for f in rows.tolist():
        es = fe[f][hit[f]]
        if len(es) != 2:
            # A linear field on a triangle changes sign on 0 or 2 edges.
            raise AssertionError(f"face {f} has {len(es)} sign changes")
        segs.append((f, int(es[0]), int(es[1])))
    segments = np.array(segs, dtype=np.int64).reshape(-1, 3)
    curve = InterpolatedCurve(mesh, g, edge_t, edge_point, segments, _chain(segments))
    return curve


def _chain(segments):
    """Link face segments through shared crossed edges into loops/paths."""
    by_edge = {}
    for k, (_, ea, eb) in enumerate(segments.tolist()):
        by_edge.setdefault(ea, []).append(k)
        by_edge.setdefault(eb, []).append(k)
    used = np.zeros(len(segments), dtype=bool)
    chains = []

    def walk(k, via):
        order = []
        while True:
            order.append(k)
            used[k] = True
            _, ea, eb = segments[k]
            nxt_edge = eb if ea == via else ea
            others = [j for j in by_edge[int(nxt_edge)] if j != k]
            if not others:
                return order, False, int(nxt_edge)
            j = others[0]
            if used[j]:
                return order, True, int(nxt_edge)
            k, via = j, int(nxt_edge)

    # Open chains start at edges with a single segment (boundary edges).
    for e, ks in sorted(by_edge.items()):
        if len(ks) == 1 and not used[ks[0]]:
            order, _, _ = walk(ks[0], e)
            chains.append((order, False))
    for k in range(len(segments)):
        if not used[k]:
            order, closed, _ = walk(k, int(segments[k][1]))
            chains.append((order, closed))
    return chains


# ---------------------------------------------------------------------------
# Radial curvature

def _tangent_frames(n):
    a = np.where(np.abs(n[:, [0]]) < 0.9, np.array([[1.0, 0, 0]]), np.array([[0, 1.0, 0]]))
    t1 = np.cross(n, a)
    t1 /= np.linalg.norm(t1, axis=1, keepdims=True)
    return t1, np.cross(n, t1)


def _two_ring_pairs(mesh):
    nv = len(mesh.vertices)
    E = mesh.edges
    A = sp.coo_matrix((np.ones(2 * len(E)), (np.r_[E[:, 0], E[:, 1]], np.r_[E[:, 1], E[:, 0]])),
                      shape=(nv, nv)).tocsr()
    A2 = ((A + A @ A) > 0).tocoo()
    keep = A2.row != A2.col
    return A2.row[keep], A2.col[keep]


def shape_operators(mesh, fld):
    """Per-vertex 2x2 Weingarten map fitted to normal differences (2-ring).

    Solves dn ~ S dp in each tangent frame by least squares with S
    symmetric; positive eigenvalues mean the surface bends away from its
    normal (a unit sphere gives S = I).
    """
    n = fld.normals
    t1, t2 = _tangent_frames(n)
    i, j = _two_ring_pairs(mesh)
    dp = mesh.vertices[j] - mesh.vertices[i]
    dn = n[j] - n[i]
    x, y = np.einsum("ij,ij->i", dp, t1[i]), np.einsum("ij,ij->i", dp, t2[i])
    u, v = np.einsum("ij,ij->i", dn, t1[i]), np.einsum("ij,ij->i", dn, t2[i])
    # Unknowns (a, b, c) of S = [[a, b], [b, c]]; rows [x, y, 0] -> u, [0, x, y] -> v.
    nv = len(mesh.vertices)
    M = np.zeros((nv, 3, 3))
    r = np.zeros((nv, 3))
    rows = [(np.stack([x, y, np.zeros_like(x)], 1), u), (np.stack([np.zeros_like(x), x, y], 1), v)]
    for Arow, b in rows:
        np.add.at(M, i, Arow[:, :, None] * Arow[:, None, :])
        np.add.at(r, i, Arow * b[:, None])
    M += 1e-14 * np.eye(3)
    sol = np.linalg.solve(M, r[:, :, None])[:, :, 0]
    S = np.empty((nv, 2, 2))
    S[:, 0, 0], S[:, 0, 1], S[:, 1, 0], S[:, 1, 1] = sol[:, 0], sol[:, 1], sol[:, 1], sol[:, 2]
    return S, t1, t2


def radial_curvature(mesh, camera, fld, *, strict=False):
    """Normal curvature along the view vector projected to each tangent plane.

    Where the projection nearly vanishes (view along the normal) the value
    is the mean curvature and the vertex is flagged unreliable; with
    ``strict`` a DegenerateTangent is raised instead.
    """
    S, t1, t2 = shape_operators(mesh, fld)
    view = camera.view_vectors(mesh.vertices)
    wx, wy = np.einsum("ij,ij->i", view, t1), np.einsum("ij,ij->i", view, t2)
    wn = np.hypot(wx, wy)
    vn = np.linalg.norm(view, axis=1)
    unreliable = wn < 1e-10 * vn
    if strict and unreliable.any():
        raise DegenerateTangent(f"view parallel to the normal at vertex "
                                f"{int(np.flatnonzero(unreliable)[0])}")
    safe = np.where(unreliable, 1.0, wn)
    ux, uy = wx / safe, wy / safe
    kr = S[:, 0, 0] * ux * ux + 2 * S[:, 0, 1] * ux * uy + S[:, 1, 1] * uy * uy
    mean = 0.5 * (S[:, 0, 0] + S[:, 1, 1])
    kr = np.where(unreliable, mean, kr)
    fld.kappa_r = kr
    fld.unreliable = unreliable
    return kr


def _chord(values):
    """Barycentric endpoints of the zero chord of a linear field on a face."""
    pts = []
    for k in range(3):
        a, b = k, (k + 1) % 3
        va, vb = values[a], values[b]
        if (va > 0) != (vb > 0):
            s = va / (va - vb)
            bc = np.zeros(3)
            bc[a], bc[b] = 1 - s, s
            pts.append(bc)
    return pts


def interpolated_curtain_folds(curve, kappa_r):
    """Intersect g = 0 and kappa_r = 0 chords inside contour faces."""
    mesh = curve.mesh
    markers = []
    for k, (f, ea, eb) in enumerate(curve.segments.tolist()):
        tri = mesh.faces[f]
        kv = kappa_r[tri]
        if (kv > 0).all() or (kv <= 0).all():
            continue
        gchord = _bary_of_edges(mesh, tri, curve, ea, eb)
        kchord = _chord(kv)
        if len(kchord) != 2:
            continue
        hit = _intersect_bary(gchord[0], gchord[1], kchord[0], kchord[1])
        if hit is None:
            continue
        s, bc = hit
        point = bc @ mesh.vertices[tri]
        # kappa_r interpolated at the segment start tells which part is convex.
        k_start = float(gchord[0] @ kv)
        markers.append(CurtainFold(int(f), k, float(s), point, near_first=k_start > 0))
    curve.curtain_folds = markers
    return markers


def _bary_of_edges(mesh, tri, curve, ea, eb):
    out = []
    for e in (ea, eb):
        u, w = mesh.edges[e]
        t = curve.edge_t[e]
        bc = np.zeros(3)
        bc[int(np.flatnonzero(tri == u)[0])] = 1 - t
        bc[int(np.flatnonzero(tri == w)[0])] = t
        out.append(bc)
    return out


def _intersect_bary(a0, a1, b0, b1):
    """Intersection of two chords in barycentric coordinates (2D solve)."""
    A = np.array([[a1[0] - a0[0], -(b1[0] - b0[0])],
                  [a1[1] - a0[1], -(b1[1] - b0[1])]])
    rhs = np.array([b0[0] - a0[0], b0[1] - a0[1]])
    det = np.linalg.det(A)
    if abs(det) < 1e-300:
        return None
    s, t = np.linalg.solve(A, rhs)
    if not (0 < s < 1 and 0 < t < 1):
        return None
    return s, a0 + s * (a1 - a0)
