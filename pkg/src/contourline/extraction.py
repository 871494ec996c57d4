"""Contour edge extraction: brute force, dual-space octrees, randomized search."""

from __future__ import annotations

import logging
import struct
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import predicates as pr
from .errors import DegenerateFacing
from .mesh import Camera, facing_signs

logger = logging.getLogger(__name__)


@dataclass
class ContourSet:
    """Contour and boundary edges of a mesh for one camera.

    ``convexity`` is aligned with ``contour_edges`` (+1 convex, -1 concave).
    ``complete`` is False for randomized results that may miss loops.
    """
    contour_edges: np.ndarray
    boundary_edges: np.ndarray
    convexity: np.ndarray
    method: str = "brute"
    complete: bool = True
    stats: dict = field(default_factory=dict)

    @property
    def edges(self):
        return np.union1d(self.contour_edges, self.boundary_edges)

    def edge_set(self):
        return set(self.contour_edges.tolist())


def _finish(mesh, contour, method, t0, drop_concave=False, complete=True, **stats):
    contour = np.unique(np.asarray(contour, dtype=np.int64))
    conv = mesh.convexity[contour] if len(contour) else np.zeros(0, np.int8)
    if drop_concave:
        keep = conv > 0
        contour, conv = contour[keep], conv[keep]
    stats.update(contour_edges=int(len(contour)), seconds=time.perf_counter() - t0)
    return ContourSet(contour, np.flatnonzero(mesh.is_boundary), np.asarray(conv, np.int8),
                      method, complete, stats)


def _check_facing(signs, faces):
    bad = faces[signs == 0] if len(faces) == len(signs) else np.flatnonzero(signs == 0)
    if len(bad):
        raise DegenerateFacing(f"face {int(bad[0])} is exactly edge-on "
                               f"({len(bad)} degenerate faces)")


def extract_brute_force(mesh, camera, *, drop_concave=False):
    """Every interior edge whose two faces face opposite ways."""
    t0 = time.perf_counter()
    signs = facing_signs(mesh, camera)
    _check_facing(signs, np.arange(len(signs)))
    interior = ~mesh.is_boundary
    ef = mesh.edge_faces
    contour = np.flatnonzero(interior & (signs[ef[:, 0]] != signs[np.where(interior, ef[:, 1], 0)]))
    return _finish(mesh, contour, "brute", t0, drop_concave, edges_tested=int(interior.sum()))


# ---------------------------------------------------------------------------
# Dual space

_MAGIC = b"CDX1"
_VERSION = 1
_LEAF_SIZE = 16
_MAX_DEPTH = 10


@dataclass
class DualIndex:
    """Octrees over per-face dual points, one per facet of the unit hypercube.

    A face with point p and normal n maps to s = (-n, p.n) / max|.|; an
    interior edge is the dual segment between its faces' points.  The edge
    is filed under the facet holding its first endpoint, and every node keeps
    the 4D box of both endpoints of all segments below it, so a hyperplane
    test against the box is conservative.
    """
    mesh_hash: str
    dual: np.ndarray            # (F, 4)
    items: np.ndarray           # interior edge ids in leaf order
    node_lo: np.ndarray         # (N, 4)
    node_hi: np.ndarray
    node_children: np.ndarray   # (N, 8) child node ids, -1 if absent
    node_leaf: np.ndarray       # (N,) bool
    node_start: np.ndarray      # leaf item range
    node_count: np.ndarray
    roots: np.ndarray           # (8,) root per facet, -1 if empty
    coord_scale: float = 1.0

    @property
    def num_segments(self):
        return int(len(self.items))

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<I16sdqqq", _VERSION, self.mesh_hash.encode()[:16].ljust(16),
                                 self.coord_scale, len(self.dual), len(self.items),
                                 len(self.node_lo)))
            for arr, dt in ((self.dual, "<f8"), (self.items, "<i8"), (self.node_lo, "<f8"),
                            (self.node_hi, "<f8"), (self.node_children, "<i8"),
                            (self.node_leaf, "u1"), (self.node_start, "<i8"),
                            (self.node_count, "<i8"), (self.roots, "<i8")):
                fh.write(np.ascontiguousarray(arr, dtype=dt).tobytes())

    @classmethod
    def load(cls, path, mesh=None):
        with open(path, "rb") as fh:
            data = fh.read()
        if data[:4] != _MAGIC:
            raise ValueError(f"{path}: not a dual index file")
        head = struct.calcsize("<I16sdqqq")
        version, mhash, scale, nf, ni, nn = struct.unpack_from("<I16sdqqq", data, 4)
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported index version {version}")
        mhash = mhash.decode().strip()
        if mesh is not None and mesh.hash != mhash:
            raise ValueError(f"{path}: index was built for a different mesh")
        off = 4 + head
        arrays = []
        for shape, dt in (((nf, 4), "<f8"), ((ni,), "<i8"), ((nn, 4), "<f8"), ((nn, 4), "<f8"),
                          ((nn, 8), "<i8"), ((nn,), "u1"), ((nn,), "<i8"), ((nn,), "<i8"),
                          ((8,), "<i8")):
            n = int(np.prod(shape)) * np.dtype(dt).itemsize
            arrays.append(np.frombuffer(data, dtype=dt, count=int(np.prod(shape)),
                                        offset=off).reshape(shape).copy())
            off += n
        dual, items, lo, hi, ch, leaf, start, count, roots = arrays
        return cls(mhash, dual, items, lo, hi, ch, leaf.astype(bool), start, count, roots,
                   scale)


def dual_points(mesh):
    """Per-face (-n, p.n) normalised to max-norm 1, p the first vertex."""
    n = mesh.raw_normals
    p = mesh.vertices[mesh.faces[:, 0]]
    s = np.concatenate([-n, np.einsum("ij,ij->i", p, n)[:, None]], axis=1)
    m = np.abs(s).max(axis=1, keepdims=True)
    return s / np.where(m > 0, m, 1.0)


def build_dual_index(mesh):
    dual = dual_points(mesh)
    interior = np.flatnonzero(~mesh.is_boundary)
    s0 = dual[mesh.edge_faces[interior, 0]]
    s1 = dual[mesh.edge_faces[interior, 1]]
    lo4 = np.minimum(s0, s1)
    hi4 = np.maximum(s0, s1)
    axis = np.abs(s0).argmax(axis=1)
    facet = 2 * axis + (s0[np.arange(len(s0)), axis] < 0)
    nodes_lo, nodes_hi, children, leaf, start, count = [], [], [], [], [], []
    items = []

    def build(ids, coords, depth, clo, chi):
        nid = len(nodes_lo)
        nodes_lo.append(lo4[ids].min(axis=0))
        nodes_hi.append(hi4[ids].max(axis=0))
        children.append([-1] * 8)
        if len(ids) <= _LEAF_SIZE or depth >= _MAX_DEPTH:
            leaf.append(True)
            start.append(len(items))
            count.append(len(ids))
            items.extend(ids.tolist())
            return nid
        leaf.append(False)
        start.append(0)
        count.append(0)
        mid = 0.5 * (clo + chi)
        octant = ((coords >= mid) * np.array([1, 2, 4])).sum(axis=1)
        for o in range(8):
            sel = octant == o
            if not sel.any():
                continue
            bits = np.array([(o >> k) & 1 for k in range(3)], bool)
            nlo = np.where(bits, mid, clo)
            nhi = np.where(bits, chi, mid)
            children[nid][o] = build(ids[sel], coords[sel], depth + 1, nlo, nhi)
        return nid

    roots = -np.ones(8, dtype=np.int64)
    for f in range(8):
        sel = np.flatnonzero(facet == f)
        if len(sel) == 0:
            continue
        ax = f // 2
        free = [k for k in range(4) if k != ax]
        roots[f] = build(sel, s0[sel][:, free], 0, -np.ones(3), np.ones(3))
    return DualIndex(
        mesh_hash=mesh.hash, dual=dual,
        items=interior[np.asarray(items, dtype=np.int64)] if items else np.zeros(0, np.int64),
        node_lo=np.array(nodes_lo).reshape(-1, 4), node_hi=np.array(nodes_hi).reshape(-1, 4),
        node_children=np.array(children, dtype=np.int64).reshape(-1, 8),
        node_leaf=np.array(leaf, dtype=bool), node_start=np.array(start, dtype=np.int64),
        node_count=np.array(count, dtype=np.int64), roots=roots,
        coord_scale=float(np.abs(mesh.vertices).max()) if len(mesh.vertices) else 1.0)


def _hyperplane(camera):
    if camera.is_perspective:
        return np.append(camera.center, 1.0)
    return np.append(-camera.direction, 0.0)


def query_dual(index, mesh, camera, *, drop_concave=False):
    """Contour edges via hyperplane/box culling, confirmed by exact facing."""
    t0 = time.perf_counter()
    if index.mesh_hash != mesh.hash:
        raise ValueError("dual index was built for a different mesh")
    w = _hyperplane(camera)
    # Float evaluation of g can misjudge a sign only within this margin.
    tol = 1e-9 * (1.0 + np.abs(w).sum()) * (1.0 + index.coord_scale)
    frontier = index.roots[index.roots >= 0]
    leaves = []
    visited = 0
    while len(frontier):
        visited += len(frontier)
        lo, hi = index.node_lo[frontier], index.node_hi[frontier]
        gmin = np.minimum(lo * w, hi * w).sum(axis=1)
        gmax = np.maximum(lo * w, hi * w).sum(axis=1)
        keep = frontier[(gmin <= tol) & (gmax >= -tol)]
        is_leaf = index.node_leaf[keep]
        leaves.append(keep[is_leaf])
        ch = index.node_children[keep[~is_leaf]].reshape(-1)
        frontier = ch[ch >= 0]
    leaves = np.concatenate(leaves) if leaves else np.zeros(0, np.int64)
    if len(leaves):
        cand = np.concatenate([index.items[s:s + c] for s, c in
                               zip(index.node_start[leaves], index.node_count[leaves])])
    else:
        cand = np.zeros(0, np.int64)
    ef = mesh.edge_faces[cand]
    faces = np.unique(ef.reshape(-1))
    signs = np.zeros(len(mesh.faces), dtype=np.int8)
    if len(faces):
        sub = _facing_subset(mesh, camera, faces)
        _check_facing(sub, faces)
        signs[faces] = sub
    contour = cand[signs[ef[:, 0]] != signs[ef[:, 1]]] if len(cand) else cand
    return _finish(mesh, contour, "dual", t0, drop_concave, nodes_visited=int(visited),
                   candidates=int(len(cand)))


def _facing_subset(mesh, camera, faces):
    P = mesh.vertices[mesh.faces[faces]]
    if camera.is_perspective:
        return (-pr.orient3d_many(P[:, 0], P[:, 1], P[:, 2], camera.center[None])).astype(np.int8)
    return (-pr.orient_direction_many(P[:, 0], P[:, 1], P[:, 2],
                                      camera.direction[None])).astype(np.int8)


def extract_gauss_sphere(mesh, direction):
    """Orthographic cross-check: edges whose normal arc crosses the v-great-circle.

    Arcs are culled by their bounding boxes against the plane v.x = 0 and
    confirmed with exact facing.
    """
    t0 = time.perf_counter()
    v = np.asarray(direction, float)
    interior = np.flatnonzero(~mesh.is_boundary)
    n = mesh.face_normals
    a, b = n[mesh.edge_faces[interior, 0]], n[mesh.edge_faces[interior, 1]]
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    gmin = np.minimum(lo * v, hi * v).sum(axis=1)
    gmax = np.maximum(lo * v, hi * v).sum(axis=1)
    cand = interior[(gmin <= 1e-9) & (gmax >= -1e-9)]
    cam = Camera.orthographic(v)
    ef = mesh.edge_faces[cand]
    faces = np.unique(ef.reshape(-1))
    signs = np.zeros(len(mesh.faces), dtype=np.int8)
    signs[faces] = _facing_subset(mesh, cam, faces)
    _check_facing(signs[faces], faces)
    return _finish(mesh, cand[signs[ef[:, 0]] != signs[ef[:, 1]]], "gauss", t0)


# ---------------------------------------------------------------------------
# Randomized search

def dihedral_weights(mesh, floor=1e-6):
    """Probability that an edge is a contour for a random view, alpha / pi."""
    w = np.full(len(mesh.edges), 1.0)
    interior = np.flatnonzero(~mesh.is_boundary)
    n = mesh.face_normals
    cosang = np.einsum("ij,ij->i", n[mesh.edge_faces[interior, 0]],
                       n[mesh.edge_faces[interior, 1]])
    w[interior] = np.arccos(np.clip(cosang, -1.0, 1.0)) / np.pi
    return np.maximum(w, floor)


def extract_randomized(mesh, camera, num_seeds, seed=0, *, warm_start=None,
                       weights=None, drop_concave=False):
    """Seed-and-trace search; returns whole contour components it touches.

    Seeds are drawn without replacement with probability proportional to the
    edge weight (exponential-key sampling).  Edges in ``warm_start`` are
    tried first.
    """
    if num_seeds < 1:
        raise ValueError("num_seeds must be >= 1")
    t0 = time.perf_counter()
    if weights is None:
        weights = dihedral_weights(mesh)
    rng = np.random.default_rng(seed)
    interior = np.flatnonzero(~mesh.is_boundary)
    k = min(num_seeds, len(interior))
    keys = np.log(rng.random(len(interior))) / weights[interior]
    seeds = interior[np.argsort(-keys, kind="stable")[:k]]
    if warm_start is not None:
        seeds = np.concatenate([np.asarray(warm_start, np.int64), seeds])
    facing = np.full(len(mesh.faces), 2, dtype=np.int8)

    def face_sign(f):
        if facing[f] == 2:
            sub = _facing_subset(mesh, camera, np.array([f]))
            if sub[0] == 0:
                raise DegenerateFacing(f"face {f} is exactly edge-on")
            facing[f] = sub[0]
        return facing[f]

    def is_contour(e):
        if mesh.is_boundary[e]:
            return False
        f0, f1 = mesh.edge_faces[e]
        return face_sign(f0) != face_sign(f1)

    found = set()
    tested = set()
    hits = 0
    for s in seeds.tolist():
        if s in found or s in tested:
            continue
        tested.add(s)
        if not is_contour(s):
            continue
        hits += 1
        found.add(s)
        queue = deque(int(x) for x in mesh.edges[s])
        seen_v = set(queue)
        while queue:
            v = queue.popleft()
            for e in mesh.vertex_edges(v).tolist():
                if e in found or e in tested:
                    continue
                tested.add(e)
                if is_contour(e):
                    found.add(e)
                    w = mesh.other_vertex(e, v)
                    if w not in seen_v:
                        seen_v.add(w)
                        queue.append(w)
    return _finish(mesh, sorted(found), "random", t0, drop_concave, complete=False,
                   seeds=int(len(seeds)), seed_hits=hits, edges_tested=len(tested))


def extract(mesh, camera, method="brute", *, index=None, num_seeds=None, seed=0,
            drop_concave=False):
    if method == "brute":
        return extract_brute_force(mesh, camera, drop_concave=drop_concave)
    if method == "dual":
        if index is None:
            index = build_dual_index(mesh)
        return query_dual(index, mesh, camera, drop_concave=drop_concave)
    if method == "random":
        if num_seeds is None:
            num_seeds = max(1, int(np.sqrt(len(mesh.edges))))
        return extract_randomized(mesh, camera, num_seeds, seed, drop_concave=drop_concave)
    raise ValueError(f"unknown extraction method {method!r}")
