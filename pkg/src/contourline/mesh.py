"""Indexed triangle meshes, cameras, and per-camera face/edge classification."""

from __future__ import annotations

import hashlib
import io
import logging
import os
from collections import defaultdict, deque
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np

from . import predicates as pr
from .errors import (BehindCamera, CoplanarFaces, DegenerateFacing, MeshError,
                     NonManifoldError, OBJParseError, OrientationError)

logger = logging.getLogger(__name__)


class Facing(Enum):
    FRONT = "front"
    BACK = "back"


class Convexity(Enum):
    CONVEX = "convex"
    CONCAVE = "concave"


@dataclass
class ValidationReport:
    vertices: int = 0
    faces: int = 0
    edges: int = 0
    boundary_edges: int = 0
    degenerate_faces: int = 0
    reoriented_faces: int = 0
    triangulated_polygons: int = 0
    skipped_records: int = 0
    manifold: bool = True
    orientable: bool = True


def _csr(pairs, n):
    """Group (key, value) pairs into CSR arrays keyed 0..n-1, values sorted."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    order = np.lexsort((pairs[:, 1], pairs[:, 0]))
    pairs = pairs[order]
    ptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(ptr, pairs[:, 0] + 1, 1)
    return np.cumsum(ptr), pairs[:, 1].copy()


class Mesh:
    """Immutable oriented manifold triangle mesh with edge adjacency.

    Edges are stored once as ``(min, max)`` vertex pairs.  ``edge_faces[e]``
    holds the one or two adjacent faces (``-1`` marks a boundary), with the
    face traversing the edge as ``min -> max`` first when there are two.
    """

    def __init__(self, vertices, faces, *, allow_reorient=False, report=None):
        vertices = np.array(vertices, dtype=np.float64).reshape(-1, 3)
        faces = np.array(faces, dtype=np.int64).reshape(-1, 3)
        if faces.size and (faces.min() < 0 or faces.max() >= len(vertices)):
            raise MeshError("face references a vertex index out of range")
        for f in faces:
            if f[0] == f[1] or f[1] == f[2] or f[0] == f[2]:
                raise MeshError(f"face {f.tolist()} repeats a vertex")
        self.report = report or ValidationReport()
        if allow_reorient:
            faces = self._reorient(faces)
        self.vertices = vertices
        self.faces = faces
        self.vertices.flags.writeable = False
        self._build_edges()
        self._check_fans()
        self.faces.flags.writeable = False
        r = self.report
        r.vertices, r.faces, r.edges = len(vertices), len(faces), len(self.edges)
        r.boundary_edges = int(self.is_boundary.sum())
        r.degenerate_faces = int((self.face_areas == 0.0).sum())

    # -- construction ------------------------------------------------------

    def _reorient(self, faces):
        """Flip faces so every component is consistently oriented."""
        faces = faces.copy()
        by_edge = defaultdict(list)
        for fi, f in enumerate(faces):
            for k in range(3):
                a, b = int(f[k]), int(f[(k + 1) % 3])
                by_edge[(min(a, b), max(a, b))].append(fi)
        for key, fs in by_edge.items():
            if len(fs) > 2:
                raise NonManifoldError(f"edge {key} has {len(fs)} adjacent faces")
        flipped = np.zeros(len(faces), dtype=bool)
        seen = np.zeros(len(faces), dtype=bool)

        def directed(fi):
            f = faces[fi]
            return {(int(f[k]), int(f[(k + 1) % 3])) for k in range(3)}

        for start in range(len(faces)):
            if seen[start]:
                continue
            seen[start] = True
            queue = deque([start])
            while queue:
                fi = queue.popleft()
                mine = directed(fi)
                for a, b in mine:
                    for fj in by_edge[(min(a, b), max(a, b))]:
                        if fj == fi:
                            continue
                        consistent = (b, a) in directed(fj)
                        if seen[fj]:
                            if not consistent:
                                raise OrientationError("mesh is not orientable")
                            continue
                        if not consistent:
                            faces[fj] = faces[fj][::-1]
                            flipped[fj] = True
                        seen[fj] = True
                        queue.append(fj)
        # Re-orient whole components so that most of them keep input order.
        self.report.reoriented_faces = int(flipped.sum())
        return faces

    def _build_edges(self):
        faces = self.faces
        nf = len(faces)
        a = faces.reshape(-1)
        b = np.roll(faces, -1, axis=1).reshape(-1)
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        keys = lo * (len(self.vertices) + 1) + hi
        uniq, inverse, counts = np.unique(keys, return_inverse=True, return_counts=True)
        if (counts > 2).any():
            bad = uniq[np.argmax(counts > 2)]
            n1 = len(self.vertices) + 1
            raise NonManifoldError(
                f"edge ({bad // n1}, {bad % n1}) has {counts.max()} adjacent faces")
        self.edges = np.stack([uniq // (len(self.vertices) + 1),
                               uniq % (len(self.vertices) + 1)], axis=1)
        self.face_edges = inverse.reshape(nf, 3)
        edge_faces = -np.ones((len(uniq), 2), dtype=np.int64)
        forward = (a < b).reshape(-1)
        slot = np.where(forward, 0, 1)
        fid = np.repeat(np.arange(nf), 3)
        if faces.size:
            taken = np.zeros((len(uniq), 2), dtype=bool)
            for e, s, f in zip(inverse, slot, fid):
                if taken[e, s]:
                    self.report.orientable = False
                    raise OrientationError(
                        f"faces {edge_faces[e, s]} and {f} traverse edge "
                        f"{tuple(self.edges[e])} in the same direction")
                taken[e, s] = True
                edge_faces[e, s] = f
        # Boundary edges keep their single face in slot 0.
        only1 = (edge_faces[:, 0] < 0)
        edge_faces[only1, 0] = edge_faces[only1, 1]
        edge_faces[only1, 1] = -1
        self.edge_faces = edge_faces
        self.is_boundary = edge_faces[:, 1] < 0
        nv = len(self.vertices)
        self.vertex_edge_ptr, self.vertex_edge_idx = _csr(
            np.concatenate([np.stack([self.edges[:, 0], np.arange(len(uniq))], 1),
                            np.stack([self.edges[:, 1], np.arange(len(uniq))], 1)]), nv)
        self.vertex_face_ptr, self.vertex_face_idx = _csr(
            np.stack([faces.reshape(-1), fid], 1), nv)
        for arr in (self.edges, self.edge_faces, self.face_edges, self.is_boundary):
            arr.flags.writeable = False

    def _check_fans(self):
        for v in range(len(self.vertices)):
            fs = self.vertex_faces(v)
            if len(fs) == 0:
                continue
            es = self.vertex_edges(v)
            # Faces around v are linked through interior edges incident to v.
            parent = {int(f): int(f) for f in fs}

            def find(x):
                while parent[x] != x:
                    parent[x] = parent[parent[x]]
                    x = parent[x]
                return x
            for e in es:
                f0, f1 = self.edge_faces[e]
                if f1 >= 0:
                    parent[find(int(f0))] = find(int(f1))
            roots = {find(int(f)) for f in fs}
            if len(roots) > 1:
                self.report.manifold = False
                raise NonManifoldError(
                    f"faces around vertex {v} form {len(roots)} separate fans")

    # -- adjacency queries --------------------------------------------------

    def vertex_edges(self, v):
        return self.vertex_edge_idx[self.vertex_edge_ptr[v]:self.vertex_edge_ptr[v + 1]]

    def vertex_faces(self, v):
        return self.vertex_face_idx[self.vertex_face_ptr[v]:self.vertex_face_ptr[v + 1]]

    def other_vertex(self, edge, v):
        a, b = self.edges[edge]
        return int(b) if a == v else int(a)

    def edge_triangles(self, edge):
        """Vertices ``(a, b, d, e)`` of the triangles abd and bae at an edge.

        ``e`` is None for boundary edges.
        """
        f0, f1 = self.edge_faces[edge]
        tri = self.faces[f0]
        u, w = self.edges[edge]
        k = int(np.flatnonzero(tri == u)[0])
        if tri[(k + 1) % 3] == w:
            a, b = int(u), int(w)
        else:
            a, b = int(w), int(u)
        d = int(next(x for x in tri if x != a and x != b))
        if f1 < 0:
            return a, b, d, None
        e = int(next(x for x in self.faces[f1] if x != a and x != b))
        return a, b, d, e

    # -- geometry -------------------------------------------------------------

    @cached_property
    def raw_normals(self):
        p = self.vertices[self.faces]
        return np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])

    @cached_property
    def face_areas(self):
        return 0.5 * np.linalg.norm(self.raw_normals, axis=1)

    @cached_property
    def face_normals(self):
        n = self.raw_normals
        norm = np.linalg.norm(n, axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(norm > 0, n / np.where(norm > 0, norm, 1.0), 0.0)

    @cached_property
    def bbox(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    @property
    def diagonal(self):
        lo, hi = self.bbox
        return float(np.linalg.norm(hi - lo))

    @cached_property
    def convexity(self):
        """Per-edge sign: +1 convex, -1 concave, 0 coplanar or boundary."""
        out = np.zeros(len(self.edges), dtype=np.int8)
        interior = np.flatnonzero(~self.is_boundary)
        if len(interior) == 0:
            return out
        quads = np.array([self.edge_triangles(e) for e in interior], dtype=np.int64)
        P = self.vertices
        s = -pr.orient3d_many(P[quads[:, 0]], P[quads[:, 1]], P[quads[:, 2]],
                              P[quads[:, 3]])
        out[interior] = -s
        out.flags.writeable = False
        return out

    @cached_property
    def hash(self):
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.vertices).tobytes())
        h.update(np.ascontiguousarray(self.faces).tobytes())
        return h.hexdigest()[:16]

    def is_closed(self):
        return not bool(self.is_boundary.any())


# ---------------------------------------------------------------------------
# Loading

def load_mesh(source, *, triangulate=True, allow_reorient=False):
    """Parse an OBJ stream (bytes, text, path, or file object) into a Mesh."""
    if isinstance(source, (str, os.PathLike)) and os.path.exists(source):
        with open(source, "rb") as fh:
            data = fh.read()
    elif isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    elif isinstance(source, str):
        data = source.encode()
    else:
        data = source.read()
        if isinstance(data, str):
            data = data.encode()
    report = ValidationReport()
    verts, faces = [], []
    for lineno, raw in enumerate(io.StringIO(data.decode("utf-8", "replace")), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tag, *rest = line.split()
        if tag == "v":
            if len(rest) < 3:
                raise OBJParseError("vertex needs three coordinates", lineno)
            try:
                verts.append([float(x) for x in rest[:3]])
            except ValueError:
                raise OBJParseError(f"bad vertex coordinate in {line!r}", lineno) from None
        elif tag == "f":
            idx = []
            for tok in rest:
                head = tok.split("/", 1)[0]
                try:
                    i = int(head)
                except ValueError:
                    raise OBJParseError(f"bad face index {tok!r}", lineno) from None
                if i == 0:
                    raise OBJParseError("face index 0 is invalid in OBJ", lineno)
                i = i - 1 if i > 0 else len(verts) + i
                if not 0 <= i < len(verts):
                    raise OBJParseError(f"face index {tok} out of range", lineno)
                idx.append(i)
            if len(idx) < 3:
                raise OBJParseError("face needs at least three vertices", lineno)
            if len(idx) > 3:
                if not triangulate:
                    raise OBJParseError(f"{len(idx)}-gon face with triangulation disabled",
                                        lineno)
                report.triangulated_polygons += 1
                k = idx.index(min(idx))
                idx = idx[k:] + idx[:k]
                faces.extend([idx[0], idx[j], idx[j + 1]] for j in range(1, len(idx) - 1))
            else:
                faces.append(idx)
        else:
            report.skipped_records += 1
    if report.skipped_records:
        logger.warning("skipped %d unsupported OBJ records", report.skipped_records)
    if not faces:
        raise OBJParseError("no faces in input")
    return Mesh(verts, faces, allow_reorient=allow_reorient, report=report)


def save_obj(mesh, path):
    with open(path, "w") as fh:
        for p in mesh.vertices:
            fh.write(f"v {float(p[0])!r} {float(p[1])!r} {float(p[2])!r}\n")
        for f in mesh.faces:
            fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")


def perturb_generic(mesh, magnitude, seed=0):
    """Offset every coordinate by uniform noise in [-magnitude, magnitude]."""
    if magnitude < 0:
        raise ValueError("magnitude must be non-negative")
    if magnitude == 0:
        return mesh
    rng = np.random.default_rng(seed)
    noise = rng.uniform(-magnitude, magnitude, size=mesh.vertices.shape)
    return Mesh(mesh.vertices + noise, mesh.faces)


def default_perturbation(mesh):
    return 1e-8 * mesh.diagonal


# ---------------------------------------------------------------------------
# Camera

def _unit(v):
    v = np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(v)
    if n == 0:
        raise ValueError("zero vector")
    return v / n


@dataclass(frozen=True, eq=False)
class Camera:
    """Perspective (``center``) or orthographic (``direction``) camera.

    The image plane passes through ``origin`` with orthonormal axes ``u``
    (image x) and ``v`` (image y).
    """
    kind: str
    origin: np.ndarray
    u: np.ndarray
    v: np.ndarray
    center: np.ndarray | None = None
    direction: np.ndarray | None = None
    near: float = 0.0
    far: float = float("inf")
    _normal: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        u, v = np.asarray(self.u, float), np.asarray(self.v, float)
        if abs(np.dot(u, u) - 1) > 1e-9 or abs(np.dot(v, v) - 1) > 1e-9 or abs(np.dot(u, v)) > 1e-9:
            raise ValueError("image-plane axes must be orthonormal")
        n = np.cross(u, v)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "origin", np.asarray(self.origin, float))
        if self.kind == "perspective":
            c = np.asarray(self.center, float)
            object.__setattr__(self, "center", c)
            h = float(np.dot(self.origin - c, n))
            if h == 0:
                raise ValueError("perspective center lies on the image plane")
            if h < 0:
                n = -n
        elif self.kind == "orthographic":
            d = _unit(self.direction)
            object.__setattr__(self, "direction", d)
            if np.dot(d, n) == 0:
                raise ValueError("view direction parallel to the image plane")
        else:
            raise ValueError(f"unknown camera kind {self.kind!r}")
        object.__setattr__(self, "_normal", n)

    @classmethod
    def perspective(cls, center, look_at=(0.0, 0.0, 0.0), up=(0.0, 1.0, 0.0), focal=1.0):
        center = np.asarray(center, float)
        fwd = _unit(np.asarray(look_at, float) - center)
        right, true_up = _frame(fwd, up)
        return cls("perspective", origin=center + focal * fwd, u=right, v=true_up,
                   center=center)

    @classmethod
    def orthographic(cls, direction, look_at=(0.0, 0.0, 0.0), up=(0.0, 1.0, 0.0)):
        fwd = _unit(direction)
        right, true_up = _frame(fwd, up)
        return cls("orthographic", origin=np.asarray(look_at, float), u=right, v=true_up,
                   direction=fwd)

    @property
    def is_perspective(self):
        return self.kind == "perspective"

    def view_vectors(self, points):
        """Vectors from the eye toward ``points`` (constant for orthographic)."""
        points = np.asarray(points, float)
        if self.is_perspective:
            return points - self.center
        return np.broadcast_to(self.direction, points.shape)

    def eye(self, p, reach):
        """Eye point for a ray test from ``p``: the center, or ``p`` pushed back."""
        if self.is_perspective:
            return self.center
        return np.asarray(p, float) - reach * self.direction

    def scaled(self, factor):
        """Same eye, image plane at ``factor`` times the distance."""
        if self.is_perspective:
            origin = self.center + factor * (self.origin - self.center)
        else:
            origin = self.origin
        return Camera(self.kind, origin=origin, u=self.u, v=self.v, center=self.center,
                      direction=self.direction, near=self.near, far=self.far)

    def to_dict(self):
        d = {"kind": self.kind, "origin": self.origin.tolist(), "u": self.u.tolist(),
             "v": self.v.tolist()}
        if self.is_perspective:
            d["center"] = self.center.tolist()
        else:
            d["direction"] = self.direction.tolist()
        return d


def _frame(fwd, up):
    up = np.asarray(up, float)
    right = np.cross(fwd, up)
    if np.linalg.norm(right) < 1e-12:
        alt = np.array([1.0, 0.0, 0.0]) if abs(fwd[0]) < 0.9 else np.array([0.0, 0.0, 1.0])
        right = np.cross(fwd, alt)
    right = _unit(right)
    return right, np.cross(right, fwd)


def project(camera, p):
    """Image-plane coordinates and depth of one point.

    Depth is the distance to the eye (perspective) or the signed ray
    parameter from the image plane (orthographic); it is used only to order
    points along a visual ray.
    """
    xy, depth = project_many(camera, np.asarray(p, float).reshape(1, 3))
    return xy[0], float(depth[0])


def project_many(camera, points):
    points = np.asarray(points, float).reshape(-1, 3)
    n = camera._normal
    if camera.is_perspective:
        d = points - camera.center
        denom = d @ n
        if (denom <= 0).any():
            raise BehindCamera(f"{int((denom <= 0).sum())} point(s) behind the camera")
        t = float(np.dot(camera.origin - camera.center, n)) / denom
        X = camera.center + t[:, None] * d
        depth = np.linalg.norm(d, axis=1)
    else:
        dirn = camera.direction
        s = ((points - camera.origin) @ n) / float(np.dot(dirn, n))
        X = points - s[:, None] * dirn
        depth = (points - camera.origin) @ dirn
    rel = X - camera.origin
    return np.stack([rel @ camera.u, rel @ camera.v], axis=1), depth


# ---------------------------------------------------------------------------
# Facing and convexity

def facing_signs(mesh, camera):
    """Per-face +1 front / -1 back / 0 edge-on, decided exactly."""
    P = mesh.vertices[mesh.faces]
    if camera.is_perspective:
        return (-pr.orient3d_many(P[:, 0], P[:, 1], P[:, 2], camera.center[None, :])
                ).astype(np.int8)
    return (-pr.orient_direction_many(P[:, 0], P[:, 1], P[:, 2],
                                      camera.direction[None, :])).astype(np.int8)


def face_facing(mesh, camera, face):
    a, b, c = (mesh.vertices[i] for i in mesh.faces[face])
    if camera.is_perspective:
        s = pr.front_side(a, b, c, camera.center)
    else:
        s = -pr.orient_direction(a, b, c, camera.direction)
    if s == 0:
        raise DegenerateFacing(f"face {face} is exactly edge-on")
    return Facing.FRONT if s > 0 else Facing.BACK


def edge_convexity(mesh, edge):
    if mesh.is_boundary[edge]:
        raise ValueError(f"edge {edge} is a boundary edge")
    a, b, d, e = mesh.edge_triangles(edge)
    P = mesh.vertices
    s = pr.front_side(P[a], P[b], P[d], P[e])
    if s == 0:
        raise CoplanarFaces(f"faces at edge {edge} are coplanar")
    return Convexity.CONCAVE if s > 0 else Convexity.CONVEX
