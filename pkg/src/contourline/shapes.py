"""Procedural test meshes.

Every generator returns a validated :class:`Mesh` with outward (or, for open
surfaces, consistently oriented) counter-clockwise faces.  Tessellations of
curved surfaces contain exactly planar quads, so callers that need generic
position should pass the result through :func:`perturb_generic`.
"""

from __future__ import annotations

import numpy as np

from .mesh import Mesh, perturb_generic


def icosphere(subdivisions=2, radius=1.0, center=(0.0, 0.0, 0.0)):
    """Geodesic sphere with 20 * 4**subdivisions faces."""
    t = (1.0 + 5.0 ** 0.5) / 2.0
    verts = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
             (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
             (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
             (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
             (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
             (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    verts = [np.array(v, float) / np.linalg.norm(v) for v in verts]
    for _ in range(subdivisions):
        cache = {}

        def mid(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = verts[i] + verts[j]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]
        new = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new
    V = np.array(verts) * radius + np.asarray(center, float)
    return Mesh(V, faces)


def torus(major=1.0, minor=0.4, nu=32, nv=16, center=(0.0, 0.0, 0.0)):
    """Torus around the z axis."""
    u = 2 * np.pi * np.arange(nu) / nu
    v = 2 * np.pi * np.arange(nv) / nv
    uu, vv = np.meshgrid(u, v, indexing="ij")
    rho = major + minor * np.cos(vv)
    V = np.stack([rho * np.cos(uu), rho * np.sin(uu), minor * np.sin(vv)], -1).reshape(-1, 3)
    faces = []
    for i in range(nu):
        for j in range(nv):
            a = i * nv + j
            b = ((i + 1) % nu) * nv + j
            c = ((i + 1) % nu) * nv + (j + 1) % nv
            d = i * nv + (j + 1) % nv
            faces += [(a, b, c), (a, c, d)]
    return Mesh(V + np.asarray(center, float), faces)


def open_cylinder(radius=1.0, height=2.0, nu=32, nv=4):
    """Tube around the z axis without caps; two boundary loops."""
    u = 2 * np.pi * np.arange(nu) / nu
    z = np.linspace(-height / 2, height / 2, nv + 1)
    V = np.array([(radius * np.cos(a), radius * np.sin(a), h) for h in z for a in u])
    faces = []
    for j in range(nv):
        for i in range(nu):
            a = j * nu + i
            b = j * nu + (i + 1) % nu
            c = (j + 1) * nu + (i + 1) % nu
            d = (j + 1) * nu + i
            faces += [(a, b, c), (a, c, d)]
    return Mesh(V, faces)


def cube(size=1.0):
    """Axis-aligned cube of edge ``size`` centred at the origin, 12 faces."""
    h = size / 2
    V = np.array([(x, y, z) for x in (-h, h) for y in (-h, h) for z in (-h, h)])
    quads = [(0, 1, 3, 2), (4, 6, 7, 5), (0, 4, 5, 1), (2, 3, 7, 6), (0, 2, 6, 4), (1, 5, 7, 3)]
    faces = []
    for a, b, c, d in quads:
        faces += [(a, b, c), (a, c, d)]
    return Mesh(V, faces)


def flat_square(size=1.0):
    h = size / 2
    V = [(-h, -h, 0), (h, -h, 0), (h, h, 0), (-h, h, 0)]
    return Mesh(V, [(0, 1, 2), (0, 2, 3)])


def grid(n=8, size=2.0, height=None):
    """Open (n x n)-quad height field over a square, z = height(x, y)."""
    xs = np.linspace(-size / 2, size / 2, n + 1)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    Z = np.zeros_like(X) if height is None else height(X, Y)
    V = np.stack([X, Y, Z], -1).reshape(-1, 3)
    faces = []
    for i in range(n):
        for j in range(n):
            a, b = i * (n + 1) + j, (i + 1) * (n + 1) + j
            c, d = b + 1, a + 1
            faces += [(a, b, c), (a, c, d)]
    return Mesh(V, faces)


def pyramid_apex(n=4, height=1.0):
    """Open n-sided pyramid fan whose apex is vertex 0."""
    V = [(0.0, 0.0, height)] + [(np.cos(2 * np.pi * k / n), np.sin(2 * np.pi * k / n), 0.0)
                                 for k in range(n)]
    return Mesh(V, [(0, 1 + k, 1 + (k + 1) % n) for k in range(n)])


def monkey_saddle(rings=4, sectors=24, radius=1.0):
    """Disc patch of z = x^3 - 3xy^2 with a centre vertex (index 0)."""
    V = [(0.0, 0.0, 0.0)]
    phase = 0.5 * np.pi / sectors           # keep spokes off the symmetry lines
    for r in np.linspace(radius / rings, radius, rings):
        for k in range(sectors):
            a = 2 * np.pi * k / sectors + phase
            x, y = r * np.cos(a), r * np.sin(a)
            V.append((x, y, x ** 3 - 3 * x * y ** 2))
    faces = [(0, 1 + k, 1 + (k + 1) % sectors) for k in range(sectors)]
    for ring in range(rings - 1):
        base, nxt = 1 + ring * sectors, 1 + (ring + 1) * sectors
        for k in range(sectors):
            a, b = base + k, base + (k + 1) % sectors
            c, d = nxt + (k + 1) % sectors, nxt + k
            faces += [(a, d, c), (a, c, b)]
    return Mesh(V, faces)


def bump(n=48, size=4.0, height=1.0, width=0.5):
    """Square height field carrying one Gaussian bump."""
    return grid(n, size, lambda x, y: height * np.exp(-(x ** 2 + y ** 2) / width))


def helix_fan(steps=4, turn_deg=100.0, rise=0.3, radius=1.0):
    """Open fan around vertex 0 that winds past a full turn while rising.

    Seen from +z the last triangle overlaps the first boundary edge at the
    centre: a boundary curtain fold without any contour edge.
    """
    V = [(0.0, 0.0, 0.0)]
    for k in range(steps + 1):
        a = np.radians(turn_deg * k)
        V.append((radius * np.cos(a), radius * np.sin(a), rise * k))
    return Mesh(V, [(0, 1 + k, 2 + k) for k in range(steps)])


def genus2(resolution=40):
    """Closed genus-2 surface from marching cubes on a two-hole implicit."""
    from skimage.measure import marching_cubes

    def field(x, y, z):
        q = (x * x + y * y) ** 2 - x * x + y * y
        return q * q + z * z - 0.012

    lim = np.array([1.35, 0.85, 0.3])
    axes = [np.linspace(-l, l, int(resolution * l / lim[0]) + 2) for l in lim]
    X, Y, Z = np.meshgrid(*axes, indexing="ij")
    F = field(X, Y, Z)
    spacing = tuple(ax[1] - ax[0] for ax in axes)
    verts, faces, _, _ = marching_cubes(F, 0.0, spacing=spacing)
    verts = verts - lim
    mesh = _clean(verts, faces)
    # Orient outward: positive enclosed volume.
    P = mesh.vertices[mesh.faces]
    vol = np.einsum("ij,ij->i", P[:, 0], np.cross(P[:, 1], P[:, 2])).sum()
    if vol < 0:
        mesh = Mesh(mesh.vertices, mesh.faces[:, ::-1])
    return mesh


def _clean(verts, faces):
    """Weld coincident vertices and drop collapsed or unused ones."""
    key = np.round(verts / 1e-9).astype(np.int64)
    _, first, inverse = np.unique(key, axis=0, return_index=True, return_inverse=True)
    faces = inverse.reshape(-1)[faces]
    ok = (faces[:, 0] != faces[:, 1]) & (faces[:, 1] != faces[:, 2]) & (faces[:, 0] != faces[:, 2])
    faces = faces[ok]
    used = np.unique(faces)
    remap = -np.ones(len(first), dtype=np.int64)
    remap[used] = np.arange(len(used))
    return Mesh(verts[first][used], remap[faces])


def noisy_sphere(subdivisions=3, amplitude=0.03, seed=0):
    """Icosphere with radial noise: many small contour wiggles."""
    base = icosphere(subdivisions)
    rng = np.random.default_rng(seed)
    r = 1.0 + amplitude * rng.standard_normal(len(base.vertices))
    return Mesh(base.vertices * r[:, None], base.faces)


def merge(*meshes):
    """Disjoint union of meshes."""
    V, F, off = [], [], 0
    for m in meshes:
        V.append(m.vertices)
        F.append(m.faces + off)
        off += len(m.vertices)
    return Mesh(np.concatenate(V), np.concatenate(F))


def transformed(mesh, rotation=None, translation=(0.0, 0.0, 0.0), scale=1.0):
    R = np.eye(3) if rotation is None else np.asarray(rotation, float)
    return Mesh(scale * mesh.vertices @ R.T + np.asarray(translation, float), mesh.faces)


def rotation(axis, angle):
    """Rotation matrix about ``axis`` by ``angle`` radians (Rodrigues)."""
    k = np.asarray(axis, float)
    k = k / np.linalg.norm(k)
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * K @ K


def two_tori():
    """Two tilted tori, the first entirely in front of the second along -z."""
    a = transformed(torus(1.0, 0.35, 28, 14), rotation((1, 0, 0), 0.5))
    b = transformed(torus(1.0, 0.35, 28, 14), rotation((1, 0.3, 0), 0.4), (0.9, 0.2, -3.0))
    return merge(a, b)


def nested_spheres():
    return merge(icosphere(2, 1.0), icosphere(1, 0.5))


def generic(mesh, seed=0, relative=1e-6):
    """Perturb a fixture off exact planarity so it is in generic position."""
    return perturb_generic(mesh, relative * mesh.diagonal, seed)
