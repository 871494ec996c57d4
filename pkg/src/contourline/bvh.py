"""Bounding volume hierarchy and exact segment/triangle occluder counting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import predicates as pr

_LEAF_SIZE = 4
_BINS = 12


@dataclass
class BVH:
    """Flattened binary BVH over mesh triangles (binned SAH build).

    Leaves hold ``count > 0`` triangles ``order[start:start + count]``;
    inner nodes have ``count == 0`` and children ``left``/``right``.
    """
    lo: np.ndarray
    hi: np.ndarray
    left: np.ndarray
    right: np.ndarray
    start: np.ndarray
    count: np.ndarray
    order: np.ndarray
    pad: float

    @property
    def num_nodes(self):
        return len(self.lo)

    def leaf_of(self):
        out = np.empty(len(self.order), dtype=np.int64)
        for n in np.flatnonzero(self.count > 0):
            out[self.order[self.start[n]:self.start[n] + self.count[n]]] = n
        return out


def _area(ext):
    return 2.0 * (ext[..., 0] * ext[..., 1] + ext[..., 1] * ext[..., 2] + ext[..., 2] * ext[..., 0])


def build_bvh(mesh):
    P = mesh.vertices[mesh.faces]
    tlo, thi = P.min(axis=1), P.max(axis=1)
    cent = 0.5 * (tlo + thi)
    lo, hi, left, right, start, count = [], [], [], [], [], []
    order = []
    stack = [(np.arange(len(P)), -1, 0)]
    # Iterative build; children are patched into their parent's slot.
    while stack:
        ids, parent, side = stack.pop()
        nid = len(lo)
        lo.append(tlo[ids].min(axis=0))
        hi.append(thi[ids].max(axis=0))
        left.append(-1)
        right.append(-1)
        start.append(0)
        count.append(0)
        if parent >= 0:
            (left if side == 0 else right)[parent] = nid
        split = None if len(ids) <= _LEAF_SIZE else _sah_split(ids, tlo, thi, cent)
        if split is None:
            start[nid] = len(order)
            count[nid] = len(ids)
            order.extend(ids.tolist())
            continue
        a, b = split
        stack.append((b, nid, 1))
        stack.append((a, nid, 0))
    diag = float(np.linalg.norm(thi.max(axis=0) - tlo.min(axis=0))) if len(P) else 1.0
    return BVH(np.array(lo), np.array(hi), np.array(left), np.array(right),
               np.array(start), np.array(count), np.array(order, dtype=np.int64),
               pad=1e-9 * max(diag, 1e-300))


def _sah_split(ids, tlo, thi, cent):
    c = cent[ids]
    clo, chi = c.min(axis=0), c.max(axis=0)
    best = None
    for axis in range(3):
        span = chi[axis] - clo[axis]
        if span <= 0:
            continue
        b = np.minimum(((c[:, axis] - clo[axis]) / span * _BINS).astype(int), _BINS - 1)
        cost = []
        for k in range(1, _BINS):
            l, r = ids[b < k], ids[b >= k]
            if len(l) == 0 or len(r) == 0:
                continue
            al = _area(thi[l].max(0) - tlo[l].min(0))
            ar = _area(thi[r].max(0) - tlo[r].min(0))
            cost.append((al * len(l) + ar * len(r), k))
        if cost:
            val, k = min(cost)
            if best is None or val < best[0]:
                best = (val, axis, k, b)
    if best is None:
        # All centroids coincide: split the list in half.
        h = len(ids) // 2
        return ids[:h], ids[h:]
    _, axis, k, b = best
    return ids[b < k], ids[b >= k]


def _slab(lo, hi, p, d, pad):
    """Vectorised segment/box overlap for p + t d, t in [0, 1] (conservative)."""
    lo = lo - pad
    hi = hi + pad
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / d
        t1 = (lo - p) * inv
        t2 = (hi - p) * inv
    zero = d == 0
    inside = (p >= lo) & (p <= hi)
    tmin = np.where(zero, np.where(inside, -np.inf, np.inf), np.minimum(t1, t2))
    tmax = np.where(zero, np.where(inside, np.inf, -np.inf), np.maximum(t1, t2))
    t0 = tmin.max(axis=1)
    t1 = tmax.min(axis=1)
    return (t0 <= t1 + 1e-12) & (t1 >= -1e-12) & (t0 <= 1.0 + 1e-12)


def segment_triangle_signs(P, Q, A, B, C):
    """Row-wise exact classification: 1 hit, 0 miss, -1 grazing (degenerate)."""
    s1 = pr.orient3d_many(A, B, C, P).astype(np.int64)
    s2 = pr.orient3d_many(A, B, C, Q).astype(np.int64)
    out = np.zeros(len(P), dtype=np.int8)
    maybe = s1 * s2 <= 0
    if not maybe.any():
        return out
    idx = np.flatnonzero(maybe)
    p, q, a, b, c = P[idx], Q[idx], A[idx], B[idx], C[idx]
    o1 = pr.orient3d_many(p, q, a, b).astype(np.int64)
    o2 = pr.orient3d_many(p, q, b, c).astype(np.int64)
    o3 = pr.orient3d_many(p, q, c, a).astype(np.int64)
    pos = (o1 >= 0) & (o2 >= 0) & (o3 >= 0)
    neg = (o1 <= 0) & (o2 <= 0) & (o3 <= 0)
    through = pos | neg                      # line meets the closed triangle
    strict = (o1 != 0) & (o2 != 0) & (o3 != 0)
    proper = (s1[idx] * s2[idx]) < 0
    res = np.zeros(len(idx), dtype=np.int8)
    res[through & strict & proper] = 1
    res[through & ~(strict & proper)] = -1
    out[idx] = res
    return out


def count_crossings(bvh, mesh, P, Q, exclude=None):
    """Number of triangles crossed by each segment ``P[i] -> Q[i]``.

    ``exclude`` is a list (one entry per segment) of face-id arrays to skip.
    Returns ``(counts, grazing)``; a grazing segment touches a triangle edge
    or vertex exactly and its count is not trustworthy.
    """
    P = np.asarray(P, float).reshape(-1, 3)
    Q = np.asarray(Q, float).reshape(-1, 3)
    R = len(P)
    counts = np.zeros(R, dtype=np.int64)
    grazing = np.zeros(R, dtype=bool)
    if R == 0 or len(mesh.faces) == 0:
        return counts, grazing
    D = Q - P
    rays = np.arange(R)
    nodes = np.zeros(R, dtype=np.int64)
    leaf_rays, leaf_nodes = [], []
    while len(rays):
        ok = _slab(bvh.lo[nodes], bvh.hi[nodes], P[rays], D[rays], bvh.pad)
        rays, nodes = rays[ok], nodes[ok]
        is_leaf = bvh.count[nodes] > 0
        leaf_rays.append(rays[is_leaf])
        leaf_nodes.append(nodes[is_leaf])
        r, n = rays[~is_leaf], nodes[~is_leaf]
        rays = np.concatenate([r, r])
        nodes = np.concatenate([bvh.left[n], bvh.right[n]])
    lr = np.concatenate(leaf_rays)
    ln = np.concatenate(leaf_nodes)
    if len(lr) == 0:
        return counts, grazing
    cnt = bvh.count[ln]
    pr_ray = np.repeat(lr, cnt)
    offs = np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt)
    tri = bvh.order[np.repeat(bvh.start[ln], cnt) + offs]
    if exclude is not None:
        ex_r = np.concatenate([np.full(len(e), i, dtype=np.int64) for i, e in enumerate(exclude)]
                              + [np.zeros(0, np.int64)])
        ex_f = np.concatenate([np.asarray(e, dtype=np.int64) for e in exclude]
                              + [np.zeros(0, np.int64)])
        F = len(mesh.faces)
        keep = ~np.isin(pr_ray * F + tri, ex_r * F + ex_f)
        pr_ray, tri = pr_ray[keep], tri[keep]
    V = mesh.vertices
    T = mesh.faces[tri]
    res = segment_triangle_signs(P[pr_ray], Q[pr_ray], V[T[:, 0]], V[T[:, 1]], V[T[:, 2]])
    np.add.at(counts, pr_ray[res == 1], 1)
    grazing[pr_ray[res == -1]] = True
    return counts, grazing


def count_crossings_brute(mesh, P, Q, exclude=None):
    """All-triangle reference implementation of :func:`count_crossings`."""
    P = np.asarray(P, float).reshape(-1, 3)
    Q = np.asarray(Q, float).reshape(-1, 3)
    counts = np.zeros(len(P), dtype=np.int64)
    grazing = np.zeros(len(P), dtype=bool)
    V = mesh.vertices
    F = mesh.faces
    for i in range(len(P)):
        mask = np.ones(len(F), dtype=bool)
        if exclude is not None and len(exclude[i]):
            mask[np.asarray(exclude[i])] = False
        T = F[mask]
        n = len(T)
        res = segment_triangle_signs(np.repeat(P[i:i + 1], n, 0), np.repeat(Q[i:i + 1], n, 0),
                                     V[T[:, 0]], V[T[:, 1]], V[T[:, 2]])
        counts[i] = int((res == 1).sum())
        grazing[i] = bool((res == -1).any())
    return counts, grazing
