"""Stroke extraction: chaining, topological simplification, smoothing, SVG."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.interpolate import BSpline
from skimage.draw import polygon

from .mesh import BehindCamera, project_many
from .viewgraph import CurveType, SingularityKind, Visibility

DEFAULT_CANVAS = 1024


# ---------------------------------------------------------------------------
# Pixel frame

@dataclass(frozen=True)
class Canvas:
    """Maps image-plane coordinates to SVG pixels (y down)."""
    width: int
    height: int
    scale: float        # px per image-plane unit
    x0: float           # image-plane coordinate of the left edge
    y1: float           # image-plane coordinate of the top edge

    @classmethod
    def fit(cls, points, long_side=DEFAULT_CANVAS, margin=0.05):
        pts = np.asarray(points, float).reshape(-1, 2)
        if not len(pts):
            return cls(long_side, long_side, 1.0, 0.0, 0.0)
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        ext = np.maximum(hi - lo, 1e-12)
        span = float(ext.max()) * (1.0 + 2.0 * margin)
        scale = long_side / span
        w = max(1, int(math.ceil((ext[0] + 2 * margin * ext.max()) * scale)))
        h = max(1, int(math.ceil((ext[1] + 2 * margin * ext.max()) * scale)))
        pad = margin * float(ext.max())
        return cls(w, h, scale, float(lo[0] - pad), float(hi[1] + pad))

    @classmethod
    def for_graph(cls, graph, long_side=DEFAULT_CANVAS):
        try:
            xy, _ = project_many(graph.camera, graph.mesh.vertices)
        except BehindCamera:
            xy = np.array([q for s in graph.segments.values() for q in (s.q0, s.q1)])
        return cls.fit(xy, long_side)

    def to_px(self, xy):
        xy = np.asarray(xy, float)
        return np.stack([(xy[..., 0] - self.x0) * self.scale,
                         (self.y1 - xy[..., 1]) * self.scale], axis=-1)


# ---------------------------------------------------------------------------
# Chaining

@dataclass
class Chain:
    id: int
    segments: list
    forward: list
    closed: bool
    visible: bool
    start: tuple          # end link at the chain start ("sing", id) / ("seg", ..) / None
    end: tuple
    polyline: np.ndarray  # pixels
    length: float = 0.0
    removed: bool = False
    locks: list = field(default_factory=list)   # (vertex index, px point) constraints

    def to_dict(self):
        return {"id": self.id, "segments": list(self.segments), "forward": list(self.forward),
                "closed": self.closed, "visibility": "visible" if self.visible else "invisible",
                "arclength": round(float(self.length), 6), "removed": self.removed}


def _pairings(graph):
    """End-to-end continuations through singularities: {(seg, end): (seg, end)}."""
    pairs = {}

    def join(r1, r2):
        s1, s2 = graph.segments[r1.seg], graph.segments[r2.seg]
        if s1.visibility is s2.visibility:
            pairs[(r1.seg, r1.end)] = (r2.seg, r2.end)
            pairs[(r2.seg, r2.end)] = (r1.seg, r1.end)

    for k in sorted(graph.singularities):
        sg = graph.singularities[k]
        if sg.kind is SingularityKind.IMAGE:
            near = [r for r in sg.refs if r.role == "near" and r.end is not None]
            if len(near) == 2:
                join(*near)         # split near curve: the foreground continues
        elif sg.kind is SingularityKind.SURFACE:
            refs = [r for r in sg.refs if r.end is not None]
            contour = [r for r in refs if graph.segments[r.seg].kind is not CurveType.BOUNDARY]
            bound = [r for r in refs if graph.segments[r.seg].kind is CurveType.BOUNDARY]
            vis = lambda rs: [r for r in rs if graph.segments[r.seg].visible]
            if len(contour) == 2:
                join(*contour)
            elif len(contour) == 1 and len(vis(contour)) == 1 and len(vis(bound)) == 1:
                join(contour[0], vis(bound)[0])   # the silhouette turns onto the rim
    return pairs


def _next(graph, pairs, sid, end):
    seg = graph.segments[sid]
    lk = seg.end_link(end)
    if lk is not None and lk[0] == "seg":
        other = graph.segments[lk[1]]
        if other.visibility is seg.visibility:
            return lk[1], lk[2]
        return None
    return pairs.get((sid, end))


def _is_silhouette(graph, accel, sid, canvas):
    """A contour point is on the silhouette if the image just beside it is empty."""
    from .bvh import count_crossings        # local: keeps stylize usable without a BVH
    cam, s = graph.camera, graph.segments[sid]
    q = 0.5 * (s.q0 + s.q1)
    d = s.q1 - s.q0
    n = np.array([-d[1], d[0]]) / max(np.linalg.norm(d), 1e-300)
    delta = 0.5 / canvas.scale
    P, Q = [], []
    for sign in (1.0, -1.0):
        x = q + sign * delta * n
        X = cam.origin + x[0] * cam.u + x[1] * cam.v
        if cam.is_perspective:
            P.append(cam.center)
            Q.append(cam.center + (X - cam.center) * graph.reach
                     / max(np.linalg.norm(X - cam.center), 1e-300) * 2.0)
        else:
            P.append(X - graph.reach * cam.direction)
            Q.append(X + graph.reach * cam.direction)
    counts, grazing = count_crossings(accel.bvh, graph.mesh, np.array(P), np.array(Q))
    graph.stats["ray_tests"] += 2
    empty = np.flatnonzero((counts == 0) & ~grazing)
    if not len(empty):
        return None
    return q + (1.0 if empty[0] == 0 else -1.0) * delta * n


def _exterior(graph, canvas, res=512):
    """Mask of image pixels connected to the canvas border without crossing the object."""
    try:
        xy, _ = project_many(graph.camera, graph.mesh.vertices)
    except BehindCamera:
        return None, 1.0
    f = min(1.0, res / max(canvas.width, canvas.height))
    shape = (int(math.ceil(canvas.height * f)) + 2, int(math.ceil(canvas.width * f)) + 2)
    px = canvas.to_px(xy) * f + 1.0
    cover = np.zeros(shape, bool)
    for tri in graph.mesh.faces:
        rr, cc = polygon(px[tri, 1], px[tri, 0], shape)
        cover[rr, cc] = True
        # Thin triangles may cover no pixel centre; mark their corners.
        r = np.clip(np.round(px[tri, 1]).astype(int), 0, shape[0] - 1)
        c = np.clip(np.round(px[tri, 0]).astype(int), 0, shape[1] - 1)
        cover[r, c] = True
    labels, _ = ndimage.label(~cover)
    border = np.unique(np.concatenate([labels[0], labels[-1], labels[:, 0], labels[:, -1]]))
    return np.isin(labels, border[border > 0]), f


def build_chains(graph, policy="default", canvas=None, accel=None, include_hidden=True):
    """Greedy maximal chains of co-visible segments.

    Chains continue across direct links, through split near curves at
    T-junctions, and along contours through Y-junctions; they stop at
    curtain folds, bifurcations and on the far side of T-junctions.
    """
    if canvas is None:
        canvas = Canvas.for_graph(graph)
    pairs = _pairings(graph)
    seen = set()
    chains = []
    for sid in sorted(graph.segments):
        if sid in seen:
            continue
        seg = graph.segments[sid]
        if seg.visibility is Visibility.UNKNOWN:
            raise ValueError("build_chains needs resolved visibility")
        if not seg.visible and not include_hidden:
            continue
        # Rewind to the start of the run (or detect a cycle).
        cur, end, closed = sid, 0, False
        while True:
            n = _next(graph, pairs, cur, end)
            if n is None:
                break
            cur, end = n[0], 1 - n[1]
            if cur == sid:
                closed = True
                break
        cur, fwd = (sid, 1) if closed else (cur, 1 - end)
        order, flags = [], []
        while True:
            seen.add(cur)
            order.append(cur)
            flags.append(fwd == 1)
            n = _next(graph, pairs, cur, fwd)
            if n is None or n[0] in seen:
                break
            cur, fwd = n[0], 1 - n[1]
        pts = []
        for k, (s_id, f) in enumerate(zip(order, flags)):
            s = graph.segments[s_id]
            a, b = (s.q0, s.q1) if f else (s.q1, s.q0)
            if k == 0:
                pts.append(a)
            pts.append(b)
        poly = canvas.to_px(np.array(pts))
        first, last = graph.segments[order[0]], graph.segments[order[-1]]
        start = first.end_link(0 if flags[0] else 1)
        stop = last.end_link(1 if flags[-1] else 0)
        ch = Chain(len(chains), order, flags, closed, seg.visible,
                   None if closed else start, None if closed else stop, poly)
        ch.length = float(np.linalg.norm(np.diff(poly, axis=0), axis=1).sum())
        chains.append(ch)
    if policy == "silhouette-only":
        if accel is None:
            from .visibility import RayAccel
            accel = RayAccel(graph.mesh)
        outside, f = _exterior(graph, canvas)
        keep = []
        for ch in chains:
            if not ch.visible:
                continue
            mids = [s for s in ch.segments
                    if graph.segments[s].kind is not CurveType.BOUNDARY] or ch.segments
            beside = _is_silhouette(graph, accel, mids[len(mids) // 2], canvas)
            if beside is None:
                continue
            if outside is not None:
                # Background seen through a hole does not count as the object's outline.
                r, c = np.round(canvas.to_px(beside)[::-1] * f + 1.0).astype(int)
                win = outside[max(r - 2, 0):r + 3, max(c - 2, 0):c + 3]
                if not win.any():
                    continue
            keep.append(ch)
        for k, ch in enumerate(keep):
            ch.id = k
        chains = keep
    elif policy != "default":
        raise ValueError(f"unknown chaining policy {policy!r}")
    graph.chains = chains
    _add_locks(graph, chains, canvas)
    graph.stats["chains"] = sum(1 for c in chains if c.visible)
    graph.stage_log.append("chain")
    return chains


def _add_locks(graph, chains, canvas):
    """Record T-junction points that smoothing must keep fixed."""
    where = {}
    for ch in chains:
        for k, sid in enumerate(ch.segments):
            where[sid] = (ch, k)
    for sg in sorted(graph.singularities.values(), key=lambda s: s.id):
        if sg.kind is not SingularityKind.IMAGE:
            continue
        p = canvas.to_px(sg.anchor2d)
        for r in sg.refs:
            if r.seg not in where:
                continue
            ch, k = where[r.seg]
            if r.role == "near" and r.end is None:
                # Pass-through: point index along the chain polyline.
                s = graph.segments[r.seg]
                u = (r.t - s.t0) / (s.t1 - s.t0) if s.t1 > s.t0 else 0.5
                ch.locks.append(("inner", k, u if ch.forward[k] else 1.0 - u, p))
            elif r.end is not None:
                at_start = (k == 0 and ch.forward[0] == (r.end == 0))
                at_end = (k == len(ch.segments) - 1 and ch.forward[-1] == (r.end == 1))
                if at_start and not ch.closed:
                    ch.locks.append(("start", 0, 0.0, p))
                elif at_end and not ch.closed:
                    ch.locks.append(("end", k, 1.0, p))


# ---------------------------------------------------------------------------
# Topological simplification

def _node_of(ch, which):
    lk = ch.start if which == 0 else ch.end
    if lk is not None and lk[0] == "sing":
        return ("sing", lk[1])
    return ("free", ch.id, which)


def _degrees(chains, graph):
    deg = {}
    for ch in chains:
        if not ch.visible or ch.removed or ch.closed:
            continue
        for w in (0, 1):
            n = _node_of(ch, w)
            deg[n] = deg.get(n, 0) + 1
    # A visible near curve passing through a T-junction adds two arms.
    for sg in graph.singularities.values():
        if sg.kind is SingularityKind.IMAGE:
            for r in sg.refs:
                if r.role == "near" and r.end is None and graph.segments[r.seg].visible:
                    key = ("sing", sg.id)
                    deg[key] = deg.get(key, 0) + 2
    return deg


class _GridHash:
    def __init__(self, cell):
        self.cell = cell
        self.items = {}

    def add(self, owner, pts, dirs):
        for p, d in zip(pts, dirs):
            k = (int(p[0] // self.cell), int(p[1] // self.cell))
            self.items.setdefault(k, []).append((owner, p, d))

    def near(self, p):
        cx, cy = int(p[0] // self.cell), int(p[1] // self.cell)
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                yield from self.items.get((cx + dx, cy + dy), ())


def _samples(poly, step=0.5):
    seg = np.diff(poly, axis=0)
    lens = np.linalg.norm(seg, axis=1)
    pts, dirs = [], []
    for a, d, L in zip(poly[:-1], seg, lens):
        if L == 0:
            continue
        n = max(1, int(math.ceil(L / step)))
        t = (np.arange(n) + 0.5) / n
        pts.append(a + t[:, None] * d)
        dirs.append(np.repeat((d / L)[None], n, axis=0))
    if not pts:
        return np.zeros((0, 2)), np.zeros((0, 2))
    return np.concatenate(pts), np.concatenate(dirs)


def _overlapped(ch, grid, dist_px, angle_deg):
    pts, dirs = _samples(ch.polyline)
    if not len(pts):
        return True
    cos_tol = math.cos(math.radians(angle_deg))
    covered = 0
    for p, d in zip(pts, dirs):
        for owner, q, e in grid.near(p):
            if owner == ch.id:
                continue
            if np.hypot(*(p - q)) <= dist_px and abs(float(d @ e)) >= cos_tol:
                covered += 1
                break
    return covered == len(pts)


def _incidence(chains):
    inc = {}
    for ch in chains:
        if ch.visible and not ch.removed and not ch.closed:
            for w in (0, 1):
                inc.setdefault(_node_of(ch, w), []).append((ch, w))
    return inc


def _run_of(ch, deg, inc):
    """Maximal run of chains through ``ch`` joined at degree-2 nodes.

    Returns (chains, total length, end nodes, cyclic)."""
    path, ends = [ch], []
    for w in (0, 1):
        cur, cw = ch, w
        while True:
            n = _node_of(cur, cw)
            arms = inc.get(n, [])
            if deg.get(n, 1) != 2 or len(arms) != 2:
                ends.append(n)
                break
            nxt, nw = arms[1] if arms[0] == (cur, cw) else arms[0]
            if nxt is ch:
                return path, sum(c.length for c in path), [], True
            if any(nxt is c for c in path):
                ends.append(n)
                break
            path.append(nxt)
            cur, cw = nxt, 1 - nw
    return path, sum(c.length for c in path), ends, False


def simplify_topology(chains, graph, threshold_px=15.0, *, max_iterations=100,
                      overlap_px=1.0, overlap_deg=20.0):
    """Hide short spurs, isolated bits, tiny loops and 2D-overlapped chains.

    Chains meeting at degree-2 nodes are judged as one run.  Returns a dict
    with ``iterations`` (passes until nothing changed) and ``removed`` (per
    case).  Removed chains and their segments become invisible.
    """
    removed = {"a": 0, "b": 0, "c": 0, "d": 0}
    iterations = 0

    def live_grid():
        grid = _GridHash(max(overlap_px, 1.0) * 2.0)
        for c in chains:
            if c.visible and not c.removed:
                grid.add(c.id, *_samples(c.polyline))
        return grid

    while iterations < max_iterations:
        iterations += 1
        deg, inc, grid = _degrees(chains, graph), _incidence(chains), live_grid()
        changed = False
        for ch in [c for c in chains if c.visible and not c.removed]:
            if ch.removed or ch.length >= threshold_px:
                continue
            case, victims = None, [ch]
            if ch.closed or (_node_of(ch, 0) == _node_of(ch, 1)):
                case = "c"
            else:
                run, length, ends, cyclic = _run_of(ch, deg, inc)
                if length < threshold_px:
                    if cyclic:
                        case = "c"
                    else:
                        d0, d1 = deg.get(ends[0], 1), deg.get(ends[1], 1)
                        if ends[0] == ends[1]:
                            case = "c"
                        elif d0 == 1 and d1 == 1:
                            case = "b"
                        elif min(d0, d1) == 1 and max(d0, d1) >= 3:
                            case = "a"
                    if case is not None:
                        victims = run
            if case is None and _overlapped(ch, grid, overlap_px, overlap_deg):
                case = "d"
            if case is None:
                continue
            for v in victims:
                v.removed = True
                for sid in v.segments:
                    graph.segments[sid].visibility = Visibility.INVISIBLE
                removed[case] += 1
            changed = True
            # Refresh topology immediately so neighbours see the removal.
            deg, inc, grid = _degrees(chains, graph), _incidence(chains), live_grid()
        if not changed:
            break
    graph.stage_log.append("simplify")
    return {"iterations": iterations, "removed": removed}


# ---------------------------------------------------------------------------
# Smoothing

def _dedupe(poly, min_spacing, closed):
    keep = [poly[0]]
    for p in poly[1:-1]:
        if np.linalg.norm(p - keep[-1]) >= min_spacing:
            keep.append(p)
    last = poly[-1]
    if closed:
        while len(keep) > 1 and np.linalg.norm(keep[-1] - keep[0]) < min_spacing:
            keep.pop()
        return np.array(keep)
    if len(keep) > 1 and np.linalg.norm(last - keep[-1]) < min_spacing:
        keep[-1] = last
    else:
        keep.append(last)
    return np.array(keep)


def _chord_params(pts, closed):
    seg = np.linalg.norm(np.diff(np.vstack([pts, pts[:1]]) if closed else pts, axis=0), axis=1)
    u = np.concatenate([[0.0], np.cumsum(seg)])
    total = u[-1]
    return (u[:-1] if closed else u) / total, total


def _design(u, m, k, closed):
    """B-spline design matrix for ``m`` control points on uniform knots."""
    if closed:
        h = 1.0 / m
        t = np.arange(-k, m + k + 1) * h
        x = np.mod(u, 1.0)
        D = BSpline.design_matrix(x, t, k).toarray()
        A = np.zeros((len(u), m))
        for j in range(D.shape[1]):
            A[:, j % m] += D[:, j]
        return A, t
    inner = np.linspace(0.0, 1.0, m - k + 1)
    t = np.concatenate([[0.0] * k, inner, [1.0] * k])
    x = np.clip(u, 0.0, 1.0)
    return BSpline.design_matrix(x, t, k).toarray(), t


def _eval(coef, t, k, x, closed):
    if closed:
        m = len(coef)
        full = np.vstack([coef, coef[:k]])
        return BSpline(t, full, k, extrapolate=False)(np.mod(x, 1.0) if len(x) else x)
    return BSpline(t, coef, k)(x)


def smooth_chain(chain, min_spacing=2.0, samples_per_px=1.0, px_per_control=8.0,
                 junction_lock=True, closed=None):
    """Least-squares cubic B-spline centerline of a chain polyline (pixels)."""
    poly = chain.polyline if hasattr(chain, "polyline") else np.asarray(chain, float)
    closed = getattr(chain, "closed", False) if closed is None else closed
    poly = np.asarray(poly, float)
    if closed and len(poly) > 1 and np.allclose(poly[0], poly[-1]):
        poly = poly[:-1]
    pts = _dedupe(poly, min_spacing, closed)
    if len(pts) < (3 if closed else 2):
        return poly.copy() if len(poly) else poly
    u, total = _chord_params(pts, closed)
    n = len(pts)
    if not closed and n < 4:
        m, k = n, n - 1
    else:
        m = int(np.clip(round(total / px_per_control), 4 if not closed else 3, n))
        k = 3 if m > 3 else m - 1
    if closed and m < 3:
        return np.vstack([pts, pts[:1]])
    A, t = _design(u, m, k, closed)
    rows, targets = [], []
    locks = getattr(chain, "locks", []) if junction_lock else []
    if locks:
        # Lock T-junction points at their chord parameters on the original polyline.
        full_u, full_total = _chord_params(poly, False) if not closed else _chord_params(poly, True)
        seg_pts = _segment_offsets(chain)
        for kind, k_seg, frac, p in locks:
            if kind == "start" and not closed:
                x = 0.0
            elif kind == "end" and not closed:
                x = 1.0
            else:
                i = seg_pts[k_seg]
                a = full_u[i]
                b = full_u[i + 1] if i + 1 < len(full_u) else 1.0
                x = _remap(a + frac * (b - a), poly, pts, closed)
            rows.append(_design(np.array([x]), m, k, closed)[0][0])
            targets.append(np.asarray(p, float))
    coef = _constrained_lsq(A, pts, np.array(rows).reshape(-1, m), np.array(targets).reshape(-1, 2))
    count = max(2, int(math.ceil(total * samples_per_px)) + 1)
    if closed:
        x = np.linspace(0.0, 1.0, count, endpoint=False)
        out = _eval(coef, t, k, x, True)
        return np.vstack([out, out[:1]])
    return _eval(coef, t, k, np.linspace(0.0, 1.0, count), False)


def _segment_offsets(chain):
    # Chain polylines have one point per segment end: segment k spans [k, k+1].
    return list(range(len(getattr(chain, "segments", []))))


def _remap(x_full, poly, pts, closed):
    """Chord parameter on the deduplicated polyline of a point given on ``poly``."""
    full_u, _ = _chord_params(poly, closed)
    if closed:
        idx = np.searchsorted(full_u, x_full, side="right") - 1
    else:
        idx = min(np.searchsorted(full_u, x_full, side="right") - 1, len(poly) - 2)
    idx = max(int(idx), 0)
    nxt = poly[(idx + 1) % len(poly)]
    span = (full_u[idx + 1] if idx + 1 < len(full_u) else 1.0) - full_u[idx]
    f = (x_full - full_u[idx]) / span if span > 0 else 0.0
    q = poly[idx] + f * (nxt - poly[idx])
    # Closest point on the deduplicated polyline.
    u, _ = _chord_params(pts, closed)
    ring = np.vstack([pts, pts[:1]]) if closed else pts
    uu = np.append(u, 1.0) if closed else u
    best, best_x = np.inf, 0.0
    for i in range(len(ring) - 1):
        a, b = ring[i], ring[i + 1]
        d = b - a
        L2 = float(d @ d)
        s = 0.0 if L2 == 0 else float(np.clip((q - a) @ d / L2, 0.0, 1.0))
        dist = float(np.linalg.norm(a + s * d - q))
        if dist < best:
            best, best_x = dist, uu[i] + s * (uu[i + 1] - uu[i])
    return best_x


def _constrained_lsq(A, y, C, d):
    """min |A c - y| subject to C c = d (KKT)."""
    if not len(C):
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        return coef
    m = A.shape[1]
    K = np.zeros((m + len(C), m + len(C)))
    K[:m, :m] = 2.0 * A.T @ A
    K[:m, m:] = C.T
    K[m:, :m] = C
    rhs = np.vstack([2.0 * A.T @ y, d])
    sol, *_ = np.linalg.lstsq(K, rhs, rcond=None)
    return sol[:m]


# ---------------------------------------------------------------------------
# Ribs

@dataclass
class Style:
    width: float = 1.5            # half-width, px
    color: str = "#000000"
    opacity: float = 1.0
    taper: bool = False
    dash: str = ""
    hidden_color: str = "#888888"
    hidden_width: float = 0.5
    hidden_dash: str = "4 3"

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            data = json.load(fh)
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown style keys: {sorted(unknown)}")
        return cls(**data)


def taper_profile(w_max):
    return lambda t: t * (1.0 - t) * w_max


@dataclass
class Stroke:
    centerline: np.ndarray
    widths: np.ndarray
    ribs: np.ndarray
    valid: np.ndarray
    closed: bool = False
    visible: bool = True
    chain: int = -1
    clamped: int = 0
    skipped: int = 0


def build_ribs(centerline, width=1.0, closed=False):
    """Perpendicular rib vectors r_i = w_i R90 (v_{i+1} - v_{i-1}) / |...|.

    ``width`` is a constant or a callable of normalised arc length.  Ribs
    longer than the local radius of curvature are clamped to it.
    """
    v = np.asarray(centerline, float)
    if closed and len(v) > 2 and np.array_equal(v[0], v[-1]):
        v = v[:-1]
    n = len(v)
    seg = np.linalg.norm(np.diff(v, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    tnorm = s / s[-1] if n > 1 and s[-1] > 0 else np.zeros(n)
    w = np.array([width(x) for x in tnorm]) if callable(width) else np.full(n, float(width))
    ribs = np.zeros((n, 2))
    valid = np.ones(n, dtype=bool)
    clamped = skipped = 0
    for i in range(n):
        if closed:
            prev, nxt = v[(i - 1) % n], v[(i + 1) % n]
        else:
            prev, nxt = v[max(i - 1, 0)], v[min(i + 1, n - 1)]
        chord = nxt - prev
        L = float(np.hypot(*chord))
        if L == 0.0:                     # zero chord: no defined normal, skip the sample
            valid[i] = False
            skipped += 1
            continue
        r = np.array([-chord[1], chord[0]]) / L
        wi = w[i]
        interior = closed or 0 < i < n - 1
        if interior and wi > 0:
            R = _circumradius(prev, v[i], nxt)
            if R < wi:
                wi = R
                clamped += 1
        w[i] = wi
        ribs[i] = wi * r
    if closed:
        v = np.vstack([v, v[:1]])
        ribs = np.vstack([ribs, ribs[:1]])
        w = np.append(w, w[0])
        valid = np.append(valid, valid[0])
    return Stroke(v, w, ribs, valid, closed=closed, clamped=clamped, skipped=skipped)


def _circumradius(a, b, c):
    ab, bc, ca = np.hypot(*(b - a)), np.hypot(*(c - b)), np.hypot(*(a - c))
    cross = abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
    if cross == 0.0:
        return math.inf
    return ab * bc * ca / (2.0 * cross)


# ---------------------------------------------------------------------------
# SVG

def _fmt(x):
    s = f"{x:.3f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def _path(points, closed):
    pts = points[:-1] if closed and len(points) > 1 and np.array_equal(points[0], points[-1]) \
        else points
    d = "M" + " L".join(f"{_fmt(p[0])} {_fmt(p[1])}" for p in pts)
    return d + (" Z" if closed else "")


def emit_svg(strokes, style=None, canvas=None, hidden_lines=False):
    """Deterministic SVG 1.1 document; strokes are emitted in list order."""
    style = style or Style()
    w = canvas.width if canvas else DEFAULT_CANVAS
    h = canvas.height if canvas else DEFAULT_CANVAS
    out = ['<?xml version="1.0" encoding="UTF-8"?>',
           f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" '
           f'viewBox="0 0 {w} {h}">']
    if hidden_lines:
        out.append('<g id="hidden" fill="none" stroke-linecap="round">')
        for st in strokes:
            if st.visible:
                continue
            out.append(f'<path id="c{st.chain}" d="{_path(st.centerline, st.closed)}" '
                       f'stroke="{style.hidden_color}" stroke-width="{_fmt(2 * style.hidden_width)}" '
                       f'stroke-dasharray="{style.hidden_dash}"/>')
        out.append("</g>")
    out.append('<g id="visible" stroke-linecap="round" stroke-linejoin="round">')
    for st in strokes:
        if not st.visible:
            continue
        dash = f' stroke-dasharray="{style.dash}"' if style.dash else ""
        if np.ptp(st.widths) == 0 if len(st.widths) else True:
            width = st.widths[0] if len(st.widths) else style.width
            out.append(f'<path id="c{st.chain}" d="{_path(st.centerline, st.closed)}" fill="none" '
                       f'stroke="{style.color}" stroke-width="{_fmt(2 * width)}" '
                       f'stroke-opacity="{_fmt(style.opacity)}"{dash}/>')
        else:
            ok = st.valid
            left = st.centerline[ok] + st.ribs[ok]
            right = (st.centerline[ok] - st.ribs[ok])[::-1]
            outline = np.vstack([left, right])
            out.append(f'<path id="c{st.chain}" d="{_path(outline, True)}" fill="{style.color}" '
                       f'fill-opacity="{_fmt(style.opacity)}" stroke="none"/>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def stylize(chains, style=None, *, smooth=True, junction_lock=True, hidden_lines=False):
    """Smooth and rib every kept chain; invisible ones only for hidden-line mode."""
    style = style or Style()
    strokes = []
    for ch in chains:
        if ch.removed:
            continue
        if not ch.visible and not hidden_lines:
            continue
        line = smooth_chain(ch, junction_lock=junction_lock) if smooth else ch.polyline
        width = taper_profile(4.0 * style.width) if style.taper and ch.visible else style.width
        st = build_ribs(line, width, closed=ch.closed)
        st.visible, st.chain = ch.visible, ch.id
        strokes.append(st)
    return strokes
