"""Exact Bentley-Ottmann sweep for proper crossings between 2D segments.

Segment endpoints are doubles; intersection event points are exact
rationals.  Events are processed in lexicographic (y, x) order and the
status line is kept ordered by x just above the current event, so every
order decision reduces to an exact point-versus-segment orientation.

Only *proper* crossings are reported: the two segments meet at a single
point interior to both.  Endpoint contacts and collinear overlaps are not
crossings.
"""

from __future__ import annotations

import heapq
from fractions import Fraction

import numpy as np

from . import predicates as pr

try:                                     # gmpy2 rationals are ~5x faster when present
    from gmpy2 import mpq as _Q
except ImportError:                      # pragma: no cover
    _Q = Fraction
_RATIONAL = (Fraction, type(_Q(0)))


_EPS = 2.0 ** -52


def _orient_exact(a, b, c):
    v = (a[0] - c[0]) * (b[1] - c[1]) - (a[1] - c[1]) * (b[0] - c[0])
    return (v > 0) - (v < 0)


def _orient_rational(s, p):
    """orient2d(s.start, s.end, p) for a rational event point ``p``.

    A float evaluation with a bound covering both the rounding of ``p`` and
    the arithmetic decides most cases; ties go to exact rationals.
    """
    fx, fy = float(p[0]), float(p[1])
    (ax, ay), (bx, by) = s.s, s.e
    ux, uy = bx - ax, by - ay
    wx, wy = fx - ax, fy - ay
    det = ux * wy - uy * wx
    bound = (abs(ux) * abs(fy) + abs(uy) * abs(fx)) * _EPS \
        + 8.0 * _EPS * (abs(ux * wy) + abs(uy * wx) + (abs(ux) + abs(uy)) * (abs(wx) + abs(wy)))
    if det > bound:
        return 1
    if det < -bound:
        return -1
    return _orient_exact(s.fs, s.fe, p)


class _Seg:
    __slots__ = ("id", "s", "e", "fs", "fe", "horizontal", "slope")

    def __init__(self, i, p, q):
        p = (float(p[0]), float(p[1]))
        q = (float(q[0]), float(q[1]))
        if (p[1], p[0]) > (q[1], q[0]):
            p, q = q, p
        self.id = i
        self.s, self.e = p, q
        self.fs = (_Q(p[0]), _Q(p[1]))
        self.fe = (_Q(q[0]), _Q(q[1]))
        self.horizontal = p[1] == q[1]
        if self.horizontal:
            self.slope = None
        else:
            self.slope = (self.fe[0] - self.fs[0]) / (self.fe[1] - self.fs[1])

    def side(self, p, exact):
        """+1 if the segment passes right of ``p`` at p's height, 0 on it, -1 left."""
        if self.horizontal:
            if p[0] < self.s[0]:
                return 1
            if p[0] > self.e[0]:
                return -1
            return 0
        if exact:
            return _orient_rational(self, p)
        return int(pr.orient2d(self.s, self.e, p))

    def order_key(self):
        # Order just above the event point: by dx/dy, horizontals last.
        return (1, 0, self.id) if self.horizontal else (0, self.slope, self.id)


def _meet(a, b):
    """Single intersection point of two segments, or None (exact)."""
    o1 = pr.orient2d(a.s, a.e, b.s)
    o2 = pr.orient2d(a.s, a.e, b.e)
    if o1 * o2 > 0:
        return None
    o3 = pr.orient2d(b.s, b.e, a.s)
    o4 = pr.orient2d(b.s, b.e, a.e)
    if o3 * o4 > 0:
        return None
    if o1 == 0 and o2 == 0:
        return None                           # collinear: endpoints are events anyway
    if o1 == 0:
        return b.s
    if o2 == 0:
        return b.e
    if o3 == 0:
        return a.s
    if o4 == 0:
        return a.e
    rx, ry = a.fe[0] - a.fs[0], a.fe[1] - a.fs[1]
    qx, qy = b.fe[0] - b.fs[0], b.fe[1] - b.fs[1]
    wx, wy = b.fs[0] - a.fs[0], b.fs[1] - a.fs[1]
    t = (wx * qy - wy * qx) / (rx * qy - ry * qx)
    return (a.fs[0] + t * rx, a.fs[1] + t * ry)


def _frac(x):
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(x)
    return Fraction(int(x.numerator), int(x.denominator))


def sweep_crossings(segments, stats=None):
    """All proper crossings among ``segments`` (an (N, 4) array x0 y0 x1 y1).

    Returns a sorted list of ``(i, j, point)`` with ``i < j`` and ``point``
    an exact ``(Fraction, Fraction)`` pair.
    """
    seg = np.asarray(segments, dtype=np.float64).reshape(-1, 4)
    segs = []
    starts = {}
    for i, (x0, y0, x1, y1) in enumerate(seg):
        if x0 == x1 and y0 == y1:
            raise ValueError(f"segment {i} is degenerate")
        s = _Seg(i, (x0, y0), (x1, y1))
        segs.append(s)
        starts.setdefault(s.s, []).append(s)
    queue = [(p[1], p[0]) for p in set([s.s for s in segs] + [s.e for s in segs])]
    heapq.heapify(queue)
    queued = set(queue)
    status = []
    out = []
    events = 0

    def push(q, p):
        key = (q[1], q[0])
        if key > (p[1], p[0]) and key not in queued:
            queued.add(key)
            heapq.heappush(queue, key)

    while queue:
        y, x = heapq.heappop(queue)
        p = (x, y)
        events += 1
        exact = isinstance(x, _RATIONAL) or isinstance(y, _RATIONAL)
        # First status slot at or right of p, then the run passing through p.
        lo, hi = 0, len(status)
        while lo < hi:
            mid = (lo + hi) // 2
            if status[mid].side(p, exact) < 0:
                lo = mid + 1
            else:
                hi = mid
        end = lo
        while end < len(status) and status[end].side(p, exact) == 0:
            end += 1
        through = status[lo:end]
        inner = [s for s in through if s.e != p]
        upper = starts.get(p, [])
        if len(inner) > 1:
            for a_i in range(len(inner)):
                for b_i in range(a_i + 1, len(inner)):
                    a, b = inner[a_i], inner[b_i]
                    if a.horizontal and b.horizontal:
                        continue
                    if not a.horizontal and not b.horizontal and a.slope == b.slope:
                        continue
                    i, j = sorted((a.id, b.id))
                    out.append((i, j, (_frac(x), _frac(y))))
        del status[lo:end]
        added = sorted(upper + inner, key=_Seg.order_key)
        status[lo:lo] = added
        if not added:
            if 0 < lo < len(status):
                q = _meet(status[lo - 1], status[lo])
                if q is not None:
                    push(q, p)
        else:
            k = lo + len(added)
            if lo > 0:
                q = _meet(status[lo - 1], status[lo])
                if q is not None:
                    push(q, p)
            if k < len(status):
                q = _meet(status[k - 1], status[k])
                if q is not None:
                    push(q, p)
    if stats is not None:
        stats["sweep_events"] = events
    out.sort(key=lambda t: (t[0], t[1]))
    return out


def brute_force_crossings(segments, chunk=200_000):
    """O(n^2) reference: pairs (i, j), i < j, that cross properly."""
    seg = np.asarray(segments, dtype=np.float64).reshape(-1, 4)
    n = len(seg)
    I, J = np.triu_indices(n, 1)
    found = []
    for k in range(0, len(I), chunk):
        i, j = I[k:k + chunk], J[k:k + chunk]
        a, b = seg[i, :2], seg[i, 2:]
        d, e = seg[j, :2], seg[j, 2:]
        # Cheap reject on bounding boxes before the exact signs.
        box = ((np.maximum(a[:, 0], b[:, 0]) >= np.minimum(d[:, 0], e[:, 0]))
               & (np.maximum(d[:, 0], e[:, 0]) >= np.minimum(a[:, 0], b[:, 0]))
               & (np.maximum(a[:, 1], b[:, 1]) >= np.minimum(d[:, 1], e[:, 1]))
               & (np.maximum(d[:, 1], e[:, 1]) >= np.minimum(a[:, 1], b[:, 1])))
        sel = np.flatnonzero(box)
        if not len(sel):
            continue
        a, b, d, e = a[sel], b[sel], d[sel], e[sel]
        o1 = pr.orient2d_many(a, b, d).astype(np.int64)
        o2 = pr.orient2d_many(a, b, e).astype(np.int64)
        o3 = pr.orient2d_many(d, e, a).astype(np.int64)
        o4 = pr.orient2d_many(d, e, b).astype(np.int64)
        hit = (o1 * o2 < 0) & (o3 * o4 < 0)
        found.extend(zip(i[sel][hit].tolist(), j[sel][hit].tolist()))
    return sorted(found)
