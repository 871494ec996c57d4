"""Robust orientation predicates.

Every predicate first evaluates the determinant in double precision and
accepts the sign when it clears Shewchuk's forward error bound.  Inputs that
fail the filter are re-evaluated exactly with floating-point expansion
arithmetic (sums of non-overlapping doubles), so the returned sign is the
sign of the real determinant of the given double coordinates.

Scalar entry points take 2- or 3-sequences of floats.  The ``*_many``
variants take ``(N, k)`` arrays and run the filter vectorised, falling back
to the exact path only for the uncertain rows.
"""

from enum import IntEnum

import numpy as np

from .errors import SharedEndpoint, ZeroOrientation

_EPS = 2.0 ** -53
_SPLITTER = 2.0 ** 27 + 1.0

_CCW_ERRBOUND_A = (3.0 + 16.0 * _EPS) * _EPS
_O3D_ERRBOUND_A = (7.0 + 56.0 * _EPS) * _EPS
# Bound for det(b - a, c - a, w) with w taken verbatim: two fewer rounded
# differences than orient3d, so the orient3d constant is conservative.
_DIR_ERRBOUND_A = _O3D_ERRBOUND_A
# Below this magnitude the error bounds can be swamped by underflow.
_TINY = 1e-250


class Sign(IntEnum):
    NEGATIVE = -1
    ZERO = 0
    POSITIVE = 1


# --------------------------------------------------------------------------
# Expansion arithmetic.  An expansion is a list of doubles, non-overlapping
# and sorted by increasing magnitude, whose exact sum is the value.

def _two_sum(a, b):
    x = a + b
    bv = x - a
    av = x - bv
    return x, (a - av) + (b - bv)


def _split(a):
    c = _SPLITTER * a
    hi = c - (c - a)
    return hi, a - hi


def _two_product(a, b):
    x = a * b
    ahi, alo = _split(a)
    bhi, blo = _split(b)
    err = x - ahi * bhi
    err -= alo * bhi
    err -= ahi * blo
    return x, alo * blo - err


def _grow(e, b):
    out = []
    q = b
    for comp in e:
        q, low = _two_sum(q, comp)
        if low != 0.0:
            out.append(low)
    if q != 0.0 or not out:
        out.append(q)
    return out


def _add(e, f):
    for comp in f:
        e = _grow(e, comp)
    return e


def _neg(e):
    return [-x for x in e]


def _diff(a, b):
    x = a - b
    bv = a - x
    av = x + bv
    low = (a - av) + (bv - b)
    return [low, x] if low != 0.0 else [x]


def _scale(e, b):
    out = [0.0]
    for comp in e:
        x, y = _two_product(comp, b)
        if y != 0.0:
            out = _grow(out, y)
        out = _grow(out, x)
    return out


def _mul(e, f):
    out = [0.0]
    for comp in f:
        out = _add(out, _scale(e, comp))
    return out


def _sign(e):
    for comp in reversed(e):
        if comp > 0.0:
            return 1
        if comp < 0.0:
            return -1
    return 0


def _det3(r0, r1, r2):
    m0 = _add(_mul(r1[1], r2[2]), _neg(_mul(r1[2], r2[1])))
    m1 = _add(_mul(r1[2], r2[0]), _neg(_mul(r1[0], r2[2])))
    m2 = _add(_mul(r1[0], r2[1]), _neg(_mul(r1[1], r2[0])))
    return _add(_add(_mul(r0[0], m0), _mul(r0[1], m1)), _mul(r0[2], m2))


# Expansion arithmetic is exact only while no product under- or overflows;
# rows with components outside this range are evaluated with rationals.
_SAFE_LO, _SAFE_HI = 2.0 ** -200, 2.0 ** 200


def _safe(rows):
    for row in rows:
        for e in row:
            for x in e:
                if x != 0.0 and not (_SAFE_LO <= abs(x) <= _SAFE_HI):
                    return False
    return True


def _rational_det3(rows):
    from fractions import Fraction
    m = [[sum(Fraction(x) for x in e) for e in row] for row in rows]
    det = (m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
           - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
           + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]))
    return (det > 0) - (det < 0)


def _orient3d_exact(a, b, c, d):
    rows = [[_diff(p[k], d[k]) for k in range(3)] for p in (a, b, c)]
    if not _safe(rows):
        return _rational_det3(rows)
    return _sign(_det3(*rows))


def _orient2d_exact(a, b, c):
    acx, acy = _diff(a[0], c[0]), _diff(a[1], c[1])
    bcx, bcy = _diff(b[0], c[0]), _diff(b[1], c[1])
    if not _safe([[acx, acy, bcx, bcy]]):
        from fractions import Fraction
        q = [sum(Fraction(x) for x in e) for e in (acx, acy, bcx, bcy)]
        det = q[0] * q[3] - q[1] * q[2]
        return (det > 0) - (det < 0)
    return _sign(_add(_mul(acx, bcy), _neg(_mul(acy, bcx))))


def _orient_dir_exact(a, b, c, w):
    r0 = [_diff(b[k], a[k]) for k in range(3)]
    r1 = [_diff(c[k], a[k]) for k in range(3)]
    r2 = [[float(w[k])] for k in range(3)]
    if not _safe([r0, r1, r2]):
        return _rational_det3([r2, r0, r1])
    return _sign(_det3(r0, r1, r2))


def _as3(p):
    return float(p[0]), float(p[1]), float(p[2])


# --------------------------------------------------------------------------
# Scalar predicates

def orient3d(a, b, c, d):
    """Sign of det(a - d, b - d, c - d).

    Negative when ``d`` lies on the side of the plane that the normal of the
    counter-clockwise triangle ``abc`` points to.
    """
    a, b, c, d = _as3(a), _as3(b), _as3(c), _as3(d)
    adx, ady, adz = a[0] - d[0], a[1] - d[1], a[2] - d[2]
    bdx, bdy, bdz = b[0] - d[0], b[1] - d[1], b[2] - d[2]
    cdx, cdy, cdz = c[0] - d[0], c[1] - d[1], c[2] - d[2]
    bdxcdy, cdxbdy = bdx * cdy, cdx * bdy
    cdxady, adxcdy = cdx * ady, adx * cdy
    adxbdy, bdxady = adx * bdy, bdx * ady
    det = (adz * (bdxcdy - cdxbdy)
           + bdz * (cdxady - adxcdy)
           + cdz * (adxbdy - bdxady))
    permanent = ((abs(bdxcdy) + abs(cdxbdy)) * abs(adz)
                 + (abs(cdxady) + abs(adxcdy)) * abs(bdz)
                 + (abs(adxbdy) + abs(bdxady)) * abs(cdz))
    bound = _O3D_ERRBOUND_A * permanent
    if permanent > _TINY and (det > bound or -det > bound):
        return Sign.POSITIVE if det > 0 else Sign.NEGATIVE
    return Sign(_orient3d_exact(a, b, c, d))


def orient2d(a, b, c):
    """Sign of det(b - a, c - a); positive for counter-clockwise ``abc``."""
    ax, ay = float(a[0]), float(a[1])
    bx, by = float(b[0]), float(b[1])
    cx, cy = float(c[0]), float(c[1])
    left = (ax - cx) * (by - cy)
    right = (ay - cy) * (bx - cx)
    det = left - right
    bound = _CCW_ERRBOUND_A * (abs(left) + abs(right))
    if abs(left) + abs(right) > _TINY and (det > bound or -det > bound):
        return Sign.POSITIVE if det > 0 else Sign.NEGATIVE
    return Sign(_orient2d_exact((ax, ay), (bx, by), (cx, cy)))


def orient_direction(a, b, c, w):
    """Sign of w . ((b - a) x (c - a)), exact.

    Used for orthographic facing, where the view is a direction rather than
    a point.
    """
    a, b, c, w = _as3(a), _as3(b), _as3(c), _as3(w)
    return Sign(_orient_direction_filtered(a, b, c, w))


def _orient_direction_filtered(a, b, c, w):
    ux, uy, uz = b[0] - a[0], b[1] - a[1], b[2] - a[2]
    vx, vy, vz = c[0] - a[0], c[1] - a[1], c[2] - a[2]
    t0, t1 = uy * vz, uz * vy
    t2, t3 = uz * vx, ux * vz
    t4, t5 = ux * vy, uy * vx
    det = w[0] * (t0 - t1) + w[1] * (t2 - t3) + w[2] * (t4 - t5)
    permanent = (abs(w[0]) * (abs(t0) + abs(t1)) + abs(w[1]) * (abs(t2) + abs(t3))
                 + abs(w[2]) * (abs(t4) + abs(t5)))
    bound = _DIR_ERRBOUND_A * permanent
    if permanent > _TINY and (det > bound or -det > bound):
        return 1 if det > 0 else -1
    return _orient_dir_exact(a, b, c, w)


def front_side(a, b, c, d):
    """Positive iff ``d`` is on the normal side of triangle ``abc``."""
    return Sign(-orient3d(a, b, c, d))


def same_side(a, b, c, d, e):
    """True iff ``d`` and ``e`` lie on the same side of the plane of ``abc``.

    Raises ZeroOrientation when either point is exactly on the plane.
    """
    sd = orient3d(a, b, c, d)
    se = orient3d(a, b, c, e)
    if sd == 0 or se == 0:
        raise ZeroOrientation("point on the plane of the reference triangle")
    return (sd > 0) == (se > 0)


def segments_intersect_2d(a, b, d, e):
    """Proper crossing test for 2D segments ``ab`` and ``de``.

    Returns ``None`` or the crossing parameters ``(s, t)`` along ``ab`` and
    ``de``.  Touching configurations (an endpoint on the other segment, or
    collinear overlap) are not crossings.  The decision uses exact signs;
    only the parameters are computed in floating point.
    """
    a = (float(a[0]), float(a[1]))
    b = (float(b[0]), float(b[1]))
    d = (float(d[0]), float(d[1]))
    e = (float(e[0]), float(e[1]))
    if a == b or d == e:
        raise ValueError("degenerate segment")
    if a in (d, e) or b in (d, e):
        raise SharedEndpoint("segments share an endpoint")
    o1 = orient2d(a, b, d)
    o2 = orient2d(a, b, e)
    if o1 * o2 >= 0:
        return None
    o3 = orient2d(d, e, a)
    o4 = orient2d(d, e, b)
    if o3 * o4 >= 0:
        return None
    return crossing_parameters(a, b, d, e)


def crossing_parameters(a, b, d, e):
    rx, ry = b[0] - a[0], b[1] - a[1]
    qx, qy = e[0] - d[0], e[1] - d[1]
    wx, wy = d[0] - a[0], d[1] - a[1]
    denom = rx * qy - ry * qx
    s = (wx * qy - wy * qx) / denom
    t = (wx * ry - wy * rx) / denom
    return min(max(s, 0.0), 1.0), min(max(t, 0.0), 1.0)


def edge_occluded_by_face(p, e, q, r, c):
    """True iff triangle ``pqr`` hides edge ``pe`` near ``p`` from eye ``c``.

    The triangle shares vertex ``p`` with the edge.  Three clipping tests:
    ``e`` is behind the triangle plane, and inside both wedge planes through
    the eye and the triangle's sides at ``p``.
    """
    if same_side(p, q, r, c, e):
        return False
    if not same_side(c, p, q, e, r):
        return False
    return same_side(c, p, r, e, q)


# --------------------------------------------------------------------------
# Vectorised predicates

def orient3d_many(a, b, c, d):
    """Row-wise orient3d over ``(N, 3)`` arrays; returns int8 signs."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    a, b, c, d = np.broadcast_arrays(a, b, c, d)
    ad = a - d
    bd = b - d
    cd = c - d
    bdxcdy = bd[:, 0] * cd[:, 1]
    cdxbdy = cd[:, 0] * bd[:, 1]
    cdxady = cd[:, 0] * ad[:, 1]
    adxcdy = ad[:, 0] * cd[:, 1]
    adxbdy = ad[:, 0] * bd[:, 1]
    bdxady = bd[:, 0] * ad[:, 1]
    det = (ad[:, 2] * (bdxcdy - cdxbdy)
           + bd[:, 2] * (cdxady - adxcdy)
           + cd[:, 2] * (adxbdy - bdxady))
    permanent = ((np.abs(bdxcdy) + np.abs(cdxbdy)) * np.abs(ad[:, 2])
                 + (np.abs(cdxady) + np.abs(adxcdy)) * np.abs(bd[:, 2])
                 + (np.abs(adxbdy) + np.abs(bdxady)) * np.abs(cd[:, 2]))
    signs = np.sign(det).astype(np.int8)
    unsure = ~((np.abs(det) > _O3D_ERRBOUND_A * permanent) & (permanent > _TINY))
    for i in np.flatnonzero(unsure):
        signs[i] = _orient3d_exact(_as3(a[i]), _as3(b[i]), _as3(c[i]), _as3(d[i]))
    return signs


def orient2d_many(a, b, c):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    a, b, c = np.broadcast_arrays(a, b, c)
    left = (a[:, 0] - c[:, 0]) * (b[:, 1] - c[:, 1])
    right = (a[:, 1] - c[:, 1]) * (b[:, 0] - c[:, 0])
    det = left - right
    mag = np.abs(left) + np.abs(right)
    signs = np.sign(det).astype(np.int8)
    unsure = ~((np.abs(det) > _CCW_ERRBOUND_A * mag) & (mag > _TINY))
    for i in np.flatnonzero(unsure):
        signs[i] = _orient2d_exact(tuple(map(float, a[i])), tuple(map(float, b[i])),
                                   tuple(map(float, c[i])))
    return signs


def orient_direction_many(a, b, c, w):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    a, b, c, w = np.broadcast_arrays(a, b, c, w)
    u = b - a
    v = c - a
    t0, t1 = u[:, 1] * v[:, 2], u[:, 2] * v[:, 1]
    t2, t3 = u[:, 2] * v[:, 0], u[:, 0] * v[:, 2]
    t4, t5 = u[:, 0] * v[:, 1], u[:, 1] * v[:, 0]
    det = w[:, 0] * (t0 - t1) + w[:, 1] * (t2 - t3) + w[:, 2] * (t4 - t5)
    permanent = (np.abs(w[:, 0]) * (np.abs(t0) + np.abs(t1))
                 + np.abs(w[:, 1]) * (np.abs(t2) + np.abs(t3))
                 + np.abs(w[:, 2]) * (np.abs(t4) + np.abs(t5)))
    signs = np.sign(det).astype(np.int8)
    unsure = ~((np.abs(det) > _DIR_ERRBOUND_A * permanent) & (permanent > _TINY))
    for i in np.flatnonzero(unsure):
        signs[i] = _orient_dir_exact(_as3(a[i]), _as3(b[i]), _as3(c[i]), _as3(w[i]))
    return signs
