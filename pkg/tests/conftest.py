"""Shared fixtures: generic-position meshes and deterministic camera sets."""

import functools

import numpy as np
import pytest

from contourline import shapes
from contourline.mesh import Camera
from contourline.visibility import RayAccel


def random_cameras(mesh, count, seed=0, *, band=None, distance=3.0, ortho_every=4):
    """Cameras on a sphere around the mesh; every ``ortho_every``-th is orthographic.

    ``band`` limits the elevation (|z| of the unit direction) for meshes whose
    interesting views are equatorial.
    """
    rng = np.random.default_rng(seed)
    lo, hi = mesh.bbox
    centre = 0.5 * (lo + hi)
    radius = distance * max(mesh.diagonal / 2.0, 1e-9)
    out = []
    while len(out) < count:
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
        if band is not None and abs(d[2]) > band:
            continue
        up = (0.0, 0.0, 1.0) if abs(d[1]) > 0.9 else (0.0, 1.0, 0.0)
        if ortho_every and len(out) % ortho_every == ortho_every - 1:
            out.append(Camera.orthographic(-d, centre, up))
        else:
            out.append(Camera.perspective(centre + radius * d, centre, up))
    return out


@functools.lru_cache(maxsize=None)
def suite_mesh(name):
    builders = {
        "icosphere1": lambda: shapes.icosphere(1),
        "icosphere2": lambda: shapes.icosphere(2),
        "icosphere3": lambda: shapes.icosphere(3),
        "torus": lambda: shapes.torus(),
        "genus2": lambda: shapes.genus2(),
        "open_cylinder": lambda: shapes.open_cylinder(),
    }
    return shapes.generic(builders[name](), seed=7)


SUITE = ("icosphere1", "icosphere2", "icosphere3", "torus", "genus2", "open_cylinder")


def suite_cameras(name, count=100, seed=11):
    mesh = suite_mesh(name)
    band = 0.6 if name == "open_cylinder" else None
    return random_cameras(mesh, count, seed, band=band)


@functools.lru_cache(maxsize=None)
def accel_for(name):
    return RayAccel(suite_mesh(name))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def fishtail():
    """Gaussian bump seen at a grazing angle: convex contour, cusp, concave run,
    cusp, hidden convex run emerging at a T-junction behind the first run."""
    mesh = shapes.generic(shapes.bump(n=10, size=4.0, height=2.0, width=1.6), seed=1)
    el, az, dist = 0.05, 0.1, 8.0
    centre = (dist * np.cos(el) * np.sin(az), -dist * np.cos(el) * np.cos(az),
              dist * np.sin(el) + 0.2)
    return mesh, Camera.perspective(centre, look_at=(0.0, 0.0, 0.3), up=(0.0, 0.0, 1.0))


def saddle_view():
    """Monkey saddle seen edge-on through its centre vertex (four contour edges there)."""
    mesh = shapes.generic(shapes.monkey_saddle(), seed=1)
    a = np.pi / 6
    return mesh, Camera.perspective((5 * np.cos(a), 5 * np.sin(a), 0.0), up=(0.0, 0.0, 1.0))


def two_tori_view():
    mesh = shapes.generic(shapes.two_tori())
    return mesh, Camera.perspective((0.0, 0.0, 6.0))


# One summary line per acceptance criterion, filled in by test_acceptance.py.
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
