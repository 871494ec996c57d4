import json
import types
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from conftest import accel_for, fishtail, suite_mesh
from contourline import shapes
from contourline.extraction import extract_brute_force
from contourline.mesh import Camera
from contourline.viewgraph import CurveType, Visibility, build_view_graph
from contourline.visibility import RayAccel, resolve
from contourline.stylize import (Canvas, Chain, Style, build_chains, build_ribs, emit_svg,
                                 simplify_topology, smooth_chain, stylize, taper_profile)


def _resolved(mesh, cam, accel=None):
    g = build_view_graph(extract_brute_force(mesh, cam), mesh, cam)
    resolve(g, accel or RayAccel(mesh), "qi")
    return g


# -- chaining ------------------------------------------------------------------

def test_sphere_one_closed_chain():
    g = _resolved(suite_mesh("icosphere3"), Camera.perspective((0.1, 0.2, 5.0)),
                  accel_for("icosphere3"))
    vis = [c for c in build_chains(g) if c.visible]
    assert len(vis) == 1 and vis[0].closed
    assert len(vis[0].segments) == len(g.segments)


def test_fishtail_chains():
    m, cam = fishtail()
    g = _resolved(m, cam)
    chains = build_chains(g)
    contour = [c for c in chains
               if any(g.segments[s].kind is CurveType.CONTOUR for s in c.segments)]
    assert len(contour) == 3
    # Every cusp and the far side of the T-junction separate chains.
    owner = {s: c.id for c in chains for s in c.segments}
    for sg in g.singularities.values():
        if sg.kind.value == "contour-curtain-fold":
            a, b = sg.refs
            assert owner[a.seg] != owner[b.seg]
        if sg.kind.value == "image-space-intersection":
            lower, upper = sg.refs[1:]
            assert owner[lower.seg] != owner[upper.seg]


def test_chains_are_covisible_and_cover_segments():
    g = _resolved(suite_mesh("genus2"), Camera.perspective((0.5, 3.5, 1.5)), accel_for("genus2"))
    chains = build_chains(g)
    seen = [s for c in chains for s in c.segments]
    assert sorted(seen) == sorted(g.segments)
    for c in chains:
        assert {g.segments[s].visible for s in c.segments} == {c.visible}


def test_silhouette_only_torus():
    m = suite_mesh("torus")
    g = _resolved(m, Camera.perspective((0.05, 0.08, 5.0)), accel_for("torus"))
    both = [c for c in build_chains(g) if c.visible]
    assert len(both) == 2
    g2 = _resolved(m, Camera.perspective((0.05, 0.08, 5.0)), accel_for("torus"))
    outer = build_chains(g2, "silhouette-only", accel=accel_for("torus"))
    assert len(outer) == 1
    longest = max(both, key=lambda c: c.length)
    assert outer[0].length == pytest.approx(longest.length)
    with pytest.raises(ValueError):
        build_chains(g2, "nope")


# -- simplification --------------------------------------------------------------

def _fake_graph(n_segments):
    segs = {i: types.SimpleNamespace(visibility=Visibility.VISIBLE, visible=True)
            for i in range(n_segments)}
    return types.SimpleNamespace(segments=segs, singularities={}, stage_log=[])


def _chain(cid, pts, start=None, end=None, closed=False):
    pts = np.asarray(pts, float)
    c = Chain(cid, [cid], [True], closed, True, start, end, pts)
    c.length = float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())
    return c


def _star(spur_length):
    J = ("sing", 0)
    arms = [_chain(0, [(100, 100), (200, 100)], J, None),
            _chain(1, [(100, 100), (100, 200)], J, None),
            _chain(2, [(100, 100), (0, 0)], J, None),
            _chain(3, [(100, 100), (100 - spur_length, 100 + 1e-3)], J, None)]
    return arms


def test_spur_removed_case_a():
    chains = _star(5.0)
    g = _fake_graph(4)
    res = simplify_topology(chains, g, 15.0)
    assert [c.removed for c in chains] == [False, False, False, True]
    assert res["removed"]["a"] == 1
    assert g.segments[3].visibility is Visibility.INVISIBLE


def test_long_spur_kept():
    chains = _star(30.0)
    res = simplify_topology(chains, _fake_graph(4), 15.0)
    assert not any(c.removed for c in chains)
    assert res["iterations"] == 1


def test_isolated_bit_case_b_and_loop_case_c():
    t = np.linspace(0, 2 * np.pi, 9)
    loop = _chain(0, np.c_[50 + 1.27 * np.cos(t), 50 + 1.27 * np.sin(t)], closed=True)
    bit = _chain(1, [(300, 300), (305, 300)])
    big = _chain(2, [(0, 500), (400, 500)])
    chains = [loop, bit, big]
    assert loop.length < 15
    res = simplify_topology(chains, _fake_graph(3), 15.0)
    assert res["removed"]["c"] == 1 and res["removed"]["b"] == 1
    assert not big.removed


def test_overlapped_case_d():
    J, K = ("sing", 0), ("sing", 1)
    long_ = _chain(0, [(0, 0), (200, 0)], J, K)
    dup = _chain(1, [(50, 0.4), (60, 0.4)], J, K)       # junction to junction, drawn on top
    other = [_chain(2, [(0, 0), (0, 100)], J, None), _chain(3, [(200, 0), (200, 100)], K, None)]
    chains = [long_, dup] + other
    res = simplify_topology(chains, _fake_graph(4), 15.0)
    assert dup.removed and res["removed"]["d"] == 1
    assert not long_.removed


def test_cascade_reaches_fixpoint():
    # Removing the spur leaves its neighbour as a dead-end spur of its own.
    J, K = ("sing", 0), ("sing", 1)
    chains = [_chain(0, [(0, 0), (100, 0)], J, None), _chain(1, [(0, 0), (0, 100)], J, None),
              _chain(2, [(0, 0), (3, 4)], J, K),
              _chain(3, [(10, 10), (12, 14)], K, None), _chain(4, [(10, 10), (14, 12)], K, None)]
    res = simplify_topology(chains, _fake_graph(5), 15.0)
    assert all(c.removed for c in chains[2:]) and not any(c.removed for c in chains[:2])
    assert res["removed"]["a"] == 3
    assert res["iterations"] <= 10


def test_only_short_chains_removed_on_noisy_sphere():
    m = shapes.generic(shapes.noisy_sphere(3, amplitude=0.04, seed=2))
    g = _resolved(m, Camera.perspective((0.3, 0.4, 5.0)))
    chains = build_chains(g)
    res = simplify_topology(chains, g, 15.0)
    assert res["iterations"] <= 10
    assert all(c.length < 15.0 for c in chains if c.removed)


# -- smoothing ---------------------------------------------------------------------

def test_straight_line_reproduced():
    line = np.array([(0.0, 0.0), (100.0, 50.0)])
    out = smooth_chain(line)
    d = out - line[0]
    cross = d[:, 0] * 50 - d[:, 1] * 100
    assert np.abs(cross).max() < 1e-6 * 100 * 112
    assert np.allclose(out[0], line[0]) and np.allclose(out[-1], line[1])


def test_closed_loop_periodic_and_c2():
    t = np.linspace(0, 2 * np.pi, 80, endpoint=False)
    circle = np.c_[200 + 60 * np.cos(t), 200 + 60 * np.sin(t)]
    out = smooth_chain(circle, closed=True)
    assert np.allclose(out[0], out[-1])
    ring = out[:-1]
    d1 = np.roll(ring, -1, 0) - ring
    d2 = np.roll(d1, -1, 0) - d1
    d3 = np.roll(d2, -1, 0) - d2
    # Second differences vary smoothly everywhere, seam included.
    assert np.abs(d3).max() < 0.05
    r = np.linalg.norm(ring - 200, axis=1)
    assert np.abs(r - 60).max() < 0.5


def test_noisy_circle_denoised(rng):
    t = np.linspace(0, 2 * np.pi, 400, endpoint=False)
    noisy = np.c_[200 + 80 * np.cos(t), 200 + 80 * np.sin(t)] + rng.normal(scale=0.5, size=(400, 2))
    out = smooth_chain(noisy, closed=True)
    err_in = np.abs(np.linalg.norm(noisy - 200, axis=1) - 80)
    err_out = np.abs(np.linalg.norm(out - 200, axis=1) - 80)
    assert err_out.max() < err_in.max()
    assert np.sqrt((err_out ** 2).mean()) < 0.5 < np.sqrt((err_in ** 2).mean()) + 0.05


def test_junction_lock_pins_points():
    pts = np.array([(0, 0), (20, 15), (40, -10), (60, 20), (80, 0), (100, 10)], float)
    ch = _chain(0, pts)
    ch.segments = list(range(5))
    ch.locks = [("start", 0, 0.0, pts[0]), ("inner", 2, 0.5, 0.5 * (pts[2] + pts[3]))]
    locked = smooth_chain(ch)
    free = smooth_chain(ch, junction_lock=False)
    target = 0.5 * (pts[2] + pts[3])
    assert np.linalg.norm(locked - target, axis=1).min() < 1.0
    assert np.linalg.norm(locked - target, axis=1).min() < np.linalg.norm(free - target, axis=1).min()


# -- ribs ----------------------------------------------------------------------------

def test_horizontal_ribs():
    st = build_ribs(np.c_[np.arange(6.0), np.zeros(6)], 1.0)
    assert np.allclose(np.abs(st.ribs), [(0, 1)] * 6)
    assert np.allclose(st.ribs[:, 1], st.ribs[0, 1])
    assert st.clamped == 0


def test_taper_profile():
    f = taper_profile(4.0)
    assert f(0.0) == 0.0 and f(1.0) == 0.0 and f(0.5) == 1.0
    st = build_ribs(np.c_[np.arange(11.0), np.zeros(11)], f)
    assert st.widths[0] == 0 and st.widths[-1] == 0
    assert np.linalg.norm(st.ribs[[0, -1]], axis=1).max() == 0


def test_corner_clamps_ribs():
    corner = np.array([(0, 0), (10, 0), (10, 10)], float)
    st = build_ribs(corner, 20.0)
    assert st.clamped == 1
    assert np.linalg.norm(st.ribs[1]) < 20.0


def test_zero_chord_sample_skipped():
    st = build_ribs(np.array([(0, 0), (1, 0), (0, 0)], float), 1.0)
    assert st.skipped == 1 and not st.valid[1]


# -- SVG -------------------------------------------------------------------------------

def test_empty_svg():
    svg = emit_svg([], canvas=Canvas(640, 480, 1.0, 0.0, 0.0))
    root = ET.fromstring(svg)
    assert root.get("width") == "640" and root.get("height") == "480"
    assert not root.findall(".//{http://www.w3.org/2000/svg}path")


def test_one_closed_loop_path():
    t = np.linspace(0, 2 * np.pi, 40, endpoint=False)
    ch = _chain(0, np.c_[100 + 50 * np.cos(t), 100 + 50 * np.sin(t)], closed=True)
    svg = emit_svg(stylize([ch]))
    paths = ET.fromstring(svg).findall(".//{http://www.w3.org/2000/svg}path")
    assert len(paths) == 1 and paths[0].get("d").endswith("Z")


def test_variable_width_outline_and_hidden_group(tmp_path):
    a = _chain(0, [(0, 0), (50, 10), (100, 0)])
    b = _chain(1, [(0, 50), (100, 50)])
    b.visible = False
    style = Style(taper=True)
    svg = emit_svg(stylize([a, b], style, hidden_lines=True), style, hidden_lines=True)
    root = ET.fromstring(svg)
    ns = "{http://www.w3.org/2000/svg}"
    hidden = root.find(f"{ns}g[@id='hidden']")
    assert len(hidden) == 1 and hidden[0].get("stroke-dasharray") == "4 3"
    vis = root.find(f"{ns}g[@id='visible']")
    assert vis[0].get("fill") == style.color and vis[0].get("d").endswith("Z")
    path = tmp_path / "s.json"
    path.write_text(json.dumps({"width": 2.0, "color": "#123456"}))
    assert Style.load(path).color == "#123456"
    path.write_text(json.dumps({"bogus": 1}))
    with pytest.raises(ValueError):
        Style.load(path)


def test_svg_deterministic():
    def once():
        g = _resolved(suite_mesh("torus"), Camera.perspective((0.3, 1.5, 4.0)), accel_for("torus"))
        canvas = Canvas.for_graph(g)
        chains = build_chains(g, canvas=canvas)
        simplify_topology(chains, g)
        return emit_svg(stylize(chains), canvas=canvas)
    assert once() == once()


def test_canvas_fit():
    c = Canvas.fit(np.array([(-1.0, -0.5), (1.0, 0.5)]), 1000)
    assert c.width == 1000 and c.height == 546
    px = c.to_px(np.array([(-1.0, 0.5)]))[0]
    assert px[0] == pytest.approx(0.1 * c.scale) and px[1] == pytest.approx(0.1 * c.scale)
