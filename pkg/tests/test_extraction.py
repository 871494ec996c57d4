import numpy as np
import pytest

from conftest import SUITE, random_cameras, suite_cameras, suite_mesh
from contourline import shapes
from contourline.errors import DegenerateFacing
from contourline.extraction import (DualIndex, build_dual_index, dual_points, extract,
                                    extract_brute_force, extract_gauss_sphere,
                                    extract_randomized, query_dual)
from contourline.mesh import Camera, Mesh


def _edge_keys(mesh, ids):
    return {tuple(sorted(mesh.edges[e].tolist())) for e in ids}


def test_cube_from_the_side():
    m = shapes.cube()
    res = extract_brute_force(m, Camera.perspective((5.0, 0.0, 0.0)))
    # The four edges around the +x face, nothing else.
    plus_x = {i for i, p in enumerate(m.vertices) if p[0] > 0}
    keys = _edge_keys(m, res.contour_edges)
    assert len(keys) == 4
    assert all(set(k) <= plus_x for k in keys)
    face_diagonals = {k for k in keys if np.count_nonzero(np.diff(m.vertices[list(k)], axis=0)) > 1}
    assert not face_diagonals
    assert len(res.boundary_edges) == 0


def test_camera_inside_closed_cube():
    res = extract_brute_force(shapes.cube(), Camera.perspective((0.1, 0.05, 0.02)))
    assert len(res.contour_edges) == 0


def test_flat_square():
    m = shapes.flat_square()
    for cam in random_cameras(m, 10, seed=1):
        res = extract_brute_force(m, cam)
        assert len(res.contour_edges) == 0
        assert len(res.boundary_edges) == 4


def test_edge_on_face_is_reported():
    with pytest.raises(DegenerateFacing):
        extract_brute_force(shapes.cube(), Camera.orthographic((-1.0, 0.0, 0.0)))


def test_dual_point_examples():
    tri = Mesh([(0, 0, 0), (1, 0, 0), (0, 1, 0)], [(0, 1, 2)])
    assert np.allclose(dual_points(tri)[0], (0, 0, -1, 0))
    up = Mesh([(1, 1, 1), (2, 1, 1), (1, 2, 1)], [(0, 1, 2)])
    assert np.allclose(dual_points(up)[0], (0, 0, -1, 1))


def test_dual_index_covers_interior_edges():
    m = suite_mesh("torus")
    idx = build_dual_index(m)
    assert idx.num_segments == int((~m.is_boundary).sum())
    assert sorted(idx.items.tolist()) == np.flatnonzero(~m.is_boundary).tolist()


@pytest.mark.parametrize("name", SUITE)
def test_dual_matches_brute(name):
    m = suite_mesh(name)
    idx = build_dual_index(m)
    before = idx.node_lo.copy(), idx.items.copy()
    for cam in suite_cameras(name, count=20):
        b = extract_brute_force(m, cam)
        d = query_dual(idx, m, cam)
        assert np.array_equal(b.contour_edges, d.contour_edges)
        assert np.array_equal(b.convexity, d.convexity)
    assert np.array_equal(before[0], idx.node_lo) and np.array_equal(before[1], idx.items)


def test_dual_repeated_query_is_pure():
    m = suite_mesh("genus2")
    idx = build_dual_index(m)
    cam = suite_cameras("genus2", 1)[0]
    a, b = query_dual(idx, m, cam), query_dual(idx, m, cam)
    assert np.array_equal(a.contour_edges, b.contour_edges)


def test_dual_empty_when_hyperplane_misses():
    # A flat closed "pillow" seen from far along its normal: inside one sign region.
    m = shapes.generic(shapes.flat_square())
    idx = build_dual_index(m)
    assert idx.num_segments == 1
    res = query_dual(idx, m, Camera.perspective((0.1, 0.2, 10.0)))
    assert len(res.contour_edges) == 0


def test_sidecar_round_trip(tmp_path):
    m = suite_mesh("icosphere2")
    idx = build_dual_index(m)
    path = tmp_path / "m.cdx"
    idx.save(path)
    back = DualIndex.load(path, m)
    for cam in suite_cameras("icosphere2", 5):
        assert np.array_equal(query_dual(back, m, cam).contour_edges,
                              extract_brute_force(m, cam).contour_edges)
    with pytest.raises(ValueError):
        DualIndex.load(path, suite_mesh("torus"))
    bad = tmp_path / "bad.cdx"
    bad.write_bytes(b"nope")
    with pytest.raises(ValueError):
        DualIndex.load(bad)


def test_dual_rejects_other_mesh():
    idx = build_dual_index(suite_mesh("icosphere1"))
    with pytest.raises(ValueError):
        query_dual(idx, suite_mesh("torus"), Camera.perspective((0, 0, 5)))


def test_gauss_sphere_matches_orthographic_brute():
    m = suite_mesh("torus")
    rng = np.random.default_rng(4)
    for _ in range(10):
        v = rng.normal(size=3)
        v /= np.linalg.norm(v)
        b = extract_brute_force(m, Camera.orthographic(v))
        g = extract_gauss_sphere(m, v)
        assert np.array_equal(b.contour_edges, g.contour_edges)


def test_randomized_exhaustive_equals_brute():
    m = suite_mesh("torus")
    cam = suite_cameras("torus", 1)[0]
    r = extract_randomized(m, cam, num_seeds=len(m.edges), seed=3)
    assert np.array_equal(r.contour_edges, extract_brute_force(m, cam).contour_edges)
    assert not r.complete


def test_randomized_deterministic():
    m = suite_mesh("genus2")
    cam = suite_cameras("genus2", 1)[0]
    a = extract_randomized(m, cam, 20, seed=9)
    b = extract_randomized(m, cam, 20, seed=9)
    assert np.array_equal(a.contour_edges, b.contour_edges)
    with pytest.raises(ValueError):
        extract_randomized(m, cam, 0)


def _components(mesh, edges):
    parent = {}

    def find(x):
        while parent.setdefault(x, x) != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x
    for e in edges:
        a, b = mesh.edges[e].tolist()
        parent[find(a)] = find(b)
    comps = {}
    for e in edges:
        comps.setdefault(find(int(mesh.edges[e][0])), set()).add(int(e))
    return list(comps.values())


def test_randomized_finds_large_loop():
    # Edge-on side view: the whole contour generator is a single loop.
    m = shapes.generic(shapes.torus(nu=24, nv=12), seed=2)
    cam = Camera.perspective((0.2, 5.0, 0.3))
    comps = _components(m, extract_brute_force(m, cam).contour_edges)
    assert len(comps) == 1
    big = comps[0]
    hits = sum(big <= extract_randomized(m, cam, 50, seed=t).edge_set() for t in range(100))
    assert hits >= 95


def test_randomized_results_are_subsets():
    for name in ("torus", "genus2"):
        m = suite_mesh(name)
        for k, cam in enumerate(suite_cameras(name, 5)):
            full = extract_brute_force(m, cam).edge_set()
            part = extract_randomized(m, cam, 10, seed=k).edge_set()
            assert part <= full


def test_extract_dispatch():
    m = suite_mesh("icosphere1")
    cam = suite_cameras("icosphere1", 1)[0]
    base = extract(m, cam).contour_edges
    assert np.array_equal(extract(m, cam, "dual").contour_edges, base)
    assert np.array_equal(extract(m, cam, "random", num_seeds=len(m.edges)).contour_edges, base)
    with pytest.raises(ValueError):
        extract(m, cam, "nope")


def test_drop_concave():
    m = suite_mesh("torus")
    cam = suite_cameras("torus", 1)[0]
    res = extract_brute_force(m, cam, drop_concave=True)
    assert (res.convexity > 0).all()
