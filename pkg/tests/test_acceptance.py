"""Acceptance criteria 1-10; each test records one PASS/FAIL line.

Run ``pytest tests/test_acceptance.py`` (lines appear in the terminal summary)
or ``python tests/test_acceptance.py`` (lines printed as each criterion ends).
"""

import json
import sys
import time
from collections import defaultdict
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

from conftest import ACCEPTANCE, SUITE, accel_for, random_cameras, suite_cameras, suite_mesh, two_tori_view  # noqa: E402
from oracles import near_collinear, near_coplanar, orient2d_exact, orient3d_exact  # noqa: E402
from contourline import shapes  # noqa: E402
from contourline.extraction import build_dual_index, extract_brute_force, query_dual  # noqa: E402
from contourline.interpolated import extract_interpolated, radial_curvature, vertex_normals  # noqa: E402
from contourline.mesh import Camera, project_many, save_obj  # noqa: E402
from contourline.pipeline import CameraSpec, JobConfig, run  # noqa: E402
from contourline.predicates import orient2d, orient3d  # noqa: E402
from contourline.stylize import build_chains, simplify_topology, Canvas  # noqa: E402
from contourline.sweep import brute_force_crossings, sweep_crossings  # noqa: E402
from contourline.viewgraph import CurveType, SingularityKind, build_view_graph  # noqa: E402
from contourline.visibility import (RayAccel, mark_locally_invisible,  # noqa: E402
                                    propagate_visibility, resolve, segment_qi)

CLOSED = ("icosphere1", "icosphere2", "icosphere3", "torus", "genus2")
FAILURE_DIR = Path("acceptance_failures")

# Pinned thresholds.
C1_SECONDS = 60.0
C5_SECONDS = 120.0
C5_SLOPE = (0.4, 0.9)
C6_CASES = 10_000
C7_MAX_SEGMENTS = 2000
C9_KR_TOL = 0.05
C10_MAX_ITERATIONS = 10
THRESHOLD_PX = 15.0


def _report(n, ok, detail):
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[n] = line
    if __name__ == "__main__":
        print(line, flush=True)
    assert ok, line


def _dump(tag, mesh_name, cam, extra):
    FAILURE_DIR.mkdir(exist_ok=True)
    path = FAILURE_DIR / f"{tag}.json"
    path.write_text(json.dumps({"mesh": mesh_name, "camera": cam.to_dict(), **extra},
                               indent=1, default=str) + "\n")
    return path


def _oracle_graph(mesh, cam, accel, curves=None):
    g = build_view_graph(curves or extract_brute_force(mesh, cam), mesh, cam)
    mark_locally_invisible(g)
    propagate_visibility(g, accel, mode="per-segment", skip_known=False)
    return g


def test_c01_dual_query_matches_brute_force():
    t0 = time.perf_counter()
    mismatches, queries = 0, 0
    for name in SUITE:
        mesh = suite_mesh(name)
        index = build_dual_index(mesh)
        for cam in suite_cameras(name):
            dual = set(query_dual(index, mesh, cam).contour_edges.tolist())
            brute = set(extract_brute_force(mesh, cam).contour_edges.tolist())
            queries += 1
            if dual != brute:
                mismatches += 1
                _dump(f"c01_{name}_{queries}", name, cam,
                      {"missing": sorted(brute - dual), "extra": sorted(dual - brute)})
    secs = time.perf_counter() - t0
    _report(1, mismatches == 0 and secs < C1_SECONDS,
            f"{queries} queries, {mismatches} mismatches, {secs:.1f}s (< {C1_SECONDS:.0f}s)")


def _visibility_suite():
    """Run both propagation modes and the per-segment oracle once per suite camera."""
    out = {"mismatch": defaultdict(int), "segments": 0, "cameras": 0, "concave_visible": 0,
           "concave": 0}
    for name in SUITE:
        mesh, accel = suite_mesh(name), accel_for(name)
        for k, cam in enumerate(suite_cameras(name)):
            curves = extract_brute_force(mesh, cam)
            ref = _oracle_graph(mesh, cam, accel, curves)
            want = {i: s.visible for i, s in ref.segments.items()}
            out["segments"] += len(want)
            out["cameras"] += 1
            for s in ref.segments.values():
                if s.kind is CurveType.CONTOUR and s.convexity < 0:
                    out["concave"] += 1
                    out["concave_visible"] += s.qi == 0
            for mode in ("propagate", "qi"):
                g = build_view_graph(curves, mesh, cam)
                resolve(g, accel, mode)
                got = {i: s.visible for i, s in g.segments.items()}
                diff = sorted(i for i in want if got.get(i) != want[i])
                if diff:
                    out["mismatch"][mode] += len(diff)
                    _dump(f"c02_{name}_{k}_{mode}", name, cam, {"segments": diff})
    return out


_VIS = {}


def _vis():
    if not _VIS:
        _VIS.update(_visibility_suite())
    return _VIS


def test_c02_propagation_matches_ray_tests():
    v = _vis()
    chain, qi = v["mismatch"]["propagate"], v["mismatch"]["qi"]
    _report(2, chain == 0 and qi == 0,
            f"{v['segments']} segments over {v['cameras']} views; mismatches per-chain={chain}, "
            f"qi={qi}")


def test_c03_concave_contours_never_visible():
    v = _vis()
    _report(3, v["concave_visible"] == 0,
            f"{v['concave']} concave contour segments, {v['concave_visible']} with ray QI = 0")


def _closed_loops(mesh, edges):
    """Split the edge set into closed walks; False if some walk gets stuck."""
    inc = defaultdict(list)
    for e in edges:
        a, b = mesh.edges[e]
        inc[a].append(e)
        inc[b].append(e)
    used, loops = set(), 0
    for e0 in edges:
        if e0 in used:
            continue
        start, v = mesh.edges[e0]
        used.add(e0)
        while v != start:
            nxt = next((e for e in inc[v] if e not in used), None)
            if nxt is None:
                return False, loops
            used.add(nxt)
            v = mesh.other_vertex(nxt, v)
        loops += 1
    return True, loops


def test_c04_even_degree_and_closed_loops():
    views, good = 0, 0
    for name in CLOSED:
        mesh = suite_mesh(name)
        for k, cam in enumerate(suite_cameras(name)):
            edges = extract_brute_force(mesh, cam).contour_edges.tolist()
            deg = np.bincount(mesh.edges[edges].ravel(), minlength=len(mesh.vertices))
            ok, _ = _closed_loops(mesh, edges)
            views += 1
            if ok and not (deg % 2).any():
                good += 1
            else:
                _dump(f"c04_{name}_{k}", name, cam, {"odd": np.flatnonzero(deg % 2).tolist()})
    _report(4, good == views, f"{good}/{views} closed-mesh views with even degree and closed loops")


def test_c05_contour_sparsity_trend():
    t0 = time.perf_counter()
    faces, counts = [], []
    for k in range(1, 6):
        mesh = shapes.generic(shapes.icosphere(k), seed=7)
        cams = random_cameras(mesh, 100, seed=5)
        faces.append(len(mesh.faces))
        counts.append(np.mean([len(extract_brute_force(mesh, c).contour_edges) for c in cams]))
    slope = float(np.polyfit(np.log(faces), np.log(counts), 1)[0])
    secs = time.perf_counter() - t0
    lo, hi = C5_SLOPE
    _report(5, lo <= slope <= hi and secs < C5_SECONDS,
            f"log-log slope {slope:.3f} in [{lo}, {hi}] over faces {faces}, {secs:.1f}s "
            f"(< {C5_SECONDS:.0f}s)")


def test_c06_predicates_match_rational_oracle():
    rng = np.random.default_rng(2024)
    wrong3 = wrong2 = 0
    # Half at unit scale, a quarter tiny, a quarter huge; all within one ulp of degenerate.
    scales = [1.0] * (C6_CASES // 2) + [1e-150] * (C6_CASES // 4) + [1e150] * (C6_CASES // 4)
    for s, (a, b, c, d) in zip(scales, near_coplanar(rng, C6_CASES)):
        wrong3 += int(orient3d(a * s, b * s, c * s, d * s)) != orient3d_exact(a * s, b * s, c * s, d * s)
    for s, (a, b, c) in zip(scales, near_collinear(rng, C6_CASES)):
        wrong2 += int(orient2d(a * s, b * s, c * s)) != orient2d_exact(a * s, b * s, c * s)
    _report(6, wrong3 == 0 and wrong2 == 0,
            f"orient3d {C6_CASES - wrong3}/{C6_CASES}, orient2d {C6_CASES - wrong2}/{C6_CASES} "
            "match the rational oracle")


def _scenes():
    rng = np.random.default_rng(77)
    for n in (10, 100, 500, 1000):
        yield f"random{n}", rng.uniform(-1, 1, (n, 4))
    a = rng.uniform(-1, 1, (C7_MAX_SEGMENTS, 2))
    yield "short2000", np.concatenate([a, a + rng.normal(scale=0.05, size=a.shape)], axis=1)
    for k in range(10):
        segs = rng.integers(0, 8, (150, 4)).astype(float)
        yield f"grid{k}", segs[(segs[:, 0] != segs[:, 2]) | (segs[:, 1] != segs[:, 3])]
    for name in SUITE:
        mesh = suite_mesh(name)
        for k, cam in enumerate(suite_cameras(name)):
            c = extract_brute_force(mesh, cam)
            e = mesh.edges[c.edges]
            xy, _ = project_many(cam, mesh.vertices)
            yield f"{name}_{k}", np.concatenate([xy[e[:, 0]], xy[e[:, 1]]], axis=1)


def test_c07_sweep_equals_brute_force():
    scenes = bad = 0
    for tag, segs in _scenes():
        if len(segs) > C7_MAX_SEGMENTS:
            continue
        scenes += 1
        got = [(i, j) for i, j, _ in sweep_crossings(segs)]
        if got != brute_force_crossings(segs):
            bad += 1
            FAILURE_DIR.mkdir(exist_ok=True)
            np.save(FAILURE_DIR / f"c07_{tag}.npy", segs)
    _report(7, bad == 0, f"{scenes - bad}/{scenes} scenes (<= {C7_MAX_SEGMENTS} segments) match")


def test_c08_two_tori_t_junction_rule():
    mesh, cam = two_tori_view()
    accel = RayAccel(mesh)
    g = build_view_graph(extract_brute_force(mesh, cam), mesh, cam)
    resolve(g, accel, "qi")
    checked = bad = 0
    for t in g.by_kind(SingularityKind.IMAGE):
        near = g.segments[t.refs[0].seg]
        far = {r.role: r.seg for r in t.refs[1:]}
        if near.kind is not CurveType.CONTOUR or "far-occluded" not in far:
            continue
        rays = segment_qi(g, accel, [near.id, far["far-occluded"]])
        occ = g.segments[far["far-occluded"]]
        checked += 1
        if not (occ.qi == near.qi + 2 and rays[occ.id] == rays[near.id] + 2
                and occ.qi == rays[occ.id]):
            bad += 1
    _report(8, checked > 0 and bad == 0,
            f"{checked - bad}/{checked} contour T-junctions have far-occluded QI = near QI + 2 "
            "(propagated and ray-counted)")


def test_c09_interpolated_contours():
    views = bifurcations = 0
    for name in SUITE:
        mesh = suite_mesh(name)
        fld = vertex_normals(mesh)
        for k, cam in enumerate(suite_cameras(name)):
            curve = extract_interpolated(mesh, cam, fld)
            g = build_view_graph(curve, mesh, cam, method="interpolated")
            n = g.count_kinds().get("bifurcation", 0)
            n += sum(d > 2 for d in curve.edge_degrees().values())
            views += 1
            if n:
                bifurcations += n
                _dump(f"c09_{name}_{k}", name, cam, {"bifurcations": n})
    sphere = shapes.icosphere(4)
    fld = vertex_normals(sphere)
    worst = 0.0
    for cam in random_cameras(sphere, 10, seed=3):
        kr = radial_curvature(sphere, cam, fld)
        worst = max(worst, float(np.abs(kr - 1.0).max()))
    _report(9, bifurcations == 0 and worst < C9_KR_TOL,
            f"{bifurcations} bifurcations over {views} views; sphere (level 4) max |kr - 1| = "
            f"{worst:.4f} (< {C9_KR_TOL})")


def test_c10_simplification_and_determinism(tmp_path):
    mesh = shapes.generic(shapes.noisy_sphere(4, amplitude=0.03, seed=4), seed=1)
    iters, wrongly_removed, removed = [], 0, 0
    accel = RayAccel(mesh)
    for cam in random_cameras(mesh, 10, seed=9):
        g = build_view_graph(extract_brute_force(mesh, cam), mesh, cam)
        resolve(g, accel, "qi")
        canvas = Canvas.for_graph(g)
        chains = build_chains(g, canvas=canvas)
        before = {c.id: c.length for c in chains}
        res = simplify_topology(chains, g, THRESHOLD_PX)
        iters.append(res["iterations"])
        removed += sum(c.removed for c in chains)
        wrongly_removed += sum(c.removed and before[c.id] >= THRESHOLD_PX for c in chains)
    path = tmp_path / "noisy.obj"
    save_obj(mesh, path)
    svgs = [run(JobConfig(input=str(path), out=str(tmp_path / f"{k}.svg"),
                          camera=CameraSpec.parse("persp:0.7,1.2,3.5"))).svg.encode()
            for k in range(2)]
    same = svgs[0] == svgs[1] and (tmp_path / "0.svg").read_bytes() == (tmp_path / "1.svg").read_bytes()
    _report(10, max(iters) <= C10_MAX_ITERATIONS and wrongly_removed == 0 and same,
            f"max {max(iters)} iterations (<= {C10_MAX_ITERATIONS}), {removed} chains removed, "
            f"{wrongly_removed} at or above {THRESHOLD_PX:.0f}px; SVG byte-identical: {same}")


if __name__ == "__main__":
    import tempfile
    failed = 0
    for fn in [v for k, v in sorted(globals().items()) if k.startswith("test_c")]:
        try:
            if "tmp_path" in fn.__code__.co_varnames[:fn.__code__.co_argcount]:
                with tempfile.TemporaryDirectory() as d:
                    fn(Path(d))
            else:
                fn()
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
