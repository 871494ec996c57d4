"""Command line: ``contourline render mesh.obj --camera persp:0,0,5 --out mesh.svg``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import DegenerateGeometry, InvariantViolation, MeshError
from .pipeline import EXTRACT_METHODS, VISIBILITY_MODES, CameraSpec, JobConfig, run

EXIT_IO, EXIT_MESH, EXIT_DEGENERATE, EXIT_INVARIANT = 1, 2, 3, 4


def _vec(text):
    vals = tuple(float(x) for x in text.split(","))
    if len(vals) != 3:
        raise argparse.ArgumentTypeError("expected x,y,z")
    return vals


def build_parser():
    p = argparse.ArgumentParser(prog="contourline", description="Mesh to line drawing.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("render", help="render an OBJ mesh to SVG")
    r.add_argument("input", help="triangle mesh (.obj)")
    r.add_argument("--out", default=None, help="SVG path (default: input name with .svg)")
    r.add_argument("--camera", default="persp:0,0,5",
                   help="persp:x,y,z (center) or ortho:dx,dy,dz (view direction)")
    r.add_argument("--look-at", type=_vec, default=(0.0, 0.0, 0.0))
    r.add_argument("--up", type=_vec, default=(0.0, 1.0, 0.0))
    r.add_argument("--focal", type=float, default=1.0)
    r.add_argument("--canvas", type=int, default=1024, help="long side in pixels")
    r.add_argument("--extract", choices=EXTRACT_METHODS, default="brute")
    r.add_argument("--index", help="dual index sidecar to load or create (with --extract dual)")
    r.add_argument("--seeds", type=int, default=None, help="seed faces for --extract random")
    r.add_argument("--visibility", choices=VISIBILITY_MODES, default=None)
    r.add_argument("--votes", type=int, default=3)
    r.add_argument("--threshold", type=float, default=15.0, help="simplification length, px")
    r.add_argument("--style", help="style JSON file")
    r.add_argument("--policy", choices=("default", "silhouette-only"), default="default")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--hidden-lines", action="store_true")
    r.add_argument("--split-near", action="store_true")
    r.add_argument("--allow-reorient", action="store_true")
    r.add_argument("--perturb", action="store_true", help="perturb to generic position up front")
    r.add_argument("--no-smooth", action="store_true")
    r.add_argument("--no-junction-lock", action="store_true")
    r.add_argument("--dump-viewgraph", metavar="PATH")
    r.add_argument("--dump-chains", metavar="PATH")
    r.add_argument("--stats", choices=("text", "json"), default="text",
                   help="format of the counters printed on stdout")
    r.add_argument("--stats-out", metavar="PATH", help="also write counters as JSON")
    r.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: $CONTOURLINE_THREADS or core count)")
    r.add_argument("-v", "--verbose", action="store_true")
    return p


def config_from_args(a):
    camera = CameraSpec.parse(a.camera, look_at=a.look_at, up=a.up, focal=a.focal)
    out = a.out or str(Path(a.input).with_suffix(".svg"))
    return JobConfig(
        input=a.input, out=out, camera=camera, extract=a.extract, visibility=a.visibility,
        votes=a.votes, threshold_px=a.threshold, canvas_px=a.canvas, style=a.style, seed=a.seed,
        num_seeds=a.seeds, index=a.index, hidden_lines=a.hidden_lines, split_near=a.split_near,
        allow_reorient=a.allow_reorient, perturb=a.perturb, smooth=not a.no_smooth,
        junction_lock=not a.no_junction_lock, policy=a.policy, dump_viewgraph=a.dump_viewgraph,
        dump_chains=a.dump_chains, stats_path=a.stats_out, threads=a.threads)


def _print_counters(c, fmt, stream):
    if fmt == "json":
        stream.write(json.dumps(c, sort_keys=True) + "\n")
        return
    sing = ", ".join(f"{k}={v}" for k, v in c["singularities"].items())
    stream.write(f"edges: {c['edges']}\ncontour edges: {c['contour_edges']}\n"
                 f"boundary edges: {c['boundary_edges']}\nsingularities: {sing}\n"
                 f"ray tests: {c['ray_tests']}\nchains: {c['chains']}\n")


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    log = logging.getLogger("contourline")
    try:
        config = config_from_args(args)
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_IO
    try:
        result = run(config)
    except MeshError as exc:
        log.error("mesh validation failed: %s", exc)
        return EXIT_MESH
    except DegenerateGeometry as exc:
        log.error("degenerate geometry after retries: %s", exc)
        return EXIT_DEGENERATE
    except (InvariantViolation, AssertionError) as exc:
        log.error("internal invariant violated: %s", exc)
        _dump_failure(config, exc)
        return EXIT_INVARIANT
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_IO
    _print_counters(result.counters, args.stats, sys.stdout)
    return 0


def _dump_failure(config, exc):
    path = Path(config.out).with_suffix(".failure.json")
    try:
        path.write_text(json.dumps({"error": type(exc).__name__, "message": str(exc),
                                    "input": config.input, "camera": vars(config.camera)},
                                   indent=1, default=list) + "\n")
    except OSError:
        pass


if __name__ == "__main__":
    sys.exit(main())
