"""Command-line interface for the batch pipeline.

Subcommands: `gen` (dataset -> cloud file), `density` (cloud -> field file),
`select` (field + cloud + stroke -> selection JSON, optional OBJ mesh),
`adjust` (re-threshold a selection), `metrics` (selection vs labeled cloud),
`report` (threshold sweep -> CSV + figures), `serve` (local HTTP service).

Exit codes: 0 success, 1 usage error, 2 data/domain error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import data, techniques
from .errors import MetacastError
from .field import (DEFAULT_GRID_DIMS, estimate_density, grid_spec_for_cloud,
                    prepare_cloud)
from .surface import mesh_to_obj
from .techniques import Selection, TriangleMesh

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _parse_geometry(pairs):
    geometry = {}
    for pair in pairs or ():
        key, _, value = pair.partition("=")
        if not _:
            raise MetacastError(f"geometry knob must look like name=value, got {pair!r}")
        geometry[key] = float(value)
    return geometry


def _load_prepared(cloud_path):
    cloud = data.load_cloud(cloud_path)
    prepare_cloud(cloud)
    return cloud


def _write_selection(sel: Selection, out_path, mesh_path=None, stats=None):
    Path(out_path).write_text(
        data.canonical_json(techniques.selection_to_dict(sel, stats=stats)))
    if mesh_path:
        Path(mesh_path).write_text(
            mesh_to_obj(sel.mesh, sel.threshold, sel.kept_components))


def _run_selection(technique, cloud, grid, stroke, s):
    if technique == "point":
        sel = techniques.meta_point(grid, cloud, stroke.samples)
    elif technique == "brush":
        sel = techniques.meta_brush(grid, cloud, stroke)
    elif technique == "paint":
        sel = techniques.meta_paint(grid, cloud, stroke)
    else:
        particles = techniques.baseline_brush(cloud, stroke)
        return Selection("baseline", 0.0, 0.0, 0.0, (), particles,
                         TriangleMesh.empty(), np.zeros((0, 3)))
    if s is not None and s != 0.0:
        sel = techniques.adjust_threshold(grid, cloud, sel, s)
    return sel


def cmd_gen(args):
    params = data.DatasetParams(args.kind, args.target, args.noise, args.seed,
                                geometry=_parse_geometry(args.geometry))
    cloud = data.gen_dataset(params)
    if args.binary:
        data.save_cloud_binary(cloud, args.out)
    else:
        data.save_cloud_csv(cloud, args.out)
    print(f"wrote {cloud.n} particles to {args.out}")
    return EXIT_OK


def cmd_density(args):
    cloud = _load_prepared(args.cloud)
    dims = (args.dims, args.dims, args.dims)
    spec = grid_spec_for_cloud(cloud, dims=dims)
    grid = estimate_density(cloud, spec)
    data.save_density_grid(grid, args.out)
    print(f"wrote {args.dims}^3 density grid to {args.out} "
          f"(peak {grid.peak:.6g})")
    return EXIT_OK


def cmd_select(args):
    stroke, file_technique, _ = data.load_stroke(args.stroke)
    technique = args.technique or file_technique
    cloud = _load_prepared(args.cloud)
    grid = None
    if technique != "baseline":
        if not args.field:
            raise MetacastError(f"technique {technique!r} needs --field")
        grid = data.load_density_grid(args.field)
    sel = _run_selection(technique, cloud, grid, stroke, args.s)
    _write_selection(sel, args.out, args.mesh)
    print(f"{technique}: {sel.count} particles selected "
          f"(threshold {sel.threshold:.6g})")
    return EXIT_OK


def cmd_adjust(args):
    cloud = _load_prepared(args.cloud)
    grid = data.load_density_grid(args.field)
    sel = techniques.selection_from_dict(data.load_json(args.sel), grid, cloud)
    out = techniques.adjust_threshold(grid, cloud, sel, args.s)
    _write_selection(out, args.out, args.mesh)
    print(f"s={out.s:g}: {out.count} particles selected "
          f"(threshold {out.threshold:.6g})")
    return EXIT_OK


def cmd_metrics(args):
    sel = techniques.selection_from_dict(data.load_json(args.sel))
    truth = data.load_cloud(args.truth)
    if truth.labels is None:
        raise MetacastError(f"{args.truth} carries no labels")
    stats = data.confusion_stats(sel.particles, truth.labels)
    text = data.canonical_json(stats.to_dict())
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_report(args):
    from .report import run_report
    cloud = _load_prepared(args.cloud)
    if cloud.labels is None:
        raise MetacastError(f"{args.cloud} carries no labels")
    grid = data.load_density_grid(args.field)
    stroke, file_technique, _ = data.load_stroke(args.stroke)
    technique = args.technique or file_technique
    paths = run_report(cloud, grid, stroke, technique, args.out_dir,
                       s_values=np.arange(args.s_min, args.s_max + 0.5 * args.s_step,
                                          args.s_step))
    for p in paths:
        print(f"wrote {p}")
    return EXIT_OK


def cmd_serve(args):
    import uvicorn

    from .service import create_app
    port = int(os.environ.get("METACAST_PORT", args.port))
    app = create_app(frontend_dir=args.frontend)
    uvicorn.run(app, host=args.host, port=port, log_level="info")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="metacast",
                     description="Density-field-driven point cloud selection")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a benchmark dataset")
    p.add_argument("kind", choices=data.DATASET_KINDS)
    p.add_argument("--target", type=int, default=20000)
    p.add_argument("--noise", type=int, default=20000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--binary", action="store_true",
                   help="write the binary cloud format instead of CSV")
    p.add_argument("--geometry", action="append", metavar="NAME=VALUE",
                   help="override a geometry knob (repeatable)")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("density", help="estimate the density field of a cloud")
    p.add_argument("--cloud", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dims", type=int, default=DEFAULT_GRID_DIMS[0])
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("select", help="run a selection technique")
    p.add_argument("technique", nargs="?", default=None,
                   choices=techniques.TECHNIQUES,
                   help="defaults to the stroke file's technique")
    p.add_argument("--cloud", required=True)
    p.add_argument("--field")
    p.add_argument("--stroke", required=True)
    p.add_argument("--s", type=float, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--mesh", help="also write the selection mesh as OBJ")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("adjust", help="re-threshold a saved selection")
    p.add_argument("--sel", required=True)
    p.add_argument("--cloud", required=True)
    p.add_argument("--field", required=True)
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mesh")
    p.set_defaults(func=cmd_adjust)

    p = sub.add_parser("metrics", help="score a selection against labels")
    p.add_argument("--sel", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("report", help="threshold sweep with figures")
    p.add_argument("technique", nargs="?", default=None,
                   choices=techniques.TECHNIQUES)
    p.add_argument("--cloud", required=True)
    p.add_argument("--field", required=True)
    p.add_argument("--stroke", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--s-min", type=float, default=-4.0)
    p.add_argument("--s-max", type=float, default=4.0)
    p.add_argument("--s-step", type=float, default=1.0)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("serve", help="run the local viewer service")
    p.add_argument("--port", type=int, default=8787)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--frontend", default=None,
                   help="directory with the built viewer to serve at /")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except MetacastError as exc:
        print(f"metacast: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"metacast: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
