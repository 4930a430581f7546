"""Command line front end: ``synthforge <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import __version__
from .errors import EXIT_CODES, SynthForgeError

EXIT_USAGE = 64
EXIT_IO = 74
EXIT_INTERNAL = 70
EXIT_INTERRUPTED = 130

_EPILOG = "exit codes:\n  0   success\n" + "".join(
    f"  {code:<3} {name}\n" for name, code in sorted(EXIT_CODES.items(), key=lambda kv: kv[1])
) + (
    f"  {EXIT_USAGE:<3} command line usage error\n"
    f"  {EXIT_INTERNAL:<3} internal error\n"
    f"  {EXIT_IO:<3} unexpected I/O error\n"
    f"  {EXIT_INTERRUPTED:<3} interrupted\n"
    "\nenvironment:\n  SYNTHFORGE_SEED  overrides the seed of the config file\n"
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _cmd_generate(args) -> int:
    from .config import load_config
    from .pipeline import run_generate

    cfg = load_config(args.config)

    def progress(done, total):
        if not args.quiet:
            print(f"\r{args.procedure}: scene {done}/{total}", end="", file=sys.stderr, flush=True)

    root = run_generate(cfg, args.procedure, jobs=args.jobs, progress=progress)
    if not args.quiet:
        print(file=sys.stderr)
    print(root)
    return 0


def _cmd_mix(args) -> int:
    from .config import load_config
    from .pipeline import run_mix

    cfg = load_config(args.config)
    if args.total is not None:
        from .mixer import MixPlan

        plan = cfg.mix(args.combination)
        cfg.mixes[args.combination] = MixPlan(args.total, plan.proportions, plan.split_ratio, plan.name)
    print(run_mix(cfg, args.combination))
    return 0


def _cmd_visualize(args) -> int:
    from .gtviz import OverlayStyle, visualize_dataset

    style = OverlayStyle(thickness=args.thickness, show_labels=not args.no_labels)
    written = visualize_dataset(args.dataset, args.mode, style, args.out)
    print(f"wrote {len(written)} images")
    return 0


def _cmd_evaluate(args) -> int:
    from .annotate import read_json
    from .metrics import coco_ground_truth, load_detections, map_metrics, matrix_report

    if args.matrix:
        spec = read_json(args.matrix)
        base = os.path.dirname(os.path.abspath(args.matrix))
        rel = lambda p: p if os.path.isabs(p) else os.path.join(base, p)  # noqa: E731
        gt = {name: coco_ground_truth(read_json(os.path.join(rel(root), "coco_annotations.json")))
              for name, root in spec["sets"].items()}
        models = [(m, {s: load_detections(rel(p)) for s, p in per_set.items()}) for m, per_set in spec["models"].items()]
        rep = matrix_report(models, gt, spec.get("groups"), spec.get("metric", "map50_95"))
        print(rep.text(), end="")
        if args.csv:
            with open(args.csv, "w", encoding="utf-8") as fh:
                fh.write(rep.csv())
        return 0
    if not args.gt or not args.dets:
        raise SynthForgeError("evaluate needs --gt and --dets, or --matrix")
    gts, cats = coco_ground_truth(read_json(os.path.join(args.gt, "coco_annotations.json")))
    rep = map_metrics(load_detections(args.dets), gts, cats)
    print(json.dumps(rep.to_dict(), indent=1))
    return 0


def _cmd_meshinfo(args) -> int:
    from .geometry import mesh_stats
    from .meshio import load_mesh

    mesh = load_mesh(args.mesh, format=args.format, unit_scale=args.unit_scale)
    info = mesh_stats(mesh)
    print(json.dumps({"vertices": len(mesh.vertices), "triangles": len(mesh.triangles), **info.to_dict()}, indent=1))
    return 0


def _cmd_init_demo(args) -> int:
    from .config import SAMPLE_CONFIG
    from .demo import write_demo_assembly

    os.makedirs(args.directory, exist_ok=True)
    write_demo_assembly(os.path.join(args.directory, "assembly"))
    cfg = os.path.join(args.directory, "config.yaml")
    if not os.path.exists(cfg):
        with open(cfg, "w", encoding="utf-8") as fh:
            fh.write(SAMPLE_CONFIG)
    print(cfg)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="synthforge", description="Procedural synthetic datasets for object detection and pose estimation.",
                epilog=_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="render the dataset of one procedure", epilog=_EPILOG,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    g.add_argument("--config", required=True)
    g.add_argument("--procedure", required=True, choices=["P1", "P2", "P3", "P4", "P5"])
    g.add_argument("--jobs", type=int, default=1, help="worker processes (output does not depend on it)")
    g.add_argument("-q", "--quiet", action="store_true")
    g.set_defaults(func=_cmd_generate)

    m = sub.add_parser("mix", help="assemble a combination dataset", epilog=_EPILOG,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    m.add_argument("--config", required=True)
    m.add_argument("--combination", required=True, help="C1..C5 or a mix named in the config")
    m.add_argument("--total", type=int, help="override the number of images")
    m.set_defaults(func=_cmd_mix)

    v = sub.add_parser("visualize", help="draw ground truth overlays", epilog=_EPILOG,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    v.add_argument("--dataset", required=True)
    v.add_argument("--mode", choices=["2d", "3d", "both"], default="both")
    v.add_argument("--out", help="output root (default: the dataset root)")
    v.add_argument("--thickness", type=int, default=1)
    v.add_argument("--no-labels", action="store_true")
    v.set_defaults(func=_cmd_visualize)

    e = sub.add_parser("evaluate", help="mAP of detections against a dataset", epilog=_EPILOG,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    e.add_argument("--gt", help="dataset root")
    e.add_argument("--dets", help="detections JSON (COCO results format)")
    e.add_argument("--matrix", help='JSON: {"sets": {name: root}, "models": {name: {set: dets}}, "groups": {...}}')
    e.add_argument("--csv", help="write the matrix as CSV here")
    e.set_defaults(func=_cmd_evaluate)

    i = sub.add_parser("meshinfo", help="print mesh statistics in meters", epilog=_EPILOG,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    i.add_argument("mesh")
    i.add_argument("--format", choices=["stl-ascii", "stl-binary", "ply", "obj"])
    i.add_argument("--unit-scale", type=float, default=1e-3, help="file units to meters (default mm)")
    i.set_defaults(func=_cmd_meshinfo)

    d = sub.add_parser("init-demo", help="write the demo assembly and a sample config")
    d.add_argument("directory")
    d.set_defaults(func=_cmd_init_demo)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except SynthForgeError as e:
        print(f"synthforge: {type(e).__name__}: {e}", file=sys.stderr)
        return e.exit_code
    except KeyboardInterrupt:
        return EXIT_INTERRUPTED
    except OSError as e:
        print(f"synthforge: I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except Exception as e:  # noqa: BLE001
        print(f"synthforge: internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
