"""Command-line interface: segmentation runs, superpixel and
connectedness-map artifacts, batch evaluation, and the HTTP service."""

from __future__ import annotations

import argparse
import os
import sys

from PIL import Image

from .config import Config, load_config
from .errors import NcCutError
from .evalkit import evaluate_dataset, report_to_csv, report_to_json
from .imagegraph import load_image, save_mask_png, slico
from .ncengine import compute_nc
from .pipeline import init_session, load_roi_polygon, segment, trace_json
from .viz import overlay_boundaries, region_value_image

DEFAULT_PORT_ENV = "NCCUT_PORT"


class _Parser(argparse.ArgumentParser):
    """Usage errors exit 1 (after help text); ``-h`` still exits 0."""

    def error(self, message):
        self.print_help(sys.stderr)
        print(f"\nerror: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="nccut",
        description="Interactive region-graph segmentation with "
                    "connectedness-guided graph cuts.")
    sub = parser.add_subparsers(dest="command", metavar="command")

    seg = sub.add_parser(
        "segment", help="segment one image inside an ROI polygon")
    seg.add_argument("--image", required=True, help="input PNG")
    seg.add_argument("--roi", required=True,
                     help='ROI polygon JSON: {"polygon": [[x, y], ...]}')
    seg.add_argument("--out", required=True,
                     help="output mask PNG (255 = object)")
    seg.add_argument("--config", help="key = value parameter file")
    seg.add_argument("--trace", help="write per-iteration stats JSON here")
    seg.add_argument("--nc-cut0", action="store_true",
                     help="ablation: disable the indeterminacy channel")
    seg.set_defaults(handler=_cmd_segment)

    spx = sub.add_parser(
        "superpixels", help="write a region-boundary overlay image")
    spx.add_argument("--image", required=True, help="input PNG")
    spx.add_argument("--out", required=True, help="overlay PNG")
    spx.add_argument("--regions", type=int, default=Config.n_regions,
                     help="target region count")
    spx.set_defaults(handler=_cmd_superpixels)

    ncm = sub.add_parser(
        "ncmap", help="write false-color connectedness maps for an ROI")
    ncm.add_argument("--image", required=True, help="input PNG")
    ncm.add_argument("--roi", required=True, help="ROI polygon JSON")
    ncm.add_argument("--out", required=True,
                     help="truth-map PNG (blue low, red high)")
    ncm.add_argument("--imap", help="also write the indeterminacy map here")
    ncm.add_argument("--config", help="key = value parameter file")
    ncm.set_defaults(handler=_cmd_ncmap)

    evl = sub.add_parser(
        "eval", help="segment and score a directory of image/_gt pairs")
    evl.add_argument("--dataset", required=True, help="directory to score")
    roi_group = evl.add_mutually_exclusive_group(required=True)
    roi_group.add_argument("--roi-dir",
                           help="directory of name_roi.json polygons")
    roi_group.add_argument("--looseness", type=float,
                           help="ROI from ground-truth box loosened by "
                                "this fraction in [0, 1]")
    evl.add_argument("--out", required=True,
                     help="report path (.json for JSON, else CSV)")
    evl.add_argument("--config", help="key = value parameter file")
    evl.set_defaults(handler=_cmd_eval)

    srv = sub.add_parser("serve", help="run the local HTTP service")
    srv.add_argument("--port", type=int,
                     default=int(os.environ.get(DEFAULT_PORT_ENV, "8000")))
    srv.add_argument("--host", default="127.0.0.1")
    srv.set_defaults(handler=_cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    if getattr(args, "handler", None) is None:
        parser.print_help(sys.stderr)
        return 1
    try:
        args.handler(args)
    except (NcCutError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def _read_image(path):
    with open(path, "rb") as fh:
        return load_image(fh.read())


def _load_config(path) -> Config:
    return load_config(path) if path else Config()


def _cmd_segment(args):
    config = _load_config(args.config)
    if args.nc_cut0:
        config = config.with_updates(indeterminacy_enabled=False)
    image = _read_image(args.image)
    polygon = load_roi_polygon(args.roi)
    session = init_session(image, polygon, config)
    mask, trace = segment(session)
    save_mask_png(mask, args.out)
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as fh:
            fh.write(trace_json(trace))
    last = trace[-1]
    converged = "converged" if last.changed_pixels == 0 else "iteration cap"
    print(f"{args.out}: {len(trace)} iterations ({converged}), "
          f"gamma {last.gamma:.4g}, object pixels {int(mask.sum())}")


def _cmd_superpixels(args):
    image = _read_image(args.image)
    regions = slico(image, args.regions)
    overlay = overlay_boundaries(image, regions.labels)
    Image.fromarray(overlay.pixels).save(args.out)
    print(f"{args.out}: {regions.n_regions} regions")


def _cmd_ncmap(args):
    config = _load_config(args.config)
    image = _read_image(args.image)
    polygon = load_roi_polygon(args.roi)
    session = init_session(image, polygon, config)
    nc = compute_nc(session.graph, session.roi_seeds)
    labels = session.regions.labels
    Image.fromarray(region_value_image(labels, nc.T)).save(args.out)
    if args.imap:
        Image.fromarray(region_value_image(labels, nc.I)).save(args.imap)
    print(f"{args.out}: mean truth {nc.T.mean():.4f}, "
          f"mean indeterminacy {nc.I.mean():.4f}")


def _cmd_eval(args):
    config = _load_config(args.config)
    if args.looseness is not None:
        roi_source = args.looseness
        roi_dir = None
    else:
        roi_source = "polygon"
        roi_dir = args.roi_dir
    report = evaluate_dataset(args.dataset, roi_source=roi_source,
                              config=config, roi_dir=roi_dir)
    if str(args.out).lower().endswith(".json"):
        report_to_json(report, args.out)
    else:
        report_to_csv(report, args.out)
    done = len(report.rows) - report.n_failed
    print(f"{args.out}: {done} scored, {report.n_failed} failed")
    if report.mean is not None:
        m = report.mean
        print(f"mean: ERR {m.err_percent:.3f}%  RI {m.rand_index:.4f}  "
              f"GCE {m.gce:.4f}  BDE {m.bde:.3f}  IoU {m.iou_avg:.4f}")


def _cmd_serve(args):
    import uvicorn

    from .server import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)


if __name__ == "__main__":
    raise SystemExit(main())
