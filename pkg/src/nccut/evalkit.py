"""Segmentation quality metrics, ROI looseness sweeps, and batch evaluation.

The error rate is measured inside the ROI only; the remaining metrics
compare the full masks.  The Rand index and consistency error are computed
in closed form from the 2x2 confusion matrix, so they cost O(n) rather than
O(n^2) pair enumeration.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import binary_erosion, distance_transform_edt

from .config import Config
from .errors import InvalidInputError, NcCutError
from .imagegraph import load_image, load_mask_png
from .pipeline import init_session, load_roi_polygon, rasterize_polygon, segment


@dataclass(frozen=True)
class MetricsReport:
    """Quality scores of one predicted mask against ground truth."""

    err_percent: float
    rand_index: float
    gce: float
    bde: float
    iou_obj: float
    iou_bkg: float
    iou_avg: float

    def as_dict(self) -> dict:
        return {
            "err_percent": self.err_percent,
            "rand_index": self.rand_index,
            "gce": self.gce,
            "bde": self.bde,
            "iou_obj": self.iou_obj,
            "iou_bkg": self.iou_bkg,
            "iou_avg": self.iou_avg,
        }


def _pairs(count: float) -> float:
    return count * (count - 1.0) / 2.0


def _iou(overlap: float, union: float) -> float:
    # a class absent from both masks overlaps itself perfectly
    return overlap / union if union > 0 else 1.0


def _boundary(mask: np.ndarray) -> np.ndarray:
    """Inner outline of the object: object pixels with a non-object
    4-neighbor (image-edge object pixels count as outline)."""
    obj = mask.astype(bool)
    structure = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
    return obj & ~binary_erosion(obj, structure=structure, border_value=0)


def _directional_bde(from_boundary, to_boundary, diagonal) -> float:
    if not from_boundary.any():
        return 0.0
    if not to_boundary.any():
        # no reference outline to measure against: saturate at the image
        # diagonal so degenerate all-one-class masks score poorly
        return diagonal
    distance = distance_transform_edt(~to_boundary)
    return float(distance[from_boundary].mean())


def compute_metrics(pred: np.ndarray, gt: np.ndarray,
                    roi: np.ndarray) -> MetricsReport:
    """Score a predicted binary mask against ground truth.

    The error percentage counts disagreeing pixels inside ``roi`` only;
    the Rand index, consistency error, boundary displacement and IoU are
    computed over the full masks (nonzero = object everywhere).
    """
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    roi = np.asarray(roi)
    if pred.shape != gt.shape or pred.shape != roi.shape or pred.ndim != 2:
        raise InvalidInputError("pred, gt and roi must share a 2-D shape")
    roi = roi.astype(bool)
    if not roi.any():
        raise InvalidInputError("roi selects no pixels")
    p = pred.astype(bool)
    g = gt.astype(bool)

    err = 100.0 * float((p != g)[roi].sum()) / float(roi.sum())

    n = float(p.size)
    n11 = float((p & g).sum())
    n10 = float((p & ~g).sum())
    n01 = float((~p & g).sum())
    n00 = float((~p & ~g).sum())

    # Rand index: (agreeing pairs) / (all pairs), with
    # agreements = pairs co-labeled in both masks + pairs split in both
    together_both = sum(_pairs(c) for c in (n11, n10, n01, n00))
    together_pred = _pairs(n11 + n10) + _pairs(n01 + n00)
    together_gt = _pairs(n11 + n01) + _pairs(n10 + n00)
    all_pairs = _pairs(n)
    if all_pairs > 0:
        rand_index = (all_pairs + 2.0 * together_both
                      - together_pred - together_gt) / all_pairs
    else:
        rand_index = 1.0

    # consistency error: per-pixel refinement error in each direction,
    # nonzero exactly where the two masks disagree; take the smaller sum
    pred_sizes = (n11 + n10, n01 + n00)   # object, background under pred
    gt_sizes = (n11 + n01, n10 + n00)     # object, background under gt
    cells = ((n11, 0, 0), (n10, 0, 1), (n01, 1, 0), (n00, 1, 1))
    toward_gt = sum(
        c * (pred_sizes[i] - c) / pred_sizes[i]
        for c, i, _ in cells if c > 0)
    toward_pred = sum(
        c * (gt_sizes[j] - c) / gt_sizes[j]
        for c, _, j in cells if c > 0)
    gce = min(toward_gt, toward_pred) / n

    diagonal = math.hypot(p.shape[0], p.shape[1])
    pb, gb = _boundary(p), _boundary(g)
    bde = 0.5 * (_directional_bde(pb, gb, diagonal)
                 + _directional_bde(gb, pb, diagonal))

    iou_obj = _iou(n11, n11 + n10 + n01)
    iou_bkg = _iou(n00, n00 + n01 + n10)
    return MetricsReport(
        err_percent=err, rand_index=float(rand_index), gce=float(gce),
        bde=bde, iou_obj=iou_obj, iou_bkg=iou_bkg,
        iou_avg=0.5 * (iou_obj + iou_bkg))


def _round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


def tight_bounding_box(gt: np.ndarray) -> tuple:
    """Inclusive (x0, y0, x1, y1) pixel bounds of the object."""
    g = np.asarray(gt).astype(bool)
    if not g.any():
        raise InvalidInputError("ground truth contains no object pixels")
    rows = np.flatnonzero(g.any(axis=1))
    cols = np.flatnonzero(g.any(axis=0))
    return int(cols[0]), int(rows[0]), int(cols[-1]), int(rows[-1])


def box_to_polygon(box) -> tuple:
    """Polygon whose rasterization is exactly the inclusive pixel box."""
    x0, y0, x1, y1 = box
    return ((x0, y0), (x1 + 1, y0), (x1 + 1, y1 + 1), (x0, y1 + 1))


def loosened_box(box, height: int, width: int, alpha: float) -> tuple:
    """Move each side of the box toward its image border by ``alpha`` times
    the side's margin (rounded half up); alpha 0 is the box itself, alpha 1
    reaches the full image."""
    x0, y0, x1, y1 = box
    return (x0 - _round_half_up(alpha * x0),
            y0 - _round_half_up(alpha * y0),
            x1 + _round_half_up(alpha * (width - 1 - x1)),
            y1 + _round_half_up(alpha * (height - 1 - y1)))


def _box_area(box) -> int:
    x0, y0, x1, y1 = box
    return (x1 - x0 + 1) * (y1 - y0 + 1)


def looseness_sweep(gt: np.ndarray, height: int, width: int,
                    levels: int):
    """Baseline tight box plus ``levels`` progressively looser boxes.

    Returns [(looseness, (x0, y0, x1, y1)), ...] starting at the tight
    bounding box (looseness 1.0); looseness is the exact area ratio to the
    baseline and is non-decreasing along the sequence.
    """
    if levels < 1:
        raise InvalidInputError("levels must be >= 1")
    g = np.asarray(gt)
    if g.shape != (height, width):
        raise InvalidInputError("gt shape must match the stated dimensions")
    base = tight_bounding_box(g)
    base_area = float(_box_area(base))
    out = [(1.0, base)]
    for step in range(1, levels + 1):
        box = loosened_box(base, height, width, step / levels)
        out.append((_box_area(box) / base_area, box))
    return out


@dataclass(frozen=True)
class ImageResult:
    name: str
    metrics: MetricsReport | None
    iterations: int
    error: str | None


@dataclass(frozen=True)
class DatasetReport:
    rows: tuple
    mean: MetricsReport | None

    @property
    def n_failed(self) -> int:
        return sum(1 for r in self.rows if r.error is not None)


def _mean_metrics(reports) -> MetricsReport | None:
    if not reports:
        return None
    def avg(field):
        return float(np.mean([getattr(r, field) for r in reports]))
    return MetricsReport(
        err_percent=avg("err_percent"), rand_index=avg("rand_index"),
        gce=avg("gce"), bde=avg("bde"), iou_obj=avg("iou_obj"),
        iou_bkg=avg("iou_bkg"), iou_avg=avg("iou_avg"))


def _dataset_entries(directory):
    names = []
    for fn in sorted(os.listdir(directory)):
        stem, ext = os.path.splitext(fn)
        if ext.lower() != ".png" or stem.endswith("_gt"):
            continue
        names.append(stem)
    return names


def evaluate_dataset(directory, roi_source="polygon", config: Config = None,
                     roi_dir=None) -> DatasetReport:
    """Segment and score every image in a directory.

    Expects ``name.png`` plus ``name_gt.png`` per image.  ``roi_source`` is
    either ``"polygon"`` (read ``name_roi.json``, from ``roi_dir`` when
    given) or a float looseness fraction in [0, 1] applied to the
    ground-truth bounding box.  Images are processed in filename order; a
    missing ground truth or a failing run is recorded per image and does
    not stop the batch.
    """
    cfg = config if config is not None else Config()
    rows = []
    for stem in _dataset_entries(directory):
        rows.append(_evaluate_one(directory, stem, roi_source, cfg,
                                  roi_dir or directory))
    mean = _mean_metrics([r.metrics for r in rows if r.metrics is not None])
    return DatasetReport(rows=tuple(rows), mean=mean)


def _evaluate_one(directory, stem, roi_source, cfg, roi_dir) -> ImageResult:
    def failed(message):
        return ImageResult(name=stem, metrics=None, iterations=0,
                           error=message)

    gt_path = os.path.join(directory, f"{stem}_gt.png")
    if not os.path.exists(gt_path):
        return failed("missing ground truth")
    try:
        with open(os.path.join(directory, f"{stem}.png"), "rb") as fh:
            image = load_image(fh.read())
        gt = load_mask_png(gt_path)
        if gt.shape != (image.height, image.width):
            return failed("ground truth dimensions differ from image")
        if isinstance(roi_source, str):
            if roi_source != "polygon":
                raise InvalidInputError(
                    f"unknown roi source {roi_source!r}")
            roi_path = os.path.join(roi_dir, f"{stem}_roi.json")
            if not os.path.exists(roi_path):
                return failed("missing ROI polygon")
            polygon = load_roi_polygon(roi_path)
        else:
            alpha = float(roi_source)
            if not 0.0 <= alpha <= 1.0:
                raise InvalidInputError(
                    "looseness fraction must lie in [0, 1]")
            box = loosened_box(tight_bounding_box(gt), image.height,
                               image.width, alpha)
            polygon = box_to_polygon(box)
        session = init_session(image, polygon, cfg)
        mask, trace = segment(session)
        roi = rasterize_polygon(session.roi, image.height, image.width)
        metrics = compute_metrics(mask, gt, roi)
        return ImageResult(name=stem, metrics=metrics,
                           iterations=len(trace), error=None)
    except NcCutError as exc:
        return failed(str(exc))


_CSV_FIELDS = ("image", "err_percent", "rand_index", "gce", "bde",
               "iou_obj", "iou_bkg", "iou_avg", "iterations", "error")


def report_to_csv(report: DatasetReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CSV_FIELDS)
        for row in report.rows:
            writer.writerow(_csv_row(row.name, row.metrics,
                                     row.iterations, row.error))
        if report.mean is not None:
            writer.writerow(_csv_row("MEAN", report.mean, "", ""))


def _csv_row(name, metrics, iterations, error):
    if metrics is None:
        return [name, "", "", "", "", "", "", "", iterations, error or ""]
    return [name, repr(metrics.err_percent), repr(metrics.rand_index),
            repr(metrics.gce), repr(metrics.bde), repr(metrics.iou_obj),
            repr(metrics.iou_bkg), repr(metrics.iou_avg), iterations,
            error or ""]


def report_to_json(report: DatasetReport, path=None) -> str:
    payload = {
        "rows": [{
            "image": row.name,
            "metrics": row.metrics.as_dict() if row.metrics else None,
            "iterations": row.iterations,
            "error": row.error,
        } for row in report.rows],
        "mean": report.mean.as_dict() if report.mean else None,
        "n_failed": report.n_failed,
    }
    text = json.dumps(payload, indent=2)
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text
