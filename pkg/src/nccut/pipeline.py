"""Interactive segmentation sessions.

A session is created from an image and a region-of-interest polygon, then
refined by an iterative loop: refit appearance models from the current
labeling, grow the background seed set with strongly-background regions,
propagate connectedness from the seeds, prune and link the propagation
forest, assemble the pixel energy network, and take its minimum cut.  The
loop stops when the labeling reaches a fixed point or an iteration cap.
Brush strokes pin whole regions to a label as dominating constraints and
re-run the loop; the region graph and affinities are reused across edits.

Sessions are plain mutable objects; callers must serialize operations on a
single session (distinct sessions are fully independent).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .appearance import Gmm, assign_components, fit_gmms, init_gmms
from .config import Config
from .cutsolver import (build_network, compute_gamma, full_energy,
                        max_flow_min_cut, region_weights)
from .errors import InvalidInputError, InvalidRoiError
from .forestops import (CandidateSets, ModifiedForest, candidate_regions,
                        update_forest)
from .imagegraph import (RegionGraph, RegionMap, RgbImage, build_region_graph,
                         slico)
from .ncengine import NcResult, SeedSet, compute_nc


def normalize_polygon(polygon):
    """Vertex list as float (x, y) tuples, closing duplicate and repeated
    consecutive vertices removed."""
    pts = [(float(x), float(y)) for x, y in polygon]
    if len(pts) >= 2 and pts[0] == pts[-1]:
        pts = pts[:-1]
    cleaned = []
    for p in pts:
        if not cleaned or p != cleaned[-1]:
            cleaned.append(p)
    if len(cleaned) < 3:
        raise InvalidRoiError("polygon needs at least 3 distinct vertices")
    return tuple(cleaned)


def _orientation(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _within_box(a, b, p) -> bool:
    return (min(a[0], b[0]) <= p[0] <= max(a[0], b[0])
            and min(a[1], b[1]) <= p[1] <= max(a[1], b[1]))


def _segments_intersect(p1, p2, p3, p4) -> bool:
    d1 = _orientation(p3, p4, p1)
    d2 = _orientation(p3, p4, p2)
    d3 = _orientation(p1, p2, p3)
    d4 = _orientation(p1, p2, p4)
    if ((d1 > 0) != (d2 > 0) and d1 != 0 and d2 != 0
            and (d3 > 0) != (d4 > 0) and d3 != 0 and d4 != 0):
        return True
    if d1 == 0 and _within_box(p3, p4, p1):
        return True
    if d2 == 0 and _within_box(p3, p4, p2):
        return True
    if d3 == 0 and _within_box(p1, p2, p3):
        return True
    if d4 == 0 and _within_box(p1, p2, p4):
        return True
    return False


def validate_polygon(polygon):
    """Reject self-intersecting outlines (edges sharing a vertex may touch
    only at that vertex)."""
    n = len(polygon)
    edges = [(polygon[i], polygon[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            adjacent = j == i + 1 or (i == 0 and j == n - 1)
            if adjacent:
                continue
            if _segments_intersect(*edges[i], *edges[j]):
                raise InvalidRoiError("polygon must not self-intersect")


def rasterize_polygon(polygon, height: int, width: int) -> np.ndarray:
    """Even-odd interior test at pixel centers (x + 0.5, y + 0.5)."""
    pts = np.asarray(polygon, dtype=np.float64)
    cx = np.arange(width) + 0.5
    cy = np.arange(height) + 0.5
    inside = np.zeros((height, width), dtype=bool)
    x1 = pts[:, 0]
    y1 = pts[:, 1]
    x2 = np.roll(x1, -1)
    y2 = np.roll(y1, -1)
    for e in range(len(pts)):
        ya, yb = y1[e], y2[e]
        if ya == yb:
            continue
        rows = (ya <= cy) != (yb <= cy)
        if not rows.any():
            continue
        xint = x1[e] + (cy[rows] - ya) * (x2[e] - x1[e]) / (yb - ya)
        inside[rows] ^= cx[None, :] < xint[:, None]
    return inside


@dataclass(frozen=True)
class IterationStats:
    iteration: int
    changed_pixels: int
    gamma: float
    energy: float
    n_seeds: int
    n_obj_candidates: int
    n_bkg_candidates: int


@dataclass
class SegSession:
    """All mutable state of one interactive segmentation."""

    image: RgbImage
    roi: tuple
    roi_mask: np.ndarray
    regions: RegionMap
    graph: RegionGraph
    roi_seeds: SeedSet                  # majority-outside-ROI regions, fixed
    seeds: SeedSet                      # current background seed set
    labeling: np.ndarray
    obj_gmm: Gmm
    bkg_gmm: Gmm
    assignment: np.ndarray
    config: Config
    iteration: int = 0                  # count within the current refinement
    nc: NcResult = None
    forest: ModifiedForest = None
    candidates: CandidateSets = None
    hard_constraints: dict = field(default_factory=dict)  # region -> 0/1
    last_gamma: float = None
    last_energy: float = None


def init_session(image: RgbImage, roi_polygon, config: Config = None
                 ) -> SegSession:
    """Label the polygon interior 1 and the rest 0, build superpixels and
    the affinity graph once, pick the majority-outside regions as permanent
    background seeds, and fit initial appearance models from the split."""
    cfg = config if config is not None else Config()
    polygon = normalize_polygon(roi_polygon)
    validate_polygon(polygon)
    roi_mask = rasterize_polygon(polygon, image.height, image.width)
    if not roi_mask.any():
        raise InvalidRoiError("polygon covers no pixels")
    if roi_mask.all():
        raise InvalidRoiError("polygon covers the whole image")

    labeling = roi_mask.astype(np.uint8)
    regions = slico(image, cfg.n_regions)
    graph = build_region_graph(image, regions, cfg.delta_t)
    if not cfg.indeterminacy_enabled:
        graph = graph.with_zero_indeterminacy()

    outside = np.bincount(regions.labels[~roi_mask].ravel(),
                          minlength=regions.n_regions)
    seed_ids = np.flatnonzero(outside > 0.5 * regions.pixel_counts)
    if len(seed_ids) == 0:
        raise InvalidRoiError("ROI leaves no background seed regions")
    roi_seeds = SeedSet.of(seed_ids.tolist())

    obj_gmm, bkg_gmm, assignment = init_gmms(image, labeling, cfg.k_gmm)
    return SegSession(image=image, roi=polygon, roi_mask=roi_mask,
                      regions=regions, graph=graph, roi_seeds=roi_seeds,
                      seeds=roi_seeds, labeling=labeling, obj_gmm=obj_gmm,
                      bkg_gmm=bkg_gmm, assignment=assignment, config=cfg)


def updated_seeds(session: SegSession) -> SeedSet:
    """Permanent outside-ROI seeds, regions > 80% currently background, and
    background-pinned regions; object-pinned regions never seed."""
    labels = session.regions.labels
    bkg_counts = np.bincount(
        labels.ravel(), weights=(session.labeling.ravel() == 0).astype(float),
        minlength=session.regions.n_regions)
    members = set(int(r) for r in
                  np.flatnonzero(bkg_counts > 0.8 * session.regions.pixel_counts))
    for r, lab in session.hard_constraints.items():
        if lab == 0:
            members.add(r)
        else:
            members.discard(r)
    # outside-ROI seeds are permanent: object strokes may only evict regions
    # that entered through the 80%-background rule
    members |= set(session.roi_seeds)
    return SeedSet.of(sorted(members))


def pixel_constraints(session: SegSession) -> np.ndarray:
    """Per-pixel forced labels: outside-ROI seed regions are pinned to
    background; stroke-pinned regions override."""
    per_region = np.full(session.regions.n_regions, -1, dtype=np.int8)
    per_region[sorted(session.roi_seeds)] = 0
    for r, lab in session.hard_constraints.items():
        per_region[r] = lab
    return per_region[session.regions.labels]


def run_iteration(session: SegSession) -> SegSession:
    """One refinement pass: models, seeds, propagation, forest surgery,
    network, cut."""
    cfg = session.config
    s = session
    s.assignment = assign_components(s.image, s.labeling, s.obj_gmm, s.bkg_gmm)
    s.obj_gmm, s.bkg_gmm = fit_gmms(s.image, s.labeling, s.assignment,
                                    cfg.k_gmm)
    s.seeds = updated_seeds(s)
    s.nc = compute_nc(s.graph, s.seeds)
    s.candidates = candidate_regions(s.nc, s.graph, s.regions, s.bkg_gmm,
                                     s.seeds, cfg.delta_b, cfg.epsilon,
                                     cfg.density_rescale_mode)
    s.forest = update_forest(s.nc, s.candidates, s.graph)

    gamma = compute_gamma(s.nc, cfg.delta_gamma)
    rw = region_weights(s.nc, s.forest, cfg.delta_nc, cfg.t_clamp)
    net = build_network(s.image, s.regions, rw, s.obj_gmm, s.bkg_gmm, gamma,
                        cfg, constraints=pixel_constraints(s))
    cut = max_flow_min_cut(net)
    s.labeling = cut.labeling
    s.iteration += 1
    s.last_gamma = gamma
    s.last_energy = full_energy(net, cut.labeling)
    return s


def segment(session: SegSession):
    """Iterate to a labeling fixed point (or the iteration cap).  Returns
    (final labeling copy, per-iteration stats)."""
    session.iteration = 0
    trace = []
    for _ in range(session.config.max_iterations):
        before = session.labeling
        run_iteration(session)
        changed = int((before != session.labeling).sum())
        trace.append(IterationStats(
            iteration=session.iteration, changed_pixels=changed,
            gamma=session.last_gamma, energy=session.last_energy,
            n_seeds=len(session.seeds),
            n_obj_candidates=len(session.candidates.p_obj),
            n_bkg_candidates=len(session.candidates.p_bkg)))
        if changed == 0:
            break
    return session.labeling.copy(), trace


def apply_edit(session: SegSession, strokes):
    """Pin every stroked region to the stroke's label (later strokes win),
    then re-run the refinement loop on the existing session."""
    labels = session.regions.labels
    h, w = labels.shape
    pinned = []
    for path, stroke_label in strokes:
        if stroke_label not in (0, 1):
            raise InvalidInputError("stroke label must be 0 or 1")
        for x, y in path:
            xi, yi = int(x), int(y)
            if not (0 <= xi < w and 0 <= yi < h):
                raise InvalidInputError("stroke outside image")
            pinned.append((int(labels[yi, xi]), int(stroke_label)))
    # all strokes validated; only now touch session state
    for region, lab in pinned:
        session.hard_constraints[region] = lab
    return segment(session)


def trace_json(trace) -> str:
    return json.dumps([{
        "iteration": t.iteration,
        "changed_pixels": t.changed_pixels,
        "gamma": t.gamma,
        "energy": t.energy,
        "n_seeds": t.n_seeds,
        "n_obj_candidates": t.n_obj_candidates,
        "n_bkg_candidates": t.n_bkg_candidates,
    } for t in trace], indent=2)


def load_roi_polygon(path) -> tuple:
    """Read a {"polygon": [[x, y], ...]} JSON file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidRoiError(f"cannot read ROI polygon: {exc}") from exc
    if not isinstance(data, dict) or "polygon" not in data:
        raise InvalidRoiError('ROI file must contain a "polygon" key')
    try:
        return normalize_polygon(data["polygon"])
    except (TypeError, ValueError) as exc:
        raise InvalidRoiError(f"malformed polygon: {exc}") from exc


def save_roi_polygon(polygon, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"polygon": [[x, y] for x, y in polygon]}, fh)
