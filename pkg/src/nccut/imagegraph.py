"""Image decoding, low-level maps, SLICO superpixels and the region graph.

Regions are the atomic unit of the connectedness computation: every region
carries a pixel count, a mean RGB color and an inhomogeneity score in [0, 1].
Adjacent regions are linked by a truth affinity mu_T (color similarity) and an
indeterminacy mu_I (maximum inhomogeneity of the pair).
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import DecodeError, InvalidInputError

GRAY_WEIGHTS = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class RgbImage:
    """8-bit RGB image stored as an (H, W, 3) uint8 array."""

    pixels: np.ndarray

    def __post_init__(self):
        px = self.pixels
        if px.ndim != 3 or px.shape[2] != 3 or px.dtype != np.uint8:
            raise InvalidInputError("pixels must be an (H, W, 3) uint8 array")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise InvalidInputError("image must have width >= 1 and height >= 1")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def n_pixels(self) -> int:
        return self.height * self.width

    def gray(self) -> np.ndarray:
        """Luma gray conversion (0.299 r + 0.587 g + 0.114 b), float64."""
        return self.pixels.astype(np.float64) @ GRAY_WEIGHTS


def load_image(data: bytes) -> RgbImage:
    """Decode encoded image bytes (PNG required; gray images promoted to RGB)."""
    try:
        with Image.open(io.BytesIO(data)) as im:
            im.load()
            rgb = im.convert("RGB")
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise DecodeError(f"cannot decode image: {exc}") from exc
    arr = np.asarray(rgb, dtype=np.uint8)
    if arr.size == 0:
        raise InvalidInputError("decoded image has zero dimension")
    return RgbImage(arr)


def load_image_file(path) -> RgbImage:
    with open(path, "rb") as fh:
        return load_image(fh.read())


def save_mask_png(mask: np.ndarray, path=None) -> bytes:
    """Encode a binary mask as 8-bit grayscale PNG (255 = object)."""
    img = Image.fromarray((mask.astype(np.uint8) * 255), mode="L")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    data = buf.getvalue()
    if path is not None:
        with open(path, "wb") as fh:
            fh.write(data)
    return data


def load_mask_png(path) -> np.ndarray:
    """Read an 8-bit mask PNG; nonzero pixels are object."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"))
    return (arr > 0).astype(np.uint8)


def inhomogeneity_map(image: RgbImage, window_radius: int = 2) -> np.ndarray:
    """Per-pixel product of normalized local gray std and Sobel magnitude.

    Both factors are normalized to [0, 1] by their per-image maximum (an
    all-zero factor stays zero); borders are handled by edge replication.
    """
    if window_radius < 1:
        raise InvalidInputError("window_radius must be >= 1")
    gray = image.gray()
    size = 2 * window_radius + 1
    mean = ndimage.uniform_filter(gray, size=size, mode="nearest")
    mean_sq = ndimage.uniform_filter(gray * gray, size=size, mode="nearest")
    var = np.maximum(mean_sq - mean * mean, 0.0)
    f_std = np.sqrt(var)

    gx = ndimage.sobel(gray, axis=1, mode="nearest")
    gy = ndimage.sobel(gray, axis=0, mode="nearest")
    f_sobel = np.hypot(gx, gy)

    for f in (f_std, f_sobel):
        peak = f.max()
        if peak > 0:
            f /= peak
    return f_std * f_sobel


@dataclass(frozen=True)
class RegionMap:
    """Per-pixel region labels plus per-region statistics."""

    labels: np.ndarray                 # (H, W) int32, values in [0, N)
    pixel_counts: np.ndarray           # (N,) int64
    mean_colors: np.ndarray            # (N, 3) float64
    inhomogeneity: np.ndarray          # (N,) float64 in [0, 1]

    @property
    def n_regions(self) -> int:
        return len(self.pixel_counts)


def region_map_from_labels(image: RgbImage, labels: np.ndarray,
                           window_radius: int = 2) -> RegionMap:
    """Build a RegionMap from an existing label image.

    Labels must already be consecutive integers starting at 0, one connected
    region per label.
    """
    labels = np.ascontiguousarray(labels, dtype=np.int32)
    if labels.shape != (image.height, image.width):
        raise InvalidInputError("labels shape must match image")
    n = int(labels.max()) + 1
    flat = labels.ravel()
    counts = np.bincount(flat, minlength=n).astype(np.int64)
    if (counts == 0).any():
        raise InvalidInputError("every region index must own at least one pixel")
    rgb = image.pixels.reshape(-1, 3).astype(np.float64)
    sums = np.zeros((n, 3))
    for c in range(3):
        sums[:, c] = np.bincount(flat, weights=rgb[:, c], minlength=n)
    means = sums / counts[:, None]
    inhomo = inhomogeneity_map(image, window_radius)
    h = np.bincount(flat, weights=inhomo.ravel(), minlength=n) / counts
    return RegionMap(labels, counts, means, np.clip(h, 0.0, 1.0))


def _relabel_consecutive(labels: np.ndarray) -> np.ndarray:
    _, out = np.unique(labels, return_inverse=True)
    return out.reshape(labels.shape).astype(np.int32)


def _connected_component_ids(labels: np.ndarray) -> tuple[np.ndarray, int]:
    """Component id per pixel, where a component is a maximal 4-connected
    run of equal labels."""
    h, w = labels.shape
    idx = np.arange(h * w).reshape(h, w)
    rows = []
    cols = []
    same_h = labels[:, :-1] == labels[:, 1:]
    rows.append(idx[:, :-1][same_h])
    cols.append(idx[:, 1:][same_h])
    same_v = labels[:-1, :] == labels[1:, :]
    rows.append(idx[:-1, :][same_v])
    cols.append(idx[1:, :][same_v])
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    graph = coo_matrix((np.ones(len(r), dtype=np.int8), (r, c)), shape=(h * w, h * w))
    n_comp, comp = connected_components(graph, directed=False)
    return comp.reshape(h, w), n_comp


def _merge_orphans(labels: np.ndarray) -> np.ndarray:
    """Keep each label's largest 4-connected component; every other component
    is merged into the largest adjacent surviving region.

    Resolution spreads outward from the surviving components, so each label's
    final territory stays 4-connected and the pass terminates (the component
    adjacency graph of a grid partition is connected).
    """
    labels = labels.copy()
    comp, n_comp = _connected_component_ids(labels)
    comp_flat = comp.ravel()
    lab_flat = labels.ravel()
    comp_sizes = np.bincount(comp_flat, minlength=n_comp)
    comp_label = np.full(n_comp, -1, dtype=np.int64)
    comp_label[comp_flat] = lab_flat
    n_labels = int(lab_flat.max()) + 1
    # sort so the last entry per label is its largest component (ties: higher id)
    order = np.lexsort((np.arange(n_comp), comp_sizes, comp_label))
    keeper = np.full(n_labels, -1, dtype=np.int64)
    keeper[comp_label[order]] = order
    resolved = np.zeros(n_comp, dtype=bool)
    resolved[keeper[keeper >= 0]] = True
    final_label = np.where(resolved, comp_label, -1)
    label_sizes = np.bincount(lab_flat, minlength=n_labels).astype(np.int64)

    pairs = set()
    for a, b in ((comp[:, :-1], comp[:, 1:]), (comp[:-1, :], comp[1:, :])):
        diff = a != b
        pairs.update(map(tuple, np.stack([a[diff], b[diff]], axis=1).tolist()))
    neigh = {}
    for a, b in pairs:
        neigh.setdefault(a, set()).add(b)
        neigh.setdefault(b, set()).add(a)

    pending = set(np.flatnonzero(~resolved).tolist())
    while pending:
        progressed = []
        for comp_id in sorted(pending):
            cand = [c for c in neigh.get(comp_id, ()) if resolved[c]]
            if not cand:
                continue
            best = max(cand, key=lambda c: (label_sizes[final_label[c]],
                                            -final_label[c]))
            final_label[comp_id] = final_label[best]
            label_sizes[final_label[best]] += comp_sizes[comp_id]
            progressed.append(comp_id)
        if not progressed:
            raise AssertionError("orphan components unreachable from any region")
        for comp_id in progressed:
            resolved[comp_id] = True
            pending.discard(comp_id)
    return _relabel_consecutive(final_label[comp])


def slico(image: RgbImage, n_regions: int, window_radius: int = 2,
          n_sweeps: int = 10) -> RegionMap:
    """Zero-parameter SLIC superpixels with adaptive per-cluster compactness.

    Cluster centers start on a regular grid and are refined for a fixed
    number of sweeps; the color distance of each cluster is normalized by the
    maximum color distance observed for that cluster on the previous sweep.
    A post-pass keeps each label 4-connected by merging stray components into
    the largest adjacent region.  Fully deterministic.
    """
    h, w = image.height, image.width
    if not 1 <= n_regions <= h * w:
        raise InvalidInputError("n_regions must lie in [1, pixel count]")

    step = np.sqrt(h * w / n_regions)
    nx = max(1, round(w / step))
    ny = max(1, round(h / step))
    cx, cy = np.meshgrid((np.arange(nx) + 0.5) * w / nx,
                         (np.arange(ny) + 0.5) * h / ny)
    centers_xy = np.stack([cx.ravel(), cy.ravel()], axis=1)
    k = len(centers_xy)
    rgb = image.pixels.astype(np.float64)
    seed_px = np.minimum(centers_xy.astype(np.int64), [w - 1, h - 1])
    centers_color = rgb[seed_px[:, 1], seed_px[:, 0]]

    labels = np.zeros((h, w), dtype=np.int32)
    max_color = np.full(k, 10.0)  # initial compactness; adapted per sweep
    spatial_norm = step * step
    yy, xx = np.mgrid[0:h, 0:w]
    reach = int(np.ceil(2 * step))

    for _ in range(n_sweeps):
        best = np.full((h, w), np.inf)
        best_dc2 = np.zeros((h, w))
        for ci in range(k):
            x0 = max(0, int(centers_xy[ci, 0]) - reach)
            x1 = min(w, int(centers_xy[ci, 0]) + reach + 1)
            y0 = max(0, int(centers_xy[ci, 1]) - reach)
            y1 = min(h, int(centers_xy[ci, 1]) + reach + 1)
            win = rgb[y0:y1, x0:x1]
            dc2 = ((win - centers_color[ci]) ** 2).sum(axis=2)
            ds2 = ((xx[y0:y1, x0:x1] - centers_xy[ci, 0]) ** 2
                   + (yy[y0:y1, x0:x1] - centers_xy[ci, 1]) ** 2)
            d = dc2 / (max_color[ci] ** 2) + ds2 / spatial_norm
            sub = best[y0:y1, x0:x1]
            better = d < sub
            sub[better] = d[better]
            labels[y0:y1, x0:x1][better] = ci
            best_dc2[y0:y1, x0:x1][better] = dc2[better]
        flat = labels.ravel()
        counts = np.bincount(flat, minlength=k).astype(np.float64)
        occupied = counts > 0
        for c in range(3):
            s = np.bincount(flat, weights=rgb[..., c].ravel(), minlength=k)
            centers_color[occupied, c] = s[occupied] / counts[occupied]
        sx = np.bincount(flat, weights=xx.ravel(), minlength=k)
        sy = np.bincount(flat, weights=yy.ravel(), minlength=k)
        centers_xy[occupied, 0] = sx[occupied] / counts[occupied]
        centers_xy[occupied, 1] = sy[occupied] / counts[occupied]
        new_max = np.zeros(k)
        np.maximum.at(new_max, flat, best_dc2.ravel())
        max_color = np.maximum(np.sqrt(new_max), 1.0)

    labels = _merge_orphans(labels)
    return region_map_from_labels(image, labels, window_radius)


@dataclass(frozen=True)
class RegionGraph:
    """Region adjacency with per-edge truth and indeterminacy measures."""

    n_regions: int
    edges: dict = field(repr=False)            # (p, q) sorted tuple -> (mu_t, mu_i)
    adjacency: dict = field(repr=False)        # region -> sorted tuple of neighbors
    self_indeterminacy: np.ndarray = field(repr=False)

    def neighbors(self, p: int):
        return self.adjacency.get(p, ())

    def edge(self, p: int, q: int):
        return self.edges[(p, q) if p < q else (q, p)]

    def mu_t(self, p: int, q: int) -> float:
        return self.edge(p, q)[0]

    def mu_i(self, p: int, q: int) -> float:
        if p == q:
            return float(self.self_indeterminacy[p])
        return self.edge(p, q)[1]

    def with_zero_indeterminacy(self) -> "RegionGraph":
        """Ablation copy: all indeterminacies (incl. self) forced to zero."""
        edges = {pq: (t, 0.0) for pq, (t, _) in self.edges.items()}
        return RegionGraph(self.n_regions, edges, self.adjacency,
                           np.zeros(self.n_regions))


def adjacent_region_pairs(labels: np.ndarray) -> np.ndarray:
    """Unique sorted (p, q) pairs of 4-adjacent distinct regions."""
    pairs = []
    for a, b in ((labels[:, :-1], labels[:, 1:]), (labels[:-1, :], labels[1:, :])):
        diff = a != b
        pairs.append(np.stack([a[diff], b[diff]], axis=1))
    pq = np.concatenate(pairs)
    pq = np.sort(pq, axis=1)
    return np.unique(pq, axis=0)


def build_region_graph(image: RgbImage, regions: RegionMap,
                       delta_t: float = 30.0) -> RegionGraph:
    """Attach mu_T / mu_I measures to every 4-adjacent region pair."""
    if regions.labels.shape != (image.height, image.width):
        raise InvalidInputError("regions inconsistent with image")
    pq = adjacent_region_pairs(regions.labels)
    dm = regions.mean_colors[pq[:, 0]] - regions.mean_colors[pq[:, 1]]
    mu_t = np.exp(-(dm ** 2).sum(axis=1) / (2.0 * delta_t * delta_t))
    h = regions.inhomogeneity
    mu_i = np.maximum(h[pq[:, 0]], h[pq[:, 1]])
    edges = {}
    adjacency = {}
    for (p, q), t, i in zip(pq.tolist(), mu_t.tolist(), mu_i.tolist()):
        edges[(p, q)] = (t, i)
        adjacency.setdefault(p, []).append(q)
        adjacency.setdefault(q, []).append(p)
    adjacency = {r: tuple(sorted(ns)) for r, ns in adjacency.items()}
    return RegionGraph(regions.n_regions, edges, adjacency, h.copy())


def export_region_png(regions: RegionMap, path=None) -> bytes:
    """Encode region labels as a 16-bit grayscale PNG."""
    if regions.n_regions > 65535:
        raise InvalidInputError("too many regions for 16-bit export")
    img = Image.fromarray(regions.labels.astype(np.uint16))
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    data = buf.getvalue()
    if path is not None:
        with open(path, "wb") as fh:
            fh.write(data)
    return data


def region_stats_json(regions: RegionMap) -> str:
    """JSON sidecar with per-region statistics."""
    payload = {
        "n_regions": regions.n_regions,
        "regions": [
            {
                "id": i,
                "pixel_count": int(regions.pixel_counts[i]),
                "mean_color": [round(float(v), 6) for v in regions.mean_colors[i]],
                "inhomogeneity": round(float(regions.inhomogeneity[i]), 9),
            }
            for i in range(regions.n_regions)
        ],
    }
    return json.dumps(payload, indent=2)
