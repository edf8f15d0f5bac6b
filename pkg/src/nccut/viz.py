"""Visualization artifacts shared by the CLI and the HTTP service:
false-color region maps, superpixel boundary overlays, and crack-edge
boundary polylines for canvas rendering."""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError
from .imagegraph import RgbImage


def false_color(values: np.ndarray) -> np.ndarray:
    """Map values in [0, 1] to an (H, W, 3) uint8 blue-to-red heat image
    (hue ramp 240 degrees down to 0, full saturation)."""
    v = np.asarray(values, dtype=np.float64)
    if not np.isfinite(v).all():
        raise InvalidInputError("false_color requires finite values")
    v = np.clip(v, 0.0, 1.0)
    hue = (1.0 - v) * (240.0 / 360.0)
    k = hue * 6.0
    i = np.floor(k).astype(int) % 6
    f = k - np.floor(k)
    # standard HSV-to-RGB with s = v = 1
    one = np.ones_like(f)
    p = np.zeros_like(f)
    q = 1.0 - f
    t = f
    lut = [
        (one, t, p), (q, one, p), (p, one, t),
        (p, q, one), (t, p, one), (one, p, q),
    ]
    rgb = np.zeros(v.shape + (3,), dtype=np.float64)
    for idx, (r, g, b) in enumerate(lut):
        sel = i == idx
        rgb[sel, 0] = r[sel]
        rgb[sel, 1] = g[sel]
        rgb[sel, 2] = b[sel]
    return np.rint(rgb * 255.0).astype(np.uint8)


def region_value_image(labels: np.ndarray, values: np.ndarray) -> np.ndarray:
    """False-color image of one scalar per region, spread over its pixels."""
    per_region = np.asarray(values, dtype=np.float64)
    return false_color(per_region[labels])


def boundary_mask(labels: np.ndarray) -> np.ndarray:
    """Pixels whose right or lower 4-neighbor belongs to another region."""
    mask = np.zeros(labels.shape, dtype=bool)
    mask[:, :-1] |= labels[:, :-1] != labels[:, 1:]
    mask[:-1, :] |= labels[:-1, :] != labels[1:, :]
    return mask


def overlay_boundaries(image: RgbImage, labels: np.ndarray,
                       color=(255, 64, 64)) -> RgbImage:
    """Copy of the image with region boundary pixels painted."""
    if labels.shape != (image.height, image.width):
        raise InvalidInputError("labels shape must match the image")
    out = image.pixels.copy()
    out[boundary_mask(labels)] = color
    return RgbImage(out)


def _crack_segments(labels: np.ndarray):
    """Unit segments between pixel corners along interior region borders,
    in (x, y) corner coordinates."""
    segments = []
    vy, vx = np.nonzero(labels[:, 1:] != labels[:, :-1])
    for y, x in zip(vy.tolist(), vx.tolist()):
        segments.append(((x + 1, y), (x + 1, y + 1)))
    hy, hx = np.nonzero(labels[1:, :] != labels[:-1, :])
    for y, x in zip(hy.tolist(), hx.tolist()):
        segments.append(((x, y + 1), (x + 1, y + 1)))
    return segments


def boundary_polylines(labels: np.ndarray):
    """Chain the crack segments of the region partition into polylines.

    Each interior boundary segment appears in exactly one polyline;
    collinear runs are merged.  Deterministic for a given label map.
    """
    segments = sorted(_crack_segments(labels))
    neighbors = {}
    for a, b in segments:
        neighbors.setdefault(a, []).append(b)
        neighbors.setdefault(b, []).append(a)
    for adj in neighbors.values():
        adj.sort()
    used = set()

    def edge(a, b):
        return (a, b) if a <= b else (b, a)

    def extend(chain):
        # grow at the tail while an unused incident segment exists
        while True:
            here = chain[-1]
            step = None
            for cand in neighbors[here]:
                if edge(here, cand) not in used:
                    step = cand
                    break
            if step is None:
                return chain
            used.add(edge(here, step))
            chain.append(step)

    def simplify(chain):
        out = chain[:1]
        for point in chain[1:]:
            if len(out) >= 2:
                dx0, dy0 = out[-1][0] - out[-2][0], out[-1][1] - out[-2][1]
                dx1, dy1 = point[0] - out[-1][0], point[1] - out[-1][1]
                if dx0 * dy1 == dy0 * dx1:
                    out[-1] = point
                    continue
            out.append(point)
        return out

    polylines = []
    for a, b in segments:
        if edge(a, b) in used:
            continue
        used.add(edge(a, b))
        one_way = extend([a, b])
        whole = extend(list(reversed(one_way)))
        polylines.append(simplify(whole))
    return polylines


def region_centroids(labels: np.ndarray, n_regions: int) -> np.ndarray:
    """(n, 2) array of region centroids in (x, y) pixel coordinates."""
    ys, xs = np.mgrid[0:labels.shape[0], 0:labels.shape[1]]
    counts = np.bincount(labels.ravel(), minlength=n_regions).astype(float)
    cx = np.bincount(labels.ravel(), weights=xs.ravel(), minlength=n_regions)
    cy = np.bincount(labels.ravel(), weights=ys.ravel(), minlength=n_regions)
    counts[counts == 0] = 1.0
    return np.stack([cx / counts, cy / counts], axis=1)
