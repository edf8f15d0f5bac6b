"""Deterministic synthetic scenes with construction ground truth.

These generators back the test fixtures and the experiment scripts: a clean
two-tone square, a ring object enclosing a background-colored pocket, a bar
under an illumination gradient, and a block grid with one noise-perturbed
region for probing indeterminacy propagation.  All randomness is seeded, so
every scene is bit-identical across runs.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np
from PIL import Image
from scipy.ndimage import gaussian_filter

from .imagegraph import RgbImage


@dataclass(frozen=True)
class Scene:
    name: str
    image: RgbImage
    truth: np.ndarray        # (H, W) uint8, 1 = object
    roi: tuple               # loose polygon of (x, y) vertices


def _finish(base: np.ndarray, noise_sigma: float, seed: int,
            blur: float = 0.0) -> RgbImage:
    if blur > 0:
        base = gaussian_filter(base, (blur, blur, 0.0))
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        base = base + rng.normal(0.0, noise_sigma, size=base.shape)
    return RgbImage(np.clip(np.rint(base), 0, 255).astype(np.uint8))


def two_tone_square(size: int = 120, lo: int = 30, hi: int = 90) -> Scene:
    """Perfectly uniform dark square on a uniform light ground."""
    base = np.full((size, size, 3), (200, 200, 200), dtype=np.float64)
    base[lo:hi, lo:hi] = (45, 45, 45)
    truth = np.zeros((size, size), dtype=np.uint8)
    truth[lo:hi, lo:hi] = 1
    margin = lo // 2
    roi = ((margin, margin), (size - margin, margin),
           (size - margin, size - margin), (margin, size - margin))
    return Scene("two_tone_square", _finish(base, 0.0, 0), truth, roi)


def ring_with_pocket(size: int = 200, r_in: float = 18.0,
                     r_out: float = 55.0) -> Scene:
    """Dark ring object whose hole is background-colored: an isolated
    background pocket fully enclosed by the object, inside a loose polygon."""
    center = size / 2.0
    yy, xx = np.mgrid[0:size, 0:size]
    dist = np.hypot(xx - center, yy - center)
    base = np.full((size, size, 3), (172, 174, 178), dtype=np.float64)
    ring = (dist >= r_in) & (dist <= r_out)
    base[ring] = (52, 54, 58)
    truth = ring.astype(np.uint8)
    roi = ((22, 100), (55, 30), (145, 30), (178, 100), (145, 170), (55, 170))
    return Scene("ring_with_pocket", _finish(base, 5.0, 11, blur=0.5), truth,
                 roi)


def gradient_bar(size: int = 160) -> Scene:
    """Dark elliptical bar on a background with a horizontal illumination
    gradient (multi-modal background appearance)."""
    yy, xx = np.mgrid[0:size, 0:size]
    shade = 160.0 + 35.0 * xx / (size - 1)
    base = np.stack([shade, shade, shade], axis=2)
    ellipse = (((xx - 75.0) / 38.0) ** 2 + ((yy - 80.0) / 17.0) ** 2) <= 1.0
    base[ellipse] = (48, 50, 46)
    truth = ellipse.astype(np.uint8)
    roi = ((18, 40), (142, 40), (142, 120), (18, 120))
    return Scene("gradient_bar", _finish(base, 1.5, 23), truth, roi)


def noisy_grid_scene(block: int = 40, noisy_block: int = 3,
                     amplitude: float = 25.0):
    """3x3 block grid: a dark center block in a light ring, with exactly one
    ring block carrying zero-mean checkerboard noise.

    The noise leaves the block's mean color (hence every truth affinity)
    untouched while driving its inhomogeneity up.  Returns (image, block
    labels, seed region ids) — the two seeds sit in the bottom corners so the
    noisy block and its mirror-image clean block see symmetric paths.
    """
    size = 3 * block
    base = np.full((size, size, 3), 180.0)
    labels = np.zeros((size, size), dtype=np.int32)
    for by in range(3):
        for bx in range(3):
            labels[by * block:(by + 1) * block,
                   bx * block:(bx + 1) * block] = 3 * by + bx
    base[labels == 4] = 60.0
    yy, xx = np.mgrid[0:size, 0:size]
    checker = np.where((xx + yy) % 2 == 0, amplitude, -amplitude)
    noisy = labels == noisy_block
    base[noisy] += checker[noisy, None]
    return _finish(base, 0.0, 0), labels, (6, 8)


def all_scenes():
    return [two_tone_square(), ring_with_pocket(), gradient_bar()]


def save_scene(scene: Scene, directory):
    """Write image PNG, ground-truth PNG, and ROI JSON under the scene's
    name; returns the three paths."""
    image_path = os.path.join(directory, f"{scene.name}.png")
    truth_path = os.path.join(directory, f"{scene.name}_gt.png")
    roi_path = os.path.join(directory, f"{scene.name}_roi.json")
    Image.fromarray(scene.image.pixels).save(image_path)
    Image.fromarray((scene.truth > 0).astype(np.uint8) * 255).save(truth_path)
    with open(roi_path, "w", encoding="utf-8") as fh:
        json.dump({"polygon": [[float(x), float(y)] for x, y in scene.roi]},
                  fh)
    return image_path, truth_path, roi_path
