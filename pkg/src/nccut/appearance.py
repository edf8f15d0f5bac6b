"""Object/background appearance models: Gaussian mixtures over pixel RGB.

The scheme is the hard-assignment (classification-EM) variant used by
Grabcut-style interactive segmentation: each pixel belongs to exactly one
component of its side's mixture, parameters are exact sample statistics of
the assigned pixels, and the density of a color is the best weighted
component density (max, not sum).  All work happens in log space so that
far-out colors under tight covariances stay finite.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidLabelingError, NumericalError
from .imagegraph import RgbImage

COV_FLOOR = 0.01          # added to every covariance diagonal
_KMEANS_SEED = 19
_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class Gmm:
    """K-component Gaussian mixture over RGB colors."""

    weights: np.ndarray        # (K,)
    means: np.ndarray          # (K, 3)
    covariances: np.ndarray    # (K, 3, 3)
    _precision: np.ndarray = field(repr=False, default=None)
    _log_norm: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if abs(w.sum() - 1.0) > 1e-9:
            raise NumericalError("mixture weights must sum to 1")
        if (w < 0).any():
            raise NumericalError("mixture weights must be non-negative")
        cov = np.asarray(self.covariances, dtype=np.float64)
        eigvals = np.linalg.eigvalsh(cov)
        if (eigvals < COV_FLOOR - 1e-9).any():
            raise NumericalError("covariance eigenvalue below regularization floor")
        sign, logdet = np.linalg.slogdet(cov)
        if (sign <= 0).any():
            raise NumericalError("covariance not positive definite")
        object.__setattr__(self, "_precision", np.linalg.inv(cov))
        object.__setattr__(self, "_log_norm",
                           -1.5 * _LOG_2PI - 0.5 * logdet)

    @property
    def k(self) -> int:
        return len(self.weights)

    def component_log_densities(self, colors: np.ndarray) -> np.ndarray:
        """log(pi_k * N(x; mu_k, cov_k)) for each color row; empty
        components give -inf.  Shape (n, K)."""
        x = np.atleast_2d(np.asarray(colors, dtype=np.float64))
        diff = x[:, None, :] - self.means[None, :, :]        # (n, K, 3)
        maha = np.einsum("nki,kij,nkj->nk", diff, self._precision, diff)
        log_n = self._log_norm[None, :] - 0.5 * maha
        with np.errstate(divide="ignore"):
            log_w = np.where(self.weights > 0, np.log(self.weights), -np.inf)
        return log_w[None, :] + log_n

    def log_density(self, colors: np.ndarray) -> np.ndarray:
        """log of the best weighted component density per color row."""
        out = self.component_log_densities(colors).max(axis=1)
        if np.isnan(out).any():
            raise NumericalError("NaN in mixture log density")
        return out


def gmm_density(color, gmm: Gmm) -> float:
    """Best weighted component density of a single RGB color."""
    return float(np.exp(gmm.log_density(np.asarray(color, float).reshape(1, 3))[0]))


def _kmeans(colors: np.ndarray, k: int, rng: np.random.Generator,
            n_iter: int = 10) -> np.ndarray:
    """Plain k-means with k-means++ seeding; returns per-row cluster ids.
    Deterministic for a given generator state."""
    n = len(colors)
    k = min(k, n)
    centers = np.empty((k, 3))
    centers[0] = colors[rng.integers(n)]
    closest = ((colors - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = closest.sum()
        if total <= 0:
            centers[c:] = centers[0]
            break
        centers[c] = colors[rng.choice(n, p=closest / total)]
        closest = np.minimum(closest, ((colors - centers[c]) ** 2).sum(axis=1))
    for _ in range(n_iter):
        d2 = ((colors[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        assign = d2.argmin(axis=1)
        for c in range(k):
            members = colors[assign == c]
            if len(members):
                centers[c] = members.mean(axis=0)
    d2 = ((colors[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return d2.argmin(axis=1)


def _fit_side(colors: np.ndarray, assign: np.ndarray, k: int) -> Gmm:
    n = len(colors)
    weights = np.zeros(k)
    means = np.zeros((k, 3))
    covs = np.tile(COV_FLOOR * np.eye(3), (k, 1, 1))
    for c in range(k):
        members = colors[assign == c]
        if len(members) == 0:
            continue
        weights[c] = len(members) / n
        means[c] = members.mean(axis=0)
        diff = members - means[c]
        covs[c] = diff.T @ diff / len(members) + COV_FLOOR * np.eye(3)
    return Gmm(weights, means, covs)


def _side_pixels(image: RgbImage, labeling: np.ndarray, side: int) -> np.ndarray:
    mask = labeling == side
    if not mask.any():
        raise InvalidLabelingError(f"no pixels labeled {side}")
    return image.pixels[mask].astype(np.float64)


def fit_gmms(image: RgbImage, labeling: np.ndarray, assignment: np.ndarray,
             k: int = 5):
    """Exact per-component sample statistics under the current hard
    assignment.  Empty components keep weight 0 and the floor covariance."""
    gmms = []
    for side in (0, 1):
        colors = _side_pixels(image, labeling, side)
        gmms.append(_fit_side(colors, assignment[labeling == side], k))
    background, obj = gmms
    return obj, background


def assign_components(image: RgbImage, labeling: np.ndarray,
                      obj_gmm: Gmm, bkg_gmm: Gmm) -> np.ndarray:
    """Per-pixel best component on the pixel's current side (ties to the
    lowest component index)."""
    h, w = labeling.shape
    out = np.zeros((h, w), dtype=np.int32)
    flat_colors = image.pixels.reshape(-1, 3).astype(np.float64)
    flat_labels = labeling.ravel()
    flat_out = out.ravel()
    for side, gmm in ((0, bkg_gmm), (1, obj_gmm)):
        sel = flat_labels == side
        if sel.any():
            flat_out[sel] = gmm.component_log_densities(
                flat_colors[sel]).argmax(axis=1)
    return flat_out.reshape(h, w)


def init_gmms(image: RgbImage, labeling: np.ndarray, k: int = 5):
    """Deterministic k-means initialization per side followed by one exact
    fit.  Returns (object GMM, background GMM, per-pixel assignment)."""
    if k < 1:
        raise InvalidLabelingError("component count must be >= 1")
    h, w = labeling.shape
    assignment = np.zeros((h, w), dtype=np.int32)
    for side in (0, 1):
        colors = _side_pixels(image, labeling, side)
        rng = np.random.default_rng(_KMEANS_SEED + side)
        assignment[labeling == side] = _kmeans(colors, k, rng)
    obj, bkg = fit_gmms(image, labeling, assignment, k)
    return obj, bkg, assignment


def total_neg_log_likelihood(image: RgbImage, labeling: np.ndarray,
                             obj_gmm: Gmm, bkg_gmm: Gmm) -> float:
    """Sum over pixels of -log best-component density under each pixel's
    side model (the quantity the hard-assignment scheme descends)."""
    total = 0.0
    flat_colors = image.pixels.reshape(-1, 3).astype(np.float64)
    flat_labels = labeling.ravel()
    for side, gmm in ((0, bkg_gmm), (1, obj_gmm)):
        sel = flat_labels == side
        if sel.any():
            total -= gmm.log_density(flat_colors[sel]).sum()
    return float(total)


def gmm_to_json(gmm: Gmm) -> dict:
    return {
        "weights": gmm.weights.tolist(),
        "means": gmm.means.tolist(),
        "covariances": gmm.covariances.tolist(),
    }


def gmm_from_json(payload: dict) -> Gmm:
    return Gmm(np.array(payload["weights"], float),
               np.array(payload["means"], float),
               np.array(payload["covariances"], float))


def gmms_json(obj_gmm: Gmm, bkg_gmm: Gmm) -> str:
    return json.dumps({"object": gmm_to_json(obj_gmm),
                       "background": gmm_to_json(bkg_gmm)}, indent=2)
