"""Candidate region detection and forest modification.

After the background connectedness pass, regions that ended up weakly
connected to the border fall into two camps: pieces of the object, and
background islands that merely have no background route (e.g. enclosed by
the object).  The distinction is made by appearance: leaves whose mean color
is background-like (Gaussian closeness of the background-model density to
the seed average) are isolated background; the rest are object candidates.
The forest is then modified — isolated background regions are cut loose from
their parents, and adjacent object candidates on a common tree gain
auxiliary edges so they move together in the cut.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .appearance import Gmm
from .imagegraph import RegionGraph, RegionMap
from .ncengine import NcResult, SeedSet

DENSITY_SCALE = 100.0


@dataclass(frozen=True)
class CandidateSets:
    p_obj: frozenset
    p_bkg: frozenset
    b_set: frozenset
    u_b: float

    def __post_init__(self):
        assert not (self.p_obj & self.p_bkg)
        assert self.p_bkg <= self.b_set
        assert not (self.p_obj & self.b_set)

    @classmethod
    def empty(cls) -> "CandidateSets":
        return cls(frozenset(), frozenset(), frozenset(), 0.0)


@dataclass(frozen=True)
class ModifiedForest:
    npre: np.ndarray                 # (N,) int32
    nrt: np.ndarray                  # (N,) int32
    aux: dict = field(repr=False)    # region -> frozenset of aux neighbors

    def aux_neighbors(self, r: int):
        return self.aux.get(r, frozenset())

    def parent_edges(self):
        """(r, parent) pairs for every region that is not its own parent."""
        return [(r, int(p)) for r, p in enumerate(self.npre) if p != r]


def forest_leaves(pre: np.ndarray) -> np.ndarray:
    """Regions that are nobody's parent (self-parents do not count)."""
    n = len(pre)
    has_child = np.zeros(n, dtype=bool)
    child = np.flatnonzero(pre != np.arange(n))
    has_child[pre[child]] = True
    return np.flatnonzero(~has_child)


def scaled_background_densities(regions: RegionMap, bkg_model: Gmm,
                                rescale: bool = True) -> np.ndarray:
    """Background-model density of each region's mean color.

    In the default mode the raw densities are linearly rescaled to
    [0, DENSITY_SCALE] across the image's regions, putting them on the scale
    the closeness bandwidth expects; the literal mode returns raw densities.
    """
    log_d = bkg_model.log_density(regions.mean_colors)
    dens = np.exp(log_d)
    if not rescale:
        return dens
    lo, hi = dens.min(), dens.max()
    if hi > lo:
        return DENSITY_SCALE * (dens - lo) / (hi - lo)
    return np.zeros_like(dens)


def candidate_regions(nc: NcResult, graph: RegionGraph, regions: RegionMap,
                      bkg_model: Gmm, seeds: SeedSet, delta_b: float = 50.0,
                      epsilon: float = 0.5,
                      density_rescale: bool = True) -> CandidateSets:
    """Split the weakly connected leaves into object and isolated-background
    candidates.

    A leaf qualifies when its T lies strictly below the mean T over all
    regions.  Background-likeness f(r) = exp(-(p(r) - u_B)^2 / (2 delta_b^2))
    compares the region's background density p(r) against u_B, the seed
    regions' average density; regions with f > epsilon form the
    background-like set B.  Low-T leaves inside B are isolated background,
    the rest are object candidates.
    """
    pre = nc.forest.pre
    leaves = forest_leaves(pre)
    tau = nc.T.mean()
    low_t_leaves = [int(r) for r in leaves if nc.T[r] < tau]

    dens = scaled_background_densities(regions, bkg_model, density_rescale)
    u_b = float(np.mean([dens[s] for s in seeds]))
    f = np.exp(-((dens - u_b) ** 2) / (2.0 * delta_b * delta_b))
    b_set = frozenset(np.flatnonzero(f > epsilon).tolist())

    p_obj = frozenset(r for r in low_t_leaves if r not in b_set)
    p_bkg = frozenset(r for r in low_t_leaves if r in b_set)
    return CandidateSets(p_obj, p_bkg, b_set, u_b)


def update_forest(nc: NcResult, cands: CandidateSets,
                  graph: RegionGraph) -> ModifiedForest:
    """Prune isolated-background leaves and link adjacent object candidates.

    Pruning makes every isolated-background region its own parent and root;
    nothing else moves.  Linking adds a symmetric auxiliary edge between
    every pixel-adjacent pair of object candidates that grew on the same
    tree of the unmodified forest.
    """
    npre = nc.forest.pre.copy()
    nrt = nc.forest.rt.copy()
    for r in cands.p_bkg:
        npre[r] = r
        nrt[r] = r

    aux = {}
    for r in sorted(cands.p_obj):
        for g in graph.neighbors(r):
            if g > r and g in cands.p_obj and nc.forest.rt[r] == nc.forest.rt[g]:
                aux.setdefault(r, set()).add(g)
                aux.setdefault(g, set()).add(r)
    aux = {r: frozenset(ns) for r, ns in aux.items()}
    return ModifiedForest(npre, nrt, aux)


def candidates_json(cands: CandidateSets) -> str:
    return json.dumps({
        "p_obj": sorted(cands.p_obj),
        "p_bkg": sorted(cands.p_bkg),
        "b_set": sorted(cands.b_set),
        "u_b": cands.u_b,
    }, indent=2)


def forest_json(forest: ModifiedForest) -> str:
    n = len(forest.npre)
    return json.dumps({
        "npre": forest.npre.tolist(),
        "nrt": forest.nrt.tolist(),
        "aux": {str(r): sorted(forest.aux_neighbors(r))
                for r in range(n) if forest.aux_neighbors(r)},
    }, indent=2)
