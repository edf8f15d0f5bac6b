"""Neutro-connectedness maps and forests.

Connectedness between regions is a (T, I) pair: T is the strength of the
best path (min of edge truths along it) and I the indeterminacy picked up on
the way (max of edge indeterminacies).  "Best" is judged lexicographically on
the key <T, 1 - I>: higher truth wins, ties go to lower indeterminacy.  The
propagation is a Dijkstra-style sweep with a max-priority queue; an
exhaustive simple-path oracle backs it in the tests.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import InvalidInputError, InvalidPathError
from .imagegraph import RegionGraph, RegionMap


class NcPair(NamedTuple):
    T: float
    I: float

    @property
    def F(self) -> float:
        return 1.0 - self.T


def lex_leq(a, b) -> bool:
    """Non-strict lexicographic order on <T, 1 - I> keys."""
    return a[0] < b[0] or (a[0] == b[0] and a[1] <= b[1])


def lex_lt(a, b) -> bool:
    """Strict lexicographic order on <T, 1 - I> keys."""
    return lex_leq(a, b) and tuple(a) != tuple(b)


def path_strength(path, graph: RegionGraph):
    """(T, I, F) of a concrete region path: min truth / max indeterminacy
    over its consecutive edges."""
    if len(path) < 2:
        raise InvalidPathError("path must contain at least two regions")
    t = 1.0
    i = 0.0
    for p, q in zip(path[:-1], path[1:]):
        if q not in graph.neighbors(p):
            raise InvalidPathError(f"regions {p} and {q} are not adjacent")
        t = min(t, graph.mu_t(p, q))
        i = max(i, graph.mu_i(p, q))
    return t, i, 1.0 - t


@dataclass(frozen=True)
class SeedSet:
    regions: frozenset

    def __post_init__(self):
        if not self.regions:
            raise InvalidInputError("seed set must be non-empty")

    @classmethod
    def of(cls, regions) -> "SeedSet":
        return cls(frozenset(int(r) for r in regions))

    def validate(self, n_regions: int):
        for r in self.regions:
            if not 0 <= r < n_regions:
                raise InvalidInputError(f"seed region {r} out of range")

    def __contains__(self, r) -> bool:
        return r in self.regions

    def __iter__(self):
        return iter(sorted(self.regions))

    def __len__(self):
        return len(self.regions)


@dataclass(frozen=True)
class NcForest:
    """Per-region parent and root of the propagation forest."""

    pre: np.ndarray   # (N,) int32; pre[r] == r for seeds and unreached regions
    rt: np.ndarray    # (N,) int32

    def path_to_root(self, r: int):
        """Region sequence from r up to its root (inclusive)."""
        out = [r]
        seen = {r}
        while self.pre[out[-1]] != out[-1]:
            nxt = int(self.pre[out[-1]])
            if nxt in seen:
                raise AssertionError("forest contains a cycle")
            out.append(nxt)
            seen.add(nxt)
        return out


@dataclass(frozen=True)
class NcResult:
    T: np.ndarray                  # (N,) float64 in [0, 1]
    I: np.ndarray                  # (N,) float64 in [0, 1]
    forest: NcForest
    seeds: SeedSet
    reached: np.ndarray = field(repr=False)   # (N,) bool

    @property
    def n_regions(self) -> int:
        return len(self.T)

    def pair(self, r: int) -> NcPair:
        return NcPair(float(self.T[r]), float(self.I[r]))

    @property
    def F(self) -> np.ndarray:
        return 1.0 - self.T


def compute_nc(graph: RegionGraph, seeds: SeedSet) -> NcResult:
    """Lexicographic best-path propagation from the seed regions.

    Seeds start at (1, self-indeterminacy) and are never relaxed; every
    other region starts at (0, 0).  A neighbor q of the currently strongest
    region p is improved when the path through p is strictly lexicographically
    better on <T, 1 - I>.  The queue is a max-priority heap with lazy
    invalidation; equal keys pop the lower region index first, which makes
    the forest deterministic.
    """
    n = graph.n_regions
    seeds.validate(n)
    T = np.zeros(n)
    I = np.zeros(n)
    pre = np.arange(n, dtype=np.int32)
    rt = np.arange(n, dtype=np.int32)
    reached = np.zeros(n, dtype=bool)

    heap = []
    for s in seeds:
        T[s] = 1.0
        I[s] = graph.mu_i(s, s)
        reached[s] = True
        heap.append((-1.0, -(1.0 - I[s]), s))
    heapq.heapify(heap)

    while heap:
        neg_t, neg_k, p = heapq.heappop(heap)
        if (-neg_t, -neg_k) != (T[p], 1.0 - I[p]):
            continue  # stale entry
        for q in graph.neighbors(p):
            if q in seeds:
                continue
            cand_t = min(T[p], graph.mu_t(p, q))
            cand_i = max(I[p], graph.mu_i(p, q))
            if lex_lt((T[q], 1.0 - I[q]), (cand_t, 1.0 - cand_i)):
                T[q] = cand_t
                I[q] = cand_i
                pre[q] = p
                rt[q] = rt[p]
                reached[q] = True
                heapq.heappush(heap, (-cand_t, -(1.0 - cand_i), q))

    return NcResult(T, I, NcForest(pre, rt), seeds, reached)


def brute_force_nc(graph: RegionGraph, seeds: SeedSet):
    """Exhaustive-path oracle: (T, I) arrays from enumerating every simple
    path between each region and each seed.  Enumeration only; capped at 12
    regions."""
    n = graph.n_regions
    if n > 12:
        raise InvalidInputError("oracle limited to graphs of at most 12 regions")
    seeds.validate(n)
    best_t = np.zeros(n)
    best_i = np.zeros(n)
    for s in seeds:
        best_t[s] = 1.0
        best_i[s] = graph.mu_i(s, s)

    seed_set = set(seeds)
    visited = [False] * n

    def dfs(node: int, t: float, i: float):
        for q in graph.neighbors(node):
            if visited[q]:
                continue
            nt = min(t, graph.mu_t(node, q))
            ni = max(i, graph.mu_i(node, q))
            if q not in seed_set and lex_lt((best_t[q], 1.0 - best_i[q]),
                                            (nt, 1.0 - ni)):
                best_t[q] = nt
                best_i[q] = ni
            visited[q] = True
            dfs(q, nt, ni)
            visited[q] = False

    for s in seeds:
        visited[s] = True
        dfs(s, 1.0, 0.0)
        visited[s] = False
    return best_t, best_i


def nc_result_json(result: NcResult) -> str:
    payload = {
        "seeds": sorted(result.seeds.regions),
        "regions": [
            {
                "id": r,
                "T": float(result.T[r]),
                "I": float(result.I[r]),
                "F": float(1.0 - result.T[r]),
                "pre": int(result.forest.pre[r]),
                "rt": int(result.forest.rt[r]),
                "reached": bool(result.reached[r]),
            }
            for r in range(result.n_regions)
        ],
    }
    return json.dumps(payload, indent=2)


_COLOR_STOPS = np.array([
    [0, 0, 128],      # deep blue at T = 0
    [0, 128, 255],
    [0, 255, 255],
    [255, 255, 0],
    [255, 64, 0],
    [200, 0, 0],      # deep red at T = 1
], dtype=np.float64)


def false_color(values: np.ndarray) -> np.ndarray:
    """Map values in [0, 1] onto a blue-to-red ramp, returning uint8 RGB."""
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    pos = v * (len(_COLOR_STOPS) - 1)
    lo = np.floor(pos).astype(int)
    hi = np.minimum(lo + 1, len(_COLOR_STOPS) - 1)
    frac = (pos - lo)[..., None]
    rgb = _COLOR_STOPS[lo] * (1 - frac) + _COLOR_STOPS[hi] * frac
    return np.round(rgb).astype(np.uint8)


def t_map_image(result: NcResult, regions: RegionMap) -> np.ndarray:
    """Per-pixel false-color rendering of the T map."""
    if regions.n_regions != result.n_regions:
        raise InvalidInputError("region map inconsistent with NC result")
    return false_color(result.T[regions.labels])


def t_map_png(result: NcResult, regions: RegionMap, path=None) -> bytes:
    import io

    from PIL import Image

    img = Image.fromarray(t_map_image(result, regions))
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    data = buf.getvalue()
    if path is not None:
        with open(path, "wb") as fh:
            fh.write(data)
    return data
