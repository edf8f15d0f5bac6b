"""Pixel-level energy network and min-cut solver.

The segmentation energy has two channels.  The connectedness channel prices
each pixel by its region's background-connectedness T: labeling a pixel
background costs -log T (cheap when strongly background-connected), labeling
it object costs -log(1 - T); region-level parent and auxiliary edges add
strong pairwise coupling so trees of the modified forest move coherently.
The appearance channel is the classic mixture-model data term plus a
contrast-weighted smoothness term.  Both are mixed by gamma and solved as a
single s-t min-cut; the source side of the cut is the object.

The solver is a Dinic max-flow on float64 capacities, JIT-compiled.  Its
correctness is pinned by exhaustive-enumeration oracles in the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.sparse import csr_matrix

from .config import Config
from .errors import InvalidInputError, NumericalError
from .forestops import ModifiedForest
from .imagegraph import RegionMap, RgbImage
from .ncengine import NcResult

NEIGHBOR_OFFSETS = ((0, 1), (1, 0), (1, 1), (1, -1))


def compute_gamma(nc: NcResult, delta_gamma: float = 0.025) -> float:
    """Mixing weight between connectedness and appearance energies.

    gamma = exp(-mean(I)^2 / (2 delta_gamma^2)): heavy indeterminacy melts
    the connectedness channel away.
    """
    mean_i = float(nc.I.mean())
    return float(math.exp(-(mean_i ** 2) / (2.0 * delta_gamma * delta_gamma)))


@dataclass(frozen=True)
class RegionWeights:
    """Region-level t-link and n-link weights.

    w1[r] = -log T_r is severed when r is labeled background (0);
    w0[r] = -log(1 - T_r) is severed when r is labeled object (1).
    edge_weights maps sorted region pairs of the modified forest (parent
    edges, plus auxiliary edges at exactly lam) to their n-link weight.
    """

    w1: np.ndarray
    w0: np.ndarray
    lam: float
    edge_weights: dict = field(repr=False)

    def __post_init__(self):
        if not (np.isfinite(self.w1).all() and np.isfinite(self.w0).all()):
            raise NumericalError("non-finite t-link weight")
        if (self.w1 < 0).any() or (self.w0 < 0).any():
            raise NumericalError("negative t-link weight")
        if self.lam <= max(self.w1.max(), self.w0.max()):
            raise NumericalError("lambda must dominate every t-link weight")


def region_weights(nc: NcResult, forest: ModifiedForest,
                   delta_nc: float = 0.1, t_clamp: float = 1e-6) -> RegionWeights:
    """Eq.-style weights: clamped logs for t-links, lambda-scaled Gaussian
    closeness in T for parent edges, plain lambda for auxiliary edges."""
    t = np.clip(nc.T, t_clamp, 1.0 - t_clamp)
    w1 = -np.log(t)
    w0 = -np.log(1.0 - t)
    lam = float(max(w1.max(), w0.max()) + 1.0)
    edge_weights = {}
    for r, parent in forest.parent_edges():
        dt = float(nc.T[r] - nc.T[parent])
        key = (r, parent) if r < parent else (parent, r)
        edge_weights[key] = lam * math.exp(-(dt * dt)
                                           / (2.0 * delta_nc * delta_nc))
    for r, ns in forest.aux.items():
        for g in ns:
            if r < g:
                edge_weights[(r, g)] = lam
    return RegionWeights(w1, w0, lam, edge_weights)


def beta_constant(image: RgbImage) -> float:
    """Contrast normalization: 1 / (2 <||x_i - x_j||^2>) over all 8-neighbor
    pairs; 0 for a constant image (the exponent then reads e^0 = 1)."""
    if image.n_pixels < 2:
        raise InvalidInputError("image must have at least 2 pixels")
    px = image.pixels.astype(np.float64)
    total = 0.0
    count = 0
    for dy, dx in NEIGHBOR_OFFSETS:
        a, b = _offset_slices(px, dy, dx)
        diff = a - b
        total += (diff * diff).sum()
        count += diff.shape[0] * diff.shape[1]
    if count == 0 or total == 0.0:
        return 0.0
    return float(1.0 / (2.0 * total / count))


def _offset_slices(arr: np.ndarray, dy: int, dx: int):
    """Aligned (core, shifted) views for a neighbor offset."""
    h, w = arr.shape[:2]
    ys = slice(0, h - dy)
    yd = slice(dy, h)
    if dx >= 0:
        xs = slice(0, w - dx)
        xd = slice(dx, w)
    else:
        xs = slice(-dx, w)
        xd = slice(0, w + dx)
    return arr[ys, xs], arr[yd, xd]


@dataclass(frozen=True)
class FlowNetwork:
    """Grid-structured s-t network.

    source_cap is severed when the pixel ends background (0), sink_cap when
    it ends object (1).  nlinks[(dy, dx)][y, x] couples (y, x) with
    (y + dy, x + dx) symmetrically; entries outside the grid are zero.
    shifts records the per-pixel constant removed from both unary sides.
    """

    source_cap: np.ndarray
    sink_cap: np.ndarray
    nlinks: dict = field(repr=False)
    shifts: np.ndarray = field(repr=False)

    def __post_init__(self):
        for arr in (self.source_cap, self.sink_cap, *self.nlinks.values()):
            if not np.isfinite(arr).all():
                raise NumericalError("non-finite capacity")
            if (arr < 0).any():
                raise NumericalError("negative capacity")

    @property
    def shape(self):
        return self.source_cap.shape

    def total_capacity(self) -> float:
        total = self.source_cap.sum() + self.sink_cap.sum()
        for arr in self.nlinks.values():
            total += 2.0 * arr.sum()
        return float(total)


@dataclass(frozen=True)
class CutResult:
    labeling: np.ndarray          # (H, W) uint8
    cut_value: float


def region_nlink_lookup(rw: RegionWeights, n_regions: int) -> csr_matrix:
    """Sparse symmetric matrix of region n-link weights for bulk lookup."""
    if rw.edge_weights:
        pairs = np.array(list(rw.edge_weights.keys()), dtype=np.int64)
        vals = np.fromiter(rw.edge_weights.values(), dtype=np.float64,
                           count=len(rw.edge_weights))
        rows = np.concatenate([pairs[:, 0], pairs[:, 1]])
        cols = np.concatenate([pairs[:, 1], pairs[:, 0]])
        data = np.concatenate([vals, vals])
    else:
        rows = cols = np.zeros(0, dtype=np.int64)
        data = np.zeros(0)
    return csr_matrix((data, (rows, cols)), shape=(n_regions, n_regions))


def build_network(image: RgbImage, regions: RegionMap, rw: RegionWeights,
                  obj_gmm, bkg_gmm, gamma: float, config: Config = None,
                  constraints: np.ndarray = None) -> FlowNetwork:
    """Assemble unary and pairwise capacities for the combined energy.

    Unaries: cost of labeling pixel i background is
    gamma * w1[R(i)] - log p_bkg(x_i); object likewise with w0 and the
    object model.  Both are shifted per pixel by their minimum so the
    smaller side is exactly zero.  Pairwise: for each 8-neighbor pair,
    eta * (gamma * region_nlink + exp(-beta ||dx||^2) / D).  Pixels under a
    hard constraint get a dominating capacity (twice the total) on the link
    that keeps them on the required side.
    """
    cfg = config if config is not None else Config()
    h, w = image.height, image.width
    if regions.labels.shape != (h, w):
        raise InvalidInputError("regions inconsistent with image")
    colors = image.pixels.reshape(-1, 3).astype(np.float64)

    log_bkg = bkg_gmm.log_density(colors).reshape(h, w)
    log_obj = obj_gmm.log_density(colors).reshape(h, w)
    cost0 = gamma * rw.w1[regions.labels] - log_bkg
    cost1 = gamma * rw.w0[regions.labels] - log_obj
    shifts = np.minimum(cost0, cost1)
    source_cap = cost0 - shifts
    sink_cap = cost1 - shifts

    beta = beta_constant(image)
    lookup = region_nlink_lookup(rw, regions.n_regions)
    px = image.pixels.astype(np.float64)
    nlinks = {}
    for dy, dx in NEIGHBOR_OFFSETS:
        cap = np.zeros((h, w))
        a, b = _offset_slices(px, dy, dx)
        la, lb = _offset_slices(regions.labels, dy, dx)
        dist = math.sqrt(dy * dy + dx * dx)
        contrast = np.exp(-beta * ((a - b) ** 2).sum(axis=2)) / dist
        if la.size:
            region_part = np.asarray(
                lookup[la.ravel(), lb.ravel()]).reshape(la.shape)
            region_part = np.where(la == lb, rw.lam, region_part)
            core, _ = _offset_slices(cap, dy, dx)
            core[...] = cfg.eta * (gamma * region_part + contrast)
        nlinks[(dy, dx)] = cap

    net = FlowNetwork(source_cap, sink_cap, nlinks, shifts)
    if constraints is not None:
        if constraints.shape != (h, w):
            raise InvalidInputError("constraints shape mismatch")
        big = 2.0 * net.total_capacity() + 1.0
        source_cap = source_cap.copy()
        sink_cap = sink_cap.copy()
        source_cap[constraints == 1] = big   # cutting from source forbidden
        sink_cap[constraints == 0] = big     # cutting from sink forbidden
        net = FlowNetwork(source_cap, sink_cap, net.nlinks, shifts)
    return net


def labeling_energy(net: FlowNetwork, labeling: np.ndarray) -> float:
    """Cut metric of an arbitrary labeling on this network: severed unaries
    plus severed n-links.  The solver's cut_value equals this at the argmin."""
    lab = labeling.astype(bool)
    total = float(net.source_cap[~lab].sum() + net.sink_cap[lab].sum())
    for (dy, dx), cap in net.nlinks.items():
        a, b = _offset_slices(lab, dy, dx)
        core, _ = _offset_slices(cap, dy, dx)
        total += float(core[a != b].sum())
    return total


def full_energy(net: FlowNetwork, labeling: np.ndarray) -> float:
    """Unshifted combined energy: the cut metric plus the removed per-pixel
    constants."""
    return labeling_energy(net, labeling) + float(net.shifts.sum())


@njit(cache=True)
def _dinic(n_nodes, source, sink, arc_to, arc_cap, adj_start, adj_arc):
    level = np.empty(n_nodes, dtype=np.int32)
    iters = np.empty(n_nodes, dtype=np.int64)
    queue = np.empty(n_nodes, dtype=np.int64)
    path = np.empty(n_nodes, dtype=np.int64)
    total = 0.0
    while True:
        for i in range(n_nodes):
            level[i] = -1
        level[source] = 0
        qh = 0
        qt = 1
        queue[0] = source
        while qh < qt:
            u = queue[qh]
            qh += 1
            for k in range(adj_start[u], adj_start[u + 1]):
                e = adj_arc[k]
                v = arc_to[e]
                if arc_cap[e] > 0.0 and level[v] < 0:
                    level[v] = level[u] + 1
                    queue[qt] = v
                    qt += 1
        if level[sink] < 0:
            return total
        for i in range(n_nodes):
            iters[i] = adj_start[i]
        depth = 0
        u = source
        while True:
            if u == sink:
                bottleneck = np.inf
                for d in range(depth):
                    e = path[d]
                    if arc_cap[e] < bottleneck:
                        bottleneck = arc_cap[e]
                for d in range(depth):
                    e = path[d]
                    arc_cap[e] -= bottleneck
                    arc_cap[e ^ 1] += bottleneck
                total += bottleneck
                d0 = 0
                while d0 < depth and arc_cap[path[d0]] > 0.0:
                    d0 += 1
                depth = d0
                u = source if depth == 0 else arc_to[path[depth - 1]]
                continue
            advanced = False
            while iters[u] < adj_start[u + 1]:
                e = adj_arc[iters[u]]
                v = arc_to[e]
                if arc_cap[e] > 0.0 and level[v] == level[u] + 1:
                    path[depth] = e
                    depth += 1
                    u = v
                    advanced = True
                    break
                iters[u] += 1
            if not advanced:
                level[u] = -1
                if depth == 0:
                    break
                depth -= 1
                u = source if depth == 0 else arc_to[path[depth - 1]]


@njit(cache=True)
def _source_side(n_nodes, source, arc_to, arc_cap, adj_start, adj_arc):
    seen = np.zeros(n_nodes, dtype=np.uint8)
    queue = np.empty(n_nodes, dtype=np.int64)
    seen[source] = 1
    qh = 0
    qt = 1
    queue[0] = source
    while qh < qt:
        u = queue[qh]
        qh += 1
        for k in range(adj_start[u], adj_start[u + 1]):
            e = adj_arc[k]
            v = arc_to[e]
            if arc_cap[e] > 0.0 and seen[v] == 0:
                seen[v] = 1
                queue[qt] = v
                qt += 1
    return seen


def _assemble_arcs(net: FlowNetwork):
    h, w = net.shape
    n_px = h * w
    source = n_px
    sink = n_px + 1
    idx = np.arange(n_px).reshape(h, w)

    pair_from = [np.full(n_px, source, dtype=np.int64), idx.ravel()]
    pair_to = [idx.ravel(), np.full(n_px, sink, dtype=np.int64)]
    pair_fwd = [net.source_cap.ravel(), net.sink_cap.ravel()]
    pair_bwd = [np.zeros(n_px), np.zeros(n_px)]
    for (dy, dx), cap in net.nlinks.items():
        a, b = _offset_slices(idx, dy, dx)
        core, _ = _offset_slices(cap, dy, dx)
        pair_from.append(a.ravel())
        pair_to.append(b.ravel())
        c = core.ravel().astype(np.float64)
        pair_fwd.append(c)
        pair_bwd.append(c.copy())

    pf = np.concatenate(pair_from)
    pt = np.concatenate(pair_to)
    fwd = np.concatenate(pair_fwd)
    bwd = np.concatenate(pair_bwd)
    m = 2 * len(pf)
    arc_to = np.empty(m, dtype=np.int64)
    arc_cap = np.empty(m, dtype=np.float64)
    origin = np.empty(m, dtype=np.int64)
    arc_to[0::2] = pt
    arc_to[1::2] = pf
    arc_cap[0::2] = fwd
    arc_cap[1::2] = bwd
    origin[0::2] = pf
    origin[1::2] = pt

    order = np.argsort(origin, kind="stable")
    adj_arc = order
    counts = np.bincount(origin, minlength=n_px + 2)
    adj_start = np.zeros(n_px + 3, dtype=np.int64)
    np.cumsum(counts, out=adj_start[1:])
    return n_px + 2, source, sink, arc_to, arc_cap, adj_start, adj_arc


def max_flow_min_cut(net: FlowNetwork) -> CutResult:
    """Globally minimal cut of the network; source side is labeled 1."""
    n_nodes, source, sink, arc_to, arc_cap, adj_start, adj_arc = \
        _assemble_arcs(net)
    flow = _dinic(n_nodes, source, sink, arc_to, arc_cap, adj_start, adj_arc)
    seen = _source_side(n_nodes, source, arc_to, arc_cap, adj_start, adj_arc)
    h, w = net.shape
    labeling = seen[:h * w].reshape(h, w).astype(np.uint8)
    return CutResult(labeling, float(flow))


def warm_up_solver():
    """Trigger JIT compilation on a toy network so later solves run at
    steady-state speed."""
    net = FlowNetwork(np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]]),
                      {(0, 1): np.array([[0.5, 0.0]])}, np.zeros((1, 2)))
    max_flow_min_cut(net)


def dimacs_dump(net: FlowNetwork) -> str:
    """Text dump of the network in DIMACS max-flow layout (1-based node ids,
    fractional capacities kept as decimals) for external cross-checks."""
    n_nodes, source, sink, arc_to, arc_cap, adj_start, adj_arc = \
        _assemble_arcs(net)
    lines = []
    arcs = [(int(u), int(arc_to[e]), float(arc_cap[e]))
            for u in range(n_nodes)
            for e in adj_arc[adj_start[u]:adj_start[u + 1]]
            if arc_cap[e] > 0]
    lines.append(f"p max {n_nodes} {len(arcs)}")
    lines.append(f"n {source + 1} s")
    lines.append(f"n {sink + 1} t")
    for u, v, c in arcs:
        lines.append(f"a {u + 1} {v + 1} {c!r}")
    return "\n".join(lines) + "\n"
