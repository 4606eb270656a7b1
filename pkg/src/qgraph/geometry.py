"""Geometric quantities of metric graphs: length, distances, diameter,
Betti number, inradius, Cheeger-type constants and end-annulus volumes.

Distances between arbitrary graph points are exact (vertex-skeleton shortest
paths plus edge offsets).  The diameter is reported with a certified error
bound: the point-to-point distance is 1-Lipschitz in each argument, so a
grid of spacing ``resolution`` on every edge pair pins the supremum to
within ``resolution``.
"""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from .graph import ConditionAssignment, GraphError, MetricGraph

__all__ = [
    "GraphPoint",
    "GeometryReport",
    "total_length",
    "betti_number",
    "point_distance",
    "diameter",
    "inradius",
    "cheeger_sweep",
    "cheeger_exact_small",
    "annulus_volumes",
    "geometry_report",
    "vertex_distance_matrix",
    "distances_from_vertices",
]


@dataclass(frozen=True)
class GraphPoint:
    """A point on a metric graph: an edge id and an offset from its first endpoint."""

    edge: str
    offset: float


def total_length(g: MetricGraph) -> float:
    return math.fsum(e.length for e in g.edges)


def betti_number(g: MetricGraph) -> int:
    # connectivity is a MetricGraph invariant
    return len(g.edges) - len(g.vertices) + 1


_index_cache: "weakref.WeakKeyDictionary[MetricGraph, dict]" = weakref.WeakKeyDictionary()


def _vertex_index(g: MetricGraph) -> dict:
    idx = _index_cache.get(g)
    if idx is None:
        idx = {v: i for i, v in enumerate(g.vertices)}
        _index_cache[g] = idx
    return idx


_matrix_cache: "weakref.WeakKeyDictionary[MetricGraph, np.ndarray]" = weakref.WeakKeyDictionary()


def _skeleton(g: MetricGraph):
    """Sparse vertex-adjacency matrix with minimal parallel-edge weights."""
    idx = _vertex_index(g)
    n = len(g.vertices)
    best: dict[tuple[int, int], float] = {}
    for e in g.edges:
        iu, iv = idx[e.u], idx[e.v]
        if iu == iv:
            continue  # loops never shorten vertex paths
        key = (min(iu, iv), max(iu, iv))
        if e.length < best.get(key, math.inf):
            best[key] = e.length
    if best:
        rows = [k[0] for k in best]
        cols = [k[1] for k in best]
        vals = list(best.values())
        mat = coo_matrix((vals + vals, (rows + cols, cols + rows)), shape=(n, n))
    else:
        mat = coo_matrix((n, n))
    return mat.tocsr()


def vertex_distance_matrix(g: MetricGraph) -> np.ndarray:
    """All-pairs shortest-path distances between vertices (cached per graph)."""
    mat = _matrix_cache.get(g)
    if mat is None:
        mat = dijkstra(_skeleton(g), directed=False)
        mat.setflags(write=False)
        _matrix_cache[g] = mat
    return mat


def distances_from_vertices(g: MetricGraph, sources: Iterable[str]) -> np.ndarray:
    """Multi-source shortest-path distance from ``sources`` to every vertex."""
    idx = _vertex_index(g)
    src = [idx[v] for v in sources]
    if not src:
        raise GraphError("need at least one source vertex")
    d = dijkstra(_skeleton(g), directed=False, indices=src, min_only=True)
    return d


def _point_vertex_offsets(g: MetricGraph, p: GraphPoint):
    e = g.edge(p.edge)
    if not (0.0 <= p.offset <= e.length):
        raise GraphError(f"offset {p.offset} outside [0, {e.length}] on edge {p.edge!r}")
    idx = _vertex_index(g)
    return ((idx[e.u], p.offset), (idx[e.v], e.length - p.offset))


def point_distance(g: MetricGraph, p: GraphPoint, q: GraphPoint) -> float:
    """Exact shortest-path distance between two graph points."""
    if (q.edge, q.offset) < (p.edge, p.offset):
        p, q = q, p  # canonical order makes the metric exactly symmetric
    dmat = vertex_distance_matrix(g)
    cands = []
    if p.edge == q.edge:
        cands.append(abs(p.offset - q.offset))
    for a, off_a in _point_vertex_offsets(g, p):
        for b, off_b in _point_vertex_offsets(g, q):
            cands.append(off_a + dmat[a, b] + off_b)
    return min(cands)


def diameter(g: MetricGraph, resolution: float = 1e-3) -> tuple[float, float]:
    """Supremum of pairwise distances, as ``(value, error)`` with the true
    diameter in ``[value, value + error]`` and ``error <= resolution``.
    """
    if resolution <= 0:
        raise GraphError("resolution must be positive")
    dmat = vertex_distance_matrix(g)
    idx = _vertex_index(g)
    best = float(dmat.max()) if dmat.size else 0.0

    grids = {}
    for e in g.edges:
        m = max(1, int(math.ceil(e.length / resolution)))
        grids[e.id] = np.linspace(0.0, e.length, m + 1)

    edges = list(g.edges)
    for i, e in enumerate(edges):
        iu, iv = idx[e.u], idx[e.v]
        te = grids[e.id]
        ofs_e = (te, e.length - te)
        for f in edges[i:]:
            ju, jv = idx[f.u], idx[f.v]
            # cheapest vertex-to-vertex hop between the two edges
            hop = min(dmat[iu, ju], dmat[iu, jv], dmat[iv, ju], dmat[iv, jv])
            if hop + e.length + f.length <= best:
                continue  # cannot beat the current lower bound
            tf = grids[f.id]
            ofs_f = (tf, f.length - tf)
            pairwise = None
            for (a, oa) in ((iu, ofs_e[0]), (iv, ofs_e[1])):
                for (b, ob) in ((ju, ofs_f[0]), (jv, ofs_f[1])):
                    cand = oa[:, None] + (dmat[a, b] + ob[None, :])
                    pairwise = cand if pairwise is None else np.minimum(pairwise, cand)
            if f.id == e.id:
                direct = np.abs(te[:, None] - te[None, :])
                pairwise = np.minimum(pairwise, direct)
            m = float(pairwise.max())
            if m > best:
                best = m
    return best, resolution


def inradius(g: MetricGraph, cond: ConditionAssignment) -> float:
    """Largest distance from any graph point to the Dirichlet set (exact)."""
    dirichlet = cond.effective_dirichlet()
    if not dirichlet:
        raise GraphError("inradius needs a nonempty Dirichlet set")
    d = distances_from_vertices(g, dirichlet)
    idx = _vertex_index(g)
    best = 0.0
    for e in g.edges:
        du, dv = d[idx[e.u]], d[idx[e.v]]
        if abs(du - dv) <= e.length:
            cand = 0.5 * (du + dv + e.length)
        else:  # unreachable for exact shortest-path data; kept for safety
            cand = max(du, dv)
        best = max(best, cand)
    return best


def cheeger_sweep(g: MetricGraph, f) -> float:
    """Upper bound for the Cheeger constant from the level sets of ``f``.

    Exact over the sweep class: within each slab of levels between
    consecutive node values of the piecewise-linear ``f``, the crossing
    count is constant and the sublevel measure is linear, so the best ratio
    in the slab is found in closed form.
    """
    lo, hi = f.min_value, f.max_value
    if hi - lo <= 0:
        raise GraphError("cheeger sweep needs a nonconstant function")
    L = total_length(g)
    crit = np.unique(f.node_values())
    best = math.inf
    for t0, t1 in zip(crit[:-1], crit[1:]):
        if t1 - t0 <= 0:
            continue
        tm = 0.5 * (t0 + t1)
        n_cross = f.crossing_count(tm)
        if n_cross == 0:
            continue
        # sublevel measure is linear in t on the open slab: interpolate it
        ta, tb = t0 + 0.25 * (t1 - t0), t0 + 0.75 * (t1 - t0)
        ma, mb = f.sublevel_measure(ta), f.sublevel_measure(tb)
        slope = (mb - ma) / (tb - ta)
        m0 = ma + (t0 - ta) * slope
        m1 = ma + (t1 - ta) * slope
        cands = [min(m0, L - m0), min(m1, L - m1)]
        if min(m0, m1) < 0.5 * L < max(m0, m1):
            cands.append(0.5 * L)
        denom = max(cands)
        if denom > 0:
            best = min(best, n_cross / denom)
    if not math.isfinite(best):
        raise GraphError("no admissible sweep level found")
    return best


def _exact_components(g: MetricGraph, cut_vertices: frozenset, cut_edges: tuple):
    """Connected pieces after removing the cut points; cut edges split in two."""
    piece_of: dict = {}
    pieces = []
    for e in g.edges:
        if e.id in cut_edges:
            piece_of[(e.id, 0)] = len(pieces)
            pieces.append(("half", e.id, 0))
            piece_of[(e.id, 1)] = len(pieces)
            pieces.append(("half", e.id, 1))
        else:
            piece_of[(e.id, 0)] = piece_of[(e.id, 1)] = len(pieces)
            pieces.append(("edge", e.id, None))

    parent = list(range(len(pieces)))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb

    for v in g.vertices:
        if v in cut_vertices:
            continue
        ends = g.edge_ends_at(v)
        if len(ends) < 2:
            continue
        first = piece_of[ends[0]]
        for end in ends[1:]:
            union(first, piece_of[end])
    comp_of = {}
    for i in range(len(pieces)):
        comp_of[i] = find(i)
    return pieces, piece_of, comp_of


def cheeger_exact_small(g: MetricGraph, max_cut_points: int = 2, budget: int = 200000) -> float:
    """Exact Cheeger infimum within the class of at most ``max_cut_points``
    cut points (vertices, plus at most one interior point per chosen edge).

    For every combinatorial choice the optimal interior positions follow in
    closed form because part volumes are linear in them.
    """
    from itertools import combinations

    L = total_length(g)
    vs, es = list(g.vertices), [e.id for e in g.edges]
    elen = {e.id: e.length for e in g.edges}
    best = math.inf
    count = 0
    for n_points in range(1, max_cut_points + 1):
        for nv in range(0, n_points + 1):
            ne = n_points - nv
            if ne > len(es) or nv > len(vs):
                continue
            for cut_v in combinations(vs, nv):
                for cut_e in combinations(es, ne):
                    count += 1
                    if count > budget:
                        raise GraphError("cut enumeration budget exceeded")
                    r = _best_ratio_for_cut(g, frozenset(cut_v), cut_e, elen, L)
                    if r < best:
                        best = r
    if not math.isfinite(best):
        raise GraphError("no admissible cut found within the point budget")
    return best


def _best_ratio_for_cut(g, cut_v, cut_e, elen, L):
    pieces, piece_of, comp_of = _exact_components(g, cut_v, cut_e)
    comp_ids = sorted(set(comp_of.values()))
    if len(comp_ids) < 2 and not cut_e:
        return math.inf
    comp_index = {c: i for i, c in enumerate(comp_ids)}
    k = len(comp_ids)

    base = [0.0] * k
    half_pairs = []  # (comp of u-half, comp of v-half, edge length)
    for i, (kind, eid, side) in enumerate(pieces):
        c = comp_index[comp_of[i]]
        if kind == "edge":
            base[c] += elen[eid]
    for eid in cut_e:
        cu = comp_index[comp_of[piece_of[(eid, 0)]]]
        cv = comp_index[comp_of[piece_of[(eid, 1)]]]
        half_pairs.append((cu, cv, elen[eid]))

    # adjacency of cut points to components
    idx_adj = []
    for v in cut_v:
        adj = set()
        for end in g.edge_ends_at(v):
            adj.add(comp_index[comp_of[piece_of[end]]])
        idx_adj.append(adj)
    for eid in cut_e:
        idx_adj.append(
            {
                comp_index[comp_of[piece_of[(eid, 0)]]],
                comp_index[comp_of[piece_of[(eid, 1)]]],
            }
        )

    best = math.inf
    for mask in range(1, 2**k - (0 if half_pairs else 1)):
        side = [(mask >> i) & 1 for i in range(k)]
        lo = hi = sum(b for b, s in zip(base, side) if s)
        for cu, cv, ell in half_pairs:
            if side[cu] and side[cv]:
                lo += ell
                hi += ell
            elif side[cu] or side[cv]:
                hi += ell  # interior position sweeps the contribution over (0, ell)
        boundary = sum(1 for adj in idx_adj if any(side[c] for c in adj))
        if boundary == 0:
            continue
        target = min(max(0.5 * L, lo), hi)
        denom = min(target, L - target)
        if denom <= 1e-15:
            continue
        best = min(best, boundary / denom)
    return best


def annulus_volumes(
    g: MetricGraph, end_vertex: str, radii: Sequence[float]
) -> list[float]:
    """Lebesgue measure of the annuli ``r_{k+1} <= dist(x, end) <= r_k``.

    ``radii`` must be decreasing; radii beyond the eccentricity of the end
    vertex simply clip (the corresponding annuli lose volume).
    """
    r = list(radii)
    if any(b >= a for a, b in zip(r[:-1], r[1:])):
        raise GraphError("radii must be strictly decreasing")
    d = distances_from_vertices(g, [end_vertex])
    idx = _vertex_index(g)

    def ball_volume(c: float) -> float:
        tot = 0.0
        for e in g.edges:
            du, dv = d[idx[e.u]], d[idx[e.v]]
            peak_pos = 0.5 * (dv + e.length - du)
            peak_pos = min(max(peak_pos, 0.0), e.length)
            tot += min(max(c - du, 0.0), peak_pos)
            tot += min(max(c - dv, 0.0), e.length - peak_pos)
        return tot

    return [ball_volume(a) - ball_volume(b) for a, b in zip(r[:-1], r[1:])]


@dataclass(frozen=True)
class GeometryReport:
    total_length: float
    diameter: float
    diameter_error: float
    betti: int
    inradius: float | None
    cheeger_sweep: float | None = None
    cheeger_exact_small: float | None = None


def geometry_report(
    g: MetricGraph,
    cond: ConditionAssignment | None = None,
    resolution: float = 1e-3,
    eigenfunction=None,
    max_cut_points: int | None = None,
) -> GeometryReport:
    cond = cond or ConditionAssignment()
    d, err = diameter(g, resolution)
    inr = inradius(g, cond) if cond.effective_dirichlet() else None
    sweep = cheeger_sweep(g, eigenfunction) if eigenfunction is not None else None
    exact = (
        cheeger_exact_small(g, max_cut_points) if max_cut_points is not None else None
    )
    return GeometryReport(
        total_length=total_length(g),
        diameter=d,
        diameter_error=err,
        betti=betti_number(g),
        inradius=inr,
        cheeger_sweep=sweep,
        cheeger_exact_small=exact,
    )
