"""Immutable metric-graph data model, JSON (de)serialization and surgery.

A metric graph is a finite collection of intervals ("edges", each with a
strictly positive length) glued at vertices.  Loops and parallel edges are
allowed; loops count twice towards the degree.  All graphs handled here are
connected; infinite families enter only through truncations whose boundary
vertices carry an *end tag* recording the condition imposed where the rest
of the family was cut off.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

__all__ = [
    "GraphError",
    "CutDisconnectsError",
    "EdgeRecord",
    "MetricGraph",
    "ConditionAssignment",
    "build_from_json",
    "to_json",
    "insert_dummy",
    "remove_dummy",
    "cut_vertex",
    "cut_vertex_parts",
    "attach_pendant",
    "glue_vertices",
]

END_TAGS = ("neumann", "dirichlet")


class GraphError(ValueError):
    """Invalid graph construction or operation."""


class CutDisconnectsError(GraphError):
    """A vertex cut produced a disconnected graph where one was required."""


@dataclass(frozen=True)
class EdgeRecord:
    """One metric edge: endpoints ``u``/``v`` joined by an interval of ``length``."""

    id: str
    u: str
    v: str
    length: float

    def other(self, vertex: str) -> str:
        if vertex == self.u:
            return self.v
        if vertex == self.v:
            return self.u
        raise GraphError(f"vertex {vertex!r} is not an endpoint of edge {self.id!r}")

    @property
    def is_loop(self) -> bool:
        return self.u == self.v


class MetricGraph:
    """Connected metric graph on a finite edge set.  Immutable after construction.

    The adjacency index maps each vertex to the ids of its incident edges,
    with loops listed twice, so ``len(adjacency[v])`` is the degree.
    """

    __slots__ = ("_vertices", "_edges", "_edge_by_id", "_adjacency", "__weakref__")

    def __init__(self, vertices: Iterable[str], edges: Iterable[EdgeRecord | tuple]):
        vlist = list(vertices)
        vset = frozenset(vlist)
        if len(vlist) != len(vset):
            raise GraphError("duplicate vertex ids")
        if not vset:
            raise GraphError("graph needs at least one vertex")

        recs = []
        for e in edges:
            rec = e if isinstance(e, EdgeRecord) else EdgeRecord(*e)
            if not (math.isfinite(rec.length) and rec.length > 0.0):
                raise GraphError(f"edge {rec.id!r}: nonpositive or non-finite length {rec.length}")
            if rec.u not in vset or rec.v not in vset:
                raise GraphError(f"edge {rec.id!r}: dangling vertex reference")
            recs.append(rec)
        ids = [r.id for r in recs]
        if len(ids) != len(set(ids)):
            raise GraphError("duplicate edge ids")

        adjacency: dict[str, list[str]] = {v: [] for v in vlist}
        for rec in recs:
            adjacency[rec.u].append(rec.id)
            adjacency[rec.v].append(rec.id)

        object.__setattr__(self, "_vertices", tuple(vlist))
        object.__setattr__(self, "_edges", tuple(recs))
        object.__setattr__(self, "_edge_by_id", {r.id: r for r in recs})
        object.__setattr__(self, "_adjacency", {v: tuple(a) for v, a in adjacency.items()})

        if not self._is_connected():
            raise GraphError("graph is not connected")

    def __setattr__(self, name, value):
        raise AttributeError("MetricGraph is immutable")

    def _is_connected(self) -> bool:
        start = self._vertices[0]
        seen = {start}
        queue = deque([start])
        while queue:
            v = queue.popleft()
            for eid in self._adjacency[v]:
                w = self._edge_by_id[eid].other(v)
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
        return len(seen) == len(self._vertices)

    @property
    def vertices(self) -> tuple[str, ...]:
        return self._vertices

    @property
    def edges(self) -> tuple[EdgeRecord, ...]:
        return self._edges

    @property
    def adjacency(self) -> Mapping[str, tuple[str, ...]]:
        return self._adjacency

    def edge(self, edge_id: str) -> EdgeRecord:
        try:
            return self._edge_by_id[edge_id]
        except KeyError:
            raise GraphError(f"unknown edge id {edge_id!r}") from None

    def has_vertex(self, v: str) -> bool:
        return v in self._adjacency

    def degree(self, v: str) -> int:
        if v not in self._adjacency:
            raise GraphError(f"unknown vertex id {v!r}")
        return len(self._adjacency[v])

    def edge_ends_at(self, v: str) -> tuple[tuple[str, int], ...]:
        """Edge ends incident to ``v`` as (edge id, end) pairs, end 0 = first endpoint."""
        ends = []
        seen = set()
        for eid in self._adjacency[v]:
            if eid in seen:
                continue
            seen.add(eid)
            rec = self._edge_by_id[eid]
            if rec.u == v:
                ends.append((eid, 0))
            if rec.v == v:
                ends.append((eid, 1))
        return tuple(ends)

    def __repr__(self) -> str:
        return f"MetricGraph(|V|={len(self._vertices)}, |E|={len(self._edges)})"


class ConditionAssignment:
    """Vertex conditions: a Dirichlet set plus end tags on truncation boundaries.

    Vertices in ``dirichlet`` (and vertices end-tagged ``"dirichlet"``) carry a
    zero condition; everything else is standard (continuity + Kirchhoff).
    A ``"neumann"`` end tag is purely informational for the variational
    Laplacians used here: the Kirchhoff condition at a free vertex already is
    the natural (Neumann) one.
    """

    __slots__ = ("_dirichlet", "_end_tags")

    def __init__(self, dirichlet: Iterable[str] = (), end_tags: Mapping[str, str] | None = None):
        tags = dict(end_tags or {})
        for v, tag in tags.items():
            if tag not in END_TAGS:
                raise GraphError(f"unknown end tag {tag!r} at vertex {v!r}")
        dset = frozenset(dirichlet)
        for v in dset:
            if tags.get(v) == "neumann":
                raise GraphError(f"vertex {v!r} is both dirichlet and neumann-end-tagged")
        object.__setattr__(self, "_dirichlet", dset)
        object.__setattr__(self, "_end_tags", tags)

    def __setattr__(self, name, value):
        raise AttributeError("ConditionAssignment is immutable")

    @property
    def dirichlet(self) -> frozenset:
        return self._dirichlet

    @property
    def end_tags(self) -> Mapping[str, str]:
        return dict(self._end_tags)

    def validate(self, g: MetricGraph) -> None:
        for v in self._dirichlet:
            if not g.has_vertex(v):
                raise GraphError(f"dirichlet vertex {v!r} not in graph")
        for v in self._end_tags:
            if not g.has_vertex(v):
                raise GraphError(f"end-tagged vertex {v!r} not in graph")

    def effective_dirichlet(self) -> frozenset:
        """Dirichlet set including dirichlet-tagged truncation ends."""
        return self._dirichlet | {v for v, t in self._end_tags.items() if t == "dirichlet"}

    def with_dirichlet(self, extra: Iterable[str]) -> "ConditionAssignment":
        return ConditionAssignment(self._dirichlet | set(extra), self._end_tags)

    def neumann_variant(self) -> "ConditionAssignment":
        """All-standard conditions (the Neumann extension of the same graph)."""
        return ConditionAssignment((), {v: "neumann" for v in self._end_tags})

    def __eq__(self, other):
        return (
            isinstance(other, ConditionAssignment)
            and self._dirichlet == other._dirichlet
            and self._end_tags == other._end_tags
        )

    def __repr__(self) -> str:
        return f"ConditionAssignment(dirichlet={sorted(self._dirichlet)}, end_tags={self._end_tags})"


def build_from_json(document: str | Mapping) -> tuple[MetricGraph, ConditionAssignment]:
    """Parse the graph JSON schema into a validated graph and its conditions.

    Schema::

        {"vertices": [{"id": "v0", "condition": "standard"|"dirichlet",
                       "end": null|"neumann"|"dirichlet"}],
         "edges":    [{"id": "e0", "endpoints": ["v0", "v1"], "length": 1.0}]}
    """
    doc = json.loads(document) if isinstance(document, str) else document
    try:
        vspecs = doc["vertices"]
        especs = doc["edges"]
    except (KeyError, TypeError) as exc:
        raise GraphError(f"malformed graph document: {exc}") from exc

    vertices, dirichlet, end_tags = [], set(), {}
    for spec in vspecs:
        vid = spec["id"]
        vertices.append(vid)
        cond = spec.get("condition", "standard")
        if cond == "dirichlet":
            dirichlet.add(vid)
        elif cond != "standard":
            raise GraphError(f"vertex {vid!r}: unknown condition {cond!r}")
        end = spec.get("end")
        if end is not None:
            end_tags[vid] = end

    edges = []
    for spec in especs:
        u, v = spec["endpoints"]
        edges.append(EdgeRecord(spec["id"], u, v, float(spec["length"])))

    g = MetricGraph(vertices, edges)
    cond = ConditionAssignment(dirichlet, end_tags)
    cond.validate(g)
    return g, cond


def to_json(g: MetricGraph, cond: ConditionAssignment | None = None) -> dict:
    """Serialize back to the graph JSON schema (inverse of :func:`build_from_json`)."""
    cond = cond or ConditionAssignment()
    tags = cond.end_tags
    return {
        "vertices": [
            {
                "id": v,
                "condition": "dirichlet" if v in cond.dirichlet else "standard",
                "end": tags.get(v),
            }
            for v in g.vertices
        ],
        "edges": [
            {"id": e.id, "endpoints": [e.u, e.v], "length": e.length} for e in g.edges
        ],
    }


def _fresh_id(base: str, taken) -> str:
    if base not in taken:
        return base
    i = 1
    while f"{base}{i}" in taken:
        i += 1
    return f"{base}{i}"


def insert_dummy(g: MetricGraph, edge_id: str, position: float) -> MetricGraph:
    """Split an edge at an interior position by a new degree-2 standard vertex.

    Total length is unchanged; splitting a loop yields two parallel edges.
    """
    rec = g.edge(edge_id)
    if not (0.0 < position < rec.length):
        raise GraphError(
            f"split position {position} outside (0, {rec.length}) on edge {edge_id!r}"
        )
    vnew = _fresh_id(f"{edge_id}+", set(g.vertices))
    taken = {e.id for e in g.edges}
    left = _fresh_id(f"{edge_id}a", taken)
    right = _fresh_id(f"{edge_id}b", taken | {left})
    edges = [e for e in g.edges if e.id != edge_id]
    edges.append(EdgeRecord(left, rec.u, vnew, position))
    edges.append(EdgeRecord(right, vnew, rec.v, rec.length - position))
    return MetricGraph(list(g.vertices) + [vnew], edges)


def remove_dummy(g: MetricGraph, v: str) -> MetricGraph:
    """Eliminate a degree-2 vertex, merging its two edges into one."""
    ends = g.edge_ends_at(v)
    if g.degree(v) != 2 or len(ends) != 2 or ends[0][0] == ends[1][0]:
        raise GraphError(f"vertex {v!r} is not a removable dummy (need two distinct edges)")
    (e1, end1), (e2, end2) = ends
    r1, r2 = g.edge(e1), g.edge(e2)
    a = r1.v if end1 == 0 else r1.u
    b = r2.v if end2 == 0 else r2.u
    merged = EdgeRecord(e1, a, b, r1.length + r2.length)
    edges = [e for e in g.edges if e.id not in (e1, e2)]
    edges.append(merged)
    return MetricGraph([w for w in g.vertices if w != v], edges)


def _apply_cut(g: MetricGraph, v: str, partition: Sequence[Sequence[tuple[str, int]]]):
    all_ends = g.edge_ends_at(v)
    blocks = [tuple(b) for b in partition]
    if len(blocks) < 2 or any(not b for b in blocks):
        raise GraphError("cut partition needs at least two nonempty blocks")
    flat = [end for b in blocks for end in b]
    if sorted(flat) != sorted(all_ends):
        raise GraphError(f"cut partition must cover the edge ends at {v!r} exactly")

    taken = set(g.vertices)
    new_names = []
    for i in range(len(blocks)):
        name = _fresh_id(f"{v}#{i}", taken)
        taken.add(name)
        new_names.append(name)
    end_to_name = {}
    for name, block in zip(new_names, blocks):
        for end in block:
            end_to_name[end] = name

    edges = []
    for e in g.edges:
        u, w = e.u, e.v
        if (e.id, 0) in end_to_name:
            u = end_to_name[(e.id, 0)]
        if (e.id, 1) in end_to_name:
            w = end_to_name[(e.id, 1)]
        edges.append(EdgeRecord(e.id, u, w, e.length))
    vertices = [w for w in g.vertices if w != v] + new_names
    return vertices, edges


def _components(vertices, edges):
    adj: dict[str, list[str]] = {v: [] for v in vertices}
    for e in edges:
        adj[e.u].append(e.v)
        adj[e.v].append(e.u)
    seen, comps = set(), []
    for start in vertices:
        if start in seen:
            continue
        comp = {start}
        queue = deque([start])
        seen.add(start)
        while queue:
            x = queue.popleft()
            for y in adj[x]:
                if y not in seen:
                    seen.add(y)
                    comp.add(y)
                    queue.append(y)
        comps.append(comp)
    return comps


def cut_vertex(g: MetricGraph, v: str, partition: Sequence[Sequence[tuple[str, int]]]) -> MetricGraph:
    """Cut through a vertex, separating its edge ends into one new vertex per block.

    Lengths are unchanged; if the result stays connected the Betti number
    drops by ``len(partition) - 1``.  Raises :class:`CutDisconnectsError`
    when the cut disconnects the graph; use :func:`cut_vertex_parts` to get
    the components in that case.
    """
    vertices, edges = _apply_cut(g, v, partition)
    comps = _components(vertices, edges)
    if len(comps) > 1:
        raise CutDisconnectsError(
            f"cutting {v!r} disconnects the graph into {len(comps)} components"
        )
    return MetricGraph(vertices, edges)


def cut_vertex_parts(
    g: MetricGraph, v: str, partition: Sequence[Sequence[tuple[str, int]]]
) -> tuple[MetricGraph, ...]:
    """Like :func:`cut_vertex` but returns the connected components of the result."""
    vertices, edges = _apply_cut(g, v, partition)
    comps = _components(vertices, edges)
    parts = []
    for comp in comps:
        comp_edges = [e for e in edges if e.u in comp]
        parts.append(MetricGraph([w for w in vertices if w in comp], comp_edges))
    return tuple(parts)


def attach_pendant(g: MetricGraph, v: str, t: MetricGraph, root: str, prefix: str = "p:") -> MetricGraph:
    """Glue a tree ``t`` to ``g`` by identifying the tree's ``root`` with ``v``.

    Total length adds, the Betti number is unchanged.  Tree ids are prefixed
    to avoid collisions.
    """
    if not g.has_vertex(v):
        raise GraphError(f"unknown vertex id {v!r}")
    if not t.has_vertex(root):
        raise GraphError(f"unknown root id {root!r} in pendant")
    if len(t.edges) - len(t.vertices) + 1 != 0:
        raise GraphError("pendant is not a tree (it contains a cycle)")

    def ren(w: str) -> str:
        return v if w == root else f"{prefix}{w}"

    vertices = list(g.vertices) + [ren(w) for w in t.vertices if w != root]
    edges = list(g.edges) + [
        EdgeRecord(f"{prefix}{e.id}", ren(e.u), ren(e.v), e.length) for e in t.edges
    ]
    return MetricGraph(vertices, edges)


def glue_vertices(g: MetricGraph, v: str, w: str) -> MetricGraph:
    """Identify two vertices.  Betti number grows by one (v, w were connected)."""
    if v == w:
        raise GraphError("cannot glue a vertex to itself")
    if not g.has_vertex(v) or not g.has_vertex(w):
        raise GraphError(f"unknown vertex id in glue: {v!r}, {w!r}")
    edges = [
        EdgeRecord(e.id, v if e.u == w else e.u, v if e.v == w else e.v, e.length)
        for e in g.edges
    ]
    return MetricGraph([x for x in g.vertices if x != w], edges)
