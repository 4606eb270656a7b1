"""Canonical metric-graph families and their parametric builders.

Supported families: ``interval``, ``star``, ``loop``, ``necklace`` (a chain
of two-edge pumpkins), ``diagonal_comb`` (shaft (0,1] with a pendant tooth of
length n^(-alpha) at every shaft point n^(-alpha)), ``geometric_tree``,
``lasso``, and ``random_compact`` (seeded random instances for harness pools).

Builders compute family lengths in closed form, never by accumulation, and
``random_compact`` output is fully determined by its seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .graph import ConditionAssignment, EdgeRecord, GraphError, MetricGraph

__all__ = ["FamilySpec", "make_family", "family_length", "comb_core_edges"]

FAMILIES = (
    "interval",
    "star",
    "loop",
    "necklace",
    "diagonal_comb",
    "geometric_tree",
    "lasso",
    "random_compact",
)


@dataclass(frozen=True)
class FamilySpec:
    """Parametric description of a graph family instance.

    Only the parameters relevant to ``family`` are read; see the builder
    functions for which those are.  ``end_condition`` is the tag applied to
    truncation-boundary vertices of infinite families.
    """

    family: str
    length: float = 1.0
    arms: int = 3
    arm_length: float = 1.0
    pumpkins: int = 2
    edge_length: float | None = None
    alpha: float = 0.5
    teeth: int = 10
    branching: int = 2
    ratio: float = 0.5
    generations: int = 3
    vertices: int = 4
    beta: int = 0
    length_range: tuple[float, float] = (0.3, 2.0)
    seed: int | None = None
    end_condition: str = "neumann"
    extra: Mapping = field(default_factory=dict)

    @classmethod
    def from_json(cls, document: str | Mapping) -> "FamilySpec":
        doc = json.loads(document) if isinstance(document, str) else dict(document)
        if "family" not in doc:
            raise GraphError("family spec needs a 'family' key")
        known = {f.name for f in cls.__dataclass_fields__.values()} - {"extra"}
        kwargs = {k: v for k, v in doc.items() if k in known}
        if "length_range" in kwargs:
            kwargs["length_range"] = tuple(kwargs["length_range"])
        extra = {k: v for k, v in doc.items() if k not in known}
        return cls(extra=extra, **kwargs)


def make_family(spec: FamilySpec | Mapping | str) -> tuple[MetricGraph, ConditionAssignment]:
    """Build the graph and condition assignment described by ``spec``."""
    if not isinstance(spec, FamilySpec):
        spec = FamilySpec.from_json(spec)
    try:
        builder = _BUILDERS[spec.family]
    except KeyError:
        raise GraphError(f"unsupported family {spec.family!r}") from None
    return builder(spec)


def family_length(spec: FamilySpec | Mapping | str) -> float:
    """Closed-form total length of the family instance (no accumulation drift)."""
    if not isinstance(spec, FamilySpec):
        spec = FamilySpec.from_json(spec)
    f = spec.family
    if f == "interval":
        return spec.length
    if f == "loop":
        return spec.length
    if f == "star":
        return spec.arms * spec.arm_length
    if f == "necklace":
        return 2 * spec.pumpkins * _necklace_edge_length(spec)
    if f == "diagonal_comb":
        n = np.arange(1, spec.teeth + 1, dtype=float)
        return float(1.0 - spec.teeth ** -spec.alpha + math.fsum(n**-spec.alpha))
    if f == "geometric_tree":
        b, q = spec.branching, spec.ratio
        return float(math.fsum((b * q) ** g for g in range(1, spec.generations + 1)))
    if f == "lasso":
        return spec.length + spec.arm_length
    raise GraphError(f"no closed-form length for family {spec.family!r}")


def _necklace_edge_length(spec: FamilySpec) -> float:
    if spec.edge_length is not None:
        return spec.edge_length
    return spec.length / (2 * spec.pumpkins)


def _interval(spec):
    if spec.length <= 0:
        raise GraphError("interval length must be positive")
    g = MetricGraph(["v0", "v1"], [EdgeRecord("e0", "v0", "v1", spec.length)])
    return g, ConditionAssignment()


def _loop(spec):
    if spec.length <= 0:
        raise GraphError("loop length must be positive")
    g = MetricGraph(["v0"], [EdgeRecord("e0", "v0", "v0", spec.length)])
    return g, ConditionAssignment()


def _star(spec):
    if spec.arms < 2:
        raise GraphError("star needs at least two arms")
    if spec.arm_length <= 0:
        raise GraphError("arm length must be positive")
    vertices = ["c"] + [f"a{i}" for i in range(1, spec.arms + 1)]
    edges = [
        EdgeRecord(f"e{i}", "c", f"a{i}", spec.arm_length) for i in range(1, spec.arms + 1)
    ]
    return MetricGraph(vertices, edges), ConditionAssignment()


def _necklace(spec):
    m = spec.pumpkins
    if m < 1:
        raise GraphError("necklace needs at least one pumpkin")
    ell = _necklace_edge_length(spec)
    if ell <= 0:
        raise GraphError("necklace edge length must be positive")
    vertices = [f"j{i}" for i in range(m + 1)]
    edges = []
    for i in range(1, m + 1):
        edges.append(EdgeRecord(f"p{i}a", f"j{i-1}", f"j{i}", ell))
        edges.append(EdgeRecord(f"p{i}b", f"j{i-1}", f"j{i}", ell))
    return MetricGraph(vertices, edges), ConditionAssignment()


def _diagonal_comb(spec):
    n = spec.teeth
    if spec.alpha <= 0:
        raise GraphError("comb exponent alpha must be positive")
    if n < 1:
        raise GraphError("comb needs at least one tooth")
    pos = np.arange(1, n + 1, dtype=float) ** -spec.alpha
    vertices = [f"x{i}" for i in range(1, n + 1)] + [f"y{i}" for i in range(1, n + 1)]
    edges = []
    for i in range(1, n):
        edges.append(EdgeRecord(f"s{i}", f"x{i}", f"x{i+1}", float(pos[i - 1] - pos[i])))
    for i in range(1, n + 1):
        edges.append(EdgeRecord(f"t{i}", f"x{i}", f"y{i}", float(pos[i - 1])))
    g = MetricGraph(vertices, edges)
    return g, ConditionAssignment((), {f"x{n}": spec.end_condition})


def comb_core_edges(m: int) -> frozenset:
    """Edge ids of the comb core holding the first ``m`` teeth (and their shaft)."""
    if m < 1:
        raise GraphError("core needs at least one tooth")
    return frozenset([f"t{i}" for i in range(1, m + 1)] + [f"s{i}" for i in range(1, m)])


def _geometric_tree(spec):
    b, q, gens = spec.branching, spec.ratio, spec.generations
    if b < 1 or gens < 1 or q <= 0:
        raise GraphError("geometric tree needs branching >= 1, generations >= 1, ratio > 0")
    vertices = ["n"]
    edges = []
    frontier = ["n"]
    for g in range(1, gens + 1):
        nxt = []
        for parent in frontier:
            for i in range(b):
                child = f"{parent}.{i}"
                edges.append(EdgeRecord(f"e{child}", parent, child, q**g))
                nxt.append(child)
        vertices.extend(nxt)
        frontier = nxt
    graph = MetricGraph(vertices, edges)
    tags = {leaf: spec.end_condition for leaf in frontier}
    return graph, ConditionAssignment((), tags)


def _lasso(spec):
    if spec.length <= 0 or spec.arm_length <= 0:
        raise GraphError("lasso needs positive loop and stick lengths")
    g = MetricGraph(
        ["v0", "v1"],
        [EdgeRecord("loop", "v0", "v0", spec.length), EdgeRecord("stick", "v0", "v1", spec.arm_length)],
    )
    return g, ConditionAssignment()


def _random_compact(spec):
    if spec.seed is None:
        raise GraphError("random_compact requires a seed")
    nv, beta = spec.vertices, spec.beta
    if nv < 2 or beta < 0:
        raise GraphError("random_compact needs >= 2 vertices and beta >= 0")
    lo, hi = spec.length_range
    if not (0 < lo <= hi):
        raise GraphError("invalid length range")
    rng = np.random.default_rng(spec.seed)

    # Wilson-style uniform spanning tree on the complete graph over nv vertices.
    in_tree = [True] + [False] * (nv - 1)
    parent = [-1] * nv
    for start in range(1, nv):
        if in_tree[start]:
            continue
        u = start
        while not in_tree[u]:
            nxt = int(rng.integers(0, nv - 1))
            if nxt >= u:
                nxt += 1
            parent[u] = nxt
            u = nxt
        u = start
        while not in_tree[u]:  # retrace the loop-erased walk
            in_tree[u] = True
            u = parent[u]

    tree_pairs = {tuple(sorted((u, parent[u]))) for u in range(1, nv) if parent[u] >= 0}
    tree_pairs = sorted(tree_pairs)
    candidates = [
        (u, v)
        for u in range(nv)
        for v in range(u + 1, nv)
        if (u, v) not in set(tree_pairs)
    ]
    if beta > len(candidates):
        raise GraphError(
            f"cannot add {beta} independent cycles on {nv} vertices without parallels"
        )
    extra_idx = sorted(rng.choice(len(candidates), size=beta, replace=False).tolist()) if beta else []
    pairs = list(tree_pairs) + [candidates[i] for i in extra_idx]
    lengths = rng.uniform(lo, hi, size=len(pairs))

    vertices = [f"v{i}" for i in range(nv)]
    edges = [
        EdgeRecord(f"e{k}", f"v{u}", f"v{v}", float(lengths[k]))
        for k, (u, v) in enumerate(pairs)
    ]
    return MetricGraph(vertices, edges), ConditionAssignment()


_BUILDERS = {
    "interval": _interval,
    "star": _star,
    "loop": _loop,
    "necklace": _necklace,
    "diagonal_comb": _diagonal_comb,
    "geometric_tree": _geometric_tree,
    "lasso": _lasso,
    "random_compact": _random_compact,
}
