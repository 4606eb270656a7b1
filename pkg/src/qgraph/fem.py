"""Piecewise-linear finite elements for the Laplacian quadratic form on a
metric graph, and the symmetric generalized eigensolver built on them.

Continuity at vertices is encoded by sharing the endpoint degree of freedom
across all incident edges; the Kirchhoff condition is natural for the energy
form and needs no extra rows.  Dirichlet vertices (including truncation ends
tagged dirichlet) are eliminated.  Element matrices on a subinterval of
width h are the textbook pair (1/h)[[1,-1],[-1,1]] and (h/6)[[2,1],[1,2]].

Eigenvalue accuracy is O(h^2); ``richardson`` combines solves at h and h/2
into an O(h^4)-accurate spectrum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .geometry import total_length
from .graph import ConditionAssignment, GraphError, MetricGraph
from .rearrange import PLFunction

__all__ = [
    "SolverError",
    "FemMesh",
    "FemSystem",
    "Spectrum",
    "mesh",
    "assemble",
    "mass_on_edges",
    "solve_eigs",
    "richardson",
    "solve_extrapolated",
    "rayleigh",
    "tail_indicator",
]

DENSE_THRESHOLD = 3000
CLUSTER_RTOL = 1e-6
RESIDUAL_RTOL = 1e-9


class SolverError(RuntimeError):
    """Eigen-solve failed (non-convergence, indefinite mass, bad inputs)."""


class FemMesh:
    """Subdivision of every edge into uniform elements with a global DOF map."""

    __slots__ = (
        "graph",
        "cond",
        "counts",
        "h_target",
        "capped",
        "vertex_dof",
        "_edge_start",
        "n_dofs",
        "eliminated",
        "free",
        "_free_index",
    )

    def __init__(self, graph: MetricGraph, cond: ConditionAssignment, counts: dict, h_target: float, capped: bool):
        self.graph = graph
        self.cond = cond
        self.counts = counts
        self.h_target = h_target
        self.capped = capped
        self.vertex_dof = {v: i for i, v in enumerate(graph.vertices)}
        self._edge_start = {}
        next_dof = len(graph.vertices)
        for e in graph.edges:
            self._edge_start[e.id] = next_dof
            next_dof += counts[e.id] - 1
        self.n_dofs = next_dof
        dirichlet = cond.effective_dirichlet()
        self.eliminated = frozenset(self.vertex_dof[v] for v in dirichlet)
        self.free = np.array(
            [d for d in range(self.n_dofs) if d not in self.eliminated], dtype=int
        )
        self._free_index = np.full(self.n_dofs, -1, dtype=int)
        self._free_index[self.free] = np.arange(len(self.free))

    @property
    def n_free(self) -> int:
        return len(self.free)

    @property
    def mesh_h(self) -> float:
        return max(e.length / self.counts[e.id] for e in self.graph.edges)

    def local_h(self, edge_id: str) -> float:
        return self.graph.edge(edge_id).length / self.counts[edge_id]

    def edge_dofs(self, edge_id: str) -> np.ndarray:
        e = self.graph.edge(edge_id)
        n = self.counts[edge_id]
        start = self._edge_start[edge_id]
        dofs = np.empty(n + 1, dtype=int)
        dofs[0] = self.vertex_dof[e.u]
        dofs[-1] = self.vertex_dof[e.v]
        dofs[1:-1] = np.arange(start, start + n - 1)
        return dofs

    def refined(self) -> "FemMesh":
        """Mesh with every element split in two (for Richardson pairs)."""
        return FemMesh(
            self.graph,
            self.cond,
            {eid: 2 * c for eid, c in self.counts.items()},
            self.h_target / 2,
            self.capped,
        )

    def interpolate(self, fn: Callable[[str, float], float]) -> np.ndarray:
        """Nodal interpolation of ``fn(edge_id, offset)`` into a full DOF vector."""
        u = np.zeros(self.n_dofs)
        for e in self.graph.edges:
            xs = np.linspace(0.0, e.length, self.counts[e.id] + 1)
            u[self.edge_dofs(e.id)] = [fn(e.id, float(x)) for x in xs]
        return u

    def restrict(self, u_full: np.ndarray) -> np.ndarray:
        return u_full[self.free]

    def embed(self, u_free: np.ndarray) -> np.ndarray:
        u = np.zeros(self.n_dofs)
        u[self.free] = u_free
        return u

    def to_plfunction(self, u_full: np.ndarray) -> PLFunction:
        data = {}
        for e in self.graph.edges:
            xs = np.linspace(0.0, e.length, self.counts[e.id] + 1)
            data[e.id] = (xs, u_full[self.edge_dofs(e.id)])
        return PLFunction(self.graph, data)


def mesh(
    g: MetricGraph,
    cond: ConditionAssignment | None = None,
    h_target: float = 5e-3,
    dof_cap: int | None = None,
) -> FemMesh:
    """Per-edge counts max(2, ceil(length/h_target)); proportional coarsening
    when the DOF cap binds (flagged on the mesh)."""
    cond = cond or ConditionAssignment()
    cond.validate(g)
    if h_target <= 0:
        raise GraphError("h_target must be positive")
    floor_dofs = len(g.vertices) + len(g.edges)  # two elements per edge minimum
    if dof_cap is not None and dof_cap < floor_dofs:
        raise GraphError(f"dof_cap {dof_cap} below the minimal mesh size {floor_dofs}")

    scale = 1.0
    capped = False
    while True:
        counts = {
            e.id: max(2, int(math.ceil(e.length / (h_target * scale)))) for e in g.edges
        }
        n_dofs = len(g.vertices) + sum(c - 1 for c in counts.values())
        if dof_cap is None or n_dofs <= dof_cap:
            break
        capped = True
        scale *= 1.25
    return FemMesh(g, cond, counts, h_target, capped)


@dataclass(frozen=True)
class FemSystem:
    """Free-DOF stiffness/mass pair for K u = lambda M u."""

    K: sp.csr_matrix
    M: sp.csr_matrix
    mesh: FemMesh


def _assemble_edges(m: FemMesh, edge_ids: Iterable[str], stiffness: bool):
    rows, cols, kv, mv = [], [], [], []
    for eid in edge_ids:
        dofs = m.edge_dofs(eid)
        h = m.local_h(eid)
        a, b = dofs[:-1], dofs[1:]
        rows.extend((a, a, b, b))
        cols.extend((a, b, a, b))
        n = len(a)
        if stiffness:
            kv.extend(
                (np.full(n, 1 / h), np.full(n, -1 / h), np.full(n, -1 / h), np.full(n, 1 / h))
            )
        mv.extend(
            (np.full(n, h / 3), np.full(n, h / 6), np.full(n, h / 6), np.full(n, h / 3))
        )
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    shape = (m.n_dofs, m.n_dofs)
    M = sp.coo_matrix((np.concatenate(mv), (rows, cols)), shape=shape).tocsr()
    K = None
    if stiffness:
        K = sp.coo_matrix((np.concatenate(kv), (rows, cols)), shape=shape).tocsr()
    return K, M


def assemble(m: FemMesh) -> FemSystem:
    K, M = _assemble_edges(m, [e.id for e in m.graph.edges], stiffness=True)
    free = m.free
    return FemSystem(K[free][:, free].tocsr(), M[free][:, free].tocsr(), m)


def mass_on_edges(m: FemMesh, edge_ids: Iterable[str]) -> sp.csr_matrix:
    """Mass matrix of the restriction to a subset of edges, on free DOFs."""
    ids = list(edge_ids)
    if not ids:
        return sp.csr_matrix((m.n_free, m.n_free))
    _, M = _assemble_edges(m, ids, stiffness=False)
    free = m.free
    return M[free][:, free].tocsr()


@dataclass(frozen=True)
class Spectrum:
    """Ordered eigenvalues with multiplicity grouping and solver metadata.

    ``tol`` is a conservative per-eigenvalue accuracy estimate; ``vectors``
    (when present) are M-orthonormal eigenvectors on the full DOF set.
    """

    eigenvalues: np.ndarray
    groups: tuple
    method: str
    mesh_h: float
    residuals: np.ndarray
    tol: np.ndarray
    vectors: np.ndarray | None = None
    mesh: FemMesh | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.eigenvalues)

    def multiplicity(self, index: int) -> int:
        for grp in self.groups:
            if index in grp:
                return len(grp)
        raise IndexError(index)

    def eigenfunction(self, index: int) -> PLFunction:
        if self.vectors is None or self.mesh is None:
            raise SolverError("this spectrum carries no eigenvectors")
        return self.mesh.to_plfunction(self.vectors[:, index])


def cluster_groups(values: Sequence[float], rtol: float = CLUSTER_RTOL) -> tuple:
    groups, current = [], [0]
    for i in range(1, len(values)):
        scale = max(abs(values[i]), abs(values[i - 1]), 1e-12)
        if values[i] - values[i - 1] <= rtol * scale:
            current.append(i)
        else:
            groups.append(tuple(current))
            current = [i]
    if current:
        groups.append(tuple(current))
    return tuple(groups)


def _residuals(K, M, w, V):
    res = np.zeros(len(w))
    for i, lam in enumerate(w):
        u = V[:, i]
        ku = K @ u
        num = np.linalg.norm(ku - lam * (M @ u))
        den = np.linalg.norm(ku)
        res[i] = 0.0 if den == 0 else num / den
    return res


def solve_eigs(
    system: FemSystem,
    count: int,
    *,
    seed: int = 0,
    dense_threshold: int = DENSE_THRESHOLD,
) -> Spectrum:
    """The ``count`` smallest eigenpairs of K u = lambda M u, M-orthonormal.

    Dense reduction below ``dense_threshold`` free DOFs, deterministic
    shift-inverted Lanczos above it.  When there is no Dirichlet DOF the zero
    eigenvalue is reported exactly 0 with the constant eigenvector.
    """
    K, M, m = system.K, system.M, system.mesh
    n = K.shape[0]
    if count < 1 or count > n:
        raise SolverError(f"cannot compute {count} eigenpairs of a {n}-DOF system")

    if n <= dense_threshold:
        w, V = scipy.linalg.eigh(
            K.toarray(), M.toarray(), subset_by_index=(0, count - 1)
        )
    else:
        L = total_length(m.graph)
        sigma = -max(1e-3, (math.pi / L) ** 2)
        v0 = np.random.default_rng(seed).standard_normal(n)
        try:
            w, V = eigsh(K, k=count, M=M, sigma=sigma, which="LM", v0=v0)
        except ArpackNoConvergence as exc:
            raise SolverError(f"eigensolver did not converge: {exc}") from exc
        order = np.argsort(w)
        w, V = w[order], V[:, order]

    zero_mode = not m.eliminated
    if zero_mode:
        # zero mode of the Neumann form: exactly the M-normalized constant
        ones = np.ones(n)
        w[0] = 0.0
        V[:, 0] = ones / math.sqrt(float(ones @ (M @ ones)))

    res = _residuals(K, M, w, V)
    if zero_mode:
        res[0] = 0.0
    bad = [i for i in range(len(w)) if w[i] > 1e-8 and res[i] > RESIDUAL_RTOL]
    if bad:
        raise SolverError(f"residual check failed for eigenvalue indices {bad}")

    h = m.mesh_h
    tol = np.maximum(np.abs(w) * (np.abs(w) * h * h / 10.0 + 1e-12), 1e-12)
    full_V = np.zeros((m.n_dofs, len(w)))
    full_V[m.free, :] = V
    return Spectrum(
        eigenvalues=w,
        groups=cluster_groups(w),
        method="fem",
        mesh_h=h,
        residuals=res,
        tol=tol,
        vectors=full_V,
        mesh=m,
    )


def richardson(spec_h: Spectrum, spec_h2: Spectrum) -> Spectrum:
    """Eliminate the O(h^2) eigenvalue error from a (h, h/2) solve pair."""
    if len(spec_h) != len(spec_h2):
        raise SolverError("extrapolation needs matching eigenvalue counts")
    lam = (4.0 * spec_h2.eigenvalues - spec_h.eigenvalues) / 3.0
    lam = np.maximum(lam, 0.0)
    diff = np.abs(spec_h.eigenvalues - spec_h2.eigenvalues)
    scale = np.maximum(np.abs(spec_h2.eigenvalues), 1e-12)
    tol = np.maximum((diff / scale) ** 2 * scale * 4.0, 1e-10 * np.maximum(scale, 1.0))
    groups = cluster_groups(lam)
    if tuple(map(len, groups)) != tuple(map(len, spec_h2.groups)):
        # extrapolation perturbed a cluster; keep per-index values, flag via tol
        tol = np.maximum(tol, CLUSTER_RTOL * scale)
    return Spectrum(
        eigenvalues=lam,
        groups=groups,
        method="fem-extrapolated",
        mesh_h=spec_h2.mesh_h,
        residuals=spec_h2.residuals,
        tol=tol,
        vectors=spec_h2.vectors,
        mesh=spec_h2.mesh,
    )


def solve_extrapolated(
    g: MetricGraph,
    cond: ConditionAssignment | None = None,
    count: int = 5,
    h_target: float = 5e-3,
    dof_cap: int | None = None,
    seed: int = 0,
) -> Spectrum:
    """Solve on a mesh at ``h_target`` and its uniform refinement, extrapolate."""
    coarse_cap = None if dof_cap is None else max(dof_cap // 2, 1)
    m = mesh(g, cond, h_target, coarse_cap)
    s1 = solve_eigs(assemble(m), count, seed=seed)
    s2 = solve_eigs(assemble(m.refined()), count, seed=seed)
    return richardson(s1, s2)


def rayleigh(u_free: np.ndarray, system: FemSystem) -> float:
    """Energy quotient (u'Ku)/(u'Mu) of a mesh function on free DOFs."""
    u = np.asarray(u_free, dtype=float)
    denom = float(u @ (system.M @ u))
    if denom <= 0:
        raise SolverError("rayleigh quotient of the zero function")
    return float(u @ (system.K @ u)) / denom


def tail_indicator(
    g: MetricGraph,
    core_edges: Iterable[str],
    cond: ConditionAssignment | None = None,
    h_target: float = 1e-2,
    dof_cap: int | None = None,
    seed: int = 0,
) -> float:
    """Largest L2 mass outside the core over the discrete H1 unit ball.

    This is the top eigenvalue of M_tail u = sigma (K + M) u, in [0, 1];
    small values certify that unit-energy functions cannot hide mass in the
    tail, the computable form of the compact-embedding criterion.
    """
    core = set(core_edges)
    all_ids = {e.id for e in g.edges}
    if not core <= all_ids:
        raise GraphError("core edges must belong to the graph")
    tail = sorted(all_ids - core)
    if not tail:
        return 0.0
    m = mesh(g, cond, h_target, dof_cap)
    system = assemble(m)
    m_tail = mass_on_edges(m, tail)
    pencil = (system.K + system.M).tocsc()
    n = pencil.shape[0]
    if n <= DENSE_THRESHOLD:
        w = scipy.linalg.eigh(
            m_tail.toarray(), pencil.toarray(), subset_by_index=(n - 1, n - 1),
            eigvals_only=True,
        )
        sigma = float(w[-1])
    else:
        v0 = np.random.default_rng(seed).standard_normal(n)
        try:
            w = eigsh(
                m_tail, k=1, M=pencil, which="LA", v0=v0, tol=1e-10,
                return_eigenvectors=False,
            )
        except ArpackNoConvergence as exc:
            raise SolverError(f"tail indicator solve did not converge: {exc}") from exc
        sigma = float(w[0])
    return min(max(sigma, 0.0), 1.0)
