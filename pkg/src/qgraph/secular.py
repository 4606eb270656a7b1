"""Exact eigenvalue oracle for compact metric graphs via the vertex-matching
(secular) matrix in the spectral parameter k, where lambda = k^2.

On every edge a trial eigenfunction a*cos(kx) + b*sin(kx) is matched at the
vertices: continuity rows plus one Kirchhoff row per standard vertex, or one
value row per edge end at a Dirichlet vertex.  k is an eigenvalue parameter
exactly when the 2|E| x 2|E| matching matrix is singular, so eigenvalues are
located as valleys of its smallest singular value (robust for multiple roots,
unlike determinant sign changes) and refined by bounded scalar minimization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .fem import Spectrum, cluster_groups
from .geometry import total_length
from .graph import ConditionAssignment, GraphError, MetricGraph

__all__ = ["SecularScanError", "SecularSystem", "secular_matrix", "eigs_by_scan"]

MAX_ORACLE_EDGES = 64
SINGULAR_TOL = 1e-8
REFINE_XTOL = 1e-12


class SecularScanError(RuntimeError):
    """The scan likely missed a root (Weyl-count cross-check failed)."""


@dataclass(frozen=True)
class SecularSystem:
    """Matching matrix at spectral parameter k; columns are (a_e, b_e) pairs."""

    k: float
    matrix: np.ndarray
    edge_order: tuple


def secular_matrix(g: MetricGraph, cond: ConditionAssignment, k: float) -> SecularSystem:
    if k <= 0:
        raise GraphError("secular matrix needs k > 0")
    if len(g.edges) > MAX_ORACLE_EDGES:
        raise GraphError(f"secular oracle restricted to <= {MAX_ORACLE_EDGES} edges")
    order = tuple(e.id for e in g.edges)
    col = {eid: 2 * i for i, eid in enumerate(order)}
    dirichlet = cond.effective_dirichlet()
    n = 2 * len(g.edges)
    rows = np.zeros((n, n))
    r = 0

    def value_coeffs(eid, end):
        e = g.edge(eid)
        if end == 0:
            return 1.0, 0.0
        return math.cos(k * e.length), math.sin(k * e.length)

    def outgoing_coeffs(eid, end):
        # normal derivative into the edge, divided by k for conditioning
        e = g.edge(eid)
        if end == 0:
            return 0.0, 1.0
        return math.sin(k * e.length), -math.cos(k * e.length)

    for v in g.vertices:
        ends = g.edge_ends_at(v)
        if v in dirichlet:
            for eid, end in ends:
                ca, cb = value_coeffs(eid, end)
                rows[r, col[eid]] += ca
                rows[r, col[eid] + 1] += cb
                r += 1
        else:
            for (e1, d1), (e2, d2) in zip(ends[:-1], ends[1:]):
                ca, cb = value_coeffs(e1, d1)
                rows[r, col[e1]] += ca
                rows[r, col[e1] + 1] += cb
                ca, cb = value_coeffs(e2, d2)
                rows[r, col[e2]] -= ca
                rows[r, col[e2] + 1] -= cb
                r += 1
            for eid, end in ends:
                ca, cb = outgoing_coeffs(eid, end)
                rows[r, col[eid]] += ca
                rows[r, col[eid] + 1] += cb
            r += 1
    assert r == n, "row count must equal 2|E|"
    return SecularSystem(k, rows, order)


def _smallest_singular(g, cond, k):
    return float(np.linalg.svd(secular_matrix(g, cond, k).matrix, compute_uv=False)[-1])


def _scan_roots(g, cond, k_lo, k_hi, step):
    grid = np.arange(k_lo, k_hi + step, step)
    vals = np.array([_smallest_singular(g, cond, float(k)) for k in grid])
    roots = []
    for i in range(1, len(grid) - 1):
        if vals[i] <= vals[i - 1] and vals[i] < vals[i + 1]:
            res = minimize_scalar(
                lambda k: _smallest_singular(g, cond, k),
                bounds=(float(grid[i - 1]), float(grid[i + 1])),
                method="bounded",
                options={"xatol": REFINE_XTOL},
            )
            k_star, s_star = float(res.x), float(res.fun)
            if s_star < SINGULAR_TOL:
                svals = np.linalg.svd(
                    secular_matrix(g, cond, k_star).matrix, compute_uv=False
                )
                mult = int(np.sum(svals < SINGULAR_TOL))
                roots.append((k_star, max(mult, 1), s_star))
    # merge refinements of the same root found from adjacent grid valleys
    roots.sort()
    merged = []
    for k_star, mult, s_star in roots:
        if merged and abs(k_star - merged[-1][0]) < 1e-7:
            prev = merged[-1]
            merged[-1] = (prev[0], max(prev[1], mult), min(prev[2], s_star))
        else:
            merged.append((k_star, mult, s_star))
    return merged


def eigs_by_scan(
    g: MetricGraph,
    cond: ConditionAssignment | None = None,
    count: int = 5,
    k_upper: float | None = None,
    step: float | None = None,
) -> Spectrum:
    """Locate the smallest ``count`` eigenvalues by scanning the smallest
    singular value of the matching matrix over k and refining its valleys.

    A Weyl-law cross-check (root count with multiplicity vs L*k/pi) guards
    against missed roots; a deficit beyond 2 triggers finer rescans and then
    an error.  For an empty Dirichlet set, lambda = 0 is prepended exactly.
    """
    cond = cond or ConditionAssignment()
    cond.validate(g)
    L = total_length(g)
    ell_max = max(e.length for e in g.edges)
    neumann = not cond.effective_dirichlet()
    want_positive = count - 1 if neumann else count

    if step is None:
        step = math.pi / (20.0 * ell_max)
    if k_upper is None:
        k_upper = math.pi * (want_positive + 0.5 * len(g.vertices) + 3) / L
    k_lo = 0.45 * math.pi / L  # no eigenvalue below pi/(2L) on any conditions

    roots: list = []
    for attempt in range(8):
        roots = _scan_roots(g, cond, k_lo, k_upper, step)
        found = sum(m for _, m, _ in roots)
        weyl = L * k_upper / math.pi
        if weyl - found > 2:
            step /= 2  # suspected missed root: refine before giving up
            if attempt >= 3:
                raise SecularScanError(
                    f"scan found {found} roots below k={k_upper:.4g} but the "
                    f"Weyl estimate is {weyl:.2f}"
                )
            continue
        if found >= want_positive:
            break
        k_upper *= 1.4
    else:
        raise SecularScanError(f"could not locate {count} eigenvalues")

    lams, tols, mults, resid = [], [], [], []
    if neumann:
        lams.append(0.0)
        tols.append(1e-14)
        mults.append(1)
        resid.append(0.0)
    for k_star, mult, s_star in roots:
        lam = k_star**2
        for _ in range(mult):
            lams.append(lam)
            tols.append(2.0 * k_star * 1e-10 + 1e-13)
            mults.append(mult)
            resid.append(s_star)
    lams = np.array(lams[:count])
    return Spectrum(
        eigenvalues=lams,
        groups=cluster_groups(lams),
        method="secular",
        mesh_h=0.0,
        residuals=np.array(resid[:count]),
        tol=np.array(tols[:count]),
    )
