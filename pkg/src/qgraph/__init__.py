"""Laplacian spectra on compact and truncated metric graphs.

Core data model (graphs, conditions, families), exact and finite-element
eigensolvers, geometric functionals, rearrangement identities, compact
exhaustions, and a harness verifying eigenvalue inequalities against
computed spectra.
"""

from .families import FamilySpec, family_length, make_family
from .fem import (
    FemMesh,
    FemSystem,
    Spectrum,
    assemble,
    mesh,
    rayleigh,
    richardson,
    solve_eigs,
    solve_extrapolated,
    tail_indicator,
)
from .geometry import (
    GeometryReport,
    GraphPoint,
    annulus_volumes,
    betti_number,
    cheeger_exact_small,
    cheeger_sweep,
    diameter,
    geometry_report,
    inradius,
    point_distance,
    total_length,
)
from .graph import (
    ConditionAssignment,
    EdgeRecord,
    GraphError,
    MetricGraph,
    attach_pendant,
    build_from_json,
    cut_vertex,
    cut_vertex_parts,
    glue_vertices,
    insert_dummy,
    remove_dummy,
    to_json,
)
from .rearrange import (
    PLFunction,
    check_cavalieri,
    check_coarea,
    check_polya,
    level_data,
    rearrange,
)
from .secular import eigs_by_scan, secular_matrix

__version__ = "0.1.0"
