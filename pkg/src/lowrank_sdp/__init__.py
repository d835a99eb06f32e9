"""Low-rank factorization solver for trace-constrained semidefinite programs.

The pieces compose bottom-up: `manifold` describes the feasible set of
factors, `costs` the objectives, `trust_region` minimizes a cost at a
fixed rank, `meta_solver` escalates the rank until a dual certificate
closes, and `applications` wraps the max-cut and sparse-PCA front ends.
"""

from .applications import (
    Graph,
    SparseComponent,
    SpcaInstance,
    f_evd,
    maxcut_bound,
    maxcut_round,
    spca_dspca,
    spca_homotopy,
    spca_spectral,
)
from .costs import DspcaCost, HomotopyCost, LinearCost, SpectralSpcaCost
from .errors import LowRankSdpError
from .manifold import (
    FactorPoint,
    elliptope,
    feasibility_gap,
    generic,
    project_horizontal,
    random_feasible,
    retract,
    spectahedron,
    validate_constraints,
)
from .meta_solver import (
    DualCertificate,
    MetaOptions,
    MetaResult,
    certificate,
    multipliers,
    numerical_rank,
    solve,
)
from .trust_region import TrOptions, minimize

__all__ = [
    "DspcaCost",
    "DualCertificate",
    "FactorPoint",
    "Graph",
    "HomotopyCost",
    "LinearCost",
    "LowRankSdpError",
    "MetaOptions",
    "MetaResult",
    "SparseComponent",
    "SpcaInstance",
    "SpectralSpcaCost",
    "TrOptions",
    "certificate",
    "elliptope",
    "f_evd",
    "feasibility_gap",
    "generic",
    "maxcut_bound",
    "maxcut_round",
    "minimize",
    "multipliers",
    "numerical_rank",
    "project_horizontal",
    "random_feasible",
    "retract",
    "solve",
    "spca_dspca",
    "spca_homotopy",
    "spca_spectral",
    "spectahedron",
    "validate_constraints",
]

__version__ = "0.1.0"
