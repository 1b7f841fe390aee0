"""Heat flow, generalized eigenfunctions and Liouville audits on weighted graphs."""

__version__ = "0.1.0"

from .errors import *  # noqa: E402,F401,F403
from .graph import (  # noqa: E402
    BallDecomposition,
    GeometryCertificate,
    WeightedGraph,
    certify_bounded_geometry,
    decompose_balls,
    generate_family,
    load_graph,
    save_graph,
)
from .laplacian import apply_laplacian, assemble_dirichlet, check_maximum_principle, is_subharmonic  # noqa: E402
from .spectrum import (  # noqa: E402
    SpectrumEstimate,
    bottom_of_spectrum_finite,
    dirichlet_bottom_eigenvalue,
    estimate_lambda1_exhaustion,
)
from .eigenfunctions import (  # noqa: E402
    Eigenfunction,
    GrowthProfile,
    check_growth_bounds,
    construct_positive_eigenfunction,
    growth_profile,
    verify_zero_propagation,
)
from .heat import (  # noqa: E402
    AncientSolution,
    HeatState,
    SpectralMeasure,
    audit_harnack,
    heat_residual,
    solve_heat_spectral,
    step_heat_implicit,
    synthesize_ancient,
)
from .liouville import classify_growth, dichotomy_sweep, render_verdict  # noqa: E402
