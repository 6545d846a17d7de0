"""maxplus: exact and Monte-Carlo analysis of max-plus linear systems.

Deterministic spectral theory (eigenvalue, critical graph, cyclicity,
transients) over exact rationals, and stochastic stability analysis of
random matrix recursions x(n+1) = A(n) x(n): Lyapunov exponents, coupling
certificates, backward construction of stationary regimes, pattern search
over product words, and structural condition checks. Includes builders for
cyclic network and task-graph models and a JSON-first command line.
"""

__version__ = "0.1.0"

from .semiring import (
    EPS,
    EXACT,
    FLOAT,
    BudgetExceeded,
    ContractViolation,
    Matrix,
    MaxPlusError,
    Vector,
    mat_mul,
    mat_oplus,
    mat_power,
    mat_vec,
    oplus,
    otimes,
)
from .projective import (
    ProjVector,
    canonicalize,
    is_rank_one,
    proj_diameter,
    proj_dist,
    proj_norm,
)
from .graphs import (
    PrecedenceGraph,
    SccDecomposition,
    graph_cyclicity,
    graph_of,
    is_aperiodic,
    is_irreducible,
    scc_decompose,
)
from .spectral import (
    CriticalGraph,
    SpectralSummary,
    a_plus,
    classify,
    critical_graph,
    cyclicity,
    cyclicity_and_transient,
    eigenbasis,
    eigenvalue,
    first_rank_one_power,
    normalize,
    span_membership,
    weak_rank,
)
from .stochastic import (
    ConditionsReport,
    CouplingReport,
    CouplingSample,
    FiniteSupport,
    GeneratorDistribution,
    LoynesResult,
    LyapunovEstimate,
    OpenSystemReport,
    PatternReport,
    StabilityOptions,
    StabilityVerdict,
    TrajectoryRecord,
    backward_loynes,
    distribution_from_json,
    distribution_to_json,
    forward_coupling,
    lyapunov_estimate,
    open_system_analysis,
    pattern_search,
    register_generator,
    sample_sequence,
    simulate,
    stability_verdict,
    structural_conditions,
    word_probability,
    word_product,
)
from .models import (
    CjnSpec,
    JointServiceLaw,
    PerQueueServiceLaw,
    SubsetLaw,
    TaskGraphSpec,
    UniformServiceLaw,
    cjn_distribution,
    cjn_matrix,
    cjn_stability_condition,
    cjn_trajectory_columns,
    independent_uniform_diagonal,
    shared_uniform_diagonal,
    split_service_vector,
    taskgraph_distribution,
)
