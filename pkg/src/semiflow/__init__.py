"""Semigroups generated by finite matrices: resolvents, spectral projectors,
contour inversion, the decomposition ``T_t = P_t + sum_j e^{t z_j} Pi_j``
and numerical checks of the decay bounds for ``P_t``.
"""

from .exceptions import (
    ConfigError,
    ContourError,
    DomainError,
    ExtensionPoleError,
    FrequencyGuardWarning,
    LedgerError,
    ModelError,
    PoleError,
    RegularityError,
    SemiflowError,
    SeriesDivergenceError,
    StripBoundaryError,
    UnboundedSemigroupWarning,
)
from .models import GeneratorModel, NormPair, SemigroupEvaluator, build_model, evolve, op_norm
from .resolvent import (
    generator_identity_residual,
    graded_norm,
    neumann_extension,
    pres_extension,
    resolvent_direct,
    resolvent_identity_residual,
    resolvent_laplace,
)
from .spectral import (
    ContourSpec,
    SpectralDecomposition,
    bromwich_reconstruct,
    contour_integral,
    curved_remainder,
    decompose,
    eigenprojector,
    locate_poles,
    pole_order,
    riesz_projector,
    suggest_shift,
)
from .verification import (
    AssumptionParams,
    ConstantsLedger,
    DecayReport,
    c13_bound_check,
    compute_ledger,
    dolgopyat_scan,
    estimate_c1,
    estimate_c2,
    exponential_decay_check,
    laplace_tail_bound_check,
    oscillatory_bound_check,
    rapid_decay_check,
    rapid_scan,
    required_q,
)
from .estimator import SpectralDecomposer

__version__ = "0.1.0"
