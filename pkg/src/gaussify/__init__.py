"""gaussify: iterative beam-splitter Gaussification of phase-insensitive
optical states, plus a virtual homodyne-detection and photon-number
tomography pipeline.

Quadrature convention, everywhere: x = (a + a+)/sqrt(2), vacuum variance
1/2.
"""

from ._kernels import BACKEND as kernel_backend
from .errors import ReconstructionError, VanishingSuccessError
from .homodyne import (
    MomentEstimates,
    QuadratureBatch,
    binned_distance_to_gaussian,
    bootstrap_moment_errors,
    bootstrap_std,
    estimate_n_moment,
    estimate_variance_and_kurtosis,
    estimate_x_moment,
    load_batch,
    sample_homodyne,
    save_batch,
)
from .interference import (
    BsTransitionTable,
    DiagonalPovm,
    build_bs_table,
    identity_povm,
    make_nonclick_povm,
    merge,
    merge_deterministic,
    vacuum_projector,
)
from .protocol import (
    AsymptotePrediction,
    IterationRecord,
    IterationTrace,
    ProtocolConfig,
    ehd_reduction_factor,
    predict_asymptote,
    predict_asymptote_via_covariance,
    run_protocol,
    success_bounds,
    total_success_probability,
)
from .states import (
    PhotonDistribution,
    apply_loss,
    excess_kurtosis,
    fidelity_to_thermal,
    make_custom,
    make_poisson,
    make_thermal,
    photon_moments,
    quadrature_moment,
    quadrature_pdf,
    statistical_distance_to_gaussian,
)
from .tomography import (
    MonteCarloErrors,
    ReconstructionResult,
    ResponseMatrix,
    build_response,
    derive_seed,
    monte_carlo_errors,
    reconstruct_maxlik,
)

__version__ = "0.1.0"

__all__ = [
    "AsymptotePrediction",
    "BsTransitionTable",
    "DiagonalPovm",
    "IterationRecord",
    "IterationTrace",
    "MomentEstimates",
    "MonteCarloErrors",
    "PhotonDistribution",
    "ProtocolConfig",
    "QuadratureBatch",
    "ReconstructionError",
    "ReconstructionResult",
    "ResponseMatrix",
    "VanishingSuccessError",
    "apply_loss",
    "binned_distance_to_gaussian",
    "bootstrap_moment_errors",
    "bootstrap_std",
    "build_bs_table",
    "build_response",
    "derive_seed",
    "ehd_reduction_factor",
    "estimate_n_moment",
    "estimate_variance_and_kurtosis",
    "estimate_x_moment",
    "excess_kurtosis",
    "fidelity_to_thermal",
    "identity_povm",
    "kernel_backend",
    "load_batch",
    "make_custom",
    "make_nonclick_povm",
    "make_poisson",
    "make_thermal",
    "merge",
    "merge_deterministic",
    "monte_carlo_errors",
    "photon_moments",
    "predict_asymptote",
    "predict_asymptote_via_covariance",
    "quadrature_moment",
    "quadrature_pdf",
    "reconstruct_maxlik",
    "run_protocol",
    "sample_homodyne",
    "save_batch",
    "statistical_distance_to_gaussian",
    "success_bounds",
    "total_success_probability",
    "vacuum_projector",
]
