"""Simulation toolkit for log-determinant fluctuations of random Jacobi
matrices.

The package is organized bottom up: ``ensemble`` samples tridiagonal
matrices, ``charpoly`` runs the normalized characteristic polynomial
recursion in log scale, ``scalar_regime`` and ``oscillatory`` provide the
regime diagnostics, ``stats`` is the Monte Carlo and spectral harness,
and ``cli`` is the command line front end.
"""

from .charpoly import (
    DEFAULT_KAPPA,
    CriticalIndices,
    RecursionTrace,
    alpha_sequence,
    critical_indices,
    evolve,
    log_cn_asymptotic,
    log_cn_exact,
    phi_exact,
    transfer_matrices,
    w_statistic,
)
from .ensemble import EnsembleSpec, JacobiMatrix, Seed, sample, sample_gbe
from .errors import (
    DegenerateSpecError,
    DiagnosticUnavailableError,
    DomainError,
    JacobilogError,
    NumericError,
    RegimeError,
    ScheduleError,
    SingularBasisError,
)
from .oscillatory import (
    BlockSchedule,
    BlockTrace,
    RotationData,
    YVector,
    angle_sum,
    block_schedule,
    blocks,
    change_basis,
    q_basis,
    rotation,
    rotation_data,
    rotation_matrix,
    run_blocks,
    transition_stat,
)
from .scalar_regime import (
    LinearizedTrace,
    ScalarCoefficients,
    ScalarReport,
    linearize,
    linearized_Delta,
    linearized_delta,
    linearized_delta_closed,
    scalar_coefficients,
    scalar_report,
)
from .stats import (
    CltReport,
    EsdReport,
    esd_report,
    ks_test,
    levy_q,
    mc_clt,
    norm_cdf,
    semicircle_cdf,
    sturm_count,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_KAPPA",
    "CriticalIndices",
    "RecursionTrace",
    "alpha_sequence",
    "critical_indices",
    "evolve",
    "log_cn_asymptotic",
    "log_cn_exact",
    "phi_exact",
    "transfer_matrices",
    "w_statistic",
    "EnsembleSpec",
    "JacobiMatrix",
    "Seed",
    "sample",
    "sample_gbe",
    "DegenerateSpecError",
    "DiagnosticUnavailableError",
    "DomainError",
    "JacobilogError",
    "NumericError",
    "RegimeError",
    "ScheduleError",
    "SingularBasisError",
    "BlockSchedule",
    "BlockTrace",
    "RotationData",
    "YVector",
    "angle_sum",
    "block_schedule",
    "blocks",
    "change_basis",
    "q_basis",
    "rotation",
    "rotation_data",
    "rotation_matrix",
    "run_blocks",
    "transition_stat",
    "LinearizedTrace",
    "ScalarCoefficients",
    "ScalarReport",
    "linearize",
    "linearized_Delta",
    "linearized_delta",
    "linearized_delta_closed",
    "scalar_coefficients",
    "scalar_report",
    "CltReport",
    "EsdReport",
    "esd_report",
    "ks_test",
    "levy_q",
    "mc_clt",
    "norm_cdf",
    "semicircle_cdf",
    "sturm_count",
    "__version__",
]
