"""Exact readout statistics for binary optical memory cells with random transmittance."""

from .capacity import CapacityResult, ConcavityReport, check_concavity, chi_classical, chi_coherent
from .counting import (
    INFINITE,
    CountDistribution,
    JointCounts,
    ProbeParams,
    binomial_mixture_band,
    binomial_thin_log_pmf,
    joint_tmsv_counts,
    multimode_thermal_log_pmf,
    photon_number_distribution,
    poisson_log_pmf,
)
from .dists import (
    CellModel,
    DiscreteDistribution,
    TransmittanceSpec,
    bayes_error_floor,
    discretize,
    expect,
)
from .errors import (
    BudgetExceededError,
    ConfigError,
    ConvergenceError,
    MassDeficitError,
    NotPSDError,
    ReadoutError,
)
from .infotheory import (
    GramMixture,
    binary_entropy,
    coherent_gram,
    info_from_perr,
    mixture_entropy,
    mixture_spectrum,
    trace_power,
)
from .strategies import (
    Benchmark,
    Strategy,
    StrategyResult,
    classical_hb,
    classical_mv,
    classical_pc,
    helstrom_pair_error,
    quantum_gain,
    quantum_pc,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
