"""Simulation and analysis of remote atomic-qubit entanglement via Bell tests."""

from .analysis import (
    BellResult,
    CorrelationEstimate,
    CorrelationFit,
    FringeFit,
    OptimalAngles,
    chsh_S,
    estimate_E,
    find_optimal_angles,
    fit_correlation,
    fit_fringe,
)
from .detection import (
    AnalyzerSetting,
    ClickDistribution,
    DetectorBank,
    analytic_correlation,
    coincidence_probability,
    outcome_distribution,
)
from .model import (
    ChannelParams,
    EffectiveTwoPhotonState,
    SingleExcitationWeights,
    SourceParams,
    StorageParams,
    average_storage_efficiency,
    derive_effective_state,
    larmor_phase,
    single_excitation_weights,
)
from .montecarlo import CoincidenceCounts, merge, run_point, run_symmetrized

__version__ = "0.1.0"
