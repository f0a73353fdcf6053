"""EPR toolkit for an optically spin-polarized S=1 defect (SiV0 in diamond).

Forward simulation of CW and pulsed EPR observables (resonance fields,
polarized line intensities, echo decays) and recovery of physical parameters
(relaxation coefficients, decay constants, polarization degree) from measured
or synthetic data.
"""

from .photodynamics import (
    LevelScheme,
    RateEdge,
    SchemeState,
    build_rate_matrix,
    polarization_vs_pump,
    preset_scheme,
    steady_state,
    time_evolve,
)
from .populations import (
    LevelPopulations,
    TransitionIntensities,
    polarization_degree,
    population_differences,
    populations_under_light,
    thermal_populations,
    unsaturated_dark_intensity,
)
from .relaxation import (
    RelaxationParams,
    T1Dataset,
    T1Point,
    fit_relaxation,
    linewidth_to_rate,
    relaxation_rate,
    t1_time,
)
from .sequences import (
    DecayCurve,
    fit_decay,
    simulate_echo_decay,
    simulate_inversion_recovery,
)
from .spectra import Lineshape, Spectrum, peak_to_peak_linewidth, synthesize_cw_spectrum
from .spincore import (
    FieldConfig,
    SpinSystem,
    ZfsModel,
    build_hamiltonian,
    resonance_fields,
    spin_matrices,
    transition_frequencies,
    zfs_at_temperature,
)

__version__ = "0.1.0"

__all__ = [
    "DecayCurve",
    "FieldConfig",
    "LevelPopulations",
    "LevelScheme",
    "Lineshape",
    "RateEdge",
    "RelaxationParams",
    "SchemeState",
    "SpinSystem",
    "Spectrum",
    "T1Dataset",
    "T1Point",
    "TransitionIntensities",
    "ZfsModel",
    "build_hamiltonian",
    "build_rate_matrix",
    "fit_decay",
    "fit_relaxation",
    "linewidth_to_rate",
    "peak_to_peak_linewidth",
    "polarization_degree",
    "polarization_vs_pump",
    "population_differences",
    "populations_under_light",
    "preset_scheme",
    "relaxation_rate",
    "resonance_fields",
    "simulate_echo_decay",
    "simulate_inversion_recovery",
    "spin_matrices",
    "steady_state",
    "synthesize_cw_spectrum",
    "t1_time",
    "thermal_populations",
    "time_evolve",
    "transition_frequencies",
    "unsaturated_dark_intensity",
    "zfs_at_temperature",
]
