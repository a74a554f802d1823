"""Desk-scale simulator for chirped-pulse rapid adiabatic passage
single-photon generation from a two-level emitter.

Subpackages: pulse synthesis and spectral shaping (:mod:`rapsim.pulses`),
dissipative two-level dynamics with phonon-assisted dressed-state
relaxation (:mod:`rapsim.dynamics`), photon-correlation simulation and
estimation (:mod:`rapsim.photonstats`), Voigt spectroscopy
(:mod:`rapsim.spectra`), figure-level sweeps (:mod:`rapsim.sweep`), and a
JSON-configured CLI (:mod:`rapsim.cli`).
"""

from .dynamics import (
    DressedFrame,
    IntegrationError,
    PhononParams,
    StateTrajectory,
    SystemParams,
    adiabaticity_parameter,
    bose_occupation,
    build_hamiltonian,
    dressed_frame,
    dressed_relaxation_rates,
    dressed_states,
    evolve,
    final_excited_population,
    jump_trajectory,
    phonon_spectral_density,
    radiative_rate_from_linewidth_ghz,
)
from .photonstats import (
    CoincidenceHistogram,
    G2Result,
    HOMResult,
    SourceModel,
    analyze_hom,
    correct_visibility,
    cz_process_fidelity,
    estimate_g2,
    hom_raw_visibility,
    simulate_hbt,
    simulate_hom,
)
from .pulses import (
    GridSpanError,
    PulseSpec,
    SampledField,
    StretcherGeometry,
    TimeGrid,
    apply_gdd,
    default_grid,
    field_energy,
    instantaneous_detuning,
    intensity_fwhm,
    make_transform_limited,
    pulse_area,
    synthesize,
    treacy_gdd,
)
from .spectra import Spectrum, VoigtFit, fit_voigt, synth_spectrum, voigt_fwhm, voigt_profile
from .sweep import ModulationSpec, ScanSpec, chirp_area_map, power_scan, robustness_trace

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
