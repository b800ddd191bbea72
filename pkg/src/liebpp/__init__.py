"""Stochastic phase-space simulator for driven-dissipative Bose-Hubbard
lattices with Lieb-type geometries.

The package integrates the positive-P stochastic equations for ensembles of
independent trajectories, reduces them to occupations, second-order
correlations (equal-time and delayed) and momentum-frequency occupation
spectra, and cross-validates small systems against an exact density-matrix
solver in a truncated Fock basis. Closed-form optimal-antibunching
parameters and a weak-drive amplitude solver for the 3-site chain are
provided alongside a CLI harness with named scenario presets.
"""

from .lattice import (
    Lattice,
    Site,
    build_chain,
    build_lieb_2d,
    build_quasi1d_lieb,
    lattice_hash,
)
from .model import (
    DriveScheme,
    ModelParams,
    drive_single,
    drive_two_site,
    drive_with_background,
    site_detunings,
)
from .integrator import (
    DivergenceError,
    IntegrationConfig,
    TrajectoryBatch,
    drift,
    noise_amplitudes,
    run_ensemble,
)
from .analytic import (
    WeakDriveAmplitudes,
    optimal_detuning,
    optimal_hopping,
    optimality_residuals,
    solve_weak_drive_3site,
    weak_drive_g2,
    weak_drive_residuals,
)
from .observables import (
    MomentAccumulator,
    SpectrumAccumulator,
    SpectrumGrid,
    TauCurve,
    g2_tau,
    g2_zero,
    occupation,
    occupation_spectrum,
    oscillation_period,
    ridge_frequencies,
    single_particle_bands,
)
from .oracle import (
    CutoffError,
    FockBasis,
    SteadyStateResult,
    g2_tau_regression,
    steady_state,
)

__version__ = "0.1.0"

__all__ = [
    "Lattice",
    "Site",
    "build_chain",
    "build_quasi1d_lieb",
    "build_lieb_2d",
    "lattice_hash",
    "ModelParams",
    "DriveScheme",
    "drive_single",
    "drive_with_background",
    "drive_two_site",
    "site_detunings",
    "IntegrationConfig",
    "TrajectoryBatch",
    "DivergenceError",
    "drift",
    "noise_amplitudes",
    "run_ensemble",
    "optimal_detuning",
    "optimal_hopping",
    "optimality_residuals",
    "solve_weak_drive_3site",
    "weak_drive_g2",
    "weak_drive_residuals",
    "WeakDriveAmplitudes",
    "MomentAccumulator",
    "SpectrumAccumulator",
    "SpectrumGrid",
    "TauCurve",
    "occupation",
    "g2_zero",
    "g2_tau",
    "oscillation_period",
    "occupation_spectrum",
    "single_particle_bands",
    "ridge_frequencies",
    "FockBasis",
    "SteadyStateResult",
    "CutoffError",
    "steady_state",
    "g2_tau_regression",
    "__version__",
]
