"""Numerical laboratory for the effective conductivity of dilute random
sphere composites: point-process sampling, microstructure diagnostics,
FFT corrector solves, and the dilute-expansion error experiment."""

from .phases import PhaseModel
from .point_process import (PointSample, ProcessSpec, TorusSpec,
                            analytic_lambda2, sample_jittered_lattice,
                            sample_matern2, sample_poisson)
from .microstructure import (GridField, InclusionSet, cluster_decomposition,
                             estimate_lambda2, geometry_report, min_separation,
                             rasterize, rho_separations, volume_fraction)
from .single_inclusion import (cm_prediction, dipole_K, hatA2_isotropic,
                               hatA2_numeric, psi_gradient)
from .corrector_fft import (CorrectorSolution, SolverConfig, effective_tensor,
                            effective_tensor_symmetrized,
                            inclusion_flux_average, solve_corrector)
from .dilute_experiment import (DiluteSweepReport, SweepConfig, cm_gap_table,
                                fit_error_scaling, run_sweep)

__version__ = "0.1.0"

__all__ = [
    "PhaseModel", "PointSample", "ProcessSpec", "TorusSpec",
    "analytic_lambda2", "sample_jittered_lattice", "sample_matern2",
    "sample_poisson", "GridField", "InclusionSet", "cluster_decomposition",
    "estimate_lambda2", "geometry_report", "min_separation", "rasterize",
    "rho_separations", "volume_fraction", "cm_prediction", "dipole_K",
    "hatA2_isotropic", "hatA2_numeric", "psi_gradient", "CorrectorSolution",
    "SolverConfig", "effective_tensor", "effective_tensor_symmetrized",
    "inclusion_flux_average",
    "solve_corrector", "DiluteSweepReport", "SweepConfig", "cm_gap_table",
    "fit_error_scaling", "run_sweep",
]
