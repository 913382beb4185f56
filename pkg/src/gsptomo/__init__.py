"""Gaussian-probe simulation and parameter reconstruction for time-local
open-system dynamics with shape-preserving Gaussian noise."""

__version__ = "0.1.0"

from .benchmark import (
    BenchmarkTips,
    LindbladReport,
    benchmark_delta_coeff,
    benchmark_hamiltonian,
    benchmark_lambda,
    benchmark_mec_model,
    lambda_integral_closed_form,
    lindblad_diagnostic,
    stationary_delta,
    stationary_lambda,
)
from .core import (
    CumulantState,
    HamiltonianParams,
    LindbladCoefficients,
    MecModel,
    PhysicalCumulants,
    build_diffusion_vector,
    build_M,
    build_R,
    mecs_from_lindblad,
)
from .dynamics import (
    Propagators,
    Trajectory,
    evolve,
    lambda_integral_from_measurement,
    make_propagators,
    second_cumulant_integral_relation,
    to_rotating_first,
    trajectory_csv,
)
from .reconstruct import (
    DEFAULT_PROBE,
    AlphaOmegaResult,
    MeanMotionSample,
    MeasurementKind,
    MeasurementRecord,
    MeasurementSchedule,
    ReconstructionReport,
    differential_solve_alpha_omegac,
    differential_solve_alpha_omegac_from_rates,
    differential_solve_generic,
    differential_solve_temperature,
    finite_difference,
    integral_solve_alpha_omegac,
    integral_solve_temperature,
    integral_solve_temperature_rotating,
    run_full_reconstruction,
    temperature_bracket,
)
from .tomography import (
    LINE_DIAG,
    LINE_P,
    LINE_Q,
    PointBudget,
    TomogramLine,
    TomogramPoint,
    radon_gaussian,
    reconstruct_cumulants,
    recover_covariance,
    recover_mean_and_variance,
    sample_tomogram,
    wigner_gaussian,
)
