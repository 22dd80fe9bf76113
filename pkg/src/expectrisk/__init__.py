"""Expectile-based risk measurement.

Static expectiles and their comparison with quantile-based risk
functionals, kernel expectile regression, nested expectiles of
discrete-time processes, and a risk-averse Hamilton-Jacobi-Bellman
finite-difference solver.
"""

from .distributions import (
    EmpiricalDistribution,
    LogNormal,
    Normal,
    RiskLevel,
    Uniform01,
)
from .errors import (
    ConvergenceError,
    NanEncounteredError,
    NumericalError,
    RateClampWarning,
    SingularSystemError,
)
from .expectiles import (
    expectile,
    expectile_analytic,
    expectile_loss,
    expectile_rows,
    expectile_series_lognormal,
    expectile_series_normal,
    pinball_loss,
)
from .hjb import (
    Grid,
    HjbProblem,
    HjbSolution,
    PolicySimulationSummary,
    hamiltonian,
    problem_from_json,
    simulate_policy,
    solution_to_csv,
    solve,
    solve_risk_neutral,
)
from .lattice import (
    DriftRow,
    ExplicitLayer,
    LatticeProcess,
    RescaledLevel,
    RiskRate,
    StencilLayer,
    build_random_walk_lattice,
    conditional_expectile,
    lattice_from_json,
    lattice_to_json,
    nested_expectile,
    rescaled_expectile,
    risk_generator_fd,
    verify_drift_convergence,
)
from .regression import (
    FitReport,
    GaussianKernel,
    KernelExpectileRegression,
    LaplaceKernel,
    PolynomialKernel,
    fit_expectile_weights,
    kernel_from_config,
    median_pairwise_bandwidth,
    regression_objective,
)
from .risk_measures import (
    ComparisonBoundsReport,
    Spectrum,
    average_value_at_risk,
    average_value_at_risk_threshold,
    avar_spectrum,
    check_comparison_bounds,
    enveloping_spectrum,
    flat_spectrum,
    kusuoka_expectile,
    spectral_risk,
    value_at_risk,
)

__version__ = "0.1.0"

__all__ = [
    "EmpiricalDistribution",
    "RiskLevel",
    "Uniform01",
    "Normal",
    "LogNormal",
    "expectile",
    "expectile_rows",
    "expectile_analytic",
    "expectile_loss",
    "pinball_loss",
    "expectile_series_normal",
    "expectile_series_lognormal",
    "value_at_risk",
    "average_value_at_risk",
    "average_value_at_risk_threshold",
    "Spectrum",
    "flat_spectrum",
    "avar_spectrum",
    "enveloping_spectrum",
    "spectral_risk",
    "kusuoka_expectile",
    "ComparisonBoundsReport",
    "check_comparison_bounds",
    "GaussianKernel",
    "LaplaceKernel",
    "PolynomialKernel",
    "kernel_from_config",
    "median_pairwise_bandwidth",
    "FitReport",
    "fit_expectile_weights",
    "regression_objective",
    "KernelExpectileRegression",
    "RescaledLevel",
    "rescaled_expectile",
    "conditional_expectile",
    "RiskRate",
    "StencilLayer",
    "ExplicitLayer",
    "LatticeProcess",
    "build_random_walk_lattice",
    "nested_expectile",
    "risk_generator_fd",
    "DriftRow",
    "verify_drift_convergence",
    "lattice_to_json",
    "lattice_from_json",
    "HjbProblem",
    "Grid",
    "HjbSolution",
    "hamiltonian",
    "solve",
    "solve_risk_neutral",
    "PolicySimulationSummary",
    "simulate_policy",
    "problem_from_json",
    "solution_to_csv",
    "NumericalError",
    "SingularSystemError",
    "ConvergenceError",
    "NanEncounteredError",
    "RateClampWarning",
]
